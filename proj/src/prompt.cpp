#include "fame/prompt.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "fame/error.hpp"
#include "fame/rng.hpp"

namespace fame {

namespace {

constexpr std::uint64_t kEosBasisSalt = 0x454f535f42415345ULL;  // "EOS_BASE"

std::uint64_t mix_seed(std::uint64_t encoder_seed, std::uint64_t token_hash, std::uint64_t position) {
    std::uint64_t buf[3] = {encoder_seed, token_hash, position};
    return fnv1a64(buf, sizeof(buf));
}

std::vector<double> normalized(std::vector<double> v) {
    const double n = l2_norm(v);
    if (n < 1e-12) return std::vector<double>(v.size(), 0.0);
    for (double& x : v) x /= n;
    return v;
}


}  // namespace

std::vector<double> encoder_eos_basis(std::size_t dim, std::uint64_t encoder_seed) {
    SeededRng rng(mix_seed(encoder_seed, kEosBasisSalt, 0));
    std::vector<double> v(dim);
    for (double& x : v) x = rng.next_normal();
    return v;
}

namespace {

std::vector<double> pooled_eos(const std::vector<std::vector<double>>& content_rows,
                               std::size_t dim, std::uint64_t encoder_seed) {
    std::vector<double> mean(dim, 0.0);
    for (const auto& r : content_rows)
        for (std::size_t i = 0; i < dim; ++i) mean[i] += r[i];
    if (!content_rows.empty())
        for (double& x : mean) x /= static_cast<double>(content_rows.size());
    std::vector<double> eos = normalized(mean);
    const std::vector<double> basis = encoder_eos_basis(dim, encoder_seed);
    for (std::size_t i = 0; i < dim; ++i) eos[i] += basis[i];
    return normalized(eos);
}

}  // namespace

PromptTokens tokenize(const std::string& text) {
    PromptTokens out;
    std::istringstream ss(text);
    std::string tok;
    while (ss >> tok) {
        for (char& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        out.tokens.push_back(tok);
    }
    out.tokens.push_back("<eos>");
    return out;
}

std::vector<double> EmbeddingMatrix::row(std::size_t r) const {
    std::vector<double> out(dim());
    for (std::size_t c = 0; c < dim(); ++c) out[c] = values.at(r, c);
    return out;
}

void EmbeddingMatrix::set_row(std::size_t r, const std::vector<double>& v) {
    for (std::size_t c = 0; c < dim(); ++c) values.at(r, c) = v[c];
}

EmbeddingMatrix encode(const PromptTokens& p, std::size_t dim, std::uint64_t encoder_seed) {
    if (p.content_tokens() == 0) {
        throw Error(ErrorKind::config, "encode: empty prompt");
    }
    if (dim < 8) {
        throw Error(ErrorKind::config, "encode: embedding dim must be >= 8");
    }
    const std::size_t L = p.tokens.size();
    EmbeddingMatrix e{Tensor({L, dim}), L - 1};
    std::vector<std::vector<double>> content_rows;
    content_rows.reserve(L - 1);
    for (std::size_t k = 0; k + 1 < L; ++k) {
        SeededRng rng(mix_seed(encoder_seed, fnv1a64(p.tokens[k]), k));
        std::vector<double> v(dim);
        for (double& x : v) x = rng.next_normal();
        v = normalized(v);
        e.set_row(k, v);
        content_rows.push_back(std::move(v));
    }
    e.set_row(e.eos_row, pooled_eos(content_rows, dim, encoder_seed));
    e.values.check_finite("encode");
    return e;
}

EmbeddingMatrix null_embedding(std::size_t dim, std::uint64_t encoder_seed) {
    EmbeddingMatrix e{Tensor({std::size_t{1}, dim}), 0};
    e.set_row(0, pooled_eos({}, dim, encoder_seed));
    return e;
}

std::set<std::size_t> select_fair_positions(const EmbeddingMatrix& e_tar,
                                            const EmbeddingMatrix& e_fair,
                                            double theta_p,
                                            const std::optional<std::vector<std::size_t>>& overrides) {
    if (theta_p < -1.0 || theta_p > 1.0) {
        throw Error(ErrorKind::config, "select_fair_positions: theta_p outside [-1,1]");
    }
    if (e_tar.dim() != e_fair.dim()) {
        throw Error(ErrorKind::shape, "select_fair_positions: embedding dim mismatch");
    }
    std::set<std::size_t> P;
    if (overrides) {
        for (std::size_t k : *overrides) {
            if (k >= e_tar.rows() || k == e_tar.eos_row) {
                throw Error(ErrorKind::config, "select_fair_positions: override position out of range");
            }
            P.insert(k);
        }
        return P;
    }
    for (std::size_t k = 0; k < e_tar.rows(); ++k) {
        if (k == e_tar.eos_row) continue;
        double best = -2.0;
        for (std::size_t j = 0; j < e_fair.rows(); ++j) {
            if (j == e_fair.eos_row) continue;
            best = std::max(best, cosine(e_tar.row(k), e_fair.row(j)));
        }
        if (best >= theta_p) P.insert(k);
    }
    return P;
}

EmbeddingMatrix soft_fuse(const EmbeddingMatrix& e_tar, const EmbeddingMatrix& e_fair,
                          const std::set<std::size_t>& positions, double lambda) {
    if (lambda < 0.0 || lambda > 1.0) {
        throw Error(ErrorKind::config, "soft_fuse: lambda outside [0,1]");
    }
    EmbeddingMatrix out = e_tar;
    if (positions.empty()) return out;
    if (positions.count(e_tar.eos_row)) {
        throw Error(ErrorKind::config, "soft_fuse: EOS position may not be fused");
    }
    const std::size_t fair_content = e_fair.rows() - 1;
    if (fair_content == 0) {
        throw Error(ErrorKind::config, "soft_fuse: pairing undefined for empty fairness prompt");
    }
    // Sorted positions pair with non-EOS fairness rows in order, cycling.
    std::size_t idx = 0;
    for (std::size_t k : positions) {
        const std::vector<double> tar = e_tar.row(k);
        const std::vector<double> fair = e_fair.row(idx % fair_content);
        std::vector<double> fused(tar.size());
        for (std::size_t i = 0; i < tar.size(); ++i) {
            fused[i] = lambda * tar[i] + (1.0 - lambda) * fair[i];
        }
        out.set_row(k, fused);
        ++idx;
    }
    return out;
}

EmbeddingMatrix eos_inject(const EmbeddingMatrix& fused, const EmbeddingMatrix& e_fair,
                           double alpha) {
    if (alpha < 0.0 || alpha > 1.0) {
        throw Error(ErrorKind::config, "eos_inject: alpha outside [0,1]");
    }
    EmbeddingMatrix out = fused;
    const std::vector<double> eos = fused.row(fused.eos_row);
    const std::vector<double> fair_eos = e_fair.row(e_fair.eos_row);
    if (eos.size() != fair_eos.size()) {
        throw Error(ErrorKind::shape, "eos_inject: embedding dim mismatch");
    }
    std::vector<double> injected(eos.size());
    for (std::size_t i = 0; i < eos.size(); ++i) {
        injected[i] = eos[i] + alpha * (fair_eos[i] - eos[i]);
    }
    out.set_row(out.eos_row, injected);
    return out;
}

EmbeddingMatrix debias_prompt(const PromptTokens& p_tar, const PromptTokens& p_fair,
                              const FusionSpec& spec, std::size_t dim,
                              std::uint64_t encoder_seed) {
    const EmbeddingMatrix e_tar = encode(p_tar, dim, encoder_seed);
    const EmbeddingMatrix e_fair = p_fair.content_tokens() == 0
                                       ? null_embedding(dim, encoder_seed)
                                       : encode(p_fair, dim, encoder_seed);
    const std::set<std::size_t> P =
        select_fair_positions(e_tar, e_fair, spec.theta_p, spec.overrides);
    const EmbeddingMatrix fused = soft_fuse(e_tar, e_fair, P, spec.lambda);
    return eos_inject(fused, e_fair, spec.alpha);
}

}  // namespace fame
