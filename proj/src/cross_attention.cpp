#include "fame/cross_attention.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "fame/error.hpp"

namespace fame {

void FairTokenGroups::validate(std::size_t key_count) const {
    if (embeddings.size() != key_groups.size()) {
        throw Error(ErrorKind::config, "token groups: embeddings/groups count mismatch");
    }
    std::vector<bool> taken(key_count, false);
    for (const auto& group : key_groups) {
        for (std::size_t k : group) {
            if (k >= key_count) {
                throw Error(ErrorKind::config, "token groups: key index out of range");
            }
            if (taken[k]) {
                throw Error(ErrorKind::config, "token groups: overlapping groups");
            }
            taken[k] = true;
        }
    }
    for (const auto& e : embeddings) {
        for (double v : e) {
            if (!std::isfinite(v)) {
                throw Error(ErrorKind::numeric, "token groups: non-finite embedding");
            }
        }
    }
}

void CrossAttnConfig::validate() const {
    if (lambda < 0.0) throw Error(ErrorKind::config, "cross-attention: lambda must be >= 0");
}

Tensor cosine_region_mask(const Tensor& q, const FairTokenGroups& groups,
                          std::size_t key_count, bool clamp_negative) {
    if (q.rank() != 2) throw Error(ErrorKind::shape, "cosine_region_mask: rank-2 Q required");
    groups.validate(key_count);
    const std::size_t n = q.rows();
    Tensor mask({n, key_count});
    for (std::size_t g = 0; g < groups.key_groups.size(); ++g) {
        const auto& emb = groups.embeddings[g];
        if (emb.size() != q.cols()) {
            throw Error(ErrorKind::shape, "cosine_region_mask: embedding dim mismatch");
        }
        for (std::size_t row = 0; row < n; ++row) {
            std::vector<double> qr(q.cols());
            for (std::size_t c = 0; c < q.cols(); ++c) qr[c] = q.at(row, c);
            double cs = cosine(qr, emb);
            if (clamp_negative) cs = std::max(cs, 0.0);
            for (std::size_t k : groups.key_groups[g]) mask.at(row, k) = cs;
        }
    }
    return mask;
}

Tensor fair_cross_logits_from_raw(const Tensor& raw, const Tensor& region_mask,
                                  const CrossAttnConfig& cfg, std::size_t d) {
    cfg.validate();
    if (!raw.same_shape(region_mask)) {
        throw Error(ErrorKind::shape, "fair_cross_logits: mask shape mismatch");
    }
    double mx = raw[0], mn = raw[0];
    for (std::size_t i = 0; i < raw.size(); ++i) {
        mx = std::max(mx, raw[i]);
        mn = std::min(mn, raw[i]);
    }
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    Tensor out({raw.rows(), raw.cols()});
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const double r = region_mask[i];
        const double fair = r * (mx - raw[i]) - (1.0 - r) * (raw[i] - mn);
        out[i] = (raw[i] + cfg.lambda * fair) * inv_sqrt_d;
    }
    out.check_finite("fair_cross_logits");
    return out;
}

Tensor fair_cross_logits(const Tensor& q, const Tensor& k, const Tensor& region_mask,
                         const CrossAttnConfig& cfg) {
    if (q.cols() != k.cols()) {
        throw Error(ErrorKind::shape, "fair_cross_logits: Q/K dim mismatch");
    }
    return fair_cross_logits_from_raw(matmul(q, transpose(k)), region_mask, cfg, q.cols());
}

Tensor fair_cross_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const FairTokenGroups& groups, const CrossAttnConfig& cfg) {
    if (v.rank() != 2 || v.rows() != k.rows()) {
        throw Error(ErrorKind::shape, "fair_cross_attention: K/V row mismatch");
    }
    const Tensor mask = cosine_region_mask(q, groups, k.rows(), cfg.clamp_negative);
    return matmul(softmax_rows(fair_cross_logits(q, k, mask, cfg)), v);
}

}  // namespace fame
