#include "fame/self_attention.hpp"

#include <algorithm>
#include <cmath>

#include "fame/error.hpp"
#include "fame/rng.hpp"

namespace fame {

namespace {

Tensor seeded_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    SeededRng rng(seed);
    Tensor m({rows, cols});
    // Xavier-style scale keeps logits O(1) for unit inputs.
    const double s = 1.0 / std::sqrt(static_cast<double>(rows));
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = s * rng.next_normal();
    return m;
}

Tensor frame_slice(const Tensor& flat, std::size_t frame) {
    const std::size_t n = flat.dim(0), l = flat.dim(1), c = flat.dim(2);
    if (frame >= l) throw Error(ErrorKind::shape, "frame index out of range");
    Tensor out({n, c});
    for (std::size_t q = 0; q < n; ++q)
        for (std::size_t ch = 0; ch < c; ++ch)
            out.at(q, ch) = flat[(q * l + frame) * c + ch];
    return out;
}

}  // namespace

ProjectionWeights ProjectionWeights::make(std::size_t c, std::size_t d, std::uint64_t seed) {
    std::uint64_t base[2] = {seed, 0};
    auto sub = [&](std::uint64_t salt) {
        base[1] = salt;
        return fnv1a64(base, sizeof(base));
    };
    return ProjectionWeights{seeded_matrix(c, d, sub(1)), seeded_matrix(c, d, sub(2)),
                             seeded_matrix(c, d, sub(3)), seed};
}

void SelfAttnConfig::validate() const {
    if (lambda < 0.0) throw Error(ErrorKind::config, "self-attention: lambda must be >= 0");
    if (mu < 0.0) throw Error(ErrorKind::config, "self-attention: mu must be >= 0");
    if (tau <= 0.0) throw Error(ErrorKind::config, "self-attention: tau must be > 0");
}

Tensor temporal_flatten(const Tensor& latent_video) {
    if (latent_video.rank() != 4) {
        throw Error(ErrorKind::shape, "temporal_flatten: rank-4 latent required");
    }
    const std::size_t h = latent_video.dim(0), w = latent_video.dim(1);
    return latent_video.reshaped({h * w, latent_video.dim(2), latent_video.dim(3)});
}

Tensor temporal_unflatten(const Tensor& flat, std::size_t h, std::size_t w) {
    if (flat.rank() != 3 || flat.dim(0) != h * w) {
        throw Error(ErrorKind::shape, "temporal_unflatten: shape mismatch");
    }
    return flat.reshaped({h, w, flat.dim(1), flat.dim(2)});
}

Qkv project_qkv(const Tensor& flat, const ProjectionWeights& w, std::size_t frame) {
    if (flat.rank() != 3) throw Error(ErrorKind::shape, "project_qkv: rank-3 input required");
    if (flat.dim(2) != w.w_q.rows()) {
        throw Error(ErrorKind::shape, "project_qkv: channel dim does not match weights");
    }
    const Tensor slice = frame_slice(flat, frame);
    return Qkv{matmul(slice, w.w_q), matmul(slice, w.w_k), matmul(slice, w.w_v)};
}

std::pair<Tensor, Tensor> pos_neg_maps(const Tensor& raw) {
    raw.check_finite("pos_neg_maps");
    double mx = raw[0], mn = raw[0];
    for (std::size_t i = 0; i < raw.size(); ++i) {
        mx = std::max(mx, raw[i]);
        mn = std::min(mn, raw[i]);
    }
    Tensor pos = raw, neg = raw;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        pos[i] = mx - raw[i];
        neg[i] = raw[i] - mn;
    }
    return {std::move(pos), std::move(neg)};
}

Tensor fair_logits_from_raw(const Tensor& raw, const Tensor& region_indicator,
                            const Tensor& similarity, const SelfAttnConfig& cfg,
                            std::size_t d) {
    cfg.validate();
    if (!raw.same_shape(region_indicator) || !raw.same_shape(similarity)) {
        throw Error(ErrorKind::shape, "fair_logits: mask shape mismatch");
    }
    const auto [pos, neg] = pos_neg_maps(raw);
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    Tensor out({raw.rows(), raw.cols()});
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double r = region_indicator[i];
        const double fair = r * pos[i] - (1.0 - r) * neg[i];
        out[i] = (raw[i] + cfg.lambda * fair + cfg.mu * similarity[i]) * inv_sqrt_d;
    }
    out.check_finite("fair_logits");
    return out;
}

Tensor fair_logits(const Tensor& q, const Tensor& k, const Tensor& region_indicator,
                   const Tensor& similarity, const SelfAttnConfig& cfg) {
    const std::size_t n = q.rows(), d = q.cols();
    if (k.rows() != n || k.cols() != d) {
        throw Error(ErrorKind::shape, "fair_logits: Q/K shape mismatch");
    }
    return fair_logits_from_raw(matmul(q, transpose(k)), region_indicator, similarity, cfg, d);
}

Tensor fair_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                      const Tensor& region_indicator, const Tensor& similarity,
                      const SelfAttnConfig& cfg) {
    return matmul(softmax_rows(fair_logits(q, k, region_indicator, similarity, cfg)), v);
}

Tensor fair_attention_video(const Tensor& flat, const ProjectionWeights& w,
                            const Tensor& region_indicator, const Tensor& similarity,
                            const SelfAttnConfig& cfg) {
    const std::size_t n = flat.dim(0), l = flat.dim(1), d = w.w_q.cols();
    Tensor out({n, l, d});
    for (std::size_t t = 0; t < l; ++t) {
        const Qkv qkv = project_qkv(flat, w, t);
        const Tensor a = fair_attention(qkv.q, qkv.k, qkv.v, region_indicator, similarity, cfg);
        for (std::size_t q = 0; q < n; ++q)
            for (std::size_t j = 0; j < d; ++j)
                out[(q * l + t) * d + j] = a.at(q, j);
    }
    return out;
}

}  // namespace fame
