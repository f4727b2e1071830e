#pragma once

#include <cstdint>
#include <utility>

#include "fame/tensor.hpp"

namespace fame {

// Seeded, fixed Q/K/V projections (the framework is training-free).
struct ProjectionWeights {
    Tensor w_q;  // c x d
    Tensor w_k;
    Tensor w_v;
    std::uint64_t seed = 0;

    static ProjectionWeights make(std::size_t c, std::size_t d, std::uint64_t seed);
};

struct SelfAttnConfig {
    double lambda = 0.5;  // region modulation strength
    double mu = 0.2;      // similarity modulation strength
    double tau = 1.0;     // similarity temperature

    void validate() const;
};

struct Qkv {
    Tensor q;
    Tensor k;
    Tensor v;
};

// h x w x l x c  ->  (h*w) x l x c, pure row-major reshape.
Tensor temporal_flatten(const Tensor& latent_video);
Tensor temporal_unflatten(const Tensor& flat, std::size_t h, std::size_t w);

Qkv project_qkv(const Tensor& flat, const ProjectionWeights& w, std::size_t frame);

// Global-scalar positive/negative modulation maps of a raw logit matrix.
std::pair<Tensor, Tensor> pos_neg_maps(const Tensor& raw);

Tensor fair_logits(const Tensor& q, const Tensor& k, const Tensor& region_indicator,
                   const Tensor& similarity, const SelfAttnConfig& cfg);

// Same modulation applied to an externally supplied raw logit matrix
// (used by the pipeline's cache blending); d is the key dimension.
Tensor fair_logits_from_raw(const Tensor& raw, const Tensor& region_indicator,
                            const Tensor& similarity, const SelfAttnConfig& cfg,
                            std::size_t d);

Tensor fair_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                      const Tensor& region_indicator, const Tensor& similarity,
                      const SelfAttnConfig& cfg);

// Per-frame fair attention over the whole clip; frames are a batch axis and
// masks are shared. Output shape (h*w) x l x d.
Tensor fair_attention_video(const Tensor& flat, const ProjectionWeights& w,
                            const Tensor& region_indicator, const Tensor& similarity,
                            const SelfAttnConfig& cfg);

}  // namespace fame
