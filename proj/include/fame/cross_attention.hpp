#pragma once

#include <vector>

#include "fame/tensor.hpp"

namespace fame {

// Fairness concepts and the prompt-token key indices each one governs.
// Groups must be disjoint; a key governed by no concept gets mask 0.
struct FairTokenGroups {
    std::vector<std::vector<double>> embeddings;       // one d-vector per concept
    std::vector<std::vector<std::size_t>> key_groups;  // key indices per concept

    void validate(std::size_t key_count) const;
};

struct CrossAttnConfig {
    double lambda = 0.5;
    bool clamp_negative = true;

    void validate() const;
};

// R_t: (H*W) x L cosine mask between spatial queries and governing
// concept embeddings.
Tensor cosine_region_mask(const Tensor& q, const FairTokenGroups& groups,
                          std::size_t key_count, bool clamp_negative);

Tensor fair_cross_logits(const Tensor& q, const Tensor& k, const Tensor& region_mask,
                         const CrossAttnConfig& cfg);

// Modulation over an externally supplied raw logit matrix; d is the
// query/key dimension used for the 1/sqrt(d) scaling.
Tensor fair_cross_logits_from_raw(const Tensor& raw, const Tensor& region_mask,
                                  const CrossAttnConfig& cfg, std::size_t d);

Tensor fair_cross_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const FairTokenGroups& groups, const CrossAttnConfig& cfg);

}  // namespace fame
