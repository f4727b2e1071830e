#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fame/tensor.hpp"

namespace fame {

// Tokenized prompt. The EOS token is always appended as the last position.
struct PromptTokens {
    std::vector<std::string> tokens;  // lowercase, includes trailing EOS
    std::size_t eos_index() const { return tokens.size() - 1; }
    std::size_t content_tokens() const { return tokens.size() - 1; }
};

PromptTokens tokenize(const std::string& text);

// L x d token embeddings; every non-EOS row has unit norm, the EOS row
// pools the mean of the preceding rows plus a seeded basis vector.
struct EmbeddingMatrix {
    Tensor values;  // L x d
    std::size_t eos_row;

    std::size_t rows() const { return values.rows(); }
    std::size_t dim() const { return values.cols(); }
    std::vector<double> row(std::size_t r) const;
    void set_row(std::size_t r, const std::vector<double>& v);
};

struct FusionSpec {
    double lambda = 0.5;         // per-position mixing coefficient
    double alpha = 0.5;          // EOS injection strength
    double theta_p = 0.35;       // cosine cutoff for position selection
    std::optional<std::vector<std::size_t>> overrides;  // explicit P
};

EmbeddingMatrix encode(const PromptTokens& p, std::size_t dim, std::uint64_t encoder_seed);

// Embedding for the empty (unconditional) prompt: a single EOS row.
EmbeddingMatrix null_embedding(std::size_t dim, std::uint64_t encoder_seed);

// The seeded basis vector added during EOS pooling; part of the encoder
// contract so the pooling rule is directly checkable.
std::vector<double> encoder_eos_basis(std::size_t dim, std::uint64_t encoder_seed);

std::set<std::size_t> select_fair_positions(const EmbeddingMatrix& e_tar,
                                            const EmbeddingMatrix& e_fair,
                                            double theta_p,
                                            const std::optional<std::vector<std::size_t>>& overrides);

EmbeddingMatrix soft_fuse(const EmbeddingMatrix& e_tar, const EmbeddingMatrix& e_fair,
                          const std::set<std::size_t>& positions, double lambda);

EmbeddingMatrix eos_inject(const EmbeddingMatrix& fused, const EmbeddingMatrix& e_fair,
                           double alpha);

EmbeddingMatrix debias_prompt(const PromptTokens& p_tar, const PromptTokens& p_fair,
                              const FusionSpec& spec, std::size_t dim,
                              std::uint64_t encoder_seed);

}  // namespace fame
