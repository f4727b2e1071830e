#pragma once

#include <cstdint>
#include <vector>

#include "fame/tensor.hpp"

namespace fame {

// Integer label per spatial cell; labels are contiguous from 0.
// Row-major flattening over (h, w) is the global convention shared with
// the attention masks.
struct RegionMap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<int> labels;  // h*w entries

    std::size_t cells() const { return height * width; }
    int label_count() const;
    void validate() const;
};

enum class RegionLayout { halves, disk, stripes };

Tensor build_region_indicator(const RegionMap& rm);            // (h*w) x (h*w), {0,1}
Tensor temporal_mean_features(const Tensor& latent_video);     // (h*w) x c
Tensor build_similarity_mask(const Tensor& features, double tau);
Tensor standardize_channels(const Tensor& features);

// Per-region attention mass: output (h*w) x K, row sums 1.
Tensor export_region_attention(const Tensor& attn, const RegionMap& rm);

RegionMap synth_region_map(std::size_t h, std::size_t w, RegionLayout layout,
                           std::uint64_t seed);

Tensor region_map_to_tensor(const RegionMap& rm);
RegionMap region_map_from_tensor(const Tensor& t);

}  // namespace fame
