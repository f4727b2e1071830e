#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fame/tensor.hpp"

namespace fame {

// Pinned generator: xoshiro256** seeded through splitmix64, normals via
// Box-Muller. Identical seed gives an identical stream on every platform.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed);

    std::uint64_t next_u64();
    double next_uniform();  // in (0,1)
    double next_normal();

    std::uint64_t seed() const { return seed_; }

    static const char* algorithm() { return "xoshiro256** / splitmix64 / box-muller"; }

private:
    std::uint64_t seed_;
    std::uint64_t state_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

Tensor seeded_normal(SeededRng& rng, const std::vector<std::size_t>& shape);

// 64-bit FNV-1a, used for token hashing and output digests.
std::uint64_t fnv1a64(const void* bytes, std::size_t len);
std::uint64_t fnv1a64(const std::string& s);

}  // namespace fame
