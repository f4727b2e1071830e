#pragma once

#include <string>

#include "fame/tensor.hpp"

namespace fame {

// FTEN binary tensor file: magic "FTEN", one version byte, u32 rank,
// u64 dims (little-endian), then row-major IEEE-754 binary64 payload.
inline constexpr unsigned char kFtenVersion = 1;

void write_ften(const std::string& path, const Tensor& t);
Tensor read_ften(const std::string& path);

}  // namespace fame
