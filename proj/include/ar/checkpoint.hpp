#pragma once

#include <string>

#include "ar/network.hpp"

namespace ar {

// Binary parameter container. Layout (all integers little-endian):
//   magic "ARCK" (4 bytes)
//   format version   u32 (currently 1)
//   layer count      u32
//   per layer: in_dim u32, out_dim u32, activation tag u8 (0=ReLU, 1=Linear)
//   per layer: row-major f64 weight data (out_dim*in_dim values)
//   feedback presence byte u8 (0 or 1)
//   if present, per layer: row-major f64 feedback data (in_dim*out_dim values)
void save_checkpoint(const std::string& path, const NetworkParams& params);
NetworkParams load_checkpoint(const std::string& path);

}  // namespace ar
