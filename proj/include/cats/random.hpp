#pragma once

#include <cstdint>
#include <random>

namespace cats {

using Rng = std::mt19937_64;

// Uniform on [0, 1) with 53 random bits; stable across standard libraries.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace cats
