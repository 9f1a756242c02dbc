#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "gpdyn/types.hpp"

namespace gpdyn {

using Rng = std::mt19937_64;

/// Seed of an independent stream derived from a master seed and a purpose label.
std::uint64_t stream_seed(std::uint64_t seed, std::string_view label);

/// Stream keyed by (seed, label, index), e.g. one stream per epoch.
std::uint64_t stream_seed(std::uint64_t seed, std::string_view label, std::uint64_t index);

inline Rng make_stream(std::uint64_t seed, std::string_view label) {
  return Rng(stream_seed(seed, label));
}

inline Rng make_stream(std::uint64_t seed, std::string_view label, std::uint64_t index) {
  return Rng(stream_seed(seed, label, index));
}

Vec standard_normal_vector(Rng& rng, Eigen::Index n);
Mat standard_normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols);

}  // namespace gpdyn
