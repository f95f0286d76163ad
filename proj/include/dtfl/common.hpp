#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace dtfl {

/// Raised for malformed or physically inconsistent configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised when training produces non-finite values.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Selects the serial reference kernel or its OpenMP counterpart. Both are
/// required to produce bit-identical results.
enum class Exec { serial, parallel };

using Rng = std::mt19937_64;

/// Mixes a stream id into a seed (splitmix64 finalizer), so that independent
/// streams derived from one master seed do not overlap.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return Rng(derive_seed(seed, stream));
}

/// P[W] = 10^((dBm - 30) / 10)
double dbm_to_watts(double dbm);

}  // namespace dtfl
