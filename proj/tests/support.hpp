#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "dtfl/network.hpp"

namespace testing {

inline dtfl::NetworkConfig small_config(std::size_t users = 8, std::size_t bs = 3, std::size_t channels = 2,
                                        std::size_t producers = 2) {
  dtfl::NetworkConfig c;
  c.num_users = users;
  c.num_bs = bs;
  c.num_subchannels = channels;
  c.num_producers = producers;
  c.bs_cpu_freq_hz.assign(bs, 2.0e9);
  for (std::size_t i = 0; i < bs; ++i) c.bs_cpu_freq_hz[i] = 1.5e9 + 0.5e9 * static_cast<double>(i);
  c.bs_distance_m.clear();
  for (std::size_t i = 0; i < bs; ++i) c.bs_distance_m.push_back(200.0 + 75.0 * static_cast<double>(i));
  c.min_samples = 10;
  c.max_samples = 30;
  return c;
}

inline double rel_err(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Central difference of f along coordinate k of x.
inline double central_diff(const std::function<double(std::span<const double>)>& f, std::vector<double> x,
                           std::size_t k, double h) {
  const double x0 = x[k];
  x[k] = x0 + h;
  const double up = f(x);
  x[k] = x0 - h;
  const double down = f(x);
  return (up - down) / (2.0 * h);
}

}  // namespace testing
