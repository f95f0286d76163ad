#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "dtfl/common.hpp"

namespace dtfl {

/// Dense classification dataset, one sample per row.
struct Dataset {
  std::size_t num_features = 0;
  std::size_t num_classes = 2;
  std::vector<double> features;  // row-major, size() * num_features
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * num_features, num_features};
  }
  void push_back(std::span<const double> x, int label);
};

/// Isotropic Gaussian clusters, one per class, with centers placed on a
/// scaled simplex-like pattern. Labels are drawn uniformly.
Dataset make_gaussian_clusters(std::size_t samples, std::size_t features,
                               std::size_t classes, double separation, Rng& rng);

/// Shuffles `pool` and deals consecutive chunks of the requested sizes.
/// Throws std::invalid_argument if the pool is too small.
std::vector<Dataset> partition_iid(const Dataset& pool, std::span<const std::size_t> sizes,
                                   Rng& rng);

Dataset concatenate(std::span<const Dataset> parts);

// Text layout: one sample per line, comma separated, label in the last column.
void write_dataset_csv(const Dataset& data, const std::filesystem::path& path);
Dataset read_dataset_csv(const std::filesystem::path& path, std::size_t num_classes = 0);

// Binary layout (little endian): "DTDS" u32 version=1, u64 rows, u64 cols
// (features + 1), then rows*cols f64 values with the label last in each row.
void write_dataset_binary(const Dataset& data, const std::filesystem::path& path);
Dataset read_dataset_binary(const std::filesystem::path& path, std::size_t num_classes = 0);

}  // namespace dtfl
