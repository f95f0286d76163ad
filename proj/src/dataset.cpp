#include "dtfl/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

namespace dtfl {

static_assert(std::endian::native == std::endian::little, "binary formats assume little endian");

void Dataset::push_back(std::span<const double> x, int label) {
  if (x.size() != num_features) throw std::invalid_argument("feature width mismatch");
  features.insert(features.end(), x.begin(), x.end());
  labels.push_back(label);
}

Dataset make_gaussian_clusters(std::size_t samples, std::size_t features, std::size_t classes,
                               double separation, Rng& rng) {
  if (features == 0 || classes < 2) throw std::invalid_argument("need >=1 feature and >=2 classes");
  Dataset out;
  out.num_features = features;
  out.num_classes = classes;
  out.features.reserve(samples * features);
  out.labels.reserve(samples);

  // Class k is centered at +separation on axis (k mod features), flipped in
  // sign for every wrap-around, so centers stay distinct for any class count.
  std::vector<double> centers(classes * features, 0.0);
  for (std::size_t k = 0; k < classes; ++k) {
    const double sign = (k / features) % 2 == 0 ? 1.0 : -1.0;
    centers[k * features + k % features] = sign * separation;
  }
  std::uniform_int_distribution<std::size_t> pick(0, classes - 1);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> x(features);
  for (std::size_t n = 0; n < samples; ++n) {
    const std::size_t k = pick(rng);
    for (std::size_t f = 0; f < features; ++f) x[f] = centers[k * features + f] + noise(rng);
    out.push_back(x, static_cast<int>(k));
  }
  return out;
}

std::vector<Dataset> partition_iid(const Dataset& pool, std::span<const std::size_t> sizes,
                                   Rng& rng) {
  const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  if (total > pool.size()) throw std::invalid_argument("pool smaller than requested partition");
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Dataset> parts;
  parts.reserve(sizes.size());
  std::size_t cursor = 0;
  for (std::size_t s : sizes) {
    Dataset part;
    part.num_features = pool.num_features;
    part.num_classes = pool.num_classes;
    for (std::size_t k = 0; k < s; ++k, ++cursor) part.push_back(pool.row(order[cursor]), pool.labels[order[cursor]]);
    parts.push_back(std::move(part));
  }
  return parts;
}

Dataset concatenate(std::span<const Dataset> parts) {
  Dataset out;
  for (const auto& p : parts) {
    if (out.num_features == 0) {
      out.num_features = p.num_features;
      out.num_classes = p.num_classes;
    }
    if (p.empty()) continue;
    if (p.num_features != out.num_features) throw std::invalid_argument("feature width mismatch");
    out.features.insert(out.features.end(), p.features.begin(), p.features.end());
    out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
    out.num_classes = std::max(out.num_classes, p.num_classes);
  }
  return out;
}

namespace {

std::size_t infer_classes(const Dataset& d, std::size_t hint) {
  if (hint != 0) return hint;
  int hi = 1;
  for (int l : d.labels) hi = std::max(hi, l);
  return static_cast<std::size_t>(hi) + 1;
}

int checked_label(double v) {
  if (!std::isfinite(v) || v < 0 || v != std::floor(v)) throw std::runtime_error("label must be a non-negative integer");
  return static_cast<int>(v);
}

}  // namespace

void write_dataset_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out.precision(17);
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.row(i)) out << v << ',';
    out << data.labels[i] << '\n';
  }
}

Dataset read_dataset_csv(const std::filesystem::path& path, std::size_t num_classes) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  Dataset out;
  std::string line;
  std::vector<double> values;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    values.clear();
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (values.size() < 2) throw std::runtime_error(path.string() + ": rows need features and a label");
    if (out.num_features == 0) out.num_features = values.size() - 1;
    if (values.size() - 1 != out.num_features) throw std::runtime_error(path.string() + ": ragged rows");
    const int label = checked_label(values.back());
    values.pop_back();
    out.push_back(values, label);
  }
  out.num_classes = infer_classes(out, num_classes);
  return out;
}

void write_dataset_binary(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  const std::uint32_t version = 1;
  const std::uint64_t rows = data.size();
  const std::uint64_t cols = data.num_features + 1;
  out.write("DTDS", 4);
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
  out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto r = data.row(i);
    out.write(reinterpret_cast<const char*>(r.data()), static_cast<std::streamsize>(r.size_bytes()));
    const double label = data.labels[i];
    out.write(reinterpret_cast<const char*>(&label), sizeof label);
  }
}

Dataset read_dataset_binary(const std::filesystem::path& path, std::size_t num_classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t rows = 0, cols = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&rows), sizeof rows);
  in.read(reinterpret_cast<char*>(&cols), sizeof cols);
  if (!in || std::memcmp(magic, "DTDS", 4) != 0 || version != 1 || cols < 2)
    throw std::runtime_error(path.string() + ": not a dataset file");
  Dataset out;
  out.num_features = cols - 1;
  std::vector<double> row(cols);
  for (std::uint64_t i = 0; i < rows; ++i) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(cols * sizeof(double)));
    if (!in) throw std::runtime_error(path.string() + ": truncated");
    out.push_back(std::span<const double>(row.data(), cols - 1), checked_label(row.back()));
  }
  out.num_classes = infer_classes(out, num_classes);
  return out;
}

}  // namespace dtfl
