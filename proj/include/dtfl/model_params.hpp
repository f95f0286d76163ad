#pragma once

#include <cmath>
#include <vector>

namespace dtfl {

/// Flat parameter vector of the shared federated model.
struct ModelParams {
  std::vector<double> w;

  std::size_t dim() const { return w.size(); }
  bool finite() const {
    for (double v : w)
      if (!std::isfinite(v)) return false;
    return true;
  }
  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

}  // namespace dtfl
