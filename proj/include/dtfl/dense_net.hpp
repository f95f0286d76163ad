#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "dtfl/common.hpp"
#include "dtfl/kernels.hpp"

namespace dtfl::maddpg {

using kernels::Matrix;

enum class Activation { linear, relu, tanh };

/// Fully connected network with one flat parameter buffer.
///
/// Layer l occupies [wt (in x out, input-major) | b (out)] in params(), in
/// layer order, so soft updates and optimizers work on the whole buffer.
class DenseNet {
 public:
  DenseNet() = default;
  DenseNet(std::vector<std::size_t> sizes, Activation hidden, Activation output);

  /// Uniform(+-1/sqrt(fan_in)) for hidden layers, Uniform(+-final_scale) for
  /// the output layer; biases of the output layer start at zero.
  void init(Rng& rng, double final_scale = 3e-3);

  std::size_t input_dim() const { return sizes_.front(); }
  std::size_t output_dim() const { return sizes_.back(); }
  std::size_t num_layers() const { return sizes_.size() - 1; }
  std::size_t num_params() const { return params_.size(); }
  const std::vector<std::size_t>& sizes() const { return sizes_; }
  Activation hidden_activation() const { return hidden_; }
  Activation output_activation() const { return output_; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::span<const double> weights(std::size_t layer) const;
  std::span<const double> bias(std::size_t layer) const;
  std::span<double> weights(std::size_t layer);
  std::span<double> bias(std::size_t layer);

  /// Single-sample pass without a cache. Throws std::invalid_argument on a
  /// dimension mismatch or non-finite input.
  std::vector<double> forward(std::span<const double> x) const;

  struct Cache {
    std::vector<Matrix> pre;   // pre-activations per layer
    std::vector<Matrix> post;  // post[0] is the input, post[l + 1] layer l's output
    bool valid = false;
    const Matrix& output() const { return post.back(); }
  };

  /// Batched pass that records what backward() needs.
  const Matrix& forward(const Matrix& x, Cache& cache, Exec exec = Exec::serial) const;

  /// Reverse-mode pass for upstream gradient dL/dy. Writes dL/dparams into
  /// `grad` (overwritten, size num_params()) and, if `dx` is given, dL/dx.
  /// `dz`, if given, is added as a gradient on the output pre-activation.
  /// Throws std::logic_error when the cache holds no forward pass.
  void backward(const Cache& cache, const Matrix& dy, std::span<double> grad, Matrix* dx,
                Exec exec = Exec::serial, const Matrix* dz = nullptr) const;

  friend bool operator==(const DenseNet&, const DenseNet&) = default;

 private:
  std::size_t offset(std::size_t layer) const { return offsets_[layer]; }

  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  Activation hidden_ = Activation::relu;
  Activation output_ = Activation::linear;
  std::vector<double> params_;
};

void write_net(std::ostream& out, const DenseNet& net);
DenseNet read_net(std::istream& in);

enum class OptimizerKind { sgd, momentum, adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Descent step: params -= lr * direction(grad).
class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(std::size_t n, OptimizerConfig cfg) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}
  void step(std::span<double> params, std::span<const double> grad, double lr);

 private:
  OptimizerConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
};

}  // namespace dtfl::maddpg
