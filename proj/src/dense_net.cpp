#include "dtfl/dense_net.hpp"

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>

namespace dtfl::maddpg {

namespace {

double activate(Activation a, double z) {
  switch (a) {
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::tanh: return std::tanh(z);
    case Activation::linear: break;
  }
  return z;
}

// Derivative expressed through the pre-activation z and output y.
double activate_grad(Activation a, double z, double y) {
  switch (a) {
    case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: return 1.0 - y * y;
    case Activation::linear: break;
  }
  return 1.0;
}

}  // namespace

DenseNet::DenseNet(std::vector<std::size_t> sizes, Activation hidden, Activation output)
    : sizes_(std::move(sizes)), hidden_(hidden), output_(output) {
  if (sizes_.size() < 2) throw std::invalid_argument("DenseNet: need at least input and output sizes");
  for (std::size_t s : sizes_)
    if (s == 0) throw std::invalid_argument("DenseNet: zero-width layer");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(total);
    total += sizes_[l] * sizes_[l + 1] + sizes_[l + 1];
  }
  params_.assign(total, 0.0);
}

void DenseNet::init(Rng& rng, double final_scale) {
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const bool last = l + 1 == num_layers();
    const double r = last ? final_scale : 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
    std::uniform_real_distribution<double> u(-r, r);
    for (double& w : weights(l)) w = u(rng);
    for (double& b : bias(l)) b = last ? 0.0 : u(rng);
  }
}

std::span<const double> DenseNet::weights(std::size_t l) const {
  return std::span<const double>(params_).subspan(offset(l), sizes_[l] * sizes_[l + 1]);
}
std::span<const double> DenseNet::bias(std::size_t l) const {
  return std::span<const double>(params_).subspan(offset(l) + sizes_[l] * sizes_[l + 1], sizes_[l + 1]);
}
std::span<double> DenseNet::weights(std::size_t l) {
  return std::span<double>(params_).subspan(offset(l), sizes_[l] * sizes_[l + 1]);
}
std::span<double> DenseNet::bias(std::size_t l) {
  return std::span<double>(params_).subspan(offset(l) + sizes_[l] * sizes_[l + 1], sizes_[l + 1]);
}

std::vector<double> DenseNet::forward(std::span<const double> x) const {
  if (x.size() != input_dim()) throw std::invalid_argument("DenseNet::forward: input dimension mismatch");
  for (double v : x)
    if (!std::isfinite(v)) throw std::invalid_argument("DenseNet::forward: non-finite input");
  Matrix in(1, x.size());
  std::copy(x.begin(), x.end(), in.data.begin());
  Cache cache;
  const Matrix& out = forward(in, cache);
  return out.data;
}

const Matrix& DenseNet::forward(const Matrix& x, Cache& cache, Exec exec) const {
  if (x.cols != input_dim()) throw std::invalid_argument("DenseNet::forward: input dimension mismatch");
  const std::size_t L = num_layers();
  cache.pre.resize(L);
  cache.post.resize(L + 1);
  cache.post[0] = x;
  for (std::size_t l = 0; l < L; ++l) {
    kernels::dense_forward(cache.post[l], weights(l), bias(l), cache.pre[l], exec);
    const Activation a = l + 1 == L ? output_ : hidden_;
    Matrix& y = cache.post[l + 1];
    y.resize(cache.pre[l].rows, cache.pre[l].cols);
    for (std::size_t k = 0; k < y.data.size(); ++k) y.data[k] = activate(a, cache.pre[l].data[k]);
  }
  cache.valid = true;
  return cache.post.back();
}

void DenseNet::backward(const Cache& cache, const Matrix& dy, std::span<double> grad, Matrix* dx, Exec exec,
                        const Matrix* dz) const {
  if (!cache.valid || cache.post.size() != num_layers() + 1)
    throw std::logic_error("DenseNet::backward: no cached forward pass");
  const Matrix& out = cache.output();
  if (dy.rows != out.rows || dy.cols != out.cols) throw std::invalid_argument("DenseNet::backward: dy shape mismatch");
  if (grad.size() != num_params()) throw std::invalid_argument("DenseNet::backward: gradient size mismatch");
  if (dz != nullptr && (dz->rows != out.rows || dz->cols != out.cols))
    throw std::invalid_argument("DenseNet::backward: dz shape mismatch");

  Matrix delta = dy;
  Matrix next;
  for (std::size_t l = num_layers(); l-- > 0;) {
    const Activation a = l + 1 == num_layers() ? output_ : hidden_;
    const Matrix& z = cache.pre[l];
    const Matrix& y = cache.post[l + 1];
    for (std::size_t k = 0; k < delta.data.size(); ++k) delta.data[k] *= activate_grad(a, z.data[k], y.data[k]);
    if (dz != nullptr && l + 1 == num_layers())
      for (std::size_t k = 0; k < delta.data.size(); ++k) delta.data[k] += dz->data[k];
    auto g = grad.subspan(offset(l), sizes_[l] * sizes_[l + 1] + sizes_[l + 1]);
    kernels::dense_backward_params(cache.post[l], delta, g.first(sizes_[l] * sizes_[l + 1]),
                                   g.subspan(sizes_[l] * sizes_[l + 1]), exec);
    if (l > 0 || dx != nullptr) {
      kernels::dense_backward_input(delta, weights(l), next, exec);
      std::swap(delta, next);
    }
  }
  if (dx != nullptr) *dx = std::move(delta);
}

namespace {

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw std::runtime_error("read_net: truncated stream");
  return v;
}

}  // namespace

void write_net(std::ostream& out, const DenseNet& net) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(net.sizes().size()));
  for (std::size_t s : net.sizes()) put<std::uint64_t>(out, s);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(net.hidden_activation()));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(net.output_activation()));
  for (double p : net.params()) put<double>(out, p);
}

DenseNet read_net(std::istream& in) {
  const auto n = get<std::uint32_t>(in);
  if (n < 2 || n > 64) throw std::runtime_error("read_net: bad layer count");
  std::vector<std::size_t> sizes(n);
  for (auto& s : sizes) {
    s = get<std::uint64_t>(in);
    if (s == 0 || s > (1u << 20)) throw std::runtime_error("read_net: bad layer size");
  }
  const auto h = get<std::uint8_t>(in), o = get<std::uint8_t>(in);
  if (h > 2 || o > 2) throw std::runtime_error("read_net: bad activation");
  DenseNet net(std::move(sizes), static_cast<Activation>(h), static_cast<Activation>(o));
  for (double& p : net.params()) p = get<double>(in);
  return net;
}

void Optimizer::step(std::span<double> params, std::span<const double> grad, double lr) {
  if (params.size() != grad.size() || params.size() != m_.size())
    throw std::invalid_argument("Optimizer::step: size mismatch");
  ++t_;
  switch (cfg_.kind) {
    case OptimizerKind::sgd:
      for (std::size_t k = 0; k < params.size(); ++k) params[k] -= lr * grad[k];
      break;
    case OptimizerKind::momentum:
      for (std::size_t k = 0; k < params.size(); ++k) {
        m_[k] = cfg_.momentum * m_[k] + grad[k];
        params[k] -= lr * m_[k];
      }
      break;
    case OptimizerKind::adam: {
      const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
      const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
      for (std::size_t k = 0; k < params.size(); ++k) {
        m_[k] = cfg_.beta1 * m_[k] + (1.0 - cfg_.beta1) * grad[k];
        v_[k] = cfg_.beta2 * v_[k] + (1.0 - cfg_.beta2) * grad[k] * grad[k];
        params[k] -= lr * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + cfg_.epsilon);
      }
      break;
    }
  }
}

}  // namespace dtfl::maddpg
