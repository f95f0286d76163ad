#include "dtfl/fl.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <exception>
#include <numeric>
#include <stdexcept>

namespace dtfl::fl {

std::size_t ModelShape::num_params() const {
  if (kind == ModelKind::logistic) return classes * (features + 1);
  return hidden * (features + 1) + classes * (hidden + 1);
}

ModelParams init_params(const ModelShape& shape, Rng& rng) {
  ModelParams p;
  p.w.assign(shape.num_params(), 0.0);
  if (shape.kind == ModelKind::dense) {
    std::normal_distribution<double> g(0.0, 1.0);
    const double s1 = 1.0 / std::sqrt(static_cast<double>(shape.features));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(shape.hidden));
    for (std::size_t k = 0; k < shape.hidden * shape.features; ++k) p.w[k] = s1 * g(rng);
    const std::size_t w2 = shape.hidden * (shape.features + 1);
    for (std::size_t k = 0; k < shape.classes * shape.hidden; ++k) p.w[w2 + k] = s2 * g(rng);
  }
  return p;
}

namespace {

// Softmax in place; returns log-sum-exp.
double softmax(std::span<double> z) {
  const double hi = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - hi);
    sum += v;
  }
  for (double& v : z) v /= sum;
  return hi + std::log(sum);
}

struct Scratch {
  std::vector<double> hidden;
  std::vector<double> logits;
  std::vector<double> dhidden;
};

// Cross-entropy of one sample; when `grad` is non-empty, adds scale * dL/dw.
double sample_loss(const ModelShape& s, std::span<const double> w, std::span<const double> x, int y,
                   std::span<double> grad, double scale, Scratch& t) {
  const std::size_t F = s.features, C = s.classes;
  if (y < 0 || static_cast<std::size_t>(y) >= C) throw std::invalid_argument("label out of range");
  t.logits.assign(C, 0.0);

  if (s.kind == ModelKind::logistic) {
    const double* W = w.data();
    const double* b = W + C * F;
    for (std::size_t k = 0; k < C; ++k) {
      double z = b[k];
      for (std::size_t f = 0; f < F; ++f) z += W[k * F + f] * x[f];
      t.logits[k] = z;
    }
    const double z_y = t.logits[y];
    const double lse = softmax(t.logits);
    if (!grad.empty()) {
      double* gW = grad.data();
      double* gb = gW + C * F;
      for (std::size_t k = 0; k < C; ++k) {
        const double d = scale * (t.logits[k] - (static_cast<std::size_t>(y) == k ? 1.0 : 0.0));
        for (std::size_t f = 0; f < F; ++f) gW[k * F + f] += d * x[f];
        gb[k] += d;
      }
    }
    return lse - z_y;
  }

  const std::size_t H = s.hidden;
  const double* W1 = w.data();
  const double* b1 = W1 + H * F;
  const double* W2 = b1 + H;
  const double* b2 = W2 + C * H;
  t.hidden.assign(H, 0.0);
  for (std::size_t h = 0; h < H; ++h) {
    double z = b1[h];
    for (std::size_t f = 0; f < F; ++f) z += W1[h * F + f] * x[f];
    t.hidden[h] = std::tanh(z);
  }
  for (std::size_t k = 0; k < C; ++k) {
    double z = b2[k];
    for (std::size_t h = 0; h < H; ++h) z += W2[k * H + h] * t.hidden[h];
    t.logits[k] = z;
  }
  const double z_y = t.logits[y];
  const double lse = softmax(t.logits);
  if (!grad.empty()) {
    double* gW1 = grad.data();
    double* gb1 = gW1 + H * F;
    double* gW2 = gb1 + H;
    double* gb2 = gW2 + C * H;
    t.dhidden.assign(H, 0.0);
    for (std::size_t k = 0; k < C; ++k) {
      const double d = scale * (t.logits[k] - (static_cast<std::size_t>(y) == k ? 1.0 : 0.0));
      for (std::size_t h = 0; h < H; ++h) {
        gW2[k * H + h] += d * t.hidden[h];
        t.dhidden[h] += d * W2[k * H + h];
      }
      gb2[k] += d;
    }
    for (std::size_t h = 0; h < H; ++h) {
      const double d = t.dhidden[h] * (1.0 - t.hidden[h] * t.hidden[h]);
      for (std::size_t f = 0; f < F; ++f) gW1[h * F + f] += d * x[f];
      gb1[h] += d;
    }
  }
  return lse - z_y;
}

void check_shape(const ModelShape& s, std::span<const double> w, const Dataset& data) {
  if (w.size() != s.num_params()) throw std::invalid_argument("parameter vector does not match model shape");
  if (data.num_features != s.features) throw std::invalid_argument("dataset width does not match model shape");
}

double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

}  // namespace

double loss_and_gradient(const ModelShape& shape, std::span<const double> w, const Dataset& data,
                         std::span<const std::size_t> indices, std::span<double> grad, double l2) {
  check_shape(shape, w, data);
  const std::size_t n = indices.empty() ? data.size() : indices.size();
  if (n == 0) throw std::invalid_argument("empty dataset");
  if (!grad.empty()) {
    if (grad.size() != w.size()) throw std::invalid_argument("gradient buffer size mismatch");
    std::fill(grad.begin(), grad.end(), 0.0);
  }
  Scratch t;
  const double scale = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = indices.empty() ? k : indices[k];
    total += sample_loss(shape, w, data.row(i), data.labels[i], grad, scale, t);
  }
  double loss = total / static_cast<double>(n);
  if (l2 != 0.0) {
    loss += 0.5 * l2 * squared_norm(w);
    if (!grad.empty())
      for (std::size_t k = 0; k < w.size(); ++k) grad[k] += l2 * w[k];
  }
  return loss;
}

double local_loss(const ModelShape& shape, const ModelParams& w, const Dataset& data, double l2) {
  return loss_and_gradient(shape, w.w, data, {}, {}, l2);
}

std::vector<double> predict_proba(const ModelShape& shape, std::span<const double> w, std::span<const double> x) {
  if (w.size() != shape.num_params() || x.size() != shape.features) throw std::invalid_argument("dimension mismatch");
  Scratch t;
  sample_loss(shape, w, x, 0, {}, 0.0, t);
  return t.logits;
}

LocalTrainResult local_train(const Dataset& data, const ModelParams& w0, const TrainingTask& task, double batch_frac,
                             Rng& rng) {
  if (data.empty()) throw std::invalid_argument("local_train: empty dataset");
  if (!(batch_frac > 0.0 && batch_frac <= 1.0)) throw std::domain_error("batch fraction outside (0, 1]");
  if (!(task.learning_rate >= 0.0)) throw std::invalid_argument("learning rate must be >= 0");

  const std::size_t D = data.size();
  const std::size_t batch = std::min<std::size_t>(D, static_cast<std::size_t>(std::ceil(batch_frac * static_cast<double>(D) - 1e-12)));
  const bool full = batch == D;

  LocalTrainResult out;
  out.params = w0;
  std::vector<double> grad(w0.dim());
  std::vector<TrajectoryPoint> path;
  path.reserve(task.local_iters + 1);

  out.loss_before = loss_and_gradient(task.shape, out.params.w, data, {}, grad, task.l2);
  if (!std::isfinite(out.loss_before)) throw DivergenceError("local loss is not finite");
  const double g0 = std::sqrt(squared_norm(grad));
  path.push_back({out.params.w, grad});

  std::vector<std::size_t> order(D);
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = D;  // forces a shuffle before the first mini-batch
  std::vector<std::size_t> idx;
  std::vector<double> step(w0.dim());
  for (std::size_t it = 0; it < task.local_iters; ++it) {
    if (full) {
      std::copy(path.back().grad.begin(), path.back().grad.end(), step.begin());
    } else {
      idx.clear();
      while (idx.size() < batch) {
        if (cursor == D) {
          std::shuffle(order.begin(), order.end(), rng);
          cursor = 0;
        }
        idx.push_back(order[cursor++]);
      }
      loss_and_gradient(task.shape, out.params.w, data, idx, step, task.l2);
    }
    for (std::size_t k = 0; k < step.size(); ++k) out.params.w[k] -= task.learning_rate * step[k];
    const double loss = loss_and_gradient(task.shape, out.params.w, data, {}, grad, task.l2);
    if (!std::isfinite(loss) || !out.params.finite()) throw DivergenceError("local training diverged");
    path.push_back({out.params.w, grad});
  }
  out.loss_after = task.local_iters == 0 ? out.loss_before
                                         : loss_and_gradient(task.shape, out.params.w, data, {}, {}, task.l2);
  const double g1 = std::sqrt(squared_norm(path.back().grad));
  out.diag.grad_norm_ratio = g0 > 0.0 ? g1 / g0 : 0.0;
  if (path.size() >= 2) {
    try {
      out.diag.lipschitz_estimate = estimate_smoothness(path).lipschitz_estimate;
    } catch (const std::invalid_argument&) {
      out.diag.lipschitz_estimate = 0.0;  // no movement (zero step size or zero gradient)
    }
  }
  return out;
}

WeightedModel bs_aggregate(std::span<const WeightedModel> models, AggMode mode) {
  if (models.empty()) throw std::invalid_argument("bs_aggregate: no models");
  const std::size_t d = models.front().params.dim();
  WeightedModel out;
  out.params.w.assign(d, 0.0);
  for (const auto& m : models) {
    if (m.params.dim() != d) throw std::invalid_argument("bs_aggregate: dimension mismatch");
    if (!(m.data_size >= 0.0)) throw std::invalid_argument("bs_aggregate: negative data size");
    out.data_size += m.data_size;
    for (std::size_t k = 0; k < d; ++k) out.params.w[k] += m.data_size * m.params.w[k];
  }
  double denom = 0.0;
  if (mode == AggMode::normalized) {
    if (out.data_size <= 0.0) throw std::invalid_argument("bs_aggregate: all data sizes are zero");
    denom = out.data_size;
  } else {
    denom = static_cast<double>(models.size());
  }
  for (double& v : out.params.w) v /= denom;
  return out;
}

ModelParams global_aggregate(std::span<const WeightedModel> bs_models, AggMode mode) {
  if (bs_models.empty()) throw std::invalid_argument("global_aggregate: no models");
  const std::size_t d = bs_models.front().params.dim();
  ModelParams out;
  out.w.assign(d, 0.0);
  double total = 0.0;
  for (const auto& m : bs_models) {
    if (m.params.dim() != d) throw std::invalid_argument("global_aggregate: dimension mismatch");
    const double weight = mode == AggMode::normalized ? m.data_size : 1.0;
    total += weight;
    for (std::size_t k = 0; k < d; ++k) out.w[k] += weight * m.params.w[k];
  }
  if (total <= 0.0) throw std::invalid_argument("global_aggregate: all data sizes are zero");
  for (double& v : out.w) v /= total;
  return out;
}

double global_loss(const ModelShape& shape, const ModelParams& w, std::span<const DigitalTwin> twins, double l2) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& t : twins) {
    if (t.data.empty()) continue;
    sum += local_loss(shape, w, t.data, l2);
    ++n;
  }
  if (n == 0) throw std::invalid_argument("global_loss: no data");
  return sum / static_cast<double>(n);
}

std::vector<LocalTrainResult> train_twins(std::span<const DigitalTwin> twins, const Association& assoc,
                                          std::span<const double> batch_fracs, const ModelParams& global,
                                          const TrainingTask& task, std::uint64_t round, Exec exec) {
  if (twins.size() != assoc.num_twins() || batch_fracs.size() != twins.size())
    throw std::invalid_argument("train_twins: twin/association/batch size mismatch");
  std::vector<LocalTrainResult> out(twins.size());
  std::vector<std::exception_ptr> errors(twins.size());
  const std::uint64_t round_seed = derive_seed(task.seed, round);

  auto train_one = [&](std::size_t j) {
    try {
      if (!assoc.bs_of(j) || twins[j].data.empty()) {
        out[j].params = global;
        return;
      }
      Rng rng(derive_seed(round_seed, j));
      out[j] = local_train(twins[j].data, global, task, batch_fracs[j], rng);
    } catch (...) {
      errors[j] = std::current_exception();
    }
  };

  const auto n = static_cast<std::ptrdiff_t>(twins.size());
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t j = 0; j < n; ++j) train_one(static_cast<std::size_t>(j));
  } else {
    for (std::ptrdiff_t j = 0; j < n; ++j) train_one(static_cast<std::size_t>(j));
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

std::vector<WeightedModel> aggregate_by_bs(std::span<const LocalTrainResult> local, std::span<const DigitalTwin> twins,
                                           const Association& assoc, AggMode mode) {
  std::vector<WeightedModel> out(assoc.num_bs());
  std::vector<WeightedModel> members;
  for (std::size_t i = 0; i < assoc.num_bs(); ++i) {
    members.clear();
    for (std::size_t j : assoc.twins_of(i))
      if (!twins[j].data.empty()) members.push_back({local[j].params, twins[j].data_size()});
    if (!members.empty()) out[i] = bs_aggregate(members, mode);
  }
  return out;
}

RoundResult federated_round(std::span<DigitalTwin> twins, const Association& assoc,
                            std::span<const double> batch_fracs, const ModelParams& global, const TrainingTask& task,
                            std::uint64_t round, AggMode mode, Exec exec) {
  if (!assoc.complete()) throw std::invalid_argument("federated_round: incomplete association");
  auto local = train_twins(twins, assoc, batch_fracs, global, task, round, exec);
  RoundResult r;
  r.bs_models = aggregate_by_bs(local, twins, assoc, mode);
  std::vector<WeightedModel> active;
  for (const auto& m : r.bs_models)
    if (m.data_size > 0.0) active.push_back(m);
  r.global = active.empty() ? global : global_aggregate(active, mode);
  for (std::size_t j = 0; j < twins.size(); ++j) {
    twins[j].behavior_model = local[j].params;
    r.diag.grad_norm_ratio = std::max(r.diag.grad_norm_ratio, local[j].diag.grad_norm_ratio);
    r.diag.lipschitz_estimate = std::max(r.diag.lipschitz_estimate, local[j].diag.lipschitz_estimate);
  }
  r.global_loss = global_loss(task.shape, r.global, twins, task.l2);
  return r;
}

GradientDiag estimate_smoothness(std::span<const TrajectoryPoint> trajectory) {
  if (trajectory.size() < 2) throw std::invalid_argument("estimate_smoothness: need at least two points");
  GradientDiag d;
  bool any = false;
  for (std::size_t t = 0; t + 1 < trajectory.size(); ++t) {
    const auto& a = trajectory[t];
    const auto& b = trajectory[t + 1];
    if (a.w.size() != b.w.size() || a.grad.size() != b.grad.size() || a.w.size() != a.grad.size())
      throw std::invalid_argument("estimate_smoothness: dimension mismatch");
    double dw = 0.0, dg = 0.0;
    for (std::size_t k = 0; k < a.w.size(); ++k) {
      dw += (b.w[k] - a.w[k]) * (b.w[k] - a.w[k]);
      dg += (b.grad[k] - a.grad[k]) * (b.grad[k] - a.grad[k]);
    }
    if (dw == 0.0) continue;
    d.lipschitz_estimate = std::max(d.lipschitz_estimate, std::sqrt(dg / dw));
    any = true;
  }
  if (!any) throw std::invalid_argument("estimate_smoothness: all consecutive points coincide");
  const double g0 = std::sqrt(squared_norm(trajectory.front().grad));
  d.grad_norm_ratio = g0 > 0.0 ? std::sqrt(squared_norm(trajectory.back().grad)) / g0 : 0.0;
  return d;
}

std::vector<std::uint8_t> serialize_model(const WeightedModel& m) {
  const std::uint64_t dim = m.params.dim();
  std::vector<std::uint8_t> out(sizeof dim + dim * sizeof(double) + sizeof(double));
  std::uint8_t* p = out.data();
  std::memcpy(p, &dim, sizeof dim);
  p += sizeof dim;
  std::memcpy(p, m.params.w.data(), dim * sizeof(double));
  p += dim * sizeof(double);
  std::memcpy(p, &m.data_size, sizeof(double));
  return out;
}

WeightedModel deserialize_model(std::span<const std::uint8_t> bytes) {
  std::uint64_t dim = 0;
  if (bytes.size() < sizeof dim) throw std::invalid_argument("model payload too short");
  std::memcpy(&dim, bytes.data(), sizeof dim);
  if (bytes.size() != sizeof dim + dim * sizeof(double) + sizeof(double))
    throw std::invalid_argument("model payload has the wrong length");
  WeightedModel m;
  m.params.w.resize(dim);
  std::memcpy(m.params.w.data(), bytes.data() + sizeof dim, dim * sizeof(double));
  std::memcpy(&m.data_size, bytes.data() + sizeof dim + dim * sizeof(double), sizeof(double));
  return m;
}

}  // namespace dtfl::fl
