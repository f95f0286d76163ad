#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dtfl/common.hpp"
#include "dtfl/dataset.hpp"
#include "dtfl/model_params.hpp"
#include "dtfl/network.hpp"

namespace dtfl::fl {

enum class ModelKind { logistic, dense };

/// Multinomial logistic regression, or a one-hidden-layer tanh network with a
/// softmax output. Both are trained on cross-entropy.
///
/// Parameter layout:
///   logistic: W[classes][features], b[classes]
///   dense:    W1[hidden][features], b1[hidden], W2[classes][hidden], b2[classes]
struct ModelShape {
  ModelKind kind = ModelKind::logistic;
  std::size_t features = 2;
  std::size_t classes = 2;
  std::size_t hidden = 16;

  std::size_t num_params() const;
};

ModelParams init_params(const ModelShape& shape, Rng& rng);

/// Mean cross-entropy over `data` plus (l2 / 2) ||w||^2. Throws
/// std::invalid_argument on an empty dataset or a dimension mismatch.
double local_loss(const ModelShape& shape, const ModelParams& w, const Dataset& data, double l2 = 0.0);

/// Loss and gradient over the samples in `indices` (all samples when empty).
/// `grad` is overwritten.
double loss_and_gradient(const ModelShape& shape, std::span<const double> w, const Dataset& data,
                         std::span<const std::size_t> indices, std::span<double> grad, double l2 = 0.0);

std::vector<double> predict_proba(const ModelShape& shape, std::span<const double> w, std::span<const double> x);

struct TrainingTask {
  ModelShape shape;
  double learning_rate = 0.5;
  std::size_t local_iters = 1;  // ceil(ln(1 / theta_L))
  double l2 = 0.0;
  std::uint64_t seed = 0;
};

struct GradientDiag {
  double grad_norm_ratio = 0.0;    // ||grad f(w_end)|| / ||grad f(w_start)||
  double lipschitz_estimate = 0.0; // L-hat
};

struct LocalTrainResult {
  ModelParams params;
  GradientDiag diag;
  double loss_before = 0.0;
  double loss_after = 0.0;
};

/// `local_iters` steps of mini-batch gradient descent with ceil(b * D)
/// samples per step. Batches are drawn without replacement within an epoch;
/// a full batch is used in natural order and needs no randomness.
LocalTrainResult local_train(const Dataset& data, const ModelParams& w0, const TrainingTask& task, double batch_frac,
                             Rng& rng);

enum class AggMode { normalized, literal };

struct WeightedModel {
  ModelParams params;
  double data_size = 0.0;
};

/// normalized: sum D_j w_j / sum D_j. literal: (1 / K) sum D_j w_j.
/// The returned data_size is sum D_j in both modes.
WeightedModel bs_aggregate(std::span<const WeightedModel> models, AggMode mode);

/// normalized: data-weighted mean of BS models. literal: (1 / M) sum G_m.
ModelParams global_aggregate(std::span<const WeightedModel> bs_models, AggMode mode);

/// Eq.-(2)-style global loss: mean over non-empty twins of each twin's mean loss.
double global_loss(const ModelShape& shape, const ModelParams& w, std::span<const DigitalTwin> twins, double l2 = 0.0);

/// Trains every assigned twin from `global`. Twin j draws from its own stream
/// derive(task.seed, round, j), so the serial and OpenMP paths agree bitwise.
std::vector<LocalTrainResult> train_twins(std::span<const DigitalTwin> twins, const Association& assoc,
                                          std::span<const double> batch_fracs, const ModelParams& global,
                                          const TrainingTask& task, std::uint64_t round, Exec exec = Exec::serial);

/// Per-BS aggregation of twin results; BSs without twins get an empty model
/// with data_size 0.
std::vector<WeightedModel> aggregate_by_bs(std::span<const LocalTrainResult> local, std::span<const DigitalTwin> twins,
                                           const Association& assoc, AggMode mode);

struct RoundResult {
  ModelParams global;
  double global_loss = 0.0;
  GradientDiag diag;  // worst (max) over twins
  std::vector<WeightedModel> bs_models;
};

/// Distribute, train, aggregate at BSs, aggregate at the MBS, evaluate.
/// Twins' behavior models are replaced by their trained local models.
RoundResult federated_round(std::span<DigitalTwin> twins, const Association& assoc,
                            std::span<const double> batch_fracs, const ModelParams& global, const TrainingTask& task,
                            std::uint64_t round, AggMode mode = AggMode::normalized, Exec exec = Exec::serial);

struct TrajectoryPoint {
  std::vector<double> w;
  std::vector<double> grad;
};

/// L-hat = max_t ||g_{t+1} - g_t|| / ||w_{t+1} - w_t||; the ratio is taken
/// from the first and last points. Coincident consecutive points are skipped; throws
/// std::invalid_argument if no usable pair remains.
GradientDiag estimate_smoothness(std::span<const TrajectoryPoint> trajectory);

/// Payload layout (little endian): u64 dim, dim f64 values, f64 data weight.
std::vector<std::uint8_t> serialize_model(const WeightedModel& m);
WeightedModel deserialize_model(std::span<const std::uint8_t> bytes);

}  // namespace dtfl::fl
