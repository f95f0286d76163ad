#include <doctest.h>

#include <numeric>

#include "dtfl/fl.hpp"
#include "dtfl/latency.hpp"
#include "support.hpp"

using namespace dtfl;
using namespace dtfl::fl;

namespace {

Dataset balanced(std::size_t n, std::size_t features) {
  Dataset d;
  d.num_features = features;
  d.num_classes = 2;
  std::vector<double> x(features, 0.5);
  for (std::size_t i = 0; i < n; ++i) d.push_back(x, static_cast<int>(i % 2));
  return d;
}

std::vector<DigitalTwin> make_twins(std::size_t n, std::size_t per_twin, std::uint64_t seed) {
  Rng rng(seed);
  auto pool = make_gaussian_clusters(n * per_twin, 2, 2, 2.0, rng);
  std::vector<std::size_t> sizes(n, per_twin);
  auto parts = partition_iid(pool, sizes, rng);
  std::vector<DigitalTwin> twins(n);
  for (std::size_t i = 0; i < n; ++i) {
    twins[i].id = i;
    twins[i].owner_user = i;
    twins[i].data = std::move(parts[i]);
  }
  return twins;
}

double max_rel_grad_error(const ModelShape& shape, const Dataset& data, double l2, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> w(shape.num_params());
  for (double& v : w) v = g(rng);
  std::vector<double> grad(w.size()), scratch(w.size());
  loss_and_gradient(shape, w, data, {}, grad, l2);
  auto f = [&](std::span<const double> p) { return loss_and_gradient(shape, p, data, {}, scratch, l2); };
  double worst = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k)
    worst = std::max(worst, testing::rel_err(grad[k], testing::central_diff(f, w, k, 1e-5), 1e-8));
  return worst;
}

}  // namespace

TEST_CASE("logistic loss at w = 0 is ln 2") {
  ModelShape shape{ModelKind::logistic, 3, 2};
  ModelParams w{std::vector<double>(shape.num_params(), 0.0)};
  CHECK(local_loss(shape, w, balanced(10, 3)) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK_THROWS_AS(local_loss(shape, w, Dataset{}), std::invalid_argument);
  ModelParams bad{std::vector<double>(2, 0.0)};
  CHECK_THROWS_AS(local_loss(shape, bad, balanced(4, 3)), std::invalid_argument);
}

TEST_CASE("separated data with a large-margin model has tiny loss") {
  Dataset d;
  d.num_features = 1;
  d.num_classes = 2;
  for (int i = 0; i < 20; ++i) {
    const double x = 1.0 + 0.1 * i;
    d.push_back(std::vector<double>{x}, 1);
    d.push_back(std::vector<double>{-x}, 0);
  }
  ModelShape shape{ModelKind::logistic, 1, 2};
  // layout W[class][feature], b[class]
  ModelParams w{{-10.0, 10.0, 0.0, 0.0}};
  CHECK(local_loss(shape, w, d) < 1e-3);
}

TEST_CASE("local_train: zero learning rate and hand gradient step") {
  Rng rng(1);
  auto twins = make_twins(1, 30, 5);
  ModelShape shape{ModelKind::logistic, 2, 2};
  Rng init(3);
  const auto w0 = init_params(shape, init);
  TrainingTask task{shape, 0.0, 3, 0.0, 9};
  auto r = local_train(twins[0].data, w0, task, 1.0, rng);
  CHECK(r.params == w0);

  // 1-D convex surrogate: one feature, one full-batch step equals w0 - eta grad.
  task.learning_rate = 0.3;
  task.local_iters = 1;
  r = local_train(twins[0].data, w0, task, 1.0, rng);
  std::vector<double> grad(w0.dim());
  loss_and_gradient(shape, w0.w, twins[0].data, {}, grad);
  for (std::size_t k = 0; k < w0.dim(); ++k) CHECK(r.params.w[k] == doctest::Approx(w0.w[k] - 0.3 * grad[k]).epsilon(1e-14));
}

TEST_CASE("hand gradient of a one-sample logistic model") {
  // Two classes, one feature x, weights (w0, w1), biases 0: p1 = sigma((w1 - w0) x).
  Dataset d;
  d.num_features = 1;
  d.num_classes = 2;
  d.push_back(std::vector<double>{2.0}, 1);
  ModelShape shape{ModelKind::logistic, 1, 2};
  const std::vector<double> w{0.1, 0.4, 0.0, 0.0};
  std::vector<double> grad(4);
  const double loss = loss_and_gradient(shape, w, d, {}, grad);
  const double p1 = 1.0 / (1.0 + std::exp(-(0.4 - 0.1) * 2.0));
  CHECK(loss == doctest::Approx(-std::log(p1)).epsilon(1e-14));
  CHECK(grad[0] == doctest::Approx((1.0 - p1) * 2.0).epsilon(1e-13));
  CHECK(grad[1] == doctest::Approx((p1 - 1.0) * 2.0).epsilon(1e-13));
  CHECK(grad[2] == doctest::Approx(1.0 - p1).epsilon(1e-13));
  CHECK(grad[3] == doctest::Approx(p1 - 1.0).epsilon(1e-13));
}

TEST_CASE("full-batch descent on logistic loss is monotone") {
  auto twins = make_twins(1, 60, 8);
  ModelShape shape{ModelKind::logistic, 2, 2};
  ModelParams w{std::vector<double>(shape.num_params(), 0.0)};
  TrainingTask task{shape, 0.1, 1, 0.0, 0};
  Rng rng(0);
  double prev = local_loss(shape, w, twins[0].data);
  for (int t = 0; t < 50; ++t) {
    w = local_train(twins[0].data, w, task, 1.0, rng).params;
    const double now = local_loss(shape, w, twins[0].data);
    REQUIRE(now <= prev);
    prev = now;
  }
}

TEST_CASE("property: analytic gradients match central differences") {
  Rng rng(42);
  auto data = make_gaussian_clusters(12, 3, 3, 2.0, rng);
  const ModelShape logistic{ModelKind::logistic, 3, 3};
  const ModelShape dense{ModelKind::dense, 3, 3, 5};
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    worst = std::max(worst, max_rel_grad_error(logistic, data, k % 2 ? 0.01 : 0.0, rng));
    worst = std::max(worst, max_rel_grad_error(dense, data, k % 2 ? 0.01 : 0.0, rng));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("bs_aggregate") {
  WeightedModel a{{{0.0}}, 3.0}, b{{{2.0}}, 3.0};
  std::vector<WeightedModel> one{a};
  CHECK(bs_aggregate(one, AggMode::normalized).params == a.params);
  std::vector<WeightedModel> two{a, b};
  CHECK(bs_aggregate(two, AggMode::normalized).params.w[0] == 1.0);
  CHECK(bs_aggregate(two, AggMode::normalized).data_size == 6.0);
  std::vector<WeightedModel> lit{{{{1.0}}, 2.0}, {{{1.0}}, 4.0}};
  CHECK(bs_aggregate(lit, AggMode::literal).params.w[0] == 3.0);
}

TEST_CASE("global_aggregate") {
  std::vector<WeightedModel> same{{{{1.5, -2.0}}, 4.0}, {{{1.5, -2.0}}, 9.0}};
  CHECK(global_aggregate(same, AggMode::normalized).w[0] == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(global_aggregate(same, AggMode::literal) == ModelParams{{1.5, -2.0}});
  std::vector<WeightedModel> two{{{{0.0}}, 1.0}, {{{4.0}}, 3.0}};
  CHECK(global_aggregate(two, AggMode::literal).w[0] == 2.0);
  CHECK(global_aggregate(two, AggMode::normalized).w[0] == 3.0);
}

TEST_CASE("property: aggregation is order invariant and homogeneous") {
  Rng rng(9);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(1.0, 50.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<WeightedModel> ms(5);
    for (auto& m : ms) {
      m.params.w.resize(4);
      for (double& v : m.params.w) v = g(rng);
      m.data_size = std::floor(u(rng));
    }
    for (auto mode : {AggMode::normalized, AggMode::literal}) {
      const auto ref = bs_aggregate(ms, mode);
      auto shuffled = ms;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      const auto perm = bs_aggregate(shuffled, mode);
      auto scaled = ms;
      for (auto& m : scaled)
        for (double& v : m.params.w) v *= 2.5;
      const auto hom = bs_aggregate(scaled, mode);
      for (std::size_t k = 0; k < 4; ++k) {
        CHECK(perm.params.w[k] == doctest::Approx(ref.params.w[k]).epsilon(1e-13));
        CHECK(hom.params.w[k] == doctest::Approx(2.5 * ref.params.w[k]).epsilon(1e-13));
      }
    }
  }
}

TEST_CASE("property: hierarchical aggregation equals the flat weighted mean") {
  Rng rng(123);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> bs(0, 2);
  std::uniform_real_distribution<double> u(1.0, 80.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<WeightedModel> twins(10);
    for (auto& t : twins) {
      t.params.w.resize(6);
      for (double& v : t.params.w) v = g(rng);
      t.data_size = std::floor(u(rng));
    }
    std::vector<std::vector<WeightedModel>> groups(3);
    for (const auto& t : twins) groups[bs(rng)].push_back(t);
    std::vector<WeightedModel> bs_models;
    for (const auto& grp : groups)
      if (!grp.empty()) bs_models.push_back(bs_aggregate(grp, AggMode::normalized));
    const auto two_level = global_aggregate(bs_models, AggMode::normalized);
    double total = 0.0;
    std::vector<double> flat(6, 0.0);
    for (const auto& t : twins) {
      total += t.data_size;
      for (std::size_t k = 0; k < 6; ++k) flat[k] += t.data_size * t.params.w[k];
    }
    for (std::size_t k = 0; k < 6; ++k) CHECK(std::abs(two_level.w[k] - flat[k] / total) <= 1e-12);
  }
}

TEST_CASE("federated_round degenerates to local_train with one twin") {
  auto twins = make_twins(1, 40, 2);
  Association assoc({40.0}, 1);
  assoc.assign(0, 0);
  ModelShape shape{ModelKind::logistic, 2, 2};
  TrainingTask task{shape, 0.5, 2, 0.0, 17};
  Rng init(4);
  const auto w0 = init_params(shape, init);
  const std::vector<double> b{0.5};
  const auto local = train_twins(twins, assoc, b, w0, task, 3);
  const auto round = federated_round(twins, assoc, b, w0, task, 3);
  REQUIRE(round.global.dim() == w0.dim());
  for (std::size_t k = 0; k < w0.dim(); ++k) CHECK(round.global.w[k] == doctest::Approx(local[0].params.w[k]).epsilon(1e-15));
}

TEST_CASE("zero local iterations leave the model and loss unchanged") {
  auto twins = make_twins(4, 20, 6);
  const auto assoc = Association::round_robin(std::vector<double>(4, 20.0), 2);
  ModelShape shape{ModelKind::logistic, 2, 2};
  TrainingTask task{shape, 0.5, local_iterations(1.0), 0.0, 1};
  Rng init(4);
  const auto w0 = init_params(shape, init);
  const double before = global_loss(shape, w0, twins);
  const auto r = federated_round(twins, assoc, std::vector<double>(4, 1.0), w0, task, 0);
  CHECK(r.global.w == w0.w);
  CHECK(r.global_loss == before);
}

TEST_CASE("federated rounds reduce loss and are deterministic and exec independent") {
  auto twins = make_twins(20, 25, 11);
  const auto assoc = Association::round_robin(std::vector<double>(20, 25.0), 5);
  ModelShape shape{ModelKind::logistic, 2, 2};
  TrainingTask task{shape, 0.5, 1, 0.0, 5};
  ModelParams w{std::vector<double>(shape.num_params(), 0.0)};
  const double l0 = global_loss(shape, w, twins);
  auto twins2 = twins;
  ModelParams w2 = w;
  const std::vector<double> b(20, 0.6);
  for (std::uint64_t r = 0; r < 10; ++r) {
    auto a = federated_round(twins, assoc, b, w, task, r, AggMode::normalized, Exec::serial);
    auto c = federated_round(twins2, assoc, b, w2, task, r, AggMode::normalized, Exec::parallel);
    REQUIRE(a.global.w == c.global.w);
    REQUIRE(a.global_loss == c.global_loss);
    w = a.global;
    w2 = c.global;
  }
  CHECK(global_loss(shape, w, twins) < l0);
}

TEST_CASE("smoothness estimate on logistic trajectories") {
  auto twins = make_twins(1, 80, 21);
  const Dataset& d = twins[0].data;
  ModelShape shape{ModelKind::logistic, 2, 2};
  std::vector<TrajectoryPoint> traj;
  std::vector<double> w(shape.num_params(), 0.0), g(w.size());
  const double eta = 1.0;
  for (int t = 0; t < 400; ++t) {
    loss_and_gradient(shape, w, d, {}, g);
    traj.push_back({w, g});
    for (std::size_t k = 0; k < w.size(); ++k) w[k] -= eta * g[k];
  }
  double max_norm2 = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    double s = 1.0;  // bias feature
    for (double v : d.row(i)) s += v * v;
    max_norm2 = std::max(max_norm2, s);
  }
  const auto diag = estimate_smoothness(traj);
  // Two-class softmax: Hessian is (diag p - p p^T) kron x x^T, whose top
  // eigenvalue is 2 p (1 - p) |x|^2 <= 0.5 |x|^2, twice the binary 0.25 bound.
  CHECK(diag.lipschitz_estimate <= 0.5 * max_norm2 + 1e-12);
  CHECK(diag.lipschitz_estimate > 0.0);
  CHECK(diag.grad_norm_ratio <= 0.5);

  std::vector<TrajectoryPoint> same{{w, g}, {w, g}};
  CHECK_THROWS_AS(estimate_smoothness(same), std::invalid_argument);
}

TEST_CASE("model serialization round trip") {
  WeightedModel m{{{1.0, -2.5, 3.25}}, 17.0};
  const auto bytes = serialize_model(m);
  const auto back = deserialize_model(bytes);
  CHECK(back.params == m.params);
  CHECK(back.data_size == 17.0);
  CHECK_THROWS(deserialize_model(std::span<const std::uint8_t>(bytes).first(bytes.size() - 1)));
}

TEST_CASE("dataset io round trip") {
  Rng rng(5);
  const auto d = make_gaussian_clusters(15, 3, 3, 1.0, rng);
  const auto dir = std::filesystem::temp_directory_path() / "dtfl_unit_dataset";
  std::filesystem::create_directories(dir);
  write_dataset_binary(d, dir / "d.bin");
  write_dataset_csv(d, dir / "d.csv");
  const auto b = read_dataset_binary(dir / "d.bin");
  const auto c = read_dataset_csv(dir / "d.csv");
  CHECK(b.features == d.features);
  CHECK(b.labels == d.labels);
  CHECK(c.labels == d.labels);
  for (std::size_t k = 0; k < d.features.size(); ++k) CHECK(c.features[k] == doctest::Approx(d.features[k]).epsilon(1e-15));
  std::vector<std::size_t> sizes{5, 20};
  CHECK_THROWS_AS(partition_iid(d, sizes, rng), std::invalid_argument);
}
