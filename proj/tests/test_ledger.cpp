#include <doctest.h>

#include <sstream>

#include "dtfl/ledger.hpp"
#include "support.hpp"

using namespace dtfl;
using namespace dtfl::ledger;

namespace {

std::vector<std::uint8_t> bytes_of(std::initializer_list<int> v) { return {v.begin(), v.end()}; }

struct Fixture {
  Dataset holdout;
  fl::ModelShape shape{fl::ModelKind::logistic, 2, 2};
  ModelParams trained;
  ModelVerifier verifier;

  Fixture() {
    Rng rng(31);
    holdout = make_gaussian_clusters(300, 2, 2, 3.0, rng);
    std::vector<double> w(shape.num_params(), 0.0), g(w.size());
    for (int t = 0; t < 200; ++t) {
      fl::loss_and_gradient(shape, w, holdout, {}, g);
      for (std::size_t k = 0; k < w.size(); ++k) w[k] -= 0.5 * g[k];
    }
    trained.w = w;
    verifier = ModelVerifier{&holdout, shape, trained, 1.05, 0.0};
  }

  std::vector<std::uint8_t> payload(const ModelParams& m) const { return fl::serialize_model({m, 10.0}); }
};

}  // namespace

TEST_CASE("initial stakes") {
  const auto eq = initial_stakes(Association::round_robin(std::vector<double>(5, 10.0), 5), 100.0);
  for (double s : eq.coins) CHECK(s == 20.0);
  CHECK(eq.total() == 100.0);

  Association all({3, 4, 5}, 3);
  for (std::size_t i = 0; i < 3; ++i) all.assign(i, 1);
  CHECK(initial_stakes(all, 100.0).coins == std::vector<double>{0.0, 100.0, 0.0});

  Association frac({50, 30, 20}, 3);
  for (std::size_t i = 0; i < 3; ++i) frac.assign(i, i);
  CHECK(initial_stakes(frac, 1000.0).coins == std::vector<double>{500.0, 300.0, 200.0});
}

TEST_CASE("property: genesis stakes sum to the pool exactly") {
  Rng rng(8);
  std::uniform_int_distribution<int> d(1, 500);
  std::uniform_int_distribution<std::size_t> bs(0, 4);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> sizes(13);
    for (double& s : sizes) s = d(rng);
    Association a(sizes, 5);
    for (std::size_t i = 0; i < 13; ++i) a.assign(i, bs(rng));
    CHECK(initial_stakes(a, 100.0).total() == 100.0);
  }
}

TEST_CASE("producer election") {
  StakeTable eq{{20, 20, 20, 20, 20}, 100};
  const auto self = self_ballots(eq);
  CHECK(elect_producers(eq, self, 5) == std::vector<std::size_t>{0, 1, 2, 3, 4});
  CHECK(elect_producers(eq, self, 3) == std::vector<std::size_t>{0, 1, 2});

  StakeTable s{{500, 300, 200}, 1000};
  std::vector<Ballot> all_for_2;
  for (std::size_t v = 0; v < 3; ++v) all_for_2.push_back({v, {{2, s.coins[v]}}});
  CHECK(elect_producers(s, all_for_2, 1) == std::vector<std::size_t>{2});

  std::vector<Ballot> greedy{{0, {{1, 600.0}}}};
  CHECK_THROWS_AS(elect_producers(s, greedy, 1), LedgerError);
}

TEST_CASE("mempool submit: accept, duplicate, tampered") {
  KeyRing keys(3, 1);
  Mempool pool;
  const auto tx = make_transaction(RecordKind::training_model, 1, 0.0, bytes_of({1, 2, 3}), 1000000, keys);
  pool.submit(tx, keys);
  CHECK(pool.size() == 1);
  try {
    pool.submit(tx, keys);
    FAIL("duplicate accepted");
  } catch (const LedgerError& e) {
    CHECK(e.code() == LedgerError::Code::duplicate);
  }
  auto bad = make_transaction(RecordKind::training_model, 1, 1.0, bytes_of({1, 2, 3}), 1000000, keys);
  bad.payload[0] ^= 0x01;
  try {
    pool.submit(bad, keys);
    FAIL("tampered tx accepted");
  } catch (const LedgerError& e) {
    CHECK(e.code() == LedgerError::Code::bad_signature);
  }
  CHECK(pool.size() == 1);
  auto zero = make_transaction(RecordKind::twin_data, 0, 1.0, bytes_of({9}), 0, keys);
  CHECK_THROWS_AS(pool.submit(zero, keys), LedgerError);
}

TEST_CASE("block production") {
  KeyRing keys(3, 1);
  Mempool pool;
  for (int k = 0; k < 3; ++k)
    pool.submit(make_transaction(RecordKind::twin_data, k, 0.1 * k, bytes_of({k}), 1000000, keys), keys);
  ProducerSchedule sched{{0, 1, 2}};
  Chain chain;
  CHECK_THROWS_AS(produce_block(1, 0, sched, pool, 0.0, 1.0, chain, 1000.0), LedgerError);
  const auto b = produce_block(0, 0, sched, pool, 0.0, 1.0, chain, 1000.0);
  CHECK(b.bits() == 3.001e6);
  CHECK(b.txs.size() == 3);
  CHECK(pool.empty());
  CHECK(b.prev_hash == chain.head_hash());
  CHECK(b.merkle == merkle_root(b.txs));
}

TEST_CASE("block interval policy") {
  CHECK(block_interval_policy(0.7, 1) == 0.7);
  CHECK(block_interval_policy(0.4, 5) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK_THROWS(block_interval_policy(0.4, 0));
}

TEST_CASE("verify_local_model") {
  Fixture f;
  KeyRing keys(2, 3);
  const auto self = make_transaction(RecordKind::training_model, 0, 0.0, f.payload(f.trained), 64, keys);
  auto v = f.verifier;
  v.threshold = 1.0;
  CHECK(verify_local_model(self, v));

  Rng rng(99);
  std::normal_distribution<double> g(0.0, 5.0);
  ModelParams noise{std::vector<double>(f.trained.dim())};
  for (double& x : noise.w) x = g(rng);
  const auto bad = make_transaction(RecordKind::training_model, 0, 0.0, f.payload(noise), 64, keys);
  CHECK_FALSE(verify_local_model(bad, f.verifier));

  ModelParams nan{std::vector<double>(f.trained.dim(), std::nan(""))};
  const auto nan_tx = make_transaction(RecordKind::training_model, 0, 0.0, f.payload(nan), 64, keys);
  CHECK_THROWS_AS(verify_local_model(nan_tx, f.verifier), std::invalid_argument);
  const auto data_tx = make_transaction(RecordKind::twin_data, 0, 0.0, bytes_of({1}), 8, keys);
  CHECK_THROWS_AS(verify_local_model(data_tx, f.verifier), std::invalid_argument);
}

TEST_CASE("validate_block: valid, tampered, broken link") {
  Fixture f;
  KeyRing keys(3, 4);
  LedgerConfig cfg;
  const std::vector<std::size_t> validators{0, 1, 2};
  ProducerSchedule sched{validators};
  Chain chain;
  Mempool pool;
  for (std::uint32_t a = 0; a < 3; ++a)
    pool.submit(make_transaction(RecordKind::training_model, a, 0.0, f.payload(f.trained), 64, keys), keys);
  auto block = produce_block(0, 0, sched, pool, 0.0, 1.0, chain, 1000.0);

  const auto ok = validate_block(block, chain, validators, keys, &f.verifier, cfg, 3);
  CHECK(ok.accepted);
  CHECK(ok.stake_delta == std::vector<double>{1.0, 1.0, 1.0});

  auto tampered = block;
  tampered.txs[1].payload[10] ^= 0x40;
  tampered.merkle = merkle_root(tampered.txs);
  const auto t = validate_block(tampered, chain, validators, keys, &f.verifier, cfg, 3);
  CHECK(t.accepted);
  CHECK_FALSE(t.tx_valid[1]);
  const auto cheat = tampered.txs[1].author;
  for (std::size_t a = 0; a < 3; ++a) CHECK(t.stake_delta[a] == (a == cheat ? 0.0 : 1.0));

  auto broken = block;
  broken.prev_hash[0] ^= 1;
  CHECK_FALSE(validate_block(broken, chain, validators, keys, &f.verifier, cfg, 3).accepted);

  const std::vector<std::size_t> faulty{1, 2};
  CHECK_FALSE(validate_block(block, chain, validators, keys, &f.verifier, cfg, 3, faulty).accepted);
}

TEST_CASE("ledger: round robin schedule, conservation and chain replay") {
  Fixture f;
  LedgerConfig cfg;
  Ledger led(5, 3, 1000.0, 12, cfg);
  led.genesis(Association::round_robin(std::vector<double>(10, 7.0), 5));
  CHECK(led.stakes().total() == cfg.stake_pool);
  std::vector<std::size_t> produced;
  double expected_total = cfg.stake_pool;
  for (std::uint64_t slot = 0; slot < 12; ++slot) {
    for (std::uint32_t a = 0; a < 5; ++a)
      led.submit(led.sign(RecordKind::training_model, a, slot + 0.5, f.payload(f.trained), 64));
    const auto rep = led.run_slot(slot, static_cast<double>(slot), 1.0, &f.verifier);
    REQUIRE(rep.outcome.accepted);
    produced.push_back(rep.block.producer);
    for (double d : rep.outcome.stake_delta) expected_total += d;
    CHECK(led.stakes().total() == doctest::Approx(expected_total).epsilon(1e-15));
  }
  const auto& order = led.schedule().producers;
  for (std::size_t k = 0; k < produced.size(); ++k) CHECK(produced[k] == order[k % 3]);
  for (std::size_t p : order) CHECK(std::count(produced.begin(), produced.end(), p) == 4);

  const auto path = std::filesystem::temp_directory_path() / "dtfl_unit_chain.log";
  led.chain().export_log(path);
  const auto back = Chain::import_log(path);
  CHECK(back.head_hash() == led.chain().head_hash());
  Chain replay;
  for (const auto& b : led.chain().blocks()) replay.append(b);
  CHECK(replay.head_hash() == led.chain().head_hash());
  std::ostringstream os;
  led.chain().write_summary(os);
  CHECK(os.str().find("height") != std::string::npos);

  auto bad = led.chain().blocks()[3];
  Chain fork;
  CHECK_THROWS_AS(fork.append(bad), LedgerError);
}

TEST_CASE("block encoding round trip") {
  KeyRing keys(2, 7);
  Block b;
  b.height = 4;
  b.producer = 1;
  b.header_bits = 1000;
  b.txs.push_back(make_transaction(RecordKind::twin_model, 1, 0.5, bytes_of({4, 5}), 16, keys));
  b.merkle = merkle_root(b.txs);
  const auto back = decode_block(encode_block(b));
  CHECK(back.hash() == b.hash());
  CHECK(back.txs[0].digest() == b.txs[0].digest());
  CHECK(std::string(to_string(RecordKind::training_model)) != std::string(to_string(RecordKind::twin_data)));
}
