#include "dtfl/ledger.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>

namespace dtfl::ledger {

const char* to_string(RecordKind k) {
  switch (k) {
    case RecordKind::twin_model: return "twin-model";
    case RecordKind::twin_data: return "twin-data";
    case RecordKind::training_model: return "training-model";
  }
  return "?";
}

namespace {

void encode_tx(ByteWriter& w, const Transaction& tx, bool with_signature) {
  w.u8(static_cast<std::uint8_t>(tx.kind));
  w.u32(tx.author);
  w.f64(tx.timestamp);
  w.u64(tx.payload_bits);
  w.u64(tx.payload.size());
  w.bytes(tx.payload);
  if (with_signature) w.digest(tx.signature);
}

Transaction decode_tx(ByteReader& r) {
  Transaction tx;
  const auto kind = r.u8();
  if (kind > 2) throw LedgerError(LedgerError::Code::bad_log, "unknown record kind");
  tx.kind = static_cast<RecordKind>(kind);
  tx.author = r.u32();
  tx.timestamp = r.f64();
  tx.payload_bits = r.u64();
  tx.payload = r.bytes(r.u64());
  tx.signature = r.digest();
  return tx;
}

}  // namespace

std::vector<std::uint8_t> Transaction::signing_bytes() const {
  ByteWriter w;
  encode_tx(w, *this, false);
  return w.take();
}

Digest Transaction::digest() const {
  ByteWriter w;
  encode_tx(w, *this, true);
  return sha256(w.data());
}

KeyRing::KeyRing(std::size_t num_bs, std::uint64_t seed) {
  for (std::size_t i = 0; i < num_bs; ++i) {
    ByteWriter w;
    w.u64(derive_seed(seed, i));
    w.u64(i);
    keys_.push_back(sha256(w.data()));
  }
}

Digest KeyRing::sign(const Transaction& tx) const {
  if (tx.author >= keys_.size()) throw LedgerError(LedgerError::Code::invalid, "unknown author");
  return hmac_sha256(keys_[tx.author], tx.signing_bytes());
}

bool KeyRing::verify(const Transaction& tx) const {
  if (tx.author >= keys_.size()) return false;
  return hmac_sha256(keys_[tx.author], tx.signing_bytes()) == tx.signature;
}

Transaction make_transaction(RecordKind kind, std::uint32_t author, double timestamp,
                             std::vector<std::uint8_t> payload, std::uint64_t payload_bits, const KeyRing& keys) {
  Transaction tx;
  tx.kind = kind;
  tx.author = author;
  tx.timestamp = timestamp;
  tx.payload_bits = payload_bits;
  tx.payload = std::move(payload);
  tx.signature = keys.sign(tx);
  return tx;
}

Digest Mempool::submit(Transaction tx, const KeyRing& keys) {
  if (tx.payload_bits == 0) throw LedgerError(LedgerError::Code::invalid, "payload_bits must be > 0");
  if (!keys.verify(tx)) throw LedgerError(LedgerError::Code::bad_signature, "transaction signature does not verify");
  const Digest d = tx.digest();
  if (!seen_.insert(d).second) throw LedgerError(LedgerError::Code::duplicate, "duplicate transaction " + to_hex(d));
  txs_.push_back(std::move(tx));
  return d;
}

std::vector<Transaction> Mempool::take_until(double t_end) {
  std::vector<Transaction> taken, kept;
  for (auto& tx : txs_) (tx.timestamp <= t_end ? taken : kept).push_back(std::move(tx));
  txs_ = std::move(kept);
  std::vector<Digest> digests;
  for (const auto& tx : taken) digests.push_back(tx.digest());
  std::vector<std::size_t> order(taken.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (taken[a].timestamp != taken[b].timestamp) return taken[a].timestamp < taken[b].timestamp;
    return digests[a] < digests[b];
  });
  std::vector<Transaction> out;
  out.reserve(taken.size());
  for (std::size_t i : order) out.push_back(std::move(taken[i]));
  return out;
}

Digest merkle_root(std::span<const Transaction> txs) {
  std::vector<Digest> level;
  for (const auto& tx : txs) level.push_back(tx.digest());
  if (level.empty()) return sha256({});
  while (level.size() > 1) {
    std::vector<Digest> next;
    for (std::size_t i = 0; i < level.size(); i += 2) {
      ByteWriter w;
      w.digest(level[i]);
      w.digest(i + 1 < level.size() ? level[i + 1] : level[i]);
      next.push_back(sha256(w.data()));
    }
    level = std::move(next);
  }
  return level.front();
}

double Block::bits() const {
  double s = header_bits;
  for (const auto& tx : txs) s += static_cast<double>(tx.payload_bits);
  return s;
}

Digest Block::hash() const {
  ByteWriter w;
  w.u64(height);
  w.u32(producer);
  w.digest(prev_hash);
  w.f64(slot_start);
  w.f64(interval);
  w.f64(header_bits);
  w.digest(merkle);
  return sha256(w.data());
}

double StakeTable::total() const {
  double s = 0.0;
  for (double c : coins) s += c;
  return s;
}

StakeTable initial_stakes(const Association& assoc, double initial_pool) {
  double total = 0.0;
  for (double d : assoc.data_sizes()) total += d;
  if (!(total > 0.0)) throw std::invalid_argument("initial_stakes: total data is zero");
  if (!(initial_pool >= 0.0) || !std::isfinite(initial_pool)) throw std::invalid_argument("initial_stakes: bad pool");
  StakeTable t;
  t.initial_pool = initial_pool;
  t.coins.assign(assoc.num_bs(), 0.0);
  if (initial_pool == 0.0) return t;
  // Shares are whole multiples of the pool's ulp, apportioned by largest
  // remainder, so every partial sum is exact and total() equals the pool.
  const double quantum = std::nextafter(initial_pool, HUGE_VAL) - initial_pool;
  const double units = initial_pool / quantum;
  std::vector<double> whole(t.coins.size()), frac(t.coins.size());
  double assigned = 0.0;
  for (std::size_t i = 0; i < t.coins.size(); ++i) {
    const double exact = assoc.data_on(i) / total * initial_pool / quantum;
    whole[i] = std::floor(exact);
    frac[i] = exact - whole[i];
    assigned += whole[i];
  }
  std::vector<std::size_t> order(t.coins.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t k = 0; assigned < units; k = (k + 1) % order.size(), assigned += 1.0) whole[order[k]] += 1.0;
  for (std::size_t i = 0; i < t.coins.size(); ++i) t.coins[i] = whole[i] * quantum;
  return t;
}

std::vector<Ballot> self_ballots(const StakeTable& stakes) {
  std::vector<Ballot> out;
  for (std::size_t i = 0; i < stakes.coins.size(); ++i) out.push_back({i, {{i, stakes.coins[i]}}});
  return out;
}

std::vector<std::size_t> elect_producers(const StakeTable& stakes, std::span<const Ballot> ballots,
                                         std::size_t num_producers) {
  const std::size_t m = stakes.coins.size();
  if (num_producers == 0 || num_producers > m) throw std::invalid_argument("need 1 <= M_p <= M");
  std::vector<double> tally(m, 0.0);
  for (const auto& b : ballots) {
    if (b.voter >= m) throw std::out_of_range("unknown voter");
    double spent = 0.0;
    for (const auto& [cand, coins] : b.votes) {
      if (cand >= m) throw std::out_of_range("unknown candidate");
      if (!(coins >= 0.0)) throw LedgerError(LedgerError::Code::invalid, "negative vote");
      spent += coins;
    }
    if (spent > stakes.coins[b.voter] * (1.0 + 1e-12))
      throw LedgerError(LedgerError::Code::overspent_ballot, "ballot of BS " + std::to_string(b.voter) + " overspends");
    for (const auto& [cand, coins] : b.votes) tally[cand] += coins;
  }
  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < m; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return tally[a] > tally[b]; });
  order.resize(num_producers);
  return order;
}

double block_interval_policy(double local_training_period, std::size_t multiplier) {
  if (multiplier < 1) throw std::invalid_argument("block interval multiplier must be >= 1");
  if (!(local_training_period >= 0.0)) throw std::invalid_argument("training period must be >= 0");
  return static_cast<double>(multiplier) * local_training_period;
}

Digest Chain::head_hash() const { return blocks_.empty() ? Digest{} : blocks_.back().hash(); }

void Chain::append(Block block) {
  if (block.height != blocks_.size() || block.prev_hash != head_hash())
    throw LedgerError(LedgerError::Code::broken_link, "block does not extend the chain tip");
  blocks_.push_back(std::move(block));
}

std::vector<std::uint8_t> encode_block(const Block& b) {
  ByteWriter w;
  w.u64(b.height);
  w.u32(b.producer);
  w.digest(b.prev_hash);
  w.f64(b.slot_start);
  w.f64(b.interval);
  w.f64(b.header_bits);
  w.digest(b.merkle);
  w.u32(static_cast<std::uint32_t>(b.txs.size()));
  for (const auto& tx : b.txs) encode_tx(w, tx, true);
  return w.take();
}

Block decode_block(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  Block b;
  b.height = r.u64();
  b.producer = r.u32();
  b.prev_hash = r.digest();
  b.slot_start = r.f64();
  b.interval = r.f64();
  b.header_bits = r.f64();
  b.merkle = r.digest();
  const std::uint32_t n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) b.txs.push_back(decode_tx(r));
  if (!r.done()) throw LedgerError(LedgerError::Code::bad_log, "trailing bytes in block record");
  return b;
}

void Chain::export_log(const std::filesystem::path& path) const {
  ByteWriter w;
  w.bytes(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>("DTLG"), 4));
  w.u32(1);
  w.u64(blocks_.size());
  for (const auto& b : blocks_) {
    auto bytes = encode_block(b);
    w.u64(bytes.size());
    w.bytes(bytes);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(w.data().data()), static_cast<std::streamsize>(w.data().size()));
}

Chain Chain::import_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    ByteReader r(data);
    auto magic = r.bytes(4);
    if (std::string(magic.begin(), magic.end()) != "DTLG" || r.u32() != 1)
      throw LedgerError(LedgerError::Code::bad_log, "not a ledger log");
    const std::uint64_t n = r.u64();
    Chain c;
    for (std::uint64_t i = 0; i < n; ++i) {
      auto bytes = r.bytes(r.u64());
      Block b = decode_block(bytes);
      if (merkle_root(b.txs) != b.merkle) throw LedgerError(LedgerError::Code::bad_log, "merkle root mismatch");
      c.append(std::move(b));
    }
    if (!r.done()) throw LedgerError(LedgerError::Code::bad_log, "trailing bytes in log");
    return c;
  } catch (const LedgerError&) {
    throw;
  } catch (const std::runtime_error& e) {
    throw LedgerError(LedgerError::Code::bad_log, e.what());
  }
}

void Chain::write_summary(std::ostream& out) const {
  out << "height producer S_B_bits txs kinds hash\n";
  for (const auto& b : blocks_) {
    std::size_t counts[3] = {0, 0, 0};
    for (const auto& tx : b.txs) ++counts[static_cast<int>(tx.kind)];
    out << b.height << ' ' << b.producer << ' ' << std::setprecision(12) << b.bits() << ' ' << b.txs.size() << ' '
        << "twin-model:" << counts[0] << ",twin-data:" << counts[1] << ",training-model:" << counts[2] << ' '
        << to_hex(b.hash()).substr(0, 16) << '\n';
  }
}

Block produce_block(std::size_t producer, std::uint64_t slot, const ProducerSchedule& schedule, Mempool& mempool,
                    double slot_start, double interval, const Chain& chain, double header_bits) {
  if (schedule.producers.empty()) throw LedgerError(LedgerError::Code::invalid, "no producers elected");
  if (schedule.producer_for(slot) != producer)
    throw LedgerError(LedgerError::Code::out_of_turn, "BS " + std::to_string(producer) + " is not scheduled for slot " +
                                                          std::to_string(slot));
  Block b;
  b.height = chain.height();
  b.producer = static_cast<std::uint32_t>(producer);
  b.prev_hash = chain.head_hash();
  b.slot_start = slot_start;
  b.interval = interval;
  b.header_bits = header_bits;
  b.txs = mempool.take_until(slot_start + interval);
  b.merkle = merkle_root(b.txs);
  return b;
}

bool verify_local_model(const Transaction& tx, const ModelVerifier& v) {
  if (tx.kind != RecordKind::training_model) throw std::invalid_argument("not a training-model record");
  if (v.holdout == nullptr || v.holdout->empty()) throw std::invalid_argument("verifier has no holdout data");
  const auto submitted = fl::deserialize_model(tx.payload);
  if (submitted.params.dim() != v.global.dim()) throw std::invalid_argument("submitted model has the wrong dimension");
  if (!submitted.params.finite()) throw std::invalid_argument("submitted model has non-finite parameters");
  const double candidate = fl::local_loss(v.shape, submitted.params, *v.holdout, v.l2);
  const double reference = fl::local_loss(v.shape, v.global, *v.holdout, v.l2);
  return candidate <= v.threshold * reference;
}

ValidationOutcome validate_block(const Block& block, const Chain& chain, std::span<const std::size_t> validators,
                                 const KeyRing& keys, const ModelVerifier* verifier, const LedgerConfig& cfg,
                                 std::size_t num_bs, std::span<const std::size_t> faulty) {
  ValidationOutcome out;
  out.stake_delta.assign(num_bs, 0.0);
  out.structural_ok = block.height == chain.height() && block.prev_hash == chain.head_hash() &&
                      block.merkle == merkle_root(block.txs) && block.header_bits > 0.0;
  out.tx_valid.assign(block.txs.size(), false);
  out.tx_reason.assign(block.txs.size(), "");
  if (!out.structural_ok) return out;

  for (std::size_t k = 0; k < block.txs.size(); ++k) {
    const auto& tx = block.txs[k];
    if (!keys.verify(tx)) {
      out.tx_reason[k] = "bad signature";
      continue;
    }
    if (tx.kind == RecordKind::training_model && verifier != nullptr) {
      try {
        if (!verify_local_model(tx, *verifier)) {
          out.tx_reason[k] = "failed holdout verification";
          continue;
        }
      } catch (const std::exception& e) {
        out.tx_reason[k] = e.what();
        continue;
      }
    }
    out.tx_valid[k] = true;
  }

  for (std::size_t v : validators)
    if (std::find(faulty.begin(), faulty.end(), v) == faulty.end()) ++out.votes_for;
  out.accepted = static_cast<double>(out.votes_for) > cfg.quorum * static_cast<double>(validators.size());
  if (out.accepted)
    for (std::size_t k = 0; k < block.txs.size(); ++k)
      if (out.tx_valid[k] && block.txs[k].kind == RecordKind::training_model && block.txs[k].author < num_bs)
        out.stake_delta[block.txs[k].author] += cfg.reward_coins;
  return out;
}

Ledger::Ledger(std::size_t num_bs, std::size_t num_producers, double header_bits, std::uint64_t key_seed,
               LedgerConfig cfg)
    : num_bs_(num_bs), num_producers_(num_producers), header_bits_(header_bits), cfg_(cfg), keys_(num_bs, key_seed) {
  if (num_producers == 0 || num_producers > num_bs) throw std::invalid_argument("need 1 <= M_p <= M");
  if (!(header_bits > 0.0)) throw std::invalid_argument("block header bits must be > 0");
}

void Ledger::genesis(const Association& assoc) {
  stakes_ = initial_stakes(assoc, cfg_.stake_pool);
  const auto ballots = self_ballots(stakes_);
  schedule_.producers = elect_producers(stakes_, ballots, num_producers_);
}

Transaction Ledger::sign(RecordKind kind, std::uint32_t author, double timestamp, std::vector<std::uint8_t> payload,
                         std::uint64_t payload_bits) const {
  return make_transaction(kind, author, timestamp, std::move(payload), payload_bits, keys_);
}

Ledger::SlotReport Ledger::run_slot(std::uint64_t slot, double slot_start, double interval,
                                    const ModelVerifier* verifier, std::span<const std::size_t> faulty) {
  SlotReport r;
  r.block = produce_block(schedule_.producer_for(slot), slot, schedule_, mempool_, slot_start, interval, chain_,
                          header_bits_);
  r.outcome = validate_block(r.block, chain_, schedule_.producers, keys_, verifier, cfg_, num_bs_, faulty);
  if (r.outcome.accepted) {
    chain_.append(r.block);
    for (std::size_t i = 0; i < num_bs_; ++i) {
      stakes_.coins[i] += r.outcome.stake_delta[i];
      awarded_ += r.outcome.stake_delta[i];
    }
  }
  return r;
}

}  // namespace dtfl::ledger
