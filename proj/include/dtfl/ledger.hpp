#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dtfl/crypto.hpp"
#include "dtfl/dataset.hpp"
#include "dtfl/fl.hpp"
#include "dtfl/network.hpp"

namespace dtfl::ledger {

class LedgerError : public std::runtime_error {
 public:
  enum class Code { bad_signature, duplicate, out_of_turn, overspent_ballot, broken_link, bad_log, invalid };
  LedgerError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

enum class RecordKind : std::uint8_t { twin_model = 0, twin_data = 1, training_model = 2 };
const char* to_string(RecordKind k);

struct Transaction {
  RecordKind kind = RecordKind::twin_data;
  std::uint32_t author = 0;
  double timestamp = 0.0;
  std::uint64_t payload_bits = 0;
  std::vector<std::uint8_t> payload;
  Digest signature{};

  /// Preimage covered by the signature (all fields but the signature).
  std::vector<std::uint8_t> signing_bytes() const;
  /// sha256 over the signed fields and the signature; the dedup key.
  Digest digest() const;
};

/// Per-BS HMAC keys derived from a seed. Stands in for real key management.
class KeyRing {
 public:
  KeyRing() = default;
  KeyRing(std::size_t num_bs, std::uint64_t seed);
  Digest sign(const Transaction& tx) const;
  bool verify(const Transaction& tx) const;
  std::size_t size() const { return keys_.size(); }

 private:
  std::vector<Digest> keys_;
};

Transaction make_transaction(RecordKind kind, std::uint32_t author, double timestamp,
                             std::vector<std::uint8_t> payload, std::uint64_t payload_bits, const KeyRing& keys);

class Mempool {
 public:
  /// Queues a transaction once. Throws LedgerError (bad_signature,
  /// duplicate, invalid) and leaves the pool unchanged on failure.
  Digest submit(Transaction tx, const KeyRing& keys);

  /// Removes and returns every pending tx with timestamp <= t_end, ordered by
  /// (timestamp, digest).
  std::vector<Transaction> take_until(double t_end);

  std::size_t size() const { return txs_.size(); }
  bool empty() const { return txs_.empty(); }
  /// Direct access for fault injection in tests and experiments.
  std::vector<Transaction>& pending() { return txs_; }
  const std::vector<Transaction>& pending() const { return txs_; }

 private:
  std::vector<Transaction> txs_;
  std::set<Digest> seen_;
};

Digest merkle_root(std::span<const Transaction> txs);

struct Block {
  std::uint64_t height = 0;
  std::uint32_t producer = 0;
  Digest prev_hash{};
  double slot_start = 0.0;
  double interval = 0.0;
  double header_bits = 0.0;
  std::vector<Transaction> txs;
  Digest merkle{};

  /// S_B = header bits + sum of payload bits.
  double bits() const;
  Digest hash() const;
};

struct StakeTable {
  std::vector<double> coins;
  double initial_pool = 0.0;
  double total() const;
};

/// S_i = (data on BS i / total data) * S_ini.
StakeTable initial_stakes(const Association& assoc, double initial_pool);

struct Ballot {
  std::size_t voter = 0;
  std::vector<std::pair<std::size_t, double>> votes;  // (candidate, coins)
};

/// Each BS puts its whole stake on itself.
std::vector<Ballot> self_ballots(const StakeTable& stakes);

/// The `num_producers` candidates with the highest coin-weighted tallies,
/// ties to the lower id. The order is the round-robin production order.
std::vector<std::size_t> elect_producers(const StakeTable& stakes, std::span<const Ballot> ballots,
                                         std::size_t num_producers);

struct ProducerSchedule {
  std::vector<std::size_t> producers;
  std::size_t producer_for(std::uint64_t slot) const { return producers.at(slot % producers.size()); }
};

/// T = k * local training period.
double block_interval_policy(double local_training_period, std::size_t multiplier);

class Chain {
 public:
  std::size_t height() const { return blocks_.size(); }
  bool empty() const { return blocks_.empty(); }
  const std::vector<Block>& blocks() const { return blocks_; }
  /// Digest of the last block, all zeros for an empty chain.
  Digest head_hash() const;

  /// Throws LedgerError(broken_link) unless the block extends the tip.
  void append(Block block);

  // Log layout (little endian): "DTLG", u32 version = 1, u64 block count,
  // then per block a u64 byte length followed by the encoded block.
  void export_log(const std::filesystem::path& path) const;
  static Chain import_log(const std::filesystem::path& path);
  void write_summary(std::ostream& out) const;

 private:
  std::vector<Block> blocks_;
};

std::vector<std::uint8_t> encode_block(const Block& b);
Block decode_block(std::span<const std::uint8_t> bytes);

/// Packs every pending tx stamped before the end of the slot. Throws
/// LedgerError(out_of_turn) unless `producer` owns `slot`.
Block produce_block(std::size_t producer, std::uint64_t slot, const ProducerSchedule& schedule, Mempool& mempool,
                    double slot_start, double interval, const Chain& chain, double header_bits);

/// Context for judging a training-model record against the current global model.
struct ModelVerifier {
  const Dataset* holdout = nullptr;
  fl::ModelShape shape;
  ModelParams global;
  double threshold = 1.05;
  double l2 = 0.0;
};

/// True iff holdout loss(submitted) <= threshold * holdout loss(global).
/// Throws std::invalid_argument for a non-training record, a dimension
/// mismatch or non-finite parameters.
bool verify_local_model(const Transaction& tx, const ModelVerifier& verifier);

struct LedgerConfig {
  double quorum = 0.5;  // accept iff votes > quorum * validators
  double reward_coins = 1.0;
  double verification_threshold = 1.05;
  std::size_t interval_multiplier = 1;
  double stake_pool = 100.0;  // S_ini
};

struct ValidationOutcome {
  bool accepted = false;
  bool structural_ok = false;
  std::size_t votes_for = 0;
  std::vector<bool> tx_valid;
  std::vector<std::string> tx_reason;
  std::vector<double> stake_delta;  // per BS
};

/// Every honest validator re-checks the hash link, the Merkle root, each
/// signature, and each training-model record (when a verifier is given).
/// Validators listed in `faulty` always vote reject. Invalid transactions are
/// flagged without rejecting the block; their authors earn nothing for them.
ValidationOutcome validate_block(const Block& block, const Chain& chain, std::span<const std::size_t> validators,
                                 const KeyRing& keys, const ModelVerifier* verifier, const LedgerConfig& cfg,
                                 std::size_t num_bs, std::span<const std::size_t> faulty = {});

/// Single-writer ledger state: keys, mempool, chain, stakes and schedule.
class Ledger {
 public:
  Ledger() = default;
  Ledger(std::size_t num_bs, std::size_t num_producers, double header_bits, std::uint64_t key_seed, LedgerConfig cfg);

  /// Initial stakes from the association, then self-vote election.
  void genesis(const Association& assoc);

  Transaction sign(RecordKind kind, std::uint32_t author, double timestamp, std::vector<std::uint8_t> payload,
                   std::uint64_t payload_bits) const;
  Digest submit(Transaction tx) { return mempool_.submit(std::move(tx), keys_); }

  struct SlotReport {
    Block block;
    ValidationOutcome outcome;
  };
  /// The scheduled producer packs the slot, the producer set validates, and
  /// an accepted block is appended with its stake rewards applied.
  SlotReport run_slot(std::uint64_t slot, double slot_start, double interval, const ModelVerifier* verifier,
                      std::span<const std::size_t> faulty = {});

  const Chain& chain() const { return chain_; }
  const StakeTable& stakes() const { return stakes_; }
  const ProducerSchedule& schedule() const { return schedule_; }
  const KeyRing& keys() const { return keys_; }
  const LedgerConfig& config() const { return cfg_; }
  Mempool& mempool() { return mempool_; }
  double awarded() const { return awarded_; }

 private:
  std::size_t num_bs_ = 0;
  std::size_t num_producers_ = 0;
  double header_bits_ = 0.0;
  LedgerConfig cfg_;
  KeyRing keys_;
  Mempool mempool_;
  Chain chain_;
  StakeTable stakes_;
  ProducerSchedule schedule_;
  double awarded_ = 0.0;
};

}  // namespace dtfl::ledger
