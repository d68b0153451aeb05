#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "cdmine/decompose.hpp"
#include "cdmine/extra_trees.hpp"
#include "cdmine/metrics.hpp"
#include "cdmine/rule_engine.hpp"

namespace cdmine {

struct ScoringConfig {
  double lambda = 0.5;     // weight of the online risk
  double threshold = 0.5;  // default flag when the account risk >= threshold
  int year = 2005;
  int first_month = 5;     // calendar month of batch 1

  /// Throws Errc::config for out-of-range values.
  void validate() const;
};

struct RiskRecord {
  AccountId account = 0;
  double r_offline = 0.0;
  double last_r_total = 0.0;
  int last_batch = 0;              // 0 = no transaction yet
  std::int64_t last_ordinal = 0;   // 1-based position of the last transaction in its batch
  bool active = false;             // a positive online risk was seen this month
};

/// Per-account rolling risk store.
class RiskState {
 public:
  bool contains(AccountId account) const { return records_.count(account) != 0; }
  std::size_t size() const { return records_.size(); }
  /// Throws Errc::state for an unknown account.
  const RiskRecord& get(AccountId account) const;
  RiskRecord& get(AccountId account);
  /// Inserts or replaces. Throws Errc::contract unless risks lie in [0, 1].
  void put(const RiskRecord& record);
  /// Records ordered by account id.
  std::vector<RiskRecord> sorted() const;

  /// Line-oriented: header "account,r_offline,last_r_total,last_batch,last_ordinal"
  /// then one row per account in id order. Doubles round-trip exactly.
  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;  // atomic replace
  static RiskState load(std::istream& in, const std::string& origin = "<state>");
  static RiskState load(const std::filesystem::path& path);

 private:
  std::unordered_map<AccountId, RiskRecord> records_;
};

/// r_offline = model probability for every account of the batch.
RiskState init_offline_risk(const ExtraTreesModel& model, const OfflineBatch& batch);
/// Same, from precomputed probabilities aligned with `batch`.
RiskState init_offline_risk(std::span<const double> probabilities, const OfflineBatch& batch);

/// lambda * r_online + (1 - lambda) * r_offline. Throws Errc::contract when
/// an input lies outside [0, 1].
double combine(double r_online, double r_offline, double lambda);

/// Fuses the online risk of one transaction into its account. A positive
/// r_online carries r_total forward as the new r_offline; r_online == 0
/// leaves r_offline unchanged. Returns r_total.
double apply_transaction(RiskState& state, const OnlineTransaction& txn, double r_online, const ScoringConfig& config,
                         int batch = 0, std::int64_t ordinal = 0);

/// Month-end profile synchronization with fresh probabilities aligned with
/// `next`: accounts without positive online risk this month take the fresh
/// value, active accounts keep max(carried, fresh). Clears activity flags.
/// Throws Errc::sync when the account sets differ.
void month_end_sync(RiskState& state, std::span<const double> fresh, const OfflineBatch& next);
void month_end_sync(RiskState& state, const ExtraTreesModel& model, const OfflineBatch& next);

/// Source of offline default probabilities for a batch.
class OfflineScorer {
 public:
  virtual ~OfflineScorer() = default;
  virtual std::vector<double> score(const OfflineBatch& batch) const = 0;
};

/// Scores with one trained model.
class ModelScorer final : public OfflineScorer {
 public:
  explicit ModelScorer(const ExtraTreesModel& model) : model_(model) {}
  std::vector<double> score(const OfflineBatch& batch) const override;

 private:
  const ExtraTreesModel& model_;
};

/// Retrains on each batch and scores every account with the model that did
/// not see it (k-fold cross-fitting).
class CrossFitScorer final : public OfflineScorer {
 public:
  CrossFitScorer(ExtraTreesParams params, std::size_t folds, std::uint64_t seed, unsigned threads = 1)
      : params_(params), folds_(folds), seed_(seed), threads_(threads) {}
  std::vector<double> score(const OfflineBatch& batch) const override;

 private:
  ExtraTreesParams params_;
  std::size_t folds_;
  std::uint64_t seed_;
  unsigned threads_;
};

struct RunResult {
  std::vector<BatchReport> reports;
  RiskState state;
};

/// Checks that offline batches share one account set, that every online
/// account is known, and that online dates follow the configured month
/// schedule. Throws Errc::run.
void check_alignment(std::span<const OfflineBatch> offline, std::span<const OnlineBatch> online,
                     const ScoringConfig& config);

/// Processes the batches in order: initialize (batch 1) or month-end sync
/// (later batches) from the offline batch, stream the online batch through
/// the rule engine and apply_transaction, then flag each account whose
/// carried risk is >= threshold and score the flags against the labels.
/// `catalog` needs resolved impact coefficients. `after_batch`, when set, is
/// called with the state at each batch boundary.
RunResult run_batches(std::span<const OfflineBatch> offline, std::span<const OnlineBatch> online,
                      const OfflineScorer& scorer, const RuleCatalog& catalog, const ScoringConfig& config,
                      const std::function<void(int batch, const RiskState&)>& after_batch = {});

/// Rule scoring plus risk fusion for one online batch (the timed online step).
/// Failed transactions are counted, not applied.
std::size_t stream_online(const RuleCatalog& catalog, std::span<const OnlineTransaction> batch, ContextBook& book,
                          RiskState& state, const ScoringConfig& config, int batch_index,
                          std::vector<std::string>* errors = nullptr);

}  // namespace cdmine
