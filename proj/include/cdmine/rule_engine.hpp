#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cdmine/records.hpp"

namespace cdmine {

/// What the rule engine knows about an account when a transaction arrives.
/// Month-to-date aggregates exclude the transaction being evaluated.
struct AccountContext {
  OfflineAccount profile;
  Amount prior_bill = 0;   // previous month's statement
  Amount mtd_bill = 0;     // expenditure so far this month
  Amount mtd_payment = 0;  // payments so far this month
};

enum class RuleKind {
  min_due,          // month's payments >= min_due_fraction * prior_bill
  pay_covers_bill,  // month's payments >= month's bill
  over_limit,       // month-to-date bill <= balance_limit
};

struct StandardRule {
  std::string id;
  std::string description;
  RuleKind kind = RuleKind::min_due;
  std::string feature;  // offline feature the rule is about; drives automatic cause weights
  std::map<std::string, double> params;

  /// Pure and total over (txn, ctx); a rule that does not concern the
  /// transaction type holds.
  bool violated(const OnlineTransaction& txn, const AccountContext& ctx) const;
};

enum class DetectorKind {
  repayment_at_most,  // profile.repayment <= max_code
  utilization_below,  // profile.total_bill < fraction * balance_limit
  net_payer,          // profile.total_payment >= profile.total_bill
};

struct Cause {
  std::string id;
  std::string description;
  DetectorKind detector = DetectorKind::repayment_at_most;
  std::map<std::string, double> params;
  std::optional<double> impact;  // nullopt = derive from feature scores
  double impact_coefficient = 0.0;  // resolved weight, > 0

  bool fires(const AccountContext& ctx) const;
};

/// Per-feature nonnegative scores summing to 1 (classifier importances).
struct FeatureScores {
  std::vector<std::string> names;
  std::vector<double> scores;

  /// Throws Errc::contract unless sizes match, scores are nonnegative and
  /// sum to 1 within 1e-9.
  void validate() const;
  double score(const std::string& name) const;
  static FeatureScores uniform(std::span<const std::string_view> names);
};

struct RuleCatalog {
  std::vector<StandardRule> rules;
  std::vector<Cause> causes;
  std::map<std::string, std::vector<std::string>> mapping;  // rule id -> cause ids

  const Cause& cause(const std::string& id) const;
  std::size_t cause_index(const std::string& id) const;

  /// Resolves every cause's impact_coefficient. Automatic weights are the sum
  /// of the scores of the features of the rules mapped to the cause (floored
  /// at 1e-6); all coefficients are then renormalized to sum to 1.
  void resolve_impacts(const FeatureScores& scores);
};

/// Parses the rule/cause configuration format (see config/rules.conf).
/// Errors are Errc::config with "<origin>:<line>: " prefixes.
RuleCatalog parse_rules(std::istream& in, const std::string& origin = "<rules>");
RuleCatalog load_rules(const std::filesystem::path& path);
const std::string& default_rules_text();
RuleCatalog default_rules();

struct RuleEvaluation {
  std::set<std::string> violated_rules;
  std::set<std::string> related_causes;  // Y
  std::set<std::string> valid_causes;    // X, subset of Y
  double r_online = 0.0;
};

/// Ids of the rules whose predicate fails. Throws Errc::context when ctx does
/// not belong to txn.account.
std::set<std::string> standard_test(const OnlineTransaction& txn, const AccountContext& ctx,
                                    std::span<const StandardRule> rules);

/// Y = causes mapped from the violated rules, X = members of Y whose detector
/// fires. Needs resolved impact coefficients.
RuleEvaluation customer_specific_test(const std::set<std::string>& violated, const AccountContext& ctx,
                                      const RuleCatalog& catalog);

/// 1 - sum(w over X) / sum(w over Y), in [0, 1]. Returns 1 for an empty Y.
/// Throws Errc::contract when X is not a subset of Y or a weight is not
/// positive.
double r_online_score(std::span<const double> weights, std::span<const bool> in_x, std::span<const bool> in_y);
double r_online_score(const std::set<std::string>& x, const std::set<std::string>& y, const RuleCatalog& catalog);

/// Per-account profiles plus running month-to-date aggregates.
class ContextBook {
 public:
  /// Loads the batch profiles. prior_bill is the growth of total_bill since
  /// `previous` (or total_bill itself without a previous batch). Clears
  /// month-to-date aggregates.
  void load(const OfflineBatch& current, const OfflineBatch* previous = nullptr);
  bool contains(AccountId account) const { return entries_.count(account) != 0; }
  std::size_t size() const { return entries_.size(); }
  /// Throws Errc::context for an unknown account.
  const AccountContext& snapshot(AccountId account) const;
  void record(const OnlineTransaction& txn);
  void reset_month();

 private:
  std::unordered_map<AccountId, AccountContext> entries_;
};

struct TxnScore {
  std::int64_t tid = 0;
  AccountId account = 0;
  bool ok = false;
  double r_online = 0.0;
  std::size_t violations = 0;
  std::string error;  // set when !ok
};

/// Scores each transaction in order: standard test, then the customer
/// specific test when a rule is violated, else 0. The book is advanced past
/// each successfully scored transaction. Failed transactions keep their slot
/// with ok == false, so the output always has one entry per input.
std::vector<TxnScore> risk(const RuleCatalog& catalog, std::span<const OnlineTransaction> batch, ContextBook& book);

/// Scores one transaction against a context snapshot.
TxnScore score_transaction(const RuleCatalog& catalog, const OnlineTransaction& txn, const AccountContext& ctx);

}  // namespace cdmine
