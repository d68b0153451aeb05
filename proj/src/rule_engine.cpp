#include "cdmine/rule_engine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>
#include <sstream>

#include "cdmine/csv.hpp"
#include "cdmine/error.hpp"

namespace cdmine {

namespace {

double param(const std::map<std::string, double>& params, const char* key) {
  auto it = params.find(key);
  if (it == params.end()) fail(Errc::internal, std::string("missing rule parameter ") + key);
  return it->second;
}

}  // namespace

bool StandardRule::violated(const OnlineTransaction& txn, const AccountContext& ctx) const {
  switch (kind) {
    case RuleKind::min_due: {
      if (txn.type != TxnType::pay || ctx.prior_bill <= 0) return false;
      const double paid = static_cast<double>(ctx.mtd_payment + txn.amount);
      return paid < param(params, "min_due_fraction") * static_cast<double>(ctx.prior_bill);
    }
    case RuleKind::pay_covers_bill:
      return txn.type == TxnType::pay && ctx.mtd_payment + txn.amount < ctx.mtd_bill;
    case RuleKind::over_limit:
      return txn.type == TxnType::exp && ctx.mtd_bill + txn.amount > ctx.profile.balance_limit;
  }
  return false;
}

bool Cause::fires(const AccountContext& ctx) const {
  const auto& p = ctx.profile;
  switch (detector) {
    case DetectorKind::repayment_at_most:
      return p.repayment <= param(params, "max_code");
    case DetectorKind::utilization_below:
      return static_cast<double>(p.total_bill) < param(params, "fraction") * static_cast<double>(p.balance_limit);
    case DetectorKind::net_payer:
      return p.total_payment >= p.total_bill;
  }
  return false;
}

void FeatureScores::validate() const {
  if (names.size() != scores.size() || names.empty()) fail(Errc::contract, "feature scores: size mismatch");
  double sum = 0.0;
  for (double s : scores) {
    if (!(s >= 0.0)) fail(Errc::contract, "feature scores: negative score");
    sum += s;
  }
  if (std::fabs(sum - 1.0) > 1e-9) fail(Errc::contract, "feature scores must sum to 1, got " + csv::format_double(sum));
}

double FeatureScores::score(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return scores[i];
  fail(Errc::contract, "feature scores: unknown feature '" + name + "'");
}

FeatureScores FeatureScores::uniform(std::span<const std::string_view> names) {
  FeatureScores fs;
  for (auto n : names) {
    fs.names.emplace_back(n);
    fs.scores.push_back(1.0 / static_cast<double>(names.size()));
  }
  return fs;
}

std::size_t RuleCatalog::cause_index(const std::string& id) const {
  for (std::size_t i = 0; i < causes.size(); ++i)
    if (causes[i].id == id) return i;
  fail(Errc::contract, "unknown cause '" + id + "'");
}

const Cause& RuleCatalog::cause(const std::string& id) const { return causes[cause_index(id)]; }

void RuleCatalog::resolve_impacts(const FeatureScores& scores) {
  scores.validate();
  for (auto& c : causes) {
    if (c.impact) {
      c.impact_coefficient = *c.impact;
      continue;
    }
    double w = 0.0;
    for (const auto& rule : rules) {
      auto it = mapping.find(rule.id);
      if (it != mapping.end() && std::find(it->second.begin(), it->second.end(), c.id) != it->second.end()) {
        w += scores.score(rule.feature);
      }
    }
    c.impact_coefficient = std::max(w, 1e-6);
  }
  double total = 0.0;
  for (const auto& c : causes) total += c.impact_coefficient;
  for (auto& c : causes) c.impact_coefficient /= total;
}

// ---------------------------------------------------------------------------
// Configuration format
//
//   # comment
//   [rule <ID>]      type, feature, description, rule parameters
//   [cause <ID>]     detector, impact (auto | number > 0), description,
//                    detector parameters
//   [mapping]        <RULE_ID> = <CAUSE_ID>[, <CAUSE_ID>...]
//
// Keys are "key = value"; ids use [A-Za-z0-9_]. Parameters default when
// omitted: min_due_fraction 0.10, max_code 0, fraction 0.5.
// ---------------------------------------------------------------------------

namespace {

struct RuleKindInfo {
  const char* name;
  RuleKind kind;
  std::vector<std::pair<const char*, double>> params;  // name, default
};

const std::vector<RuleKindInfo>& rule_kinds() {
  static const std::vector<RuleKindInfo> kinds = {
      {"min_due", RuleKind::min_due, {{"min_due_fraction", 0.10}}},
      {"pay_covers_bill", RuleKind::pay_covers_bill, {}},
      {"over_limit", RuleKind::over_limit, {}},
  };
  return kinds;
}

struct DetectorInfo {
  const char* name;
  DetectorKind kind;
  std::vector<std::pair<const char*, double>> params;
};

const std::vector<DetectorInfo>& detectors() {
  static const std::vector<DetectorInfo> kinds = {
      {"repayment_at_most", DetectorKind::repayment_at_most, {{"max_code", 0.0}}},
      {"utilization_below", DetectorKind::utilization_below, {{"fraction", 0.5}}},
      {"net_payer", DetectorKind::net_payer, {}},
  };
  return kinds;
}

bool valid_id(const std::string& id) {
  return !id.empty() && std::all_of(id.begin(), id.end(), [](unsigned char c) { return std::isalnum(c) || c == '_'; });
}

struct PendingRule {
  StandardRule rule;
  std::size_t line = 0;
  std::string type;
  std::map<std::string, std::pair<double, std::size_t>> raw_params;
};

struct PendingCause {
  Cause cause;
  std::size_t line = 0;
  std::string detector;
  std::map<std::string, std::pair<double, std::size_t>> raw_params;
};

}  // namespace

RuleCatalog parse_rules(std::istream& in, const std::string& origin) {
  enum class Section { none, rule, cause, mapping };
  Section section = Section::none;
  std::vector<PendingRule> rules;
  std::vector<PendingCause> causes;
  std::vector<std::tuple<std::string, std::vector<std::string>, std::size_t>> mapping;
  bool seen_mapping = false;

  std::string line;
  std::size_t line_no = 0;
  auto error = [&](std::size_t at, const std::string& what) -> void {
    fail(Errc::config, origin + ":" + std::to_string(at) + ": " + what);
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string text = csv::trim(line);
    if (text.empty() || text[0] == '#') continue;

    if (text.front() == '[') {
      if (text.back() != ']') error(line_no, "unterminated section header");
      std::istringstream hs(text.substr(1, text.size() - 2));
      std::string kind, id, extra;
      hs >> kind >> id >> extra;
      if (!extra.empty()) error(line_no, "unexpected text in section header");
      if (kind == "rule" || kind == "cause") {
        if (!valid_id(id)) error(line_no, "section [" + kind + "] needs an id of [A-Za-z0-9_]");
        const bool dup_rule = std::any_of(rules.begin(), rules.end(), [&](auto& r) { return r.rule.id == id; });
        const bool dup_cause = std::any_of(causes.begin(), causes.end(), [&](auto& c) { return c.cause.id == id; });
        if (dup_rule || dup_cause) error(line_no, "duplicate id '" + id + "'");
        if (kind == "rule") {
          section = Section::rule;
          rules.push_back({});
          rules.back().rule.id = id;
          rules.back().line = line_no;
        } else {
          section = Section::cause;
          causes.push_back({});
          causes.back().cause.id = id;
          causes.back().line = line_no;
        }
      } else if (kind == "mapping") {
        if (!id.empty()) error(line_no, "[mapping] takes no id");
        if (seen_mapping) error(line_no, "duplicate [mapping] section");
        seen_mapping = true;
        section = Section::mapping;
      } else {
        error(line_no, "unknown section '" + kind + "'");
      }
      continue;
    }

    const auto eq = text.find('=');
    if (eq == std::string::npos) error(line_no, "expected 'key = value'");
    const std::string key = csv::trim(std::string_view(text).substr(0, eq));
    const std::string value = csv::trim(std::string_view(text).substr(eq + 1));
    if (key.empty()) error(line_no, "empty key");

    switch (section) {
      case Section::none:
        error(line_no, "key '" + key + "' outside of a section");
        break;
      case Section::rule: {
        auto& r = rules.back();
        if (key == "type") {
          r.type = value;
        } else if (key == "description") {
          r.rule.description = value;
        } else if (key == "feature") {
          const auto& names = offline_feature_names();
          if (std::find(names.begin(), names.end(), value) == names.end()) {
            error(line_no, "unknown feature '" + value + "'");
          }
          r.rule.feature = value;
        } else {
          double v = 0;
          if (!csv::parse_double(value, v) || !std::isfinite(v)) error(line_no, "parameter '" + key + "' is not a number");
          if (!r.raw_params.emplace(key, std::make_pair(v, line_no)).second) error(line_no, "duplicate key '" + key + "'");
        }
        break;
      }
      case Section::cause: {
        auto& c = causes.back();
        if (key == "detector") {
          c.detector = value;
        } else if (key == "description") {
          c.cause.description = value;
        } else if (key == "impact") {
          if (value == "auto") {
            c.cause.impact.reset();
          } else {
            double v = 0;
            if (!csv::parse_double(value, v) || !(v > 0) || !std::isfinite(v)) {
              error(line_no, "impact must be 'auto' or a number > 0");
            }
            c.cause.impact = v;
          }
        } else {
          double v = 0;
          if (!csv::parse_double(value, v) || !std::isfinite(v)) error(line_no, "parameter '" + key + "' is not a number");
          if (!c.raw_params.emplace(key, std::make_pair(v, line_no)).second) error(line_no, "duplicate key '" + key + "'");
        }
        break;
      }
      case Section::mapping: {
        std::vector<std::string> ids;
        std::stringstream ss(value);
        std::string item;
        while (std::getline(ss, item, ',')) {
          item = csv::trim(item);
          if (!valid_id(item)) error(line_no, "invalid cause id '" + item + "'");
          ids.push_back(item);
        }
        for (const auto& [rule_id, unused, at] : mapping)
          if (rule_id == key) error(line_no, "rule '" + key + "' mapped twice (first at line " + std::to_string(at) + ")");
        mapping.emplace_back(key, ids, line_no);
        break;
      }
    }
  }

  RuleCatalog cat;
  for (auto& r : rules) {
    auto it = std::find_if(rule_kinds().begin(), rule_kinds().end(), [&](auto& k) { return r.type == k.name; });
    if (r.type.empty()) error(r.line, "rule '" + r.rule.id + "' has no type");
    if (it == rule_kinds().end()) error(r.line, "rule '" + r.rule.id + "' has unknown type '" + r.type + "'");
    if (r.rule.feature.empty()) error(r.line, "rule '" + r.rule.id + "' has no feature");
    r.rule.kind = it->kind;
    for (const auto& [name, def] : it->params) r.rule.params[name] = def;
    for (const auto& [name, v] : r.raw_params) {
      if (!r.rule.params.count(name)) error(v.second, "unknown parameter '" + name + "' for rule type " + r.type);
      r.rule.params[name] = v.first;
    }
    if (r.rule.kind == RuleKind::min_due) {
      const double f = r.rule.params["min_due_fraction"];
      if (!(f >= 0.0 && f <= 1.0)) {
        const auto at = r.raw_params.count("min_due_fraction") ? r.raw_params["min_due_fraction"].second : r.line;
        error(at, "min_due_fraction must lie in [0, 1]");
      }
    }
    cat.rules.push_back(r.rule);
  }
  for (auto& c : causes) {
    auto it = std::find_if(detectors().begin(), detectors().end(), [&](auto& k) { return c.detector == k.name; });
    if (c.detector.empty()) error(c.line, "cause '" + c.cause.id + "' has no detector");
    if (it == detectors().end()) error(c.line, "cause '" + c.cause.id + "' has unknown detector '" + c.detector + "'");
    c.cause.detector = it->kind;
    for (const auto& [name, def] : it->params) c.cause.params[name] = def;
    for (const auto& [name, v] : c.raw_params) {
      if (!c.cause.params.count(name)) error(v.second, "unknown parameter '" + name + "' for detector " + c.detector);
      c.cause.params[name] = v.first;
    }
    if (c.cause.detector == DetectorKind::utilization_below && !(c.cause.params["fraction"] >= 0.0)) {
      error(c.raw_params.count("fraction") ? c.raw_params["fraction"].second : c.line, "fraction must be >= 0");
    }
    cat.causes.push_back(c.cause);
  }
  for (const auto& [rule_id, ids, at] : mapping) {
    if (std::none_of(cat.rules.begin(), cat.rules.end(), [&](auto& r) { return r.id == rule_id; })) {
      error(at, "mapping references unknown rule '" + rule_id + "'");
    }
    for (const auto& id : ids) {
      if (std::none_of(cat.causes.begin(), cat.causes.end(), [&](auto& c) { return c.id == id; })) {
        error(at, "mapping references unknown cause '" + id + "'");
      }
    }
    cat.mapping[rule_id] = ids;
  }
  if (cat.rules.empty()) fail(Errc::config, origin + ": no rules defined");
  return cat;
}

RuleCatalog load_rules(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::config, "cannot open rules file " + path.string());
  return parse_rules(in, path.string());
}

const std::string& default_rules_text() {
  static const std::string text = R"(# Standard rules, customer-specific causes and the rule -> cause mapping.

[rule SR_MIN_DUE]
type = min_due
feature = total_payment
min_due_fraction = 0.10
description = payments this month cover the minimum due of the previous statement

[rule SR_PAY_LT_BILL]
type = pay_covers_bill
feature = total_bill
description = payments this month are not less than the month's bill

[rule SR_OVER_LIMIT]
type = over_limit
feature = balance_limit
description = month-to-date bill stays within the balance limit

[cause C_GOOD_HISTORY]
detector = repayment_at_most
max_code = 0
impact = auto
description = latest repayment status is on time or early

[cause C_LOW_UTILIZATION]
detector = utilization_below
fraction = 0.5
impact = auto
description = total bill below half of the balance limit

[cause C_NET_PAYER]
detector = net_payer
impact = auto
description = total payments at least the total bill

[mapping]
SR_MIN_DUE = C_GOOD_HISTORY, C_LOW_UTILIZATION
SR_PAY_LT_BILL = C_GOOD_HISTORY, C_NET_PAYER
SR_OVER_LIMIT = C_GOOD_HISTORY, C_NET_PAYER
)";
  return text;
}

RuleCatalog default_rules() {
  std::istringstream in(default_rules_text());
  return parse_rules(in, "<default rules>");
}

std::set<std::string> standard_test(const OnlineTransaction& txn, const AccountContext& ctx,
                                    std::span<const StandardRule> rules) {
  if (ctx.profile.account != txn.account) {
    fail(Errc::context, "standard test: context for account " + std::to_string(ctx.profile.account) +
                            " does not match transaction account " + std::to_string(txn.account));
  }
  std::set<std::string> out;
  for (const auto& r : rules)
    if (r.violated(txn, ctx)) out.insert(r.id);
  return out;
}

double r_online_score(std::span<const double> weights, std::span<const bool> in_x, std::span<const bool> in_y) {
  if (weights.size() != in_x.size() || weights.size() != in_y.size()) {
    fail(Errc::contract, "r_online: weight and membership sizes differ");
  }
  double sx = 0.0, sy = 0.0;
  bool any_y = false;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (in_x[i] && !in_y[i]) fail(Errc::contract, "r_online: X is not a subset of Y");
    if (!in_y[i]) continue;
    if (!(weights[i] > 0.0) || !std::isfinite(weights[i])) fail(Errc::contract, "r_online: impact coefficients must be > 0");
    any_y = true;
    sy += weights[i];
    if (in_x[i]) sx += weights[i];
  }
  if (!any_y) return 1.0;
  return std::clamp(1.0 - sx / sy, 0.0, 1.0);
}

double r_online_score(const std::set<std::string>& x, const std::set<std::string>& y, const RuleCatalog& catalog) {
  for (const auto& id : x)
    if (!y.count(id)) fail(Errc::contract, "r_online: valid cause '" + id + "' is not a related cause");
  const std::size_t n = catalog.causes.size();
  std::vector<double> w(n);
  std::unique_ptr<bool[]> ix(new bool[n]()), iy(new bool[n]());
  for (std::size_t i = 0; i < n; ++i) w[i] = catalog.causes[i].impact_coefficient;
  for (const auto& id : y) iy[catalog.cause_index(id)] = true;
  for (const auto& id : x) ix[catalog.cause_index(id)] = true;
  return r_online_score(w, std::span<const bool>(ix.get(), n), std::span<const bool>(iy.get(), n));
}

RuleEvaluation customer_specific_test(const std::set<std::string>& violated, const AccountContext& ctx,
                                      const RuleCatalog& catalog) {
  if (violated.empty()) fail(Errc::contract, "customer specific test: no violated rules");
  RuleEvaluation ev;
  ev.violated_rules = violated;
  for (const auto& rule_id : violated) {
    auto it = catalog.mapping.find(rule_id);
    if (it == catalog.mapping.end()) continue;
    ev.related_causes.insert(it->second.begin(), it->second.end());
  }
  for (const auto& id : ev.related_causes)
    if (catalog.cause(id).fires(ctx)) ev.valid_causes.insert(id);
  ev.r_online = r_online_score(ev.valid_causes, ev.related_causes, catalog);
  return ev;
}

void ContextBook::load(const OfflineBatch& current, const OfflineBatch* previous) {
  std::unordered_map<AccountId, Amount> prev_bill;
  if (previous) {
    prev_bill.reserve(previous->size());
    for (const auto& a : *previous) prev_bill[a.account] = a.total_bill;
  }
  entries_.clear();
  entries_.reserve(current.size());
  for (const auto& a : current) {
    AccountContext ctx;
    ctx.profile = a;
    auto it = prev_bill.find(a.account);
    ctx.prior_bill = it == prev_bill.end() ? a.total_bill : a.total_bill - it->second;
    if (!entries_.emplace(a.account, ctx).second) {
      fail(Errc::context, "duplicate account " + std::to_string(a.account) + " in offline batch");
    }
  }
}

const AccountContext& ContextBook::snapshot(AccountId account) const {
  auto it = entries_.find(account);
  if (it == entries_.end()) fail(Errc::context, "unknown account " + std::to_string(account));
  return it->second;
}

void ContextBook::record(const OnlineTransaction& txn) {
  auto it = entries_.find(txn.account);
  if (it == entries_.end()) fail(Errc::context, "unknown account " + std::to_string(txn.account));
  (txn.type == TxnType::pay ? it->second.mtd_payment : it->second.mtd_bill) += txn.amount;
}

void ContextBook::reset_month() {
  for (auto& [id, ctx] : entries_) {
    ctx.mtd_bill = 0;
    ctx.mtd_payment = 0;
  }
}

TxnScore score_transaction(const RuleCatalog& catalog, const OnlineTransaction& txn, const AccountContext& ctx) {
  TxnScore s;
  s.tid = txn.tid;
  s.account = txn.account;
  const auto violated = standard_test(txn, ctx, catalog.rules);
  s.violations = violated.size();
  s.r_online = violated.empty() ? 0.0 : customer_specific_test(violated, ctx, catalog).r_online;
  s.ok = true;
  return s;
}

std::vector<TxnScore> risk(const RuleCatalog& catalog, std::span<const OnlineTransaction> batch, ContextBook& book) {
  std::vector<TxnScore> out;
  out.reserve(batch.size());
  for (const auto& txn : batch) {
    try {
      out.push_back(score_transaction(catalog, txn, book.snapshot(txn.account)));
      book.record(txn);
    } catch (const Error& e) {
      TxnScore s;
      s.tid = txn.tid;
      s.account = txn.account;
      s.error = e.what();
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace cdmine
