#include "cdmine/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "cdmine/error.hpp"
#include "cdmine/rng.hpp"

namespace cdmine {
namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

template <std::size_t N>
int categorical(Rng& rng, const int (&codes)[N], const double (&weights)[N]) {
  double u = rng.uniform() * std::accumulate(std::begin(weights), std::end(weights), 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    if (u < weights[i]) return codes[i];
    u -= weights[i];
  }
  return codes[N - 1];
}

// Non-delinquent behaviour classes: -2 no consumption, -1 pays in full,
// 0 revolving credit.
int draw_regular_status(Rng& rng, double z) {
  const double p_idle = 0.16 * std::exp(-0.35 * z);
  const double p_full = 0.22 * std::exp(-0.25 * z);
  const double u = rng.uniform();
  if (u < p_idle) return -2;
  if (u < p_idle + p_full) return -1;
  return 0;
}

struct Generated {
  CustomerRecord record;
  double default_score = 0.0;
};

Generated generate_account(AccountId id, std::uint64_t seed) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(id), 0x5e17));
  const double z = rng.normal();  // latent credit risk

  CustomerRecord r;
  r.id = id;
  const double limit = std::exp(11.75 - 0.30 * z + 0.65 * rng.normal());
  r.limit_bal = std::clamp<Amount>(std::llround(limit / 10000.0) * 10000, 10000, 1000000);
  r.sex = rng.bernoulli(0.6) ? 2 : 1;
  static constexpr int edu_codes[] = {1, 2, 3, 4, 5, 6, 0};
  static constexpr double edu_w[] = {0.353, 0.468, 0.164, 0.004, 0.009, 0.0017, 0.0005};
  r.education = categorical(rng, edu_codes, edu_w);
  static constexpr int mar_codes[] = {1, 2, 3, 0};
  static constexpr double mar_w[] = {0.455, 0.532, 0.011, 0.002};
  r.marriage = categorical(rng, mar_codes, mar_w);
  r.age = static_cast<int>(std::clamp<long>(std::lround(std::exp(std::log(34.0) + 0.25 * rng.normal())), 21, 79));

  // Repayment status chain, April .. September.
  int status = rng.bernoulli(sigmoid(-2.4 + 1.1 * z)) ? (rng.bernoulli(0.5) ? 1 : 2) : draw_regular_status(rng, z);
  for (int t = 0; t < kMonths; ++t) {
    if (t > 0) {
      if (status >= 1) {
        status = rng.bernoulli(sigmoid(0.4 + 0.9 * z)) ? std::min(8, status + 1) : 0;
      } else if (rng.bernoulli(sigmoid(-3.1 + 1.1 * z))) {
        status = rng.bernoulli(0.3) ? 1 : 2;
      } else if (!rng.bernoulli(0.85)) {
        status = draw_regular_status(rng, z);
      }
    }
    r.pay_status[t] = status;
  }

  // Bills follow a per-account utilization level.
  const double utilization = sigmoid(-0.7 + 0.7 * z + 0.9 * rng.normal());
  const double lim = static_cast<double>(r.limit_bal);
  for (int t = 0; t < kMonths; ++t) {
    const int s = r.pay_status[t];
    const double noise = std::exp(0.25 * rng.normal());
    double bill = 0.0;
    if (s == -2) {
      bill = rng.bernoulli(0.75) ? 0.0 : -static_cast<double>(rng.between(1, 400));
    } else if (s == -1) {
      bill = lim * utilization * 0.25 * noise;
    } else if (s == 0) {
      bill = lim * utilization * noise;
    } else {
      bill = lim * std::min(1.2, utilization + 0.08 * s) * noise;
    }
    r.bill_amt[t] = std::llround(bill);
  }

  // Payment in month t settles part of the previous statement.
  for (int t = 0; t < kMonths; ++t) {
    const double previous = static_cast<double>(t == 0 ? r.bill_amt[0] : r.bill_amt[t - 1]);
    const int s = r.pay_status[t];
    double pay = 0.0;
    if (previous > 0.0) {
      if (s <= -1) {
        pay = previous;
      } else if (s == 0) {
        pay = rng.bernoulli(0.12) ? previous
                                  : previous * std::clamp(std::exp(std::log(0.07) + 0.6 * rng.normal()), 0.02, 1.0);
      } else {
        pay = rng.bernoulli(0.55) ? 0.0 : previous * 0.03 * std::exp(0.4 * rng.normal());
      }
    }
    r.pay_amt[t] = std::max<Amount>(0, std::llround(pay));
  }

  Generated g;
  g.record = r;
  g.default_score = 1.0 * z + 0.5 * std::max(0, r.pay_status[5]) + 0.3 * std::max(0, r.pay_status[4]) +
                    2.2 * rng.normal();
  return g;
}

}  // namespace

std::vector<CustomerRecord> synthesize_source(const SynthOptions& options) {
  if (options.rows == 0) fail(Errc::config, "synth: rows must be positive");
  if (options.defaults > options.rows) fail(Errc::config, "synth: more defaults than rows");

  std::unordered_map<AccountId, const CustomerRecord*> pinned;
  std::size_t pinned_defaults = 0;
  for (const auto& p : options.pinned) {
    if (p.id < 1 || static_cast<std::size_t>(p.id) > options.rows) {
      fail(Errc::config, "synth: pinned id " + std::to_string(p.id) + " outside [1, rows]");
    }
    if (!pinned.emplace(p.id, &p).second) fail(Errc::config, "synth: pinned id " + std::to_string(p.id) + " repeated");
    pinned_defaults += static_cast<std::size_t>(p.label == 1);
  }
  if (pinned_defaults > options.defaults ||
      options.defaults - pinned_defaults > options.rows - pinned.size()) {
    fail(Errc::config, "synth: pinned labels make the default count unreachable");
  }

  std::vector<Generated> rows(options.rows);
  for (std::size_t i = 0; i < options.rows; ++i) rows[i] = generate_account(static_cast<AccountId>(i + 1), options.seed);

  std::vector<std::size_t> free_rows;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (!pinned.count(rows[i].record.id)) free_rows.push_back(i);
  std::stable_sort(free_rows.begin(), free_rows.end(),
                   [&](std::size_t a, std::size_t b) { return rows[a].default_score > rows[b].default_score; });
  const std::size_t free_defaults = options.defaults - pinned_defaults;
  for (std::size_t k = 0; k < free_rows.size(); ++k) rows[free_rows[k]].record.label = k < free_defaults ? 1 : 0;

  std::vector<CustomerRecord> out;
  out.reserve(rows.size());
  for (auto& g : rows) {
    auto it = pinned.find(g.record.id);
    out.push_back(it == pinned.end() ? g.record : *it->second);
  }
  return out;
}

}  // namespace cdmine
