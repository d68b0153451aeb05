#include "cdmine/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "cdmine/error.hpp"

namespace cdmine {

using json = nlohmann::ordered_json;

namespace {

json to_json(const RunConfig& c) {
  json j;
  j["paths"] = {
      {"source", c.paths.source.string()},   {"template", c.paths.template_csv.string()},
      {"out_dir", c.paths.out_dir.string()}, {"model", c.paths.model.string()},
      {"state", c.paths.state.string()},     {"rules", c.paths.rules.string()},
      {"report", c.paths.report.string()},   {"bench", c.paths.bench.string()},
      {"cv_report", c.paths.cv_report.string()}, {"pinned", c.paths.pinned.string()},
  };
  j["trees"] = {{"n_trees", c.trees.n_trees},
                {"k_features", c.trees.k_features},
                {"n_min", c.trees.n_min},
                {"seed", c.trees.seed}};
  j["scoring"] = {{"lambda", c.scoring.lambda},
                  {"threshold", c.scoring.threshold},
                  {"offline_scoring", c.offline_scoring == OfflineScoring::cross_fit ? "cross_fit" : "model"},
                  {"cross_fit_folds", c.cross_fit_folds}};
  j["decompose"] = {{"bins", c.decompose.tmpl.bins},
                    {"mean_parts_per_bill", c.decompose.tmpl.mean_parts_per_bill},
                    {"max_parts", c.decompose.tmpl.max_parts},
                    {"seed", c.decompose.seed},
                    {"year", c.decompose.year},
                    {"template_mu", c.decompose.synthetic.mu},
                    {"template_sigma", c.decompose.synthetic.sigma},
                    {"template_count", c.decompose.synthetic.count},
                    {"template_seed", c.decompose.synthetic.seed}};
  j["cv"] = {{"folds", c.cv.folds}, {"seed", c.cv.seed}, {"batch", c.cv.batch}};
  j["bench"] = {{"halvings", c.bench.halvings}, {"batch", c.bench.batch}, {"repetitions", c.bench.repetitions}};
  j["synth"] = {{"rows", c.synth.rows}, {"defaults", c.synth.defaults}, {"seed", c.synth.seed}};
  j["threads"] = c.threads;
  return j;
}

// Rejects keys that the defaults do not have and values whose JSON kind
// differs from the default's (numbers of either kind are interchangeable).
void check_shape(const json& given, const json& reference, const std::string& prefix) {
  for (auto it = given.begin(); it != given.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!reference.contains(it.key())) fail(Errc::config, "config: unknown key '" + key + "'");
    const json& ref = reference.at(it.key());
    if (ref.is_object()) {
      if (!it.value().is_object()) fail(Errc::config, "config: '" + key + "' must be an object");
      check_shape(it.value(), ref, key);
    } else if (ref.is_string() && !it.value().is_string()) {
      fail(Errc::config, "config: '" + key + "' must be a string");
    } else if (ref.is_number() && !it.value().is_number()) {
      fail(Errc::config, "config: '" + key + "' must be a number");
    }
  }
}

void apply_override(json& j, const json& reference, const Override& o) {
  json* node = &j;
  const json* ref = &reference;
  std::string_view rest = o.first;
  while (true) {
    const auto dot = rest.find('.');
    const std::string part(rest.substr(0, dot));
    if (!ref->is_object() || !ref->contains(part)) fail(Errc::config, "config: unknown key '" + o.first + "'");
    ref = &ref->at(part);
    node = &(*node)[part];
    if (dot == std::string_view::npos) break;
    rest.remove_prefix(dot + 1);
  }
  if (ref->is_object()) fail(Errc::config, "config: '" + o.first + "' is a section, not a value");
  json value;
  if (ref->is_string()) {
    value = o.second;
  } else {
    value = json::parse(o.second, nullptr, false);
    if (value.is_discarded() || !value.is_number()) {
      fail(Errc::config, "config: '" + o.first + "' expects a number, got '" + o.second + "'");
    }
  }
  *node = std::move(value);
}

double number(const json& j, const char* section, const char* key) {
  const json& v = j.at(section).at(key);
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(Errc::config, std::string("config: ") + section + "." + key + " must be finite");
  return d;
}

std::int64_t integer(const json& j, const char* section, const char* key, std::int64_t lo, std::int64_t hi) {
  const json& v = j.at(section).at(key);
  const std::string name = std::string(section) + "." + key;
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d != std::floor(d)) fail(Errc::config, "config: " + name + " must be an integer");
  }
  std::int64_t out = 0;
  if (v.is_number_unsigned()) {
    const auto u = v.get<std::uint64_t>();
    if (u > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
      fail(Errc::config, "config: " + name + " is out of range");
    }
    out = static_cast<std::int64_t>(u);
  } else if (v.is_number_float()) {
    const double d = v.get<double>();
    if (!(d >= -9.2e18 && d <= 9.2e18)) fail(Errc::config, "config: " + name + " is out of range");
    out = static_cast<std::int64_t>(d);
  } else {
    out = v.get<std::int64_t>();
  }
  if (out < lo || out > hi) {
    fail(Errc::config,
         "config: " + name + " = " + std::to_string(out) + " outside [" + std::to_string(lo) + ", " +
             std::to_string(hi) + "]");
  }
  return out;
}

std::uint64_t seed_value(const json& j, const char* section, const char* key) {
  const json& v = j.at(section).at(key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  return static_cast<std::uint64_t>(integer(j, section, key, 0, std::numeric_limits<std::int64_t>::max()));
}

fs::path resolve(const json& j, const char* key, const fs::path& base) {
  const std::string s = j.at("paths").at(key).get<std::string>();
  if (s.empty()) return {};
  fs::path p(s);
  return p.is_absolute() ? p.lexically_normal() : (base / p).lexically_normal();
}

constexpr std::int64_t kBig = std::numeric_limits<std::int32_t>::max();

RunConfig from_json(const json& j, const fs::path& base) {
  RunConfig c;
  c.paths.source = resolve(j, "source", base);
  c.paths.template_csv = resolve(j, "template", base);
  c.paths.out_dir = resolve(j, "out_dir", base);
  c.paths.model = resolve(j, "model", base);
  c.paths.state = resolve(j, "state", base);
  c.paths.rules = resolve(j, "rules", base);
  c.paths.report = resolve(j, "report", base);
  c.paths.bench = resolve(j, "bench", base);
  c.paths.cv_report = resolve(j, "cv_report", base);
  c.paths.pinned = resolve(j, "pinned", base);

  c.trees.n_trees = static_cast<std::size_t>(integer(j, "trees", "n_trees", 1, 100000));
  c.trees.k_features = static_cast<std::size_t>(integer(j, "trees", "k_features", 0, kBig));
  c.trees.n_min = static_cast<std::size_t>(integer(j, "trees", "n_min", 2, kBig));
  c.trees.seed = seed_value(j, "trees", "seed");

  c.scoring.lambda = number(j, "scoring", "lambda");
  c.scoring.threshold = number(j, "scoring", "threshold");
  const std::string mode = j.at("scoring").at("offline_scoring").get<std::string>();
  if (mode == "cross_fit") {
    c.offline_scoring = OfflineScoring::cross_fit;
  } else if (mode == "model") {
    c.offline_scoring = OfflineScoring::model;
  } else {
    fail(Errc::config, "config: scoring.offline_scoring must be 'cross_fit' or 'model', got '" + mode + "'");
  }
  c.cross_fit_folds = static_cast<std::size_t>(integer(j, "scoring", "cross_fit_folds", 2, kBig));

  c.decompose.tmpl.bins = static_cast<std::size_t>(integer(j, "decompose", "bins", 1, 1000000));
  c.decompose.tmpl.mean_parts_per_bill = number(j, "decompose", "mean_parts_per_bill");
  c.decompose.tmpl.max_parts = static_cast<std::size_t>(integer(j, "decompose", "max_parts", 1, kBig));
  c.decompose.seed = seed_value(j, "decompose", "seed");
  c.decompose.year = static_cast<int>(integer(j, "decompose", "year", 1900, 9999));
  c.scoring.year = c.decompose.year;
  c.scoring.first_month = batch_month(0);
  c.decompose.synthetic.mu = number(j, "decompose", "template_mu");
  c.decompose.synthetic.sigma = number(j, "decompose", "template_sigma");
  c.decompose.synthetic.count = static_cast<std::size_t>(integer(j, "decompose", "template_count", 1, kBig));
  c.decompose.synthetic.seed = seed_value(j, "decompose", "template_seed");

  c.cv.folds = static_cast<std::size_t>(integer(j, "cv", "folds", 2, kBig));
  c.cv.seed = seed_value(j, "cv", "seed");
  c.cv.batch = static_cast<int>(integer(j, "cv", "batch", 1, kBatches));

  c.bench.halvings = static_cast<int>(integer(j, "bench", "halvings", 2, 30));
  c.bench.batch = static_cast<int>(integer(j, "bench", "batch", 1, kBatches));
  c.bench.repetitions = static_cast<int>(integer(j, "bench", "repetitions", 1, 1000));

  c.synth.rows = static_cast<std::size_t>(integer(j, "synth", "rows", 1, kBig));
  c.synth.defaults = static_cast<std::size_t>(integer(j, "synth", "defaults", 0, kBig));
  c.synth.seed = seed_value(j, "synth", "seed");

  const json& t = j.at("threads");
  if (!t.is_number_integer() || t.get<std::int64_t>() < 0 || t.get<std::int64_t>() > 4096) {
    fail(Errc::config, "config: threads must be an integer in [0, 4096]");
  }
  c.threads = static_cast<unsigned>(t.get<std::int64_t>());
  c.validate();
  return c;
}

RunConfig build(json j, const fs::path& base_dir, const std::vector<Override>& overrides) {
  const json reference = to_json(RunConfig{});
  if (!j.is_object()) fail(Errc::config, "config: top level must be a JSON object");
  check_shape(j, reference, "");
  json merged = reference;
  merged.merge_patch(j);
  for (const auto& o : overrides) apply_override(merged, reference, o);
  try {
    return from_json(merged, base_dir);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::config, std::string("config: ") + e.what());
  }
}

}  // namespace

fs::path RunConfig::offline_batch_path(int batch) const {
  return paths.out_dir / ("offline_" + std::to_string(batch) + ".csv");
}

fs::path RunConfig::online_batch_path(int batch) const {
  return paths.out_dir / ("online_" + std::to_string(batch) + ".csv");
}

void RunConfig::validate() const {
  scoring.validate();
  trees.validate(kOfflineFeatureCount);
  if (!(decompose.tmpl.mean_parts_per_bill >= 1.0)) {
    fail(Errc::config, "config: decompose.mean_parts_per_bill must be >= 1");
  }
  if (!(decompose.synthetic.sigma > 0.0)) fail(Errc::config, "config: decompose.template_sigma must be > 0");
  if (synth.defaults > synth.rows) fail(Errc::config, "config: synth.defaults exceeds synth.rows");
  if (paths.out_dir.empty()) fail(Errc::config, "config: paths.out_dir must not be empty");
  for (const auto* p : {&paths.source, &paths.model, &paths.state, &paths.report, &paths.bench, &paths.cv_report}) {
    if (p->empty()) fail(Errc::config, "config: output and source paths must not be empty");
  }
}

RunConfig parse_config(std::string_view json_text, const fs::path& base_dir, const std::vector<Override>& overrides) {
  json j = json::parse(json_text, nullptr, false, true);
  if (j.is_discarded()) fail(Errc::config, "config: not valid JSON");
  return build(std::move(j), base_dir, overrides);
}

RunConfig load_config(const fs::path& path, const std::vector<Override>& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::config, "config: cannot open '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  json j = json::parse(text.str(), nullptr, false, true);
  if (j.is_discarded()) fail(Errc::config, "config: '" + path.string() + "' is not valid JSON");
  return build(std::move(j), fs::absolute(path).parent_path(), overrides);
}

RunConfig default_config(const fs::path& base_dir, const std::vector<Override>& overrides) {
  return build(json::object(), base_dir, overrides);
}

std::string dump_config(const RunConfig& config) { return to_json(config).dump(2) + "\n"; }

}  // namespace cdmine
