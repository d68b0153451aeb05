#include "cdmine/extra_trees.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "cdmine/csv.hpp"
#include "cdmine/error.hpp"
#include "cdmine/parallel.hpp"

namespace cdmine {

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.n_features = n_features;
  out.feature_names = feature_names;
  out.x.reserve(rows.size() * n_features);
  out.y.reserve(rows.size());
  for (std::size_t r : rows) {
    const auto v = row(r);
    out.x.insert(out.x.end(), v.begin(), v.end());
    out.y.push_back(y[r]);
  }
  return out;
}

Dataset make_dataset(const OfflineBatch& batch) {
  Dataset d;
  d.n_features = kOfflineFeatureCount;
  for (auto name : offline_feature_names()) d.feature_names.emplace_back(name);
  d.x.reserve(batch.size() * d.n_features);
  d.y.reserve(batch.size());
  for (const auto& a : batch) {
    const auto f = offline_features(a);
    d.x.insert(d.x.end(), f.begin(), f.end());
    d.y.push_back(a.default_flag);
  }
  return d;
}

std::size_t ExtraTreesParams::resolved_k(std::size_t n_features) const {
  if (k_features != 0) return k_features;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_features)))));
}

void ExtraTreesParams::validate(std::size_t n_features) const {
  if (n_trees < 1) fail(Errc::config, "extra trees: n_trees must be >= 1");
  if (n_min < 2) fail(Errc::config, "extra trees: n_min must be >= 2");
  const std::size_t k = resolved_k(n_features);
  if (k < 1 || k > n_features) {
    fail(Errc::config, "extra trees: k_features " + std::to_string(k) + " outside [1, " +
                           std::to_string(n_features) + "]");
  }
}

double binary_entropy(std::uint64_t n0, std::uint64_t n1) {
  const double n = static_cast<double>(n0 + n1);
  if (n0 == 0 || n1 == 0) return 0.0;
  const double p0 = static_cast<double>(n0) / n;
  const double p1 = static_cast<double>(n1) / n;
  return -(p0 * std::log2(p0) + p1 * std::log2(p1));
}

std::size_t Tree::leaf_for(std::span<const double> x) const {
  std::size_t node = 0;
  while (feature[node] >= 0) {
    node = static_cast<std::size_t>(x[static_cast<std::size_t>(feature[node])] <= threshold[node] ? left[node]
                                                                                                   : right[node]);
  }
  return node;
}

double Tree::predict(std::span<const double> x) const {
  const std::size_t leaf = leaf_for(x);
  return static_cast<double>(count1[leaf]) / static_cast<double>(count0[leaf] + count1[leaf]);
}

bool Tree::same_skeleton(const Tree& o) const {
  return feature == o.feature && threshold == o.threshold && left == o.left && right == o.right;
}

namespace {

// Column-major copy of the training features plus scratch buffers, so the
// per-candidate passes run over contiguous memory.
class SplitFinder {
 public:
  explicit SplitFinder(const Dataset& data) : data_(data), col_(data.x.size()) {
    const std::size_t n = data.rows();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t f = 0; f < data.n_features; ++f) col_[f * n + i] = data.at(i, f);
  }

  double value(std::uint32_t sample, std::size_t f) const { return col_[f * data_.rows() + sample]; }

  std::optional<Split> find(std::span<const std::uint32_t> samples, std::size_t k, std::size_t n_min, Rng& rng,
                            bool stop_when_pure) {
    const std::size_t n = samples.size();
    if (n == 0 || n < n_min) return std::nullopt;
    labels_.resize(n);
    std::uint64_t n1 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      labels_[i] = static_cast<std::uint8_t>(data_.y[samples[i]] != 0);
      n1 += labels_[i];
    }
    if (stop_when_pure && (n1 == 0 || n1 == n)) return std::nullopt;
    const double parent_entropy = binary_entropy(n - n1, n1);

    const std::size_t d = data_.n_features;
    order_.resize(d);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    values_.resize(n);
    std::size_t remaining = d;
    std::size_t candidates = 0;
    std::optional<Split> best;

    while (remaining > 0 && candidates < k) {
      const std::size_t pick = static_cast<std::size_t>(rng.below(remaining));
      const std::size_t f = order_[pick];
      std::swap(order_[pick], order_[remaining - 1]);
      --remaining;

      const double* column = col_.data() + f * data_.rows();
      double lo = column[samples[0]];
      double hi = lo;
      for (std::size_t i = 0; i < n; ++i) {
        const double v = column[samples[i]];
        values_[i] = v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (!(hi > lo)) continue;
      double cut = lo + rng.uniform_open() * (hi - lo);
      if (!(cut > lo && cut < hi)) {
        cut = std::nextafter(lo, hi);
        if (!(cut < hi)) continue;  // lo and hi are adjacent doubles
      }
      ++candidates;

      std::uint64_t nl = 0, nl1 = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t goes_left = values_[i] <= cut;
        nl += goes_left;
        nl1 += goes_left & labels_[i];
      }
      const std::uint64_t nr = n - nl;
      const std::uint64_t nr1 = n1 - nl1;
      const double gain = parent_entropy - (static_cast<double>(nl) / n) * binary_entropy(nl - nl1, nl1) -
                          (static_cast<double>(nr) / n) * binary_entropy(nr - nr1, nr1);

      const bool better = !best || gain > best->gain ||
                          (gain == best->gain && (f < best->feature || (f == best->feature && cut < best->cut)));
      if (better) best = Split{f, cut, gain};
    }
    return best;
  }

 private:
  const Dataset& data_;
  std::vector<double> col_;
  std::vector<double> values_;
  std::vector<std::uint8_t> labels_;
  std::vector<std::size_t> order_;
};

}  // namespace

std::optional<Split> pick_split(const Dataset& data, std::span<const std::uint32_t> samples, std::size_t k,
                                std::size_t n_min, Rng& rng, bool stop_when_pure) {
  SplitFinder finder(data);
  return finder.find(samples, k, n_min, rng, stop_when_pure);
}

namespace {

struct Pending {
  std::size_t begin;
  std::size_t end;
  std::int32_t parent;
  bool is_left;
};

Tree grow_tree(const Dataset& data, SplitFinder& finder, std::size_t k, std::size_t n_min, bool stop_when_pure,
               Rng& rng, std::vector<double>& importance) {
  Tree tree;
  std::vector<std::uint32_t> idx(data.rows());
  std::iota(idx.begin(), idx.end(), 0u);
  const double total = static_cast<double>(data.rows());

  std::vector<Pending> stack{{0, idx.size(), -1, false}};
  while (!stack.empty()) {
    const Pending p = stack.back();
    stack.pop_back();
    const auto node = static_cast<std::int32_t>(tree.feature.size());
    if (p.parent >= 0) (p.is_left ? tree.left : tree.right)[static_cast<std::size_t>(p.parent)] = node;

    std::span<std::uint32_t> samples(idx.data() + p.begin, p.end - p.begin);
    std::uint32_t c1 = 0;
    for (auto s : samples) c1 += static_cast<std::uint32_t>(data.y[s] != 0);
    tree.count0.push_back(static_cast<std::uint32_t>(samples.size()) - c1);
    tree.count1.push_back(c1);
    tree.left.push_back(-1);
    tree.right.push_back(-1);

    const auto split = finder.find(samples, k, n_min, rng, stop_when_pure);
    if (!split) {
      tree.feature.push_back(-1);
      tree.threshold.push_back(0.0);
      continue;
    }
    tree.feature.push_back(static_cast<std::int32_t>(split->feature));
    tree.threshold.push_back(split->cut);
    importance[split->feature] += static_cast<double>(samples.size()) / total * split->gain;

    const auto mid = std::partition(samples.begin(), samples.end(), [&](std::uint32_t s) {
      return finder.value(s, split->feature) <= split->cut;
    });
    const std::size_t split_at = p.begin + static_cast<std::size_t>(mid - samples.begin());
    // Right is pushed first so the left subtree is numbered next (preorder).
    stack.push_back({split_at, p.end, node, false});
    stack.push_back({p.begin, split_at, node, true});
  }
  return tree;
}

}  // namespace

ExtraTreesModel::ExtraTreesModel(ExtraTreesParams params, std::size_t n_features,
                                 std::vector<std::string> feature_names, std::vector<Tree> trees,
                                 std::vector<double> importances)
    : params_(params),
      n_features_(n_features),
      feature_names_(std::move(feature_names)),
      trees_(std::move(trees)),
      importances_(std::move(importances)) {}

double ExtraTreesModel::predict_proba(std::span<const double> x) const {
  if (x.size() != n_features_) {
    fail(Errc::prediction, "predict: expected " + std::to_string(n_features_) + " features, got " +
                               std::to_string(x.size()));
  }
  if (trees_.empty()) fail(Errc::prediction, "predict: model has no trees");
  double sum = 0.0;
  for (const auto& t : trees_) sum += t.predict(x);
  return sum / static_cast<double>(trees_.size());
}

double ExtraTreesModel::predict_proba(const OfflineAccount& account) const {
  const auto f = offline_features(account);
  return predict_proba(std::span<const double>(f));
}

ExtraTreesModel train(const Dataset& data, const ExtraTreesParams& params, unsigned threads) {
  if (data.rows() == 0) fail(Errc::training, "train: empty training set");
  if (data.x.size() != data.rows() * data.n_features) fail(Errc::training, "train: feature matrix shape mismatch");
  params.validate(data.n_features);
  std::size_t positives = 0;
  for (int label : data.y) {
    if (label != 0 && label != 1) fail(Errc::training, "train: labels must be 0 or 1");
    positives += static_cast<std::size_t>(label);
  }
  if (positives == 0 || positives == data.rows()) {
    fail(Errc::training, "train: training data holds a single class");
  }

  const std::size_t k = params.resolved_k(data.n_features);
  const bool stop_when_pure = k > 1;
  std::vector<Tree> trees(params.n_trees);
  std::vector<std::vector<double>> per_tree(params.n_trees, std::vector<double>(data.n_features, 0.0));
  parallel_for(params.n_trees, threads, [&](std::size_t t) {
    Rng rng(derive_seed(params.seed, t));
    SplitFinder finder(data);
    trees[t] = grow_tree(data, finder, k, params.n_min, stop_when_pure, rng, per_tree[t]);
  });

  std::vector<double> importance(data.n_features, 0.0);
  for (const auto& imp : per_tree) {
    const double s = std::accumulate(imp.begin(), imp.end(), 0.0);
    if (s <= 0.0) continue;
    for (std::size_t f = 0; f < imp.size(); ++f) importance[f] += imp[f] / s;
  }
  const double s = std::accumulate(importance.begin(), importance.end(), 0.0);
  for (auto& v : importance) v = s > 0.0 ? v / s : 1.0 / static_cast<double>(data.n_features);

  return ExtraTreesModel(params, data.n_features, data.feature_names, std::move(trees), std::move(importance));
}

ExtraTreesModel train(const OfflineBatch& batch, const ExtraTreesParams& params, unsigned threads) {
  return train(make_dataset(batch), params, threads);
}

// Model file, line oriented:
//   cdmine-extra-trees 1
//   n_trees <int> / k_features <int, 0 = auto> / n_min <int> / seed <uint64>
//   features <d> <name>...
//   importances <d values>
//   tree <index> <node count>, then one line per node:
//     <feature> <threshold> <left> <right> <count0> <count1>
//   end
// Doubles use the shortest text that round-trips exactly.
void ExtraTreesModel::save(std::ostream& out) const {
  out << "cdmine-extra-trees 1\n";
  out << "n_trees " << params_.n_trees << "\nk_features " << params_.k_features << "\nn_min " << params_.n_min
      << "\nseed " << params_.seed << '\n';
  out << "features " << n_features_;
  for (const auto& n : feature_names_) out << ' ' << n;
  out << "\nimportances";
  for (double v : importances_) out << ' ' << csv::format_double(v);
  out << '\n';
  std::string line;
  for (std::size_t t = 0; t < trees_.size(); ++t) {
    const Tree& tr = trees_[t];
    out << "tree " << t << ' ' << tr.node_count() << '\n';
    for (std::size_t i = 0; i < tr.node_count(); ++i) {
      line.clear();
      line += std::to_string(tr.feature[i]);
      line += ' ';
      line += csv::format_double(tr.threshold[i]);
      line += ' ';
      line += std::to_string(tr.left[i]);
      line += ' ';
      line += std::to_string(tr.right[i]);
      line += ' ';
      line += std::to_string(tr.count0[i]);
      line += ' ';
      line += std::to_string(tr.count1[i]);
      line += '\n';
      out << line;
    }
  }
  out << "end\n";
}

void ExtraTreesModel::save(const std::filesystem::path& path) const {
  std::ostringstream out;
  save(out);
  csv::write_atomic(path, out.str());
}

namespace {

class ModelReader {
 public:
  ModelReader(std::istream& in, std::string origin) : in_(in), origin_(std::move(origin)) {}

  std::istringstream next_line() {
    std::string line;
    if (!std::getline(in_, line)) error("unexpected end of file");
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return std::istringstream(line);
  }

  template <class T>
  T keyed(const char* key) {
    auto ls = next_line();
    std::string k;
    T v{};
    if (!(ls >> k >> v) || k != key) error(std::string("expected '") + key + " <value>'");
    return v;
  }

  [[noreturn]] void error(const std::string& what) const {
    fail(Errc::input, origin_ + ": line " + std::to_string(line_no_) + ": " + what);
  }

 private:
  std::istream& in_;
  std::string origin_;
  std::size_t line_no_ = 0;
};

double read_double(std::istringstream& ls, const ModelReader& r) {
  std::string tok;
  double v = 0;
  if (!(ls >> tok) || !csv::parse_double(tok, v)) r.error("malformed number '" + tok + "'");
  return v;
}

}  // namespace

ExtraTreesModel ExtraTreesModel::load(std::istream& in, const std::string& origin) {
  ModelReader r(in, origin);
  {
    auto ls = r.next_line();
    std::string magic;
    int version = 0;
    if (!(ls >> magic >> version) || magic != "cdmine-extra-trees") r.error("not a cdmine extra-trees model");
    if (version != 1) r.error("unsupported model version " + std::to_string(version));
  }
  ExtraTreesParams params;
  params.n_trees = r.keyed<std::size_t>("n_trees");
  params.k_features = r.keyed<std::size_t>("k_features");
  params.n_min = r.keyed<std::size_t>("n_min");
  params.seed = r.keyed<std::uint64_t>("seed");

  std::size_t d = 0;
  std::vector<std::string> names;
  {
    auto ls = r.next_line();
    std::string k;
    if (!(ls >> k >> d) || k != "features" || d == 0) r.error("expected 'features <d> <names>'");
    for (std::size_t i = 0; i < d; ++i) {
      std::string n;
      if (!(ls >> n)) r.error("missing feature name");
      names.push_back(n);
    }
  }
  std::vector<double> importances;
  {
    auto ls = r.next_line();
    std::string k;
    if (!(ls >> k) || k != "importances") r.error("expected 'importances'");
    for (std::size_t i = 0; i < d; ++i) importances.push_back(read_double(ls, r));
  }
  try {
    params.validate(d);
  } catch (const Error& e) {
    r.error(e.what());
  }

  std::vector<Tree> trees(params.n_trees);
  for (std::size_t t = 0; t < params.n_trees; ++t) {
    std::size_t index = 0, nodes = 0;
    {
      auto ls = r.next_line();
      std::string k;
      if (!(ls >> k >> index >> nodes) || k != "tree" || index != t || nodes == 0) {
        r.error("expected 'tree " + std::to_string(t) + " <nodes>'");
      }
    }
    Tree& tr = trees[t];
    for (std::size_t i = 0; i < nodes; ++i) {
      auto ls = r.next_line();
      std::int32_t f = 0, left = 0, right = 0;
      std::uint32_t c0 = 0, c1 = 0;
      if (!(ls >> f)) r.error("malformed node");
      const double thr = read_double(ls, r);
      if (!(ls >> left >> right >> c0 >> c1)) r.error("malformed node");
      const auto n = static_cast<std::int32_t>(nodes);
      const bool leaf = f < 0;
      if (leaf ? (f != -1 || left != -1 || right != -1)
               : (f >= static_cast<std::int32_t>(d) || left <= static_cast<std::int32_t>(i) || left >= n ||
                  right <= static_cast<std::int32_t>(i) || right >= n)) {
        r.error("invalid node links");
      }
      if (c0 + c1 == 0) r.error("node without samples");
      tr.feature.push_back(f);
      tr.threshold.push_back(thr);
      tr.left.push_back(left);
      tr.right.push_back(right);
      tr.count0.push_back(c0);
      tr.count1.push_back(c1);
    }
  }
  {
    auto ls = r.next_line();
    std::string k;
    if (!(ls >> k) || k != "end") r.error("expected 'end'");
  }
  return ExtraTreesModel(params, d, std::move(names), std::move(trees), std::move(importances));
}

ExtraTreesModel ExtraTreesModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::input, "cannot open model file " + path.string());
  return load(in, path.string());
}

std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) fail(Errc::config, "cross-validation: k must be >= 2");
  if (labels.size() < k) {
    fail(Errc::config, "cross-validation: " + std::to_string(labels.size()) + " rows cannot fill " +
                           std::to_string(k) + " folds");
  }
  std::vector<std::size_t> order;
  for (int cls = 0; cls <= 1; ++cls) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if ((labels[i] != 0) == (cls == 1)) rows.push_back(i);
    Rng rng(derive_seed(seed, 0xf01d, static_cast<std::uint64_t>(cls)));
    for (std::size_t i = rows.size(); i > 1; --i) std::swap(rows[i - 1], rows[rng.below(i)]);
    order.insert(order.end(), rows.begin(), rows.end());
  }
  std::vector<std::size_t> fold(labels.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) fold[order[pos]] = pos % k;
  return fold;
}

CvReport cross_validate(const Dataset& data, const ExtraTreesParams& params, std::size_t k, std::uint64_t seed,
                        unsigned threads) {
  const auto fold = stratified_folds(data.y, k, seed);
  CvReport report;
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == f ? test_rows : train_rows).push_back(i);
    const Dataset train_set = data.subset(train_rows);
    const auto start = std::chrono::steady_clock::now();
    const ExtraTreesModel model = train(train_set, params, threads);
    FoldResult r;
    r.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    r.train_rows = train_rows.size();
    r.test_rows = test_rows.size();
    for (std::size_t i : test_rows) r.confusion.add(model.predict_proba(data.row(i)) >= 0.5 ? 1 : 0, data.y[i]);
    r.metrics = compute_metrics(r.confusion);
    report.folds.push_back(r);
  }
  const double n = static_cast<double>(k);
  for (const auto& r : report.folds) {
    report.mean.accuracy += r.metrics.accuracy / n;
    report.mean.precision += r.metrics.precision / n;
    report.mean.recall += r.metrics.recall / n;
    report.mean.f_score += r.metrics.f_score / n;
    report.mean_train_seconds += r.train_seconds / n;
  }
  return report;
}

void write_cv_report(std::ostream& out, const CvReport& report) {
  out << "fold,train_rows,test_rows,accuracy,precision,recall,f_score,train_time\n";
  for (std::size_t i = 0; i < report.folds.size(); ++i) {
    const auto& r = report.folds[i];
    out << i + 1 << ',' << r.train_rows << ',' << r.test_rows << ',' << csv::format_double(r.metrics.accuracy) << ','
        << csv::format_double(r.metrics.precision) << ',' << csv::format_double(r.metrics.recall) << ','
        << csv::format_double(r.metrics.f_score) << ',' << csv::format_double(r.train_seconds) << '\n';
  }
  out << "mean,,," << csv::format_double(report.mean.accuracy) << ',' << csv::format_double(report.mean.precision)
      << ',' << csv::format_double(report.mean.recall) << ',' << csv::format_double(report.mean.f_score) << ','
      << csv::format_double(report.mean_train_seconds) << '\n';
}

std::vector<double> cross_fit_proba(const Dataset& data, const ExtraTreesParams& params, std::size_t k,
                                    std::uint64_t seed, unsigned threads) {
  const auto fold = stratified_folds(data.y, k, seed);
  std::vector<double> proba(data.rows(), 0.0);
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::size_t> train_rows;
    for (std::size_t i = 0; i < fold.size(); ++i)
      if (fold[i] != f) train_rows.push_back(i);
    const ExtraTreesModel model = train(data.subset(train_rows), params, threads);
    for (std::size_t i = 0; i < fold.size(); ++i)
      if (fold[i] == f) proba[i] = model.predict_proba(data.row(i));
  }
  return proba;
}

}  // namespace cdmine
