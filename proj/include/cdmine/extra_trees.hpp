#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdmine/metrics.hpp"
#include "cdmine/records.hpp"
#include "cdmine/rng.hpp"

namespace cdmine {

/// Row-major feature matrix with binary labels.
struct Dataset {
  std::size_t n_features = 0;
  std::vector<double> x;
  std::vector<int> y;
  std::vector<std::string> feature_names;

  std::size_t rows() const { return y.size(); }
  std::span<const double> row(std::size_t i) const { return {x.data() + i * n_features, n_features}; }
  double at(std::size_t i, std::size_t f) const { return x[i * n_features + f]; }
  Dataset subset(std::span<const std::size_t> rows) const;
};

Dataset make_dataset(const OfflineBatch& batch);

struct ExtraTreesParams {
  std::size_t n_trees = 100;
  std::size_t k_features = 0;  // 0 = auto, ceil(sqrt(d))
  std::size_t n_min = 2;
  std::uint64_t seed = 0;

  std::size_t resolved_k(std::size_t n_features) const;
  /// Throws Errc::config unless 1 <= K <= d, n_min >= 2 and n_trees >= 1.
  void validate(std::size_t n_features) const;
  friend bool operator==(const ExtraTreesParams&, const ExtraTreesParams&) = default;
};

/// Binary tree in flat node arrays, preorder. Leaves have feature == -1.
/// Samples with x[feature] <= threshold go left.
struct Tree {
  std::vector<std::int32_t> feature;
  std::vector<double> threshold;
  std::vector<std::int32_t> left;
  std::vector<std::int32_t> right;
  std::vector<std::uint32_t> count0;  // training samples per class at the node
  std::vector<std::uint32_t> count1;

  std::size_t node_count() const { return feature.size(); }
  bool is_leaf(std::size_t node) const { return feature[node] < 0; }
  std::size_t leaf_for(std::span<const double> x) const;
  /// Class-1 frequency of the leaf reached by x.
  double predict(std::span<const double> x) const;
  /// Node-for-node equality of split features, cut-points and children.
  bool same_skeleton(const Tree& other) const;
};

struct Split {
  std::size_t feature = 0;
  double cut = 0.0;
  double gain = 0.0;  // information gain in bits
};

/// Split selection at one node. Draws up to K features uniformly without
/// replacement among those that are non-constant over `samples`, one uniform
/// cut-point strictly inside (min, max) for each, and keeps the candidate with
/// the highest information gain (ties: lower feature index, then smaller cut).
/// Returns nullopt when |samples| < n_min, when every feature is constant, or
/// when `stop_when_pure` is set and the node is label-pure.
///
/// The random draws depend on the feature values only, so with K == 1 the
/// chosen split never depends on the labels.
std::optional<Split> pick_split(const Dataset& data, std::span<const std::uint32_t> samples, std::size_t k,
                                std::size_t n_min, Rng& rng, bool stop_when_pure = true);

/// Shannon entropy (bits) of a two-class count.
double binary_entropy(std::uint64_t n0, std::uint64_t n1);

class ExtraTreesModel {
 public:
  ExtraTreesModel() = default;
  ExtraTreesModel(ExtraTreesParams params, std::size_t n_features, std::vector<std::string> feature_names,
                  std::vector<Tree> trees, std::vector<double> importances);

  const ExtraTreesParams& params() const { return params_; }
  std::size_t n_features() const { return n_features_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  const std::vector<Tree>& trees() const { return trees_; }
  /// Gain-weighted split usage, normalized to sum to 1.
  const std::vector<double>& feature_importances() const { return importances_; }

  /// Mean class-1 leaf frequency over the trees. Throws Errc::prediction on
  /// a dimension mismatch.
  double predict_proba(std::span<const double> x) const;
  double predict_proba(const OfflineAccount& account) const;

  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static ExtraTreesModel load(std::istream& in, const std::string& origin = "<stream>");
  static ExtraTreesModel load(const std::filesystem::path& path);

 private:
  ExtraTreesParams params_;
  std::size_t n_features_ = 0;
  std::vector<std::string> feature_names_;
  std::vector<Tree> trees_;
  std::vector<double> importances_;
};

/// Grows params.n_trees trees, each on the full training set (no bagging).
/// Tree t draws from its own stream derived from (seed, t), so `threads` never
/// changes the model. With K == 1 growth ignores labels entirely: pure nodes
/// keep splitting, which leaves every prediction unchanged. Throws
/// Errc::training when the data is empty or holds a single class.
ExtraTreesModel train(const Dataset& data, const ExtraTreesParams& params, unsigned threads = 1);
ExtraTreesModel train(const OfflineBatch& batch, const ExtraTreesParams& params, unsigned threads = 1);

struct FoldResult {
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  ConfusionMatrix confusion;
  Metrics metrics;
  double train_seconds = 0.0;
};

struct CvReport {
  std::vector<FoldResult> folds;
  Metrics mean;  // unweighted mean of per-fold metrics
  double mean_train_seconds = 0.0;
};

/// Stratified fold assignment: rows of each class are shuffled with a fixed
/// seed, classes are concatenated and dealt round-robin, so k == rows gives
/// leave-one-out. Returns the fold index of every row.
std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t k, std::uint64_t seed);

/// k-fold cross-validation at decision threshold 0.5 (p >= 0.5 is default).
CvReport cross_validate(const Dataset& data, const ExtraTreesParams& params, std::size_t k, std::uint64_t seed,
                        unsigned threads = 1);

void write_cv_report(std::ostream& out, const CvReport& report);

/// Out-of-fold default probabilities: each row is scored by the model trained
/// on the other k-1 folds.
std::vector<double> cross_fit_proba(const Dataset& data, const ExtraTreesParams& params, std::size_t k,
                                    std::uint64_t seed, unsigned threads = 1);

}  // namespace cdmine
