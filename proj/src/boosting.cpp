#include "ecgdx/boosting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ecgdx/error.hpp"
#include "ecgdx/metrics.hpp"

namespace ecgdx {

namespace {

// Rows per node below which the per-feature scan stays on one thread.
constexpr std::size_t kParallelNodeRows = 4096;

struct NodeTotals {
  double grad = 0.0;
  double hess = 0.0;
};

// Scans present rows of one feature, already sorted by (value, row id), for
// the best threshold. `has_missing` tells whether some node rows lack the
// feature; their gradient mass is whatever the present rows do not account for.
template <typename RowIt>
std::optional<SplitCandidate> scan_sorted(const FeatureMatrix& features, int feature, RowIt begin, RowIt end,
                                          std::span<const double> g, std::span<const double> h, NodeTotals node,
                                          bool has_missing, const TrainConfig& config) {
  if (end - begin < 2) return std::nullopt;
  const auto f = static_cast<std::size_t>(feature);

  double grad_present = 0.0;
  double hess_present = 0.0;
  for (auto it = begin; it != end; ++it) {
    grad_present += g[*it];
    hess_present += h[*it];
  }
  const double grad_missing = has_missing ? node.grad - grad_present : 0.0;
  const double hess_missing = has_missing ? node.hess - hess_present : 0.0;

  std::optional<SplitCandidate> best;
  double grad_left = 0.0;
  double hess_left = 0.0;
  for (auto it = begin; it + 1 != end; ++it) {
    grad_left += g[*it];
    hess_left += h[*it];
    const double lo = features(*it, f);
    const double hi = features(*(it + 1), f);
    if (!(hi > lo)) continue;
    double threshold = lo + (hi - lo) * 0.5;
    if (!(threshold > lo)) threshold = hi;

    for (const bool default_left : {true, false}) {
      if (!default_left && !has_missing) break;
      const double gl = grad_left + (default_left ? grad_missing : 0.0);
      const double hl = hess_left + (default_left ? hess_missing : 0.0);
      const double gr = (grad_present - grad_left) + (default_left ? 0.0 : grad_missing);
      const double hr = (hess_present - hess_left) + (default_left ? 0.0 : hess_missing);
      if (hl < config.min_child_weight || hr < config.min_child_weight) continue;
      const double gain = split_gain(gl, hl, gr, hr, config.lambda_l2, config.gamma_min_gain);
      if (gain > 0.0 && (!best || gain > best->gain)) {
        best = SplitCandidate{feature, threshold, default_left, gain, gl, hl, gr, hr};
      }
    }
  }
  return best;
}

bool better(const std::optional<SplitCandidate>& challenger, const std::optional<SplitCandidate>& incumbent) {
  return challenger && (!incumbent || challenger->gain > incumbent->gain);
}

// Grows trees over a fixed feature matrix. Present rows of every feature are
// sorted once; each tree partitions copies of those lists as nodes split, so
// a node always owns contiguous, still-sorted ranges.
class TreeGrower {
 public:
  TreeGrower(const FeatureMatrix& features, const TrainConfig& config) : features_(features), config_(config) {
    const std::size_t n = features.n_rows();
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      auto& order = sorted_[f];
      order.reserve(n);
      for (std::size_t r = 0; r < n; ++r) {
        if (!std::isnan(features(r, f))) order.push_back(r);
      }
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double va = features(a, f);
        const double vb = features(b, f);
        return va < vb || (va == vb && a < b);
      });
    }
    goes_left_.resize(n);
  }

  Tree grow(std::span<const double> g, std::span<const double> h) {
    g_ = g;
    h_ = h;
    work_ = sorted_;
    rows_.resize(features_.n_rows());
    std::iota(rows_.begin(), rows_.end(), std::size_t{0});

    Range root;
    root.row_end = rows_.size();
    for (std::size_t f = 0; f < kNumFeatures; ++f) root.feature_end[f] = work_[f].size();

    Tree tree;
    build(tree, root, 0);
    return tree;
  }

 private:
  struct Range {
    std::size_t row_begin = 0;
    std::size_t row_end = 0;
    std::array<std::size_t, kNumFeatures> feature_begin{};
    std::array<std::size_t, kNumFeatures> feature_end{};
  };

  int build(Tree& tree, const Range& range, int depth) {
    NodeTotals totals;
    for (std::size_t i = range.row_begin; i < range.row_end; ++i) {
      totals.grad += g_[rows_[i]];
      totals.hess += h_[rows_[i]];
    }
    const int index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[index].cover = totals.hess;

    std::optional<SplitCandidate> best;
    const std::size_t count = range.row_end - range.row_begin;
    if (depth < config_.max_depth && count >= 2) best = find_split(range, totals, count);

    if (!best) {
      tree.nodes[index].weight = leaf_weight(totals.grad, totals.hess, config_.lambda_l2) * config_.learning_rate;
      return index;
    }

    const auto [left, right] = partition(range, *best);
    auto& node = tree.nodes[index];
    node.feature = best->feature;
    node.threshold = best->threshold;
    node.default_left = best->default_left;
    node.gain = best->gain;
    const int left_index = build(tree, left, depth + 1);
    const int right_index = build(tree, right, depth + 1);
    tree.nodes[index].left = left_index;
    tree.nodes[index].right = right_index;
    return index;
  }

  std::optional<SplitCandidate> find_split(const Range& range, NodeTotals totals, std::size_t count) {
    std::array<std::optional<SplitCandidate>, kNumFeatures> per_feature;
    const int n_features = static_cast<int>(kNumFeatures);
#pragma omp parallel for schedule(static) num_threads(config_.threads) if (config_.threads > 1 && count >= kParallelNodeRows)
    for (int f = 0; f < n_features; ++f) {
      const auto uf = static_cast<std::size_t>(f);
      const auto& order = work_[uf];
      const auto begin = order.begin() + static_cast<std::ptrdiff_t>(range.feature_begin[uf]);
      const auto end = order.begin() + static_cast<std::ptrdiff_t>(range.feature_end[uf]);
      const bool has_missing = range.feature_end[uf] - range.feature_begin[uf] < count;
      per_feature[uf] = scan_sorted(features_, f, begin, end, g_, h_, totals, has_missing, config_);
    }
    std::optional<SplitCandidate> best;
    for (const auto& candidate : per_feature) {
      if (better(candidate, best)) best = candidate;
    }
    return best;
  }

  std::pair<Range, Range> partition(const Range& range, const SplitCandidate& split) {
    const auto f = static_cast<std::size_t>(split.feature);
    for (std::size_t i = range.row_begin; i < range.row_end; ++i) {
      const std::size_t r = rows_[i];
      const double v = features_(r, f);
      goes_left_[r] = std::isnan(v) ? split.default_left : v < split.threshold;
    }
    const auto left_of = [this](std::size_t r) { return goes_left_[r] != 0; };

    Range left = range;
    Range right = range;
    const auto rows_mid = std::stable_partition(rows_.begin() + static_cast<std::ptrdiff_t>(range.row_begin),
                                                rows_.begin() + static_cast<std::ptrdiff_t>(range.row_end), left_of);
    left.row_end = right.row_begin = static_cast<std::size_t>(rows_mid - rows_.begin());
    for (std::size_t k = 0; k < kNumFeatures; ++k) {
      auto& order = work_[k];
      const auto mid = std::stable_partition(order.begin() + static_cast<std::ptrdiff_t>(range.feature_begin[k]),
                                             order.begin() + static_cast<std::ptrdiff_t>(range.feature_end[k]), left_of);
      left.feature_end[k] = right.feature_begin[k] = static_cast<std::size_t>(mid - order.begin());
    }
    return {left, right};
  }

  const FeatureMatrix& features_;
  const TrainConfig& config_;
  std::array<std::vector<std::size_t>, kNumFeatures> sorted_;
  std::array<std::vector<std::size_t>, kNumFeatures> work_;
  std::vector<std::size_t> rows_;
  std::vector<std::uint8_t> goes_left_;
  std::span<const double> g_;
  std::span<const double> h_;
};

void require_both_classes(std::span<const std::uint8_t> y, ErrorCode code, const std::string& what) {
  const auto positives = std::count(y.begin(), y.end(), std::uint8_t{1});
  if (positives == 0 || static_cast<std::size_t>(positives) == y.size()) {
    throw Error(code, what + " set contains a single class");
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw Error(ErrorCode::BadConfig, "learning_rate must be in (0, 1]");
  if (max_depth < 1) throw Error(ErrorCode::BadConfig, "max_depth must be >= 1");
  if (!(lambda_l2 >= 0.0)) throw Error(ErrorCode::BadConfig, "lambda_l2 must be >= 0");
  if (!(gamma_min_gain >= 0.0)) throw Error(ErrorCode::BadConfig, "gamma_min_gain must be >= 0");
  if (!(min_child_weight >= 0.0)) throw Error(ErrorCode::BadConfig, "min_child_weight must be >= 0");
  if (max_rounds < 1) throw Error(ErrorCode::BadConfig, "max_rounds must be >= 1");
  if (patience < 1) throw Error(ErrorCode::BadConfig, "patience must be >= 1");
  if (!(positive_weight > 0.0) || !std::isfinite(positive_weight)) {
    throw Error(ErrorCode::BadConfig, "positive_weight must be finite and > 0");
  }
  if (threads < 1) throw Error(ErrorCode::BadConfig, "threads must be >= 1");
}

double split_gain(double grad_left, double hess_left, double grad_right, double hess_right, double lambda,
                  double gamma) {
  const double grad = grad_left + grad_right;
  const double hess = hess_left + hess_right;
  return 0.5 * (grad_left * grad_left / (hess_left + lambda) + grad_right * grad_right / (hess_right + lambda) -
                grad * grad / (hess + lambda)) -
         gamma;
}

std::optional<SplitCandidate> best_split(const FeatureMatrix& features, std::span<const double> gradients,
                                         std::span<const double> hessians, std::span<const std::size_t> node_rows,
                                         int feature_index, const TrainConfig& config) {
  if (feature_index < 0 || feature_index >= static_cast<int>(kNumFeatures)) {
    throw Error(ErrorCode::SchemaMismatch, "feature index out of range");
  }
  const auto f = static_cast<std::size_t>(feature_index);
  NodeTotals totals;
  std::vector<std::size_t> present;
  for (const std::size_t r : node_rows) {
    totals.grad += gradients[r];
    totals.hess += hessians[r];
    if (!std::isnan(features(r, f))) present.push_back(r);
  }
  std::sort(present.begin(), present.end(), [&](std::size_t a, std::size_t b) {
    const double va = features(a, f);
    const double vb = features(b, f);
    return va < vb || (va == vb && a < b);
  });
  return scan_sorted(features, feature_index, present.begin(), present.end(), gradients, hessians, totals,
                     present.size() < node_rows.size(), config);
}

Tree grow_tree(std::span<const double> gradients, std::span<const double> hessians, const FeatureMatrix& features,
               const TrainConfig& config) {
  if (gradients.empty() || gradients.size() != hessians.size() || gradients.size() != features.n_rows()) {
    throw Error(ErrorCode::LengthMismatch, "gradients, hessians and features must have the same non-zero length");
  }
  TreeGrower grower(features, config);
  return grower.grow(gradients, hessians);
}

void BoostedModel::check_schema() const {
  if (schema != schema_names()) throw Error(ErrorCode::SchemaMismatch, "model schema differs from the harmonized schema");
}

double sigmoid(double margin) {
  if (margin >= 0.0) return 1.0 / (1.0 + std::exp(-margin));
  const double e = std::exp(margin);
  return e / (1.0 + e);
}

double predict_margin(const BoostedModel& model, std::span<const double> row) {
  if (row.size() != kNumFeatures) throw Error(ErrorCode::SchemaMismatch, "row must have 10 features");
  model.check_schema();
  double margin = model.base_score;
  for (const auto& tree : model.trees) margin += tree.predict(row);
  return margin;
}

double predict_proba(const BoostedModel& model, std::span<const double> row) {
  return sigmoid(predict_margin(model, row));
}

std::vector<double> predict_margins(const BoostedModel& model, const FeatureMatrix& features) {
  model.check_schema();
  std::vector<double> margins(features.n_rows(), model.base_score);
  for (std::size_t r = 0; r < features.n_rows(); ++r) {
    const auto row = features.row(r);
    for (const auto& tree : model.trees) margins[r] += tree.predict(row);
  }
  return margins;
}

std::vector<double> predict_probas(const BoostedModel& model, const FeatureMatrix& features) {
  auto out = predict_margins(model, features);
  for (auto& m : out) m = sigmoid(m);
  return out;
}

bool EarlyStopping::update(double metric) {
  ++rounds_;
  if (rounds_ == 1 || metric > best_metric_ + kMinImprovement) {
    best_metric_ = metric;
    best_round_ = rounds_;
    since_best_ = 0;
  } else {
    ++since_best_;
  }
  return since_best_ >= patience_;
}

double logistic_loss(std::span<const double> margins, std::span<const std::uint8_t> labels) {
  if (margins.size() != labels.size()) throw Error(ErrorCode::LengthMismatch, "margins and labels differ in length");
  if (margins.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < margins.size(); ++i) {
    const double m = margins[i];
    const double softplus = std::max(m, 0.0) + std::log1p(std::exp(-std::abs(m)));
    total += softplus - (labels[i] ? m : 0.0);
  }
  return total / static_cast<double>(margins.size());
}

TrainResult train(const CohortTable& train_set, const CohortTable& val_set, const std::string& target,
                  const TrainConfig& config, const ValidationScorer& scorer) {
  config.validate();
  if (train_set.n_rows() == 0) throw Error(ErrorCode::EmptySet, "training set is empty");
  if (val_set.n_rows() == 0) throw Error(ErrorCode::EmptySet, "validation set is empty");
  const auto& y_train = train_set.label(target);
  const auto& y_val = val_set.label(target);
  require_both_classes(y_train, ErrorCode::SingleClassTrain, "training");
  require_both_classes(y_val, ErrorCode::SingleClassVal, "validation");

  const std::size_t n = train_set.n_rows();
  const double positives = static_cast<double>(std::count(y_train.begin(), y_train.end(), std::uint8_t{1}));
  const double p = positives / static_cast<double>(n);

  TrainResult result;
  BoostedModel& model = result.model;
  model.target_code = normalize_target(target);
  model.base_score = std::log(p / (1.0 - p));
  model.config = config;
  model.info.n_train = n;
  model.info.n_val = val_set.n_rows();

  std::vector<double> margins(n, model.base_score);
  std::vector<double> val_margins(val_set.n_rows(), model.base_score);
  std::vector<double> g(n);
  std::vector<double> h(n);

  TreeGrower grower(train_set.features, config);
  EarlyStopping stopping(config.patience);
  for (int round = 1; round <= config.max_rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double prob = sigmoid(margins[i]);
      const double w = y_train[i] ? config.positive_weight : 1.0;
      g[i] = w * (prob - static_cast<double>(y_train[i]));
      h[i] = w * prob * (1.0 - prob);
    }
    Tree tree = grower.grow(g, h);
    for (std::size_t i = 0; i < n; ++i) margins[i] += tree.predict(train_set.features.row(i));
    for (std::size_t i = 0; i < val_margins.size(); ++i) val_margins[i] += tree.predict(val_set.features.row(i));
    model.trees.push_back(std::move(tree));

    const double metric = scorer ? scorer(round, val_margins, y_val) : auroc(val_margins, y_val);
    result.history.val_metric.push_back(metric);
    result.history.train_loss.push_back(logistic_loss(margins, y_train));
    if (stopping.update(metric)) break;
  }

  model.info.rounds_trained = stopping.rounds_seen();
  model.info.best_val_auroc = stopping.best_metric();
  model.best_iteration = static_cast<std::size_t>(stopping.best_round());
  model.trees.resize(model.best_iteration);
  return result;
}

}  // namespace ecgdx
