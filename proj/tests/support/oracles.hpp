#pragma once

// Reference computations used only by tests. Nothing here calls into the
// library code paths it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "ecgdx/boosting.hpp"
#include "ecgdx/random.hpp"
#include "ecgdx/tree.hpp"

namespace ecgdx::testing {

// O(n^2) Mann-Whitney count.
inline double pairwise_auroc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  double wins = 0.0;
  double ties = 0.0;
  double p = 0.0;
  double n = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i]) {
      p += 1.0;
    } else {
      n += 1.0;
    }
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      if (scores[i] > scores[j]) {
        wins += 1.0;
      } else if (scores[i] == scores[j]) {
        ties += 1.0;
      }
    }
  }
  return (wins + 0.5 * ties) / (p * n);
}

// Second-order split gain written out directly from the objective.
inline double reference_gain(double gl, double hl, double gr, double hr, double lambda, double gamma) {
  const auto score = [lambda](double g, double h) { return g * g / (h + lambda); };
  return 0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr)) - gamma;
}

// One planted feature of a synthetic cohort: a logistic marginal (median,
// IQR), the positive-class location shift, and clamp bounds.
struct PlantedFeature {
  double median = 0.0;
  double iqr = 1.0;
  double shift = 0.0;
  double lower = -INFINITY;
  double upper = INFINITY;
};

namespace detail {

inline double logistic_cdf(double x, double loc, double scale) { return 1.0 / (1.0 + std::exp(-(x - loc) / scale)); }

inline double logistic_logpdf(double x, double loc, double scale) {
  const double z = (x - loc) / scale;
  return -z - 2.0 * std::log1p(std::exp(-z)) - std::log(scale);
}

// Log-likelihood ratio positive vs negative at an observed (clamped) value.
inline double log_ratio(const PlantedFeature& f, double scale, double x) {
  const double pos = f.median + f.shift;
  if (x <= f.lower) return std::log(logistic_cdf(f.lower, pos, scale) / logistic_cdf(f.lower, f.median, scale));
  if (x >= f.upper) {
    return std::log((1.0 - logistic_cdf(f.upper, pos, scale)) / (1.0 - logistic_cdf(f.upper, f.median, scale)));
  }
  return logistic_logpdf(x, pos, scale) - logistic_logpdf(x, f.median, scale);
}

}  // namespace detail

// AUROC of the Bayes-optimal score (summed log-likelihood ratios) for
// independent planted features. Each class's joint distribution is replaced by
// a product midpoint rule with `k` equal-mass atoms per feature in probability
// space; the AUROC between the two atom clouds is then counted exactly.
inline double bayes_auroc(const std::vector<PlantedFeature>& features, int k = 120) {
  std::vector<double> llr_pos{0.0};
  std::vector<double> llr_neg{0.0};
  for (const auto& f : features) {
    const double scale = f.iqr / (2.0 * std::log(3.0));
    std::vector<double> atoms_pos(static_cast<std::size_t>(k));
    std::vector<double> atoms_neg(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
      const double u = (i + 0.5) / k;
      const double z = scale * std::log(u / (1.0 - u));
      const double x_neg = std::clamp(f.median + z, f.lower, f.upper);
      const double x_pos = std::clamp(f.median + f.shift + z, f.lower, f.upper);
      atoms_neg[static_cast<std::size_t>(i)] = detail::log_ratio(f, scale, x_neg);
      atoms_pos[static_cast<std::size_t>(i)] = detail::log_ratio(f, scale, x_pos);
    }
    const auto combine = [](const std::vector<double>& acc, const std::vector<double>& atoms) {
      std::vector<double> out;
      out.reserve(acc.size() * atoms.size());
      for (const double a : acc) {
        for (const double b : atoms) out.push_back(a + b);
      }
      return out;
    };
    llr_pos = combine(llr_pos, atoms_pos);
    llr_neg = combine(llr_neg, atoms_neg);
  }
  std::sort(llr_neg.begin(), llr_neg.end());
  double wins = 0.0;
  for (const double s : llr_pos) {
    const auto below = std::lower_bound(llr_neg.begin(), llr_neg.end(), s) - llr_neg.begin();
    const auto at_or_below = std::upper_bound(llr_neg.begin(), llr_neg.end(), s) - llr_neg.begin();
    wins += static_cast<double>(below) + 0.5 * static_cast<double>(at_or_below - below);
  }
  return wins / (static_cast<double>(llr_pos.size()) * static_cast<double>(llr_neg.size()));
}

// Random tree over `features` with consistent covers (children sum to parent).
inline void random_subtree(Tree& tree, int index, Rng& rng, int depth, int max_depth,
                           const std::vector<int>& features) {
  const double cover = tree.nodes[static_cast<std::size_t>(index)].cover;
  if (depth >= max_depth || (depth > 0 && rng.uniform() < 0.2)) {
    tree.nodes[static_cast<std::size_t>(index)].weight = rng.normal();
    return;
  }
  TreeNode split;
  split.feature = features[rng.below(features.size())];
  split.threshold = std::round((rng.uniform() * 2.0 - 1.0) * 100.0) / 100.0;
  split.default_left = rng.uniform() < 0.5;
  split.cover = cover;
  split.gain = 1.0;
  const double frac = 0.1 + 0.8 * rng.uniform();
  TreeNode left;
  left.cover = cover * frac;
  TreeNode right;
  right.cover = cover - left.cover;
  split.left = static_cast<int>(tree.nodes.size());
  tree.nodes.push_back(left);
  split.right = static_cast<int>(tree.nodes.size());
  tree.nodes.push_back(right);
  tree.nodes[static_cast<std::size_t>(index)] = split;
  random_subtree(tree, split.left, rng, depth + 1, max_depth, features);
  random_subtree(tree, split.right, rng, depth + 1, max_depth, features);
}

inline Tree random_tree(Rng& rng, int max_depth, const std::vector<int>& features) {
  Tree tree;
  TreeNode root;
  root.cover = 10.0 + 90.0 * rng.uniform();
  tree.nodes.push_back(root);
  random_subtree(tree, 0, rng, 0, max_depth, features);
  return tree;
}

// Up to `max_trees` trees of depth <= max_depth splitting on a random subset
// of at most `max_features` schema features.
inline BoostedModel random_model(Rng& rng, int max_trees, int max_depth, int max_features) {
  std::vector<int> pool(kNumFeatures);
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = static_cast<int>(i);
  for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng.below(i)]);
  pool.resize(1 + rng.below(static_cast<std::size_t>(max_features)));

  BoostedModel model;
  model.base_score = rng.normal();
  const std::size_t n_trees = 1 + rng.below(static_cast<std::size_t>(max_trees));
  for (std::size_t t = 0; t < n_trees; ++t) {
    model.trees.push_back(random_tree(rng, 1 + static_cast<int>(rng.below(static_cast<std::size_t>(max_depth))), pool));
  }
  model.best_iteration = model.trees.size();
  return model;
}

// Values on the scale random_tree thresholds use; some cells are missing and
// some land exactly on a threshold grid point.
inline std::vector<double> random_row(Rng& rng, double missing_rate = 0.15) {
  std::vector<double> row(kNumFeatures);
  for (auto& v : row) {
    if (rng.uniform() < missing_rate) {
      v = std::nan("");
    } else if (rng.uniform() < 0.2) {
      v = std::round((rng.uniform() * 2.0 - 1.0) * 100.0) / 100.0;
    } else {
      v = rng.uniform() * 3.0 - 1.5;
    }
  }
  return row;
}

}  // namespace ecgdx::testing
