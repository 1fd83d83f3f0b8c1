#include "ecgdx/attribution.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "ecgdx/error.hpp"
#include "ecgdx/io.hpp"

namespace ecgdx {

namespace {

double expectation_from(const Tree& tree, int index, std::span<const double> row, const FeatureSet& active) {
  const auto& node = tree.nodes[static_cast<std::size_t>(index)];
  if (node.is_leaf()) return node.weight;
  if (active.test(static_cast<std::size_t>(node.feature))) {
    return expectation_from(tree, tree.route(node, row), row, active);
  }
  const auto& left = tree.nodes[static_cast<std::size_t>(node.left)];
  const auto& right = tree.nodes[static_cast<std::size_t>(node.right)];
  return (left.cover * expectation_from(tree, node.left, row, active) +
          right.cover * expectation_from(tree, node.right, row, active)) /
         node.cover;
}

void check_row(const BoostedModel& model, std::span<const double> row) {
  if (row.size() != kNumFeatures) throw Error(ErrorCode::SchemaMismatch, "row must have 10 features");
  model.check_schema();
}

// One entry per distinct feature on the current root-to-node path. `weight`
// holds the running Shapley permutation weight for subsets of each size.
struct PathElement {
  int feature = -1;
  double zero_fraction = 0.0;
  double one_fraction = 0.0;
  double weight = 0.0;
};

using Path = std::vector<PathElement>;

void extend_path(Path& path, double zero_fraction, double one_fraction, int feature) {
  const std::size_t depth = path.size();
  path.push_back({feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0});
  const auto d1 = static_cast<double>(depth + 1);
  for (std::size_t i = depth; i-- > 0;) {
    path[i + 1].weight += one_fraction * path[i].weight * static_cast<double>(i + 1) / d1;
    path[i].weight = zero_fraction * path[i].weight * static_cast<double>(depth - i) / d1;
  }
}

// Removes path[index], undoing its extend step.
void unwind_path(Path& path, std::size_t index) {
  const std::size_t depth = path.size() - 1;
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  const auto d1 = static_cast<double>(depth + 1);
  double next_one_portion = path[depth].weight;
  for (std::size_t i = depth; i-- > 0;) {
    if (one != 0.0) {
      const double tmp = path[i].weight;
      path[i].weight = next_one_portion * d1 / (static_cast<double>(i + 1) * one);
      next_one_portion = tmp - path[i].weight * zero * static_cast<double>(depth - i) / d1;
    } else {
      path[i].weight = path[i].weight * d1 / (zero * static_cast<double>(depth - i));
    }
  }
  for (std::size_t i = index; i < depth; ++i) {
    path[i].feature = path[i + 1].feature;
    path[i].zero_fraction = path[i + 1].zero_fraction;
    path[i].one_fraction = path[i + 1].one_fraction;
  }
  path.pop_back();
}

// Total permutation weight of the path with path[index] unwound, without
// modifying the path.
double unwound_path_sum(const Path& path, std::size_t index) {
  const std::size_t depth = path.size() - 1;
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  const auto d1 = static_cast<double>(depth + 1);
  double next_one_portion = path[depth].weight;
  double total = 0.0;
  for (std::size_t i = depth; i-- > 0;) {
    if (one != 0.0) {
      const double tmp = next_one_portion * d1 / (static_cast<double>(i + 1) * one);
      total += tmp;
      next_one_portion = path[i].weight - tmp * zero * static_cast<double>(depth - i) / d1;
    } else {
      total += (path[i].weight / zero) / (static_cast<double>(depth - i) / d1);
    }
  }
  return total;
}

void shap_recurse(const Tree& tree, int index, std::span<const double> row, std::array<double, kNumFeatures>& phi,
                  Path path, double zero_fraction, double one_fraction, int feature) {
  extend_path(path, zero_fraction, one_fraction, feature);
  const auto& node = tree.nodes[static_cast<std::size_t>(index)];
  if (node.is_leaf()) {
    for (std::size_t i = 1; i < path.size(); ++i) {
      const auto& el = path[i];
      const double w = unwound_path_sum(path, i);
      phi[static_cast<std::size_t>(el.feature)] += w * (el.one_fraction - el.zero_fraction) * node.weight;
    }
    return;
  }

  const int hot = tree.route(node, row);
  const int cold = hot == node.left ? node.right : node.left;
  const double hot_zero = tree.nodes[static_cast<std::size_t>(hot)].cover / node.cover;
  const double cold_zero = tree.nodes[static_cast<std::size_t>(cold)].cover / node.cover;

  // A feature already split on higher up is folded into one path element.
  double incoming_zero = 1.0;
  double incoming_one = 1.0;
  for (std::size_t k = 1; k < path.size(); ++k) {
    if (path[k].feature == node.feature) {
      incoming_zero = path[k].zero_fraction;
      incoming_one = path[k].one_fraction;
      unwind_path(path, k);
      break;
    }
  }
  shap_recurse(tree, hot, row, phi, path, hot_zero * incoming_zero, incoming_one, node.feature);
  shap_recurse(tree, cold, row, phi, std::move(path), cold_zero * incoming_zero, 0.0, node.feature);
}

double model_base_value(const BoostedModel& model, std::span<const double> row) {
  double base = model.base_score;
  const FeatureSet none;
  for (const auto& tree : model.trees) base += tree_expectation(tree, row, none);
  return base;
}

}  // namespace

double tree_expectation(const Tree& tree, std::span<const double> row, const FeatureSet& active) {
  return expectation_from(tree, 0, row, active);
}

RowAttribution shap_row(const BoostedModel& model, std::span<const double> row) {
  check_row(model, row);
  RowAttribution out;
  out.base_value = model_base_value(model, row);
  for (const auto& tree : model.trees) {
    if (tree.nodes.empty() || tree.root().is_leaf()) continue;
    shap_recurse(tree, 0, row, out.phi, {}, 1.0, 1.0, -1);
  }
  return out;
}

RowAttribution shap_brute(const BoostedModel& model, std::span<const double> row) {
  check_row(model, row);
  std::uint32_t used = 0;
  for (const auto& tree : model.trees) used |= tree.feature_mask();
  const auto k = static_cast<std::size_t>(std::popcount(used));
  if (k > kMaxBruteForceFeatures) {
    throw Error(ErrorCode::TooManyFeatures, "brute-force Shapley supports at most 15 features, model uses " +
                                                std::to_string(k));
  }
  std::vector<std::size_t> players;
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    if (used & (1u << f)) players.push_back(f);
  }

  const std::size_t n_subsets = std::size_t{1} << k;
  std::vector<double> value(n_subsets);
  for (std::size_t mask = 0; mask < n_subsets; ++mask) {
    FeatureSet active;
    for (std::size_t j = 0; j < k; ++j) {
      if (mask & (std::size_t{1} << j)) active.set(players[j]);
    }
    double v = 0.0;
    for (const auto& tree : model.trees) v += tree_expectation(tree, row, active);
    value[mask] = v;
  }

  // |S|! (k - |S| - 1)! / k!
  std::vector<double> factorial(k + 1, 1.0);
  for (std::size_t i = 1; i <= k; ++i) factorial[i] = factorial[i - 1] * static_cast<double>(i);

  RowAttribution out;
  out.base_value = model.base_score + value[0];
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t bit = std::size_t{1} << j;
    double phi = 0.0;
    for (std::size_t mask = 0; mask < n_subsets; ++mask) {
      if (mask & bit) continue;
      const auto s = static_cast<std::size_t>(std::popcount(mask));
      const double weight = factorial[s] * factorial[k - s - 1] / factorial[k];
      phi += weight * (value[mask | bit] - value[mask]);
    }
    out.phi[players[j]] = phi;
  }
  return out;
}

AttributionMatrix explain(const BoostedModel& model, const FeatureMatrix& features,
                          std::span<const std::size_t> rows, int threads) {
  model.check_schema();
  AttributionMatrix attr;
  attr.row_index.assign(rows.begin(), rows.end());
  attr.phi.resize(rows.size());
  attr.values.resize(rows.size());
  if (rows.empty()) return attr;
  for (const std::size_t r : rows) {
    if (r >= features.n_rows()) throw Error(ErrorCode::LengthMismatch, "row index out of range");
  }
  attr.base_value = model_base_value(model, features.row(rows.front()));

  const auto n = static_cast<std::int64_t>(rows.size());
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const auto row = features.row(rows[ui]);
    attr.phi[ui] = shap_row(model, row).phi;
    std::copy(row.begin(), row.end(), attr.values[ui].begin());
  }
  return attr;
}

AttributionMatrix explain(const BoostedModel& model, const FeatureMatrix& features, int threads) {
  std::vector<std::size_t> rows(features.n_rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return explain(model, features, rows, threads);
}

std::vector<FeatureImportance> global_importance(const AttributionMatrix& attr) {
  if (attr.n_rows() == 0) throw Error(ErrorCode::EmptySet, "no attribution rows");
  std::vector<FeatureImportance> ranking(kNumFeatures);
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    double total = 0.0;
    for (const auto& phi : attr.phi) total += std::abs(phi[f]);
    ranking[f] = {f, total / static_cast<double>(attr.n_rows())};
  }
  std::stable_sort(ranking.begin(), ranking.end(),
                   [](const FeatureImportance& a, const FeatureImportance& b) { return a.mean_abs_phi > b.mean_abs_phi; });
  return ranking;
}

std::string attribution_to_csv(const AttributionMatrix& attr) {
  std::string out = "row_index";
  for (const auto name : kFeatureNames) {
    out += ",phi_";
    out += name;
  }
  out += ",base_value\n";
  const std::string base = format_double(attr.base_value);
  for (std::size_t i = 0; i < attr.n_rows(); ++i) {
    out += std::to_string(attr.row_index[i]);
    for (const double v : attr.phi[i]) {
      out.push_back(',');
      out += format_double(v);
    }
    out.push_back(',');
    out += base;
    out.push_back('\n');
  }
  return out;
}

}  // namespace ecgdx
