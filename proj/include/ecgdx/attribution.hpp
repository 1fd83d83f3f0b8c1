#pragma once

#include <array>
#include <bitset>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ecgdx/boosting.hpp"
#include "ecgdx/cohort.hpp"

namespace ecgdx {

using FeatureSet = std::bitset<kNumFeatures>;

// Path-dependent value function: splits on features in `active` follow the
// row, all other splits average their children weighted by cover.
double tree_expectation(const Tree& tree, std::span<const double> row, const FeatureSet& active);

struct RowAttribution {
  double base_value = 0.0;
  std::array<double, kNumFeatures> phi{};
};

// Exact Shapley values in margin space via polynomial-time path tracing.
RowAttribution shap_row(const BoostedModel& model, std::span<const double> row);

inline constexpr std::size_t kMaxBruteForceFeatures = 15;

// Reference implementation: direct Shapley sum over every subset of the
// features the model splits on.
RowAttribution shap_brute(const BoostedModel& model, std::span<const double> row);

struct AttributionMatrix {
  double base_value = 0.0;
  std::vector<std::size_t> row_index;  // row ids in the source cohort
  std::vector<std::array<double, kNumFeatures>> phi;
  std::vector<std::array<double, kNumFeatures>> values;

  std::size_t n_rows() const { return phi.size(); }
};

AttributionMatrix explain(const BoostedModel& model, const FeatureMatrix& features,
                          std::span<const std::size_t> rows, int threads = 1);
AttributionMatrix explain(const BoostedModel& model, const FeatureMatrix& features, int threads = 1);

struct FeatureImportance {
  std::size_t feature = 0;
  double mean_abs_phi = 0.0;
};

// Descending mean |phi|; equal scores keep schema order.
std::vector<FeatureImportance> global_importance(const AttributionMatrix& attr);

// row_index, one phi column per feature, base_value
std::string attribution_to_csv(const AttributionMatrix& attr);

}  // namespace ecgdx
