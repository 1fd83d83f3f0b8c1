#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ecgdx/schema.hpp"

namespace ecgdx {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

// Row-major n x 10 matrix; NaN marks a missing cell.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  explicit FeatureMatrix(std::size_t n_rows) : n_rows_(n_rows), values_(n_rows * kNumFeatures, kMissing) {}
  FeatureMatrix(std::size_t n_rows, std::vector<double> values);

  std::size_t n_rows() const { return n_rows_; }

  double operator()(std::size_t row, std::size_t feature) const { return values_[row * kNumFeatures + feature]; }
  double& operator()(std::size_t row, std::size_t feature) { return values_[row * kNumFeatures + feature]; }

  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * kNumFeatures, kNumFeatures};
  }
  std::span<double> row(std::size_t r) { return {values_.data() + r * kNumFeatures, kNumFeatures}; }

  const std::vector<double>& data() const { return values_; }

  FeatureMatrix subset(std::span<const std::size_t> rows) const;

 private:
  std::size_t n_rows_ = 0;
  std::vector<double> values_;
};

using LabelVector = std::vector<std::uint8_t>;

struct CohortTable {
  FeatureMatrix features;
  // target code (without the "dx_" prefix) -> 0/1 per row
  std::map<std::string, LabelVector> labels;
  std::string source_tag;

  std::size_t n_rows() const { return features.n_rows(); }

  const LabelVector& label(std::string_view target) const;

  CohortTable subset(std::span<const std::size_t> rows) const;

  // Throws BadValue when a row breaks the schema's value rules.
  void validate() const;
};

CohortTable load_cohort(const std::filesystem::path& path, std::string source_tag = "");
CohortTable parse_cohort_csv(std::string_view text, std::string source_tag = "");
std::string cohort_to_csv(const CohortTable& cohort);

double prevalence(const CohortTable& cohort, std::string_view target);

// Stratum id = label * 8 + sex * 4 + age_quartile, age quartiles taken from
// the cohort's own age column.
std::vector<int> assign_strata(const CohortTable& cohort, std::string_view target);

inline constexpr int kNumFolds = 20;
inline constexpr int kValFold = 18;
inline constexpr int kTestFold = 19;

struct FoldAssignment {
  std::vector<int> fold_of_row;

  std::vector<std::size_t> rows_in(int fold) const;
  std::vector<std::size_t> train_rows() const;
  std::vector<std::size_t> val_rows() const { return rows_in(kValFold); }
  std::vector<std::size_t> test_rows() const { return rows_in(kTestFold); }
};

// 18:1:1 split as 20 stratified folds: each stratum is shuffled by `seed`
// and dealt round-robin, folds 0-17 train, 18 validation, 19 test.
FoldAssignment make_folds(const CohortTable& cohort, std::string_view target, std::uint64_t seed);

std::string folds_to_csv(const FoldAssignment& folds);
FoldAssignment parse_folds_csv(std::string_view text, std::size_t n_rows);

}  // namespace ecgdx
