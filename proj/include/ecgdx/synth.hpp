#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecgdx/cohort.hpp"

namespace ecgdx {

struct MedianIqr {
  double median = 0.0;
  double iqr = 1.0;
};

struct SignalShift {
  std::size_t feature = 0;
  int direction = 1;  // +1 or -1
  double effect_size = 0.0;  // in units of the feature's IQR
};

struct TargetSpec {
  double prevalence = 0.0;
  std::vector<SignalShift> signal;
};

struct FeatureSpec {
  MedianIqr dist;
  double missing_fraction = 0.0;
};

// Marginals for a synthetic cohort. Every feature is drawn independently from
// a logistic distribution matched to (median, IQR); positives of each target
// get their planted shifts added.
struct CohortSpec {
  std::map<std::size_t, FeatureSpec> ecg;  // keyed by feature index 0..7
  MedianIqr age;
  double female_fraction = 0.5;
  std::map<std::string, TargetSpec> targets;
  std::string source_tag;

  void validate() const;
};

// Logistic scale giving the requested IQR: IQR = 2 s ln 3.
double logistic_scale_for_iqr(double iqr);

CohortSpec cohort_spec_from_json(const nlohmann::json& j);
nlohmann::json cohort_spec_to_json(const CohortSpec& spec);
CohortSpec load_cohort_spec(const std::filesystem::path& path);

CohortTable synth_cohort(const CohortSpec& spec, std::size_t n, std::uint64_t seed);

}  // namespace ecgdx
