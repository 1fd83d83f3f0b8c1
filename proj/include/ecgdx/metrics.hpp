#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>

#include <json.hpp>

#include "ecgdx/boosting.hpp"
#include "ecgdx/cohort.hpp"
#include "ecgdx/stats.hpp"

namespace ecgdx {

// Mann-Whitney AUROC with ties counted half, via average ranks.
double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct ConfidenceInterval {
  double low = 0.0;
  double high = 0.0;
};

inline constexpr std::size_t kDefaultBootstrap = 1000;

// Percentile bootstrap over rows. Iteration i draws from its own substream of
// `seed`, so the interval does not depend on `threads`.
ConfidenceInterval bootstrap_ci(std::span<const double> scores, std::span<const std::uint8_t> labels,
                                std::size_t n_bootstrap = kDefaultBootstrap, double alpha = 0.05,
                                std::uint64_t seed = 0, int threads = 1);

struct EvalReport {
  std::string target_code;
  double auroc = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n_test = 0;
  double prevalence = 0.0;
  std::size_t n_bootstrap = kDefaultBootstrap;
  std::uint64_t seed = 0;
  std::string source_tag;
};

EvalReport evaluate(const BoostedModel& model, const CohortTable& test_set, const std::string& target,
                    std::size_t n_bootstrap = kDefaultBootstrap, std::uint64_t seed = 0, int threads = 1);

nlohmann::json report_to_json(const EvalReport& report);

inline constexpr const char* kReportCsvHeader = "target_code,auroc,ci_low,ci_high,prevalence,n_test";
std::string report_csv_row(const EvalReport& report);

}  // namespace ecgdx
