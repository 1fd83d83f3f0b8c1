#include "ecgdx/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>

#include "ecgdx/error.hpp"
#include "ecgdx/io.hpp"
#include "ecgdx/random.hpp"

namespace ecgdx {

namespace {

constexpr std::size_t kAttemptsPerIteration = 100;

struct ClassCounts {
  std::int64_t positives = 0;
  std::int64_t negatives = 0;
};

ClassCounts check_inputs(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(scores.size()) + " scores vs " +
                                               std::to_string(labels.size()) + " labels");
  }
  ClassCounts counts;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) throw Error(ErrorCode::BadValue, "NaN score at index " + std::to_string(i));
    if (labels[i] > 1) throw Error(ErrorCode::BadValue, "label outside {0,1} at index " + std::to_string(i));
    if (labels[i]) {
      ++counts.positives;
    } else {
      ++counts.negatives;
    }
  }
  if (counts.positives == 0 || counts.negatives == 0) {
    throw Error(ErrorCode::SingleClass, "AUROC needs both classes");
  }
  return counts;
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  const auto counts = check_inputs(scores, labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the average rank is an integer, so the rank sum stays exact.
  std::int64_t twice_rank_sum = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const auto twice_rank = static_cast<std::int64_t>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]]) twice_rank_sum += twice_rank;
    }
    i = j;
  }
  const std::int64_t p = counts.positives;
  const std::int64_t twice_u = twice_rank_sum - p * (p + 1);
  return static_cast<double>(twice_u) /
         (2.0 * static_cast<double>(p) * static_cast<double>(counts.negatives));
}

ConfidenceInterval bootstrap_ci(std::span<const double> scores, std::span<const std::uint8_t> labels,
                                std::size_t n_bootstrap, double alpha, std::uint64_t seed, int threads) {
  check_inputs(scores, labels);
  if (n_bootstrap < 1) throw Error(ErrorCode::BadConfig, "n_bootstrap must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::BadConfig, "alpha must be in (0, 1)");

  const std::size_t n = scores.size();
  // Rows are bucketed by tied score once; a resample is then just a count per
  // bucket and its AUROC is a single sweep over the buckets.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<std::uint32_t> bucket_of(n);
  std::size_t n_buckets = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0 && scores[order[k]] != scores[order[k - 1]]) ++n_buckets;
    bucket_of[order[k]] = static_cast<std::uint32_t>(n_buckets);
  }
  ++n_buckets;

  std::vector<double> stats(n_bootstrap);
  std::atomic<bool> exhausted{false};
  const auto iterations = static_cast<std::int64_t>(n_bootstrap);
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
  for (std::int64_t it = 0; it < iterations; ++it) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(it)));
    std::vector<std::int64_t> pos(n_buckets);
    std::vector<std::int64_t> neg(n_buckets);
    bool valid = false;
    for (std::size_t attempt = 0; attempt < kAttemptsPerIteration && !valid; ++attempt) {
      std::fill(pos.begin(), pos.end(), 0);
      std::fill(neg.begin(), neg.end(), 0);
      std::int64_t p = 0;
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t r = rng.below(n);
        if (labels[r]) {
          ++pos[bucket_of[r]];
          ++p;
        } else {
          ++neg[bucket_of[r]];
        }
      }
      const std::int64_t q = static_cast<std::int64_t>(n) - p;
      if (p == 0 || q == 0) continue;
      std::int64_t twice_u = 0;
      std::int64_t neg_below = 0;
      for (std::size_t b = 0; b < n_buckets; ++b) {
        twice_u += pos[b] * (2 * neg_below + neg[b]);
        neg_below += neg[b];
      }
      stats[static_cast<std::size_t>(it)] =
          static_cast<double>(twice_u) / (2.0 * static_cast<double>(p) * static_cast<double>(q));
      valid = true;
    }
    if (!valid) exhausted = true;
  }
  if (exhausted) {
    throw Error(ErrorCode::ResampleExhausted, "could not draw resamples containing both classes");
  }
  std::sort(stats.begin(), stats.end());
  return {quantile_sorted(stats, alpha / 2.0), quantile_sorted(stats, 1.0 - alpha / 2.0)};
}

EvalReport evaluate(const BoostedModel& model, const CohortTable& test_set, const std::string& target,
                    std::size_t n_bootstrap, std::uint64_t seed, int threads) {
  model.check_schema();
  const auto& y = test_set.label(target);
  const auto scores = predict_probas(model, test_set.features);
  EvalReport report;
  report.target_code = normalize_target(target);
  report.auroc = auroc(scores, y);
  const auto ci = bootstrap_ci(scores, y, n_bootstrap, 0.05, seed, threads);
  report.ci_low = ci.low;
  report.ci_high = ci.high;
  report.n_test = test_set.n_rows();
  report.prevalence = prevalence(test_set, target);
  report.n_bootstrap = n_bootstrap;
  report.seed = seed;
  report.source_tag = test_set.source_tag;
  return report;
}

nlohmann::json report_to_json(const EvalReport& r) {
  return {{"target_code", r.target_code}, {"auroc", r.auroc},           {"ci_low", r.ci_low},
          {"ci_high", r.ci_high},         {"n_test", r.n_test},         {"prevalence", r.prevalence},
          {"n_bootstrap", r.n_bootstrap}, {"seed", r.seed},             {"source_tag", r.source_tag}};
}

std::string report_csv_row(const EvalReport& r) {
  return r.target_code + "," + format_double(r.auroc) + "," + format_double(r.ci_low) + "," +
         format_double(r.ci_high) + "," + format_double(r.prevalence) + "," + std::to_string(r.n_test);
}

}  // namespace ecgdx
