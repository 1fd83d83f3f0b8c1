#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "ecgdx/cohort.hpp"
#include "ecgdx/error.hpp"
#include "ecgdx/random.hpp"
#include "ecgdx/stats.hpp"
#include "ecgdx/synth.hpp"

using namespace ecgdx;

namespace {

const char* kHeader =
    "rr_interval_ms,pr_interval_ms,qrs_duration_ms,qt_interval_ms,qtc_interval_ms,p_wave_axis_deg,"
    "qrs_axis_deg,t_wave_axis_deg,age_years,sex,dx_C34\n";

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an ecgdx::Error");
  return ErrorCode::IoError;
}

// Cohort with explicit labels/sex/age and otherwise constant features.
CohortTable make_cohort(const std::vector<int>& labels, const std::vector<int>& sex, const std::vector<double>& age) {
  CohortTable c;
  c.features = FeatureMatrix(labels.size());
  auto& y = c.labels["T"];
  y.resize(labels.size());
  for (std::size_t r = 0; r < labels.size(); ++r) {
    for (std::size_t f = 0; f < kNumEcgFeatures; ++f) c.features(r, f) = 100.0;
    c.features(r, feature::kAge) = age[r];
    c.features(r, feature::kSex) = sex[r];
    y[r] = static_cast<std::uint8_t>(labels[r]);
  }
  return c;
}

CohortSpec reference_spec(bool internal) {
  nlohmann::json j;
  const std::vector<std::pair<double, double>> mimic = {{769, 264}, {158, 38}, {94, 23}, {394, 68},
                                                        {447, 47},  {51, 32},  {13, 61}, {42, 58}};
  const std::vector<std::pair<double, double>> ecgview = {{857, 227}, {158, 28}, {90, 14}, {392, 48},
                                                          {421, 37},  {53, 28},  {48, 49}, {44, 33}};
  const auto& values = internal ? mimic : ecgview;
  for (std::size_t f = 0; f < kNumEcgFeatures; ++f) {
    j["features"][std::string(kFeatureNames[f])] = {{"median", values[f].first}, {"iqr", values[f].second}};
  }
  j["age"] = {{"median", internal ? 66 : 52}, {"iqr", 25}};
  j["female_fraction"] = internal ? 0.4850 : 0.4844;
  return cohort_spec_from_json(j);
}

}  // namespace

TEST_CASE("load_cohort parses a valid file") {
  std::string text = kHeader;
  text += "769,158,94,394,447,51,13,42,66,1,0\n";
  text += "800,160,90,400,440,50,10,40,70,0,1\n";
  text += "700,150,100,380,450,55,20,45,55.5,1,0\n";
  const auto c = parse_cohort_csv(text, "internal");
  CHECK(c.n_rows() == 3);
  CHECK(c.labels.size() == 1);
  CHECK(c.label("dx_C34") == LabelVector{0, 1, 0});
  CHECK(c.features(2, feature::kAge) == 55.5);
  CHECK(c.source_tag == "internal");
}

TEST_CASE("empty ECG cells become missing") {
  std::string text = kHeader;
  text += ",158,94,394,447,51,13,42,66,1,0\n";
  const auto c = parse_cohort_csv(text);
  REQUIRE(c.n_rows() == 1);
  CHECK(std::isnan(c.features(0, feature::kRR)));
  CHECK(c.features(0, feature::kPR) == 158.0);
}

TEST_CASE("load_cohort rejects malformed files") {
  SUBCASE("missing schema column") {
    const std::string text =
        "rr_interval_ms,pr_interval_ms,qrs_duration_ms,qt_interval_ms,p_wave_axis_deg,qrs_axis_deg,"
        "t_wave_axis_deg,age_years,sex,dx_C34\n769,158,94,394,51,13,42,66,1,0\n";
    CHECK(code_of([&] { parse_cohort_csv(text); }) == ErrorCode::MissingColumn);
  }
  SUBCASE("no label column") {
    const std::string text =
        "rr_interval_ms,pr_interval_ms,qrs_duration_ms,qt_interval_ms,qtc_interval_ms,p_wave_axis_deg,"
        "qrs_axis_deg,t_wave_axis_deg,age_years,sex\n769,158,94,394,447,51,13,42,66,1\n";
    CHECK(code_of([&] { parse_cohort_csv(text); }) == ErrorCode::MissingColumn);
  }
  SUBCASE("non-numeric cell") {
    CHECK(code_of([&] { parse_cohort_csv(std::string(kHeader) + "abc,158,94,394,447,51,13,42,66,1,0\n"); }) ==
          ErrorCode::BadValue);
  }
  SUBCASE("label outside {0,1}") {
    CHECK(code_of([&] { parse_cohort_csv(std::string(kHeader) + "769,158,94,394,447,51,13,42,66,1,2\n"); }) ==
          ErrorCode::BadValue);
  }
  SUBCASE("missing age") {
    CHECK(code_of([&] { parse_cohort_csv(std::string(kHeader) + "769,158,94,394,447,51,13,42,,1,0\n"); }) ==
          ErrorCode::BadValue);
  }
  SUBCASE("age below 18") {
    CHECK(code_of([&] { parse_cohort_csv(std::string(kHeader) + "769,158,94,394,447,51,13,42,17,1,0\n"); }) ==
          ErrorCode::BadValue);
  }
  SUBCASE("sex outside {0,1}") {
    CHECK(code_of([&] { parse_cohort_csv(std::string(kHeader) + "769,158,94,394,447,51,13,42,40,2,0\n"); }) ==
          ErrorCode::BadValue);
  }
  SUBCASE("ragged row") {
    CHECK(code_of([&] { parse_cohort_csv(std::string(kHeader) + "769,158,94\n"); }) == ErrorCode::BadValue);
  }
  SUBCASE("header only") { CHECK(code_of([&] { parse_cohort_csv(kHeader); }) == ErrorCode::EmptyCohort); }
  SUBCASE("nonexistent file") {
    CHECK(code_of([&] { load_cohort("/nonexistent/cohort.csv"); }) == ErrorCode::IoError);
  }
}

TEST_CASE("cohort CSV writer and reader agree") {
  auto spec = reference_spec(true);
  spec.ecg[feature::kRR].missing_fraction = 0.2;
  spec.targets["C34"] = TargetSpec{0.1, {}};
  const auto c = synth_cohort(spec, 500, 3);
  const auto back = parse_cohort_csv(cohort_to_csv(c));
  REQUIRE(back.n_rows() == c.n_rows());
  for (std::size_t r = 0; r < c.n_rows(); ++r) {
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      const double a = c.features(r, f);
      const double b = back.features(r, f);
      CHECK(((std::isnan(a) && std::isnan(b)) || a == b));
    }
  }
  CHECK(back.labels == c.labels);
}

TEST_CASE("prevalence") {
  std::vector<int> labels(1000, 0);
  std::fill(labels.begin(), labels.begin() + 16, 1);
  CHECK(prevalence(make_cohort(labels, std::vector<int>(1000, 0), std::vector<double>(1000, 40.0)), "T") ==
        doctest::Approx(0.016).epsilon(1e-15));
  CHECK(prevalence(make_cohort({0, 0, 0}, {0, 0, 0}, {40, 40, 40}), "T") == 0.0);
  CHECK(prevalence(make_cohort({1, 1, 0, 0}, {0, 0, 0, 0}, {40, 40, 40, 40}), "T") == 0.5);
  CHECK(code_of([] { prevalence(make_cohort({1}, {0}, {40}), "dx_zzz"); }) == ErrorCode::UnknownTarget);
}

TEST_CASE("assign_strata") {
  SUBCASE("degenerate cohort is one stratum") {
    const auto strata = assign_strata(make_cohort({0, 0, 0, 0}, {0, 0, 0, 0}, {50, 50, 50, 50}), "T");
    CHECK(std::set<int>(strata.begin(), strata.end()).size() == 1);
  }
  SUBCASE("ids by hand") {
    // Ages 20..90: quartile cuts 37.5 / 55 / 72.5 (h = 7q interpolation).
    const auto c = make_cohort({0, 0, 1, 1, 0, 0, 1, 1}, {0, 1, 0, 1, 0, 1, 0, 1}, {20, 30, 40, 50, 60, 70, 80, 90});
    const auto strata = assign_strata(c, "T");
    CHECK(strata == std::vector<int>{0, 4, 9, 13, 2, 6, 11, 15});
  }
  SUBCASE("unknown target") {
    CHECK(code_of([] { assign_strata(make_cohort({0}, {0}, {40}), "dx_zzz"); }) == ErrorCode::UnknownTarget);
  }
}

TEST_CASE("make_folds fixed examples") {
  SUBCASE("40 rows deal two per fold") {
    std::vector<int> labels(40, 0);
    std::fill(labels.begin(), labels.begin() + 20, 1);
    const auto c = make_cohort(labels, std::vector<int>(40, 0), std::vector<double>(40, 60.0));
    const auto folds = make_folds(c, "T", 7);
    for (int f = 0; f < kNumFolds; ++f) CHECK(folds.rows_in(f).size() == 2);
    CHECK(folds.train_rows().size() == 36);
    CHECK(folds.val_rows().size() == 2);
    CHECK(folds.test_rows().size() == 2);
    CHECK(make_folds(c, "T", 7).fold_of_row == folds.fold_of_row);
  }
  SUBCASE("four strata of 50") {
    std::vector<int> labels;
    std::vector<int> sex;
    for (int s = 0; s < 4; ++s) {
      for (int i = 0; i < 50; ++i) {
        labels.push_back(s / 2);
        sex.push_back(s % 2);
      }
    }
    const auto c = make_cohort(labels, sex, std::vector<double>(200, 60.0));
    const auto folds = make_folds(c, "T", 11);
    for (int s = 0; s < 4; ++s) {
      std::vector<int> per_fold(kNumFolds, 0);
      for (int i = 0; i < 50; ++i) ++per_fold[static_cast<std::size_t>(folds.fold_of_row[static_cast<std::size_t>(s * 50 + i)])];
      for (const int count : per_fold) CHECK((count == 2 || count == 3));
    }
  }
  SUBCASE("errors") {
    CHECK(code_of([] {
            make_folds(make_cohort(std::vector<int>(19, 1), std::vector<int>(19, 0), std::vector<double>(19, 50)), "T", 0);
          }) == ErrorCode::TooFewRows);
    CHECK(code_of([] {
            make_folds(make_cohort(std::vector<int>(40, 0), std::vector<int>(40, 0), std::vector<double>(40, 50)), "T", 0);
          }) == ErrorCode::SingleClass);
  }
}

TEST_CASE("make_folds properties on random cohorts") {
  Rng rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 20 + rng.below(600);
    std::vector<int> labels(n);
    std::vector<int> sex(n);
    std::vector<double> age(n);
    const double prev = 0.02 + 0.4 * rng.uniform();
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = rng.bernoulli(prev) ? 1 : 0;
      sex[i] = rng.bernoulli(0.5) ? 1 : 0;
      age[i] = 18.0 + std::floor(rng.uniform() * 70.0);
    }
    labels[0] = 1;
    labels[1] = 0;
    const auto c = make_cohort(labels, sex, age);
    const std::uint64_t seed = rng.next();
    const auto folds = make_folds(c, "T", seed);
    CHECK(make_folds(c, "T", seed).fold_of_row == folds.fold_of_row);

    REQUIRE(folds.fold_of_row.size() == n);
    std::size_t total = 0;
    for (int f = 0; f < kNumFolds; ++f) total += folds.rows_in(f).size();
    CHECK(total == n);
    CHECK(folds.train_rows().size() + folds.val_rows().size() + folds.test_rows().size() == n);

    const auto strata = assign_strata(c, "T");
    std::map<int, std::vector<int>> counts;
    for (std::size_t r = 0; r < n; ++r) {
      const int f = folds.fold_of_row[r];
      REQUIRE((f >= 0 && f < kNumFolds));
      auto& v = counts[strata[r]];
      v.resize(kNumFolds);
      ++v[static_cast<std::size_t>(f)];
    }
    for (const auto& [s, v] : counts) {
      const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
      CHECK(*hi - *lo <= 1);
    }
  }
}

TEST_CASE("synth_cohort calibration per feature at n = 100000") {
  for (const bool internal : {true, false}) {
    const auto spec = reference_spec(internal);
    const auto c = synth_cohort(spec, 100000, internal ? 101 : 202);
    CAPTURE(internal);
    for (std::size_t f = 0; f <= feature::kAge; ++f) {
      const MedianIqr target = f == feature::kAge ? spec.age : spec.ecg.at(f).dist;
      std::vector<double> column(c.n_rows());
      for (std::size_t r = 0; r < c.n_rows(); ++r) column[r] = c.features(r, f);
      const double median = quantile(column, 0.5);
      const double iqr = quantile(column, 0.75) - quantile(column, 0.25);
      CAPTURE(kFeatureNames[f]);
      CHECK(std::abs(median - target.median) <= 0.02 * std::abs(target.median));
      CHECK(std::abs(iqr - target.iqr) <= 0.05 * target.iqr);
    }
    double males = 0.0;
    for (std::size_t r = 0; r < c.n_rows(); ++r) males += c.features(r, feature::kSex);
    CHECK(males / 100000.0 == doctest::Approx(1.0 - spec.female_fraction).epsilon(0.02));
  }
}

TEST_CASE("synth_cohort prevalence and ranges") {
  auto spec = reference_spec(true);
  spec.targets["C34"] = TargetSpec{0.0161, {}};
  const auto c = synth_cohort(spec, 100000, 5);
  CHECK(std::abs(prevalence(c, "C34") - 0.0161) <= 0.003);

  const auto one = synth_cohort(spec, 1, 9);
  REQUIRE(one.n_rows() == 1);
  CHECK_NOTHROW(one.validate());

  for (std::size_t r = 0; r < c.n_rows(); ++r) {
    for (std::size_t f = 0; f < 5; ++f) CHECK_MESSAGE(c.features(r, f) > 0.0, "interval must be positive");
    for (std::size_t f = 5; f < 8; ++f) REQUIRE((c.features(r, f) >= -180.0 && c.features(r, f) <= 180.0));
    REQUIRE(c.features(r, feature::kAge) >= 18.0);
  }
  CHECK(synth_cohort(spec, 1000, 42).features.data() == synth_cohort(spec, 1000, 42).features.data());
}

TEST_CASE("planted label shift moves the positive-class mean") {
  auto spec = reference_spec(true);
  spec.targets["T"] = TargetSpec{0.5, {{feature::kQT, -1, 1.0}}};
  const auto c = synth_cohort(spec, 100000, 77);
  const auto& y = c.label("T");
  double sum[2] = {0, 0};
  double count[2] = {0, 0};
  for (std::size_t r = 0; r < c.n_rows(); ++r) {
    sum[y[r]] += c.features(r, feature::kQT);
    count[y[r]] += 1;
  }
  const double gap = sum[0] / count[0] - sum[1] / count[1];
  CHECK(gap > 0.0);
  CHECK(std::abs(gap - 68.0) <= 0.1 * 68.0);
}

TEST_CASE("cohort spec parsing reports the offending key") {
  const auto base = cohort_spec_to_json(reference_spec(true));
  const auto message_for = [](const nlohmann::json& j) {
    try {
      cohort_spec_from_json(j);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::BadSpec);
      return std::string(e.what());
    }
    return std::string("no error");
  };
  auto j = base;
  j["features"]["qt_interval_ms"]["iqr"] = -3;
  CHECK(message_for(j).find("features.qt_interval_ms.iqr") != std::string::npos);
  j = base;
  j["features"].erase("rr_interval_ms");
  CHECK(message_for(j).find("features.rr_interval_ms") != std::string::npos);
  j = base;
  j["targets"]["C34"] = {{"prevalence", 1.5}};
  CHECK(message_for(j).find("targets.C34.prevalence") != std::string::npos);
  j = base;
  j["targets"]["C34"] = {{"prevalence", 0.1}, {"signal", {{{"feature", "sex"}, {"direction", 1}, {"effect_size", 1}}}}};
  CHECK(message_for(j).find("signal[0].feature") != std::string::npos);
  j = base;
  j.erase("female_fraction");
  CHECK(message_for(j).find("female_fraction") != std::string::npos);
}
