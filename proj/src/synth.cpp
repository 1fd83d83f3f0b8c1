#include "ecgdx/synth.hpp"

#include <algorithm>
#include <cmath>

#include "ecgdx/error.hpp"
#include "ecgdx/io.hpp"
#include "ecgdx/random.hpp"

namespace ecgdx {

namespace {

constexpr double kMinInterval = 1.0;
constexpr double kMinAge = 18.0;

[[noreturn]] void bad_spec(const std::string& key, const std::string& why) {
  throw Error(ErrorCode::BadSpec, "'" + key + "': " + why);
}

double number_at(const nlohmann::json& obj, const std::string& field, const std::string& key) {
  if (!obj.is_object() || !obj.contains(field)) bad_spec(key + "." + field, "missing");
  const auto& v = obj.at(field);
  if (!v.is_number()) bad_spec(key + "." + field, "must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) bad_spec(key + "." + field, "must be finite");
  return x;
}

MedianIqr median_iqr_at(const nlohmann::json& obj, const std::string& key) {
  MedianIqr d{number_at(obj, "median", key), number_at(obj, "iqr", key)};
  if (!(d.iqr > 0.0)) bad_spec(key + ".iqr", "must be > 0");
  return d;
}

double logistic_quantile(const MedianIqr& d, double u) {
  return d.median + logistic_scale_for_iqr(d.iqr) * std::log(u / (1.0 - u));
}

double clamp_feature(std::size_t f, double v) {
  switch (feature_kind(f)) {
    case FeatureKind::Interval: return std::max(v, kMinInterval);
    case FeatureKind::Axis: return std::clamp(v, -180.0, 180.0);
    case FeatureKind::Age: return std::max(v, kMinAge);
    case FeatureKind::Sex: return v;
  }
  return v;
}

}  // namespace

double logistic_scale_for_iqr(double iqr) { return iqr / (2.0 * std::log(3.0)); }

void CohortSpec::validate() const {
  for (std::size_t f = 0; f < kNumEcgFeatures; ++f) {
    const auto it = ecg.find(f);
    const std::string key = "features." + std::string(kFeatureNames[f]);
    if (it == ecg.end()) bad_spec(key, "missing");
    if (!(it->second.dist.iqr > 0.0)) bad_spec(key + ".iqr", "must be > 0");
    if (!(it->second.missing_fraction >= 0.0 && it->second.missing_fraction < 1.0)) {
      bad_spec(key + ".missing_fraction", "must be in [0, 1)");
    }
  }
  if (!(age.iqr > 0.0)) bad_spec("age.iqr", "must be > 0");
  if (!(female_fraction >= 0.0 && female_fraction <= 1.0)) bad_spec("female_fraction", "must be in [0, 1]");
  for (const auto& [code, t] : targets) {
    const std::string key = "targets." + code;
    if (!(t.prevalence > 0.0 && t.prevalence < 1.0)) bad_spec(key + ".prevalence", "must be in (0, 1)");
    for (const auto& s : t.signal) {
      if (s.feature == feature::kSex || s.feature >= kNumFeatures) bad_spec(key + ".signal", "unsupported feature");
      if (s.direction != 1 && s.direction != -1) bad_spec(key + ".signal.direction", "must be +1 or -1");
      if (!(s.effect_size >= 0.0) || !std::isfinite(s.effect_size)) {
        bad_spec(key + ".signal.effect_size", "must be finite and >= 0");
      }
    }
  }
}

CohortSpec cohort_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) bad_spec("<root>", "must be a JSON object");
  CohortSpec spec;
  if (!j.contains("features") || !j.at("features").is_object()) bad_spec("features", "missing or not an object");
  for (const auto& [name, value] : j.at("features").items()) {
    const std::string key = "features." + name;
    const auto f = feature_index(name);
    if (!f || *f >= kNumEcgFeatures) bad_spec(key, "not an ECG feature of the schema");
    FeatureSpec fs;
    fs.dist = median_iqr_at(value, key);
    if (value.contains("missing_fraction")) fs.missing_fraction = number_at(value, "missing_fraction", key);
    spec.ecg[*f] = fs;
  }
  if (!j.contains("age")) bad_spec("age", "missing");
  spec.age = median_iqr_at(j.at("age"), "age");
  spec.female_fraction = number_at(j, "female_fraction", "<root>");
  if (j.contains("source_tag")) {
    if (!j.at("source_tag").is_string()) bad_spec("source_tag", "must be a string");
    spec.source_tag = j.at("source_tag").get<std::string>();
  }
  if (j.contains("targets")) {
    if (!j.at("targets").is_object()) bad_spec("targets", "must be an object");
    for (const auto& [raw_code, value] : j.at("targets").items()) {
      const std::string code = normalize_target(raw_code);
      const std::string key = "targets." + raw_code;
      if (code.empty()) bad_spec(key, "empty target code");
      TargetSpec t;
      t.prevalence = number_at(value, "prevalence", key);
      if (value.contains("signal")) {
        const auto& signal = value.at("signal");
        if (!signal.is_array()) bad_spec(key + ".signal", "must be an array");
        for (std::size_t i = 0; i < signal.size(); ++i) {
          const std::string skey = key + ".signal[" + std::to_string(i) + "]";
          const auto& s = signal[i];
          if (!s.is_object() || !s.contains("feature") || !s.at("feature").is_string()) {
            bad_spec(skey + ".feature", "missing or not a string");
          }
          const auto name = s.at("feature").get<std::string>();
          const auto f = feature_index(name);
          if (!f || *f == feature::kSex) bad_spec(skey + ".feature", "unknown or unsupported feature '" + name + "'");
          const double dir = number_at(s, "direction", skey);
          if (dir != 1.0 && dir != -1.0) bad_spec(skey + ".direction", "must be +1 or -1");
          t.signal.push_back({*f, static_cast<int>(dir), number_at(s, "effect_size", skey)});
        }
      }
      spec.targets[code] = std::move(t);
    }
  }
  spec.validate();
  return spec;
}

nlohmann::json cohort_spec_to_json(const CohortSpec& spec) {
  nlohmann::json j;
  for (const auto& [f, fs] : spec.ecg) {
    nlohmann::json entry = {{"median", fs.dist.median}, {"iqr", fs.dist.iqr}};
    if (fs.missing_fraction > 0.0) entry["missing_fraction"] = fs.missing_fraction;
    j["features"][std::string(kFeatureNames[f])] = entry;
  }
  j["age"] = {{"median", spec.age.median}, {"iqr", spec.age.iqr}};
  j["female_fraction"] = spec.female_fraction;
  if (!spec.source_tag.empty()) j["source_tag"] = spec.source_tag;
  j["targets"] = nlohmann::json::object();
  for (const auto& [code, t] : spec.targets) {
    nlohmann::json signal = nlohmann::json::array();
    for (const auto& s : t.signal) {
      signal.push_back({{"feature", std::string(kFeatureNames[s.feature])},
                        {"direction", s.direction},
                        {"effect_size", s.effect_size}});
    }
    j["targets"][code] = {{"prevalence", t.prevalence}, {"signal", signal}};
  }
  return j;
}

CohortSpec load_cohort_spec(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::BadSpec, path.string() + ": invalid JSON: " + e.what());
  }
  return cohort_spec_from_json(j);
}

CohortTable synth_cohort(const CohortSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorCode::EmptyCohort, "synthetic cohort needs n >= 1");
  spec.validate();

  CohortTable cohort;
  cohort.source_tag = spec.source_tag;
  cohort.features = FeatureMatrix(n);
  for (const auto& [code, t] : spec.targets) cohort.labels[code].assign(n, 0);

  Rng rng(seed);
  for (std::size_t r = 0; r < n; ++r) {
    auto row = cohort.features.row(r);
    row[feature::kSex] = rng.uniform() < spec.female_fraction ? 0.0 : 1.0;
    row[feature::kAge] = logistic_quantile(spec.age, rng.uniform_open());
    for (const auto& [f, fs] : spec.ecg) row[f] = logistic_quantile(fs.dist, rng.uniform_open());

    for (const auto& [code, t] : spec.targets) {
      if (!rng.bernoulli(t.prevalence)) continue;
      cohort.labels[code][r] = 1;
      for (const auto& s : t.signal) {
        const double iqr = s.feature == feature::kAge ? spec.age.iqr : spec.ecg.at(s.feature).dist.iqr;
        row[s.feature] += s.direction * s.effect_size * iqr;
      }
    }
    for (std::size_t f = 0; f < feature::kSex; ++f) row[f] = clamp_feature(f, row[f]);

    for (const auto& [f, fs] : spec.ecg) {
      if (fs.missing_fraction > 0.0 && rng.bernoulli(fs.missing_fraction)) row[f] = kMissing;
    }
  }
  return cohort;
}

}  // namespace ecgdx
