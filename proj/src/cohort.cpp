#include "ecgdx/cohort.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <optional>

#include "ecgdx/error.hpp"
#include "ecgdx/io.hpp"
#include "ecgdx/random.hpp"
#include "ecgdx/stats.hpp"

namespace ecgdx {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Splits one CSV record. Double quotes may wrap a field; embedded "" is a quote.
std::vector<std::string> split_record(std::string_view line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

std::optional<double> parse_number(std::string_view cell) {
  cell = trim(cell);
  if (cell.empty()) return std::nullopt;
  if (cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc{} || end != cell.data() + cell.size() || !std::isfinite(value)) {
    throw Error(ErrorCode::BadValue, "non-numeric cell '" + std::string(cell) + "'");
  }
  return value;
}

std::string where(std::size_t line_no, std::string_view column) {
  return "line " + std::to_string(line_no) + ", column " + std::string(column);
}

}  // namespace

FeatureMatrix::FeatureMatrix(std::size_t n_rows, std::vector<double> values)
    : n_rows_(n_rows), values_(std::move(values)) {
  if (values_.size() != n_rows_ * kNumFeatures) {
    throw Error(ErrorCode::LengthMismatch, "feature buffer does not hold n_rows x 10 values");
  }
}

FeatureMatrix FeatureMatrix::subset(std::span<const std::size_t> rows) const {
  FeatureMatrix out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

const LabelVector& CohortTable::label(std::string_view target) const {
  const auto it = labels.find(normalize_target(target));
  if (it == labels.end()) throw Error(ErrorCode::UnknownTarget, "no label column for target '" + std::string(target) + "'");
  return it->second;
}

CohortTable CohortTable::subset(std::span<const std::size_t> rows) const {
  CohortTable out;
  out.features = features.subset(rows);
  out.source_tag = source_tag;
  for (const auto& [code, y] : labels) {
    LabelVector sub(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) sub[i] = y[rows[i]];
    out.labels.emplace(code, std::move(sub));
  }
  return out;
}

void CohortTable::validate() const {
  for (std::size_t r = 0; r < n_rows(); ++r) {
    const double age = features(r, feature::kAge);
    if (!std::isfinite(age) || age < 18.0) {
      throw Error(ErrorCode::BadValue, "row " + std::to_string(r) + ": age_years must be finite and >= 18");
    }
    const double sex = features(r, feature::kSex);
    if (sex != 0.0 && sex != 1.0) throw Error(ErrorCode::BadValue, "row " + std::to_string(r) + ": sex must be 0 or 1");
    for (std::size_t f = 0; f < kNumEcgFeatures; ++f) {
      const double v = features(r, f);
      if (std::isinf(v)) throw Error(ErrorCode::BadValue, "row " + std::to_string(r) + ": non-finite feature");
    }
  }
  for (const auto& [code, y] : labels) {
    if (y.size() != n_rows()) throw Error(ErrorCode::LengthMismatch, "label vector for " + code + " has wrong length");
    for (auto v : y) {
      if (v > 1) throw Error(ErrorCode::BadValue, "label for " + code + " outside {0,1}");
    }
  }
}

CohortTable parse_cohort_csv(std::string_view text, std::string source_tag) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  const auto lines = split_lines(text);
  if (lines.empty()) throw Error(ErrorCode::EmptyCohort, "file has no header row");

  const auto header = split_record(lines[0]);
  std::array<std::optional<std::size_t>, kNumFeatures> feature_col;
  std::vector<std::pair<std::size_t, std::string>> label_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string_view name = trim(header[c]);
    if (const auto f = feature_index(name)) {
      feature_col[*f] = c;
    } else if (name.starts_with(kLabelPrefix) && name.size() > kLabelPrefix.size()) {
      label_cols.emplace_back(c, normalize_target(name));
    }
  }
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    if (!feature_col[f]) throw Error(ErrorCode::MissingColumn, "missing column '" + std::string(kFeatureNames[f]) + "'");
  }
  if (label_cols.empty()) throw Error(ErrorCode::MissingColumn, "no label column prefixed 'dx_'");

  const std::size_t n = lines.size() - 1;
  if (n == 0) throw Error(ErrorCode::EmptyCohort, "cohort has no data rows");

  CohortTable cohort;
  cohort.source_tag = std::move(source_tag);
  cohort.features = FeatureMatrix(n);
  for (const auto& [col, code] : label_cols) cohort.labels[code].resize(n);

  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t line_no = r + 2;
    const auto cells = split_record(lines[r + 1]);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::BadValue, "line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                                           " fields, header has " + std::to_string(header.size()));
    }
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      std::optional<double> value;
      try {
        value = parse_number(cells[*feature_col[f]]);
      } catch (const Error& e) {
        throw Error(ErrorCode::BadValue, where(line_no, kFeatureNames[f]) + ": " + e.what());
      }
      if (!value && f >= kNumEcgFeatures) {
        throw Error(ErrorCode::BadValue, where(line_no, kFeatureNames[f]) + ": value required");
      }
      cohort.features(r, f) = value.value_or(kMissing);
    }
    for (const auto& [col, code] : label_cols) {
      std::optional<double> value;
      try {
        value = parse_number(cells[col]);
      } catch (const Error&) {
        value.reset();
      }
      if (!value || (*value != 0.0 && *value != 1.0)) {
        throw Error(ErrorCode::BadValue, where(line_no, std::string(kLabelPrefix) + code) + ": label must be 0 or 1");
      }
      cohort.labels[code][r] = static_cast<std::uint8_t>(*value);
    }
  }
  cohort.validate();
  return cohort;
}

CohortTable load_cohort(const std::filesystem::path& path, std::string source_tag) {
  return parse_cohort_csv(read_file(path), std::move(source_tag));
}

std::string cohort_to_csv(const CohortTable& cohort) {
  std::string out;
  out.reserve(cohort.n_rows() * 96);
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    if (f) out.push_back(',');
    out += kFeatureNames[f];
  }
  for (const auto& [code, y] : cohort.labels) {
    out.push_back(',');
    out += kLabelPrefix;
    out += code;
  }
  out.push_back('\n');
  for (std::size_t r = 0; r < cohort.n_rows(); ++r) {
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      if (f) out.push_back(',');
      const double v = cohort.features(r, f);
      if (!std::isnan(v)) out += format_double(v);
    }
    for (const auto& [code, y] : cohort.labels) {
      out.push_back(',');
      out.push_back(y[r] ? '1' : '0');
    }
    out.push_back('\n');
  }
  return out;
}

double prevalence(const CohortTable& cohort, std::string_view target) {
  const auto& y = cohort.label(target);
  if (y.empty()) return 0.0;
  const auto positives = std::count(y.begin(), y.end(), std::uint8_t{1});
  return static_cast<double>(positives) / static_cast<double>(y.size());
}

std::vector<int> assign_strata(const CohortTable& cohort, std::string_view target) {
  const auto& y = cohort.label(target);
  const std::size_t n = cohort.n_rows();
  std::vector<double> ages(n);
  for (std::size_t r = 0; r < n; ++r) ages[r] = cohort.features(r, feature::kAge);
  std::vector<double> sorted = ages;
  std::sort(sorted.begin(), sorted.end());
  const std::array<double, 3> cuts = {quantile_sorted(sorted, 0.25), quantile_sorted(sorted, 0.5),
                                      quantile_sorted(sorted, 0.75)};

  std::vector<int> strata(n);
  for (std::size_t r = 0; r < n; ++r) {
    const int quartile = static_cast<int>(std::count_if(cuts.begin(), cuts.end(), [&](double c) { return ages[r] > c; }));
    const int sex = cohort.features(r, feature::kSex) == 1.0 ? 1 : 0;
    strata[r] = static_cast<int>(y[r]) * 8 + sex * 4 + quartile;
  }
  return strata;
}

std::vector<std::size_t> FoldAssignment::rows_in(int fold) const {
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < fold_of_row.size(); ++r) {
    if (fold_of_row[r] == fold) rows.push_back(r);
  }
  return rows;
}

std::vector<std::size_t> FoldAssignment::train_rows() const {
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < fold_of_row.size(); ++r) {
    if (fold_of_row[r] < kValFold) rows.push_back(r);
  }
  return rows;
}

FoldAssignment make_folds(const CohortTable& cohort, std::string_view target, std::uint64_t seed) {
  const auto& y = cohort.label(target);
  const std::size_t n = cohort.n_rows();
  if (n < static_cast<std::size_t>(kNumFolds)) {
    throw Error(ErrorCode::TooFewRows, "need at least 20 rows for an 18:1:1 split, got " + std::to_string(n));
  }
  const auto positives = std::count(y.begin(), y.end(), std::uint8_t{1});
  if (positives == 0 || static_cast<std::size_t>(positives) == n) {
    throw Error(ErrorCode::SingleClass, "target '" + std::string(target) + "' has a single class");
  }

  const auto strata = assign_strata(cohort, target);
  constexpr int kMaxStrata = 16;
  std::array<std::vector<std::size_t>, kMaxStrata> members;
  for (std::size_t r = 0; r < n; ++r) members[static_cast<std::size_t>(strata[r])].push_back(r);

  FoldAssignment folds;
  folds.fold_of_row.assign(n, -1);
  // The deal position carries over between strata so overall fold sizes stay
  // balanced as well.
  std::size_t deal = 0;
  for (int s = 0; s < kMaxStrata; ++s) {
    auto& rows = members[static_cast<std::size_t>(s)];
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(s)));
    for (std::size_t i = rows.size(); i > 1; --i) std::swap(rows[i - 1], rows[rng.below(i)]);
    for (const std::size_t r : rows) folds.fold_of_row[r] = static_cast<int>(deal++ % kNumFolds);
  }
  return folds;
}

std::string folds_to_csv(const FoldAssignment& folds) {
  std::string out = "row_index,fold\n";
  for (std::size_t r = 0; r < folds.fold_of_row.size(); ++r) {
    out += std::to_string(r);
    out.push_back(',');
    out += std::to_string(folds.fold_of_row[r]);
    out.push_back('\n');
  }
  return out;
}

FoldAssignment parse_folds_csv(std::string_view text, std::size_t n_rows) {
  const auto lines = split_lines(text);
  if (lines.empty() || trim(lines[0]) != "row_index,fold") {
    throw Error(ErrorCode::BadValue, "folds file must start with 'row_index,fold'");
  }
  FoldAssignment folds;
  folds.fold_of_row.assign(n_rows, -1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split_record(lines[i]);
    if (cells.size() != 2) throw Error(ErrorCode::BadValue, "folds line " + std::to_string(i + 1) + " malformed");
    const auto row = parse_number(cells[0]);
    const auto fold = parse_number(cells[1]);
    if (!row || !fold || *row < 0 || *row >= static_cast<double>(n_rows) || *fold < 0 || *fold >= kNumFolds) {
      throw Error(ErrorCode::BadValue, "folds line " + std::to_string(i + 1) + " out of range");
    }
    folds.fold_of_row[static_cast<std::size_t>(*row)] = static_cast<int>(*fold);
  }
  if (std::find(folds.fold_of_row.begin(), folds.fold_of_row.end(), -1) != folds.fold_of_row.end()) {
    throw Error(ErrorCode::SchemaMismatch, "folds file does not cover every cohort row");
  }
  return folds;
}

}  // namespace ecgdx
