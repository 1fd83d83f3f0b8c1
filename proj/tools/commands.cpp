#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <numeric>
#include <ostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ecgdx/attribution.hpp"
#include "ecgdx/beeswarm.hpp"
#include "ecgdx/boosting.hpp"
#include "ecgdx/cohort.hpp"
#include "ecgdx/error.hpp"
#include "ecgdx/io.hpp"
#include "ecgdx/metrics.hpp"
#include "ecgdx/model_io.hpp"
#include "ecgdx/random.hpp"
#include "ecgdx/synth.hpp"

#ifndef ECGDX_VERSION
#define ECGDX_VERSION "dev"
#endif

namespace ecgdx::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kDotSampleStream = 0xB335'0000ULL;

struct Common {
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out;
};

void add_common(CLI::App& cmd, Common& common) {
  cmd.add_option("--seed", common.seed, "Seed for every random choice")->default_val(0);
  cmd.add_option("--threads", common.threads, "Worker thread cap")->default_val(1)->check(CLI::PositiveNumber);
  cmd.add_option("--out", common.out, "Output path")->required();
}

// Run record written next to (or inside) every output location. Timing fields
// are the only ones that change between identical runs.
class Manifest {
 public:
  explicit Manifest(std::string command) : command_(std::move(command)), start_(std::chrono::steady_clock::now()) {}

  void input(const fs::path& path, const std::string& contents) {
    inputs_.push_back({{"path", path.string()}, {"fnv1a64", hex64(fnv1a64(contents))}});
  }
  void output(const fs::path& path) { outputs_.push_back(path.string()); }
  void set(const std::string& key, json value) { fields_[key] = std::move(value); }

  std::string render() const {
    json j = fields_;
    j["command"] = command_;
    j["tool_version"] = ECGDX_VERSION;
    j["digest_algorithm"] = "FNV-1a 64-bit over raw file bytes";
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    j["wall_clock_seconds"] = elapsed;
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm);
    j["finished_at"] = stamp;
    return j.dump(1) + "\n";
  }

 private:
  std::string command_;
  std::chrono::steady_clock::time_point start_;
  json inputs_ = json::array();
  json outputs_ = json::array();
  json fields_ = json::object();
};

fs::path sidecar_manifest(const fs::path& out) {
  fs::path p = out;
  p += ".manifest.json";
  return p;
}

CohortTable read_cohort(const fs::path& path, Manifest& manifest) {
  const std::string text = read_file(path);
  manifest.input(path, text);
  return parse_cohort_csv(text, path.stem().string());
}

BoostedModel read_model(const fs::path& path, Manifest& manifest) {
  const std::string text = read_file(path);
  manifest.input(path, text);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::BadValue, path.string() + ": invalid JSON: " + e.what());
  }
  return model_from_json(j);
}

std::vector<std::size_t> select_rows(const CohortTable& cohort, const BoostedModel& model, const std::string& split,
                                     const std::string& folds_path, Manifest& manifest) {
  if (split == "all") {
    std::vector<std::size_t> rows(cohort.n_rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return rows;
  }
  FoldAssignment folds;
  if (!folds_path.empty()) {
    const std::string text = read_file(folds_path);
    manifest.input(folds_path, text);
    folds = parse_folds_csv(text, cohort.n_rows());
  } else {
    folds = make_folds(cohort, model.target_code, model.info.fold_seed);
  }
  return folds.test_rows();
}

int cmd_synth(const std::string& spec_path, std::size_t n, const Common& common, std::ostream& out) {
  Manifest manifest("synth");
  const std::string text = read_file(spec_path);
  manifest.input(spec_path, text);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::BadSpec, spec_path + ": invalid JSON: " + e.what());
  }
  const CohortSpec spec = cohort_spec_from_json(j);
  const CohortTable cohort = synth_cohort(spec, n, common.seed);
  const std::string csv = cohort_to_csv(cohort);

  manifest.set("seed", common.seed);
  manifest.set("config", {{"n", n}, {"spec", cohort_spec_to_json(spec)}});
  manifest.output(common.out);
  write_file_atomic(common.out, csv);
  write_file_atomic(sidecar_manifest(common.out), manifest.render());
  out << "wrote " << n << " rows to " << common.out << "\n";
  return kExitOk;
}

int cmd_train(const std::string& cohort_path, const std::string& target, const std::string& config_path,
              const Common& common, std::ostream& out) {
  Manifest manifest("train");
  const CohortTable cohort = read_cohort(cohort_path, manifest);

  TrainConfig config;
  if (!config_path.empty()) {
    const std::string text = read_file(config_path);
    manifest.input(config_path, text);
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::BadConfig, config_path + ": invalid JSON: " + e.what());
    }
    config = train_config_from_json(j);
  }
  config.seed = common.seed;
  config.threads = common.threads;
  config.validate();

  const FoldAssignment folds = make_folds(cohort, target, common.seed);
  const CohortTable train_set = cohort.subset(folds.train_rows());
  const CohortTable val_set = cohort.subset(folds.val_rows());
  TrainResult result = train(train_set, val_set, target, config);
  result.model.info.fold_seed = common.seed;

  const fs::path dir = common.out;
  const std::string model_text = serialize_model(result.model);
  const std::string folds_text = folds_to_csv(folds);
  manifest.set("seed", common.seed);
  manifest.set("config", train_config_to_json(config));
  manifest.set("target", normalize_target(target));
  manifest.output(dir / "model.json");
  manifest.output(dir / "folds.csv");
  write_file_atomic(dir / "model.json", model_text);
  write_file_atomic(dir / "folds.csv", folds_text);
  write_file_atomic(dir / "manifest.json", manifest.render());

  out << "target " << result.model.target_code << ": best_iteration=" << result.model.best_iteration
      << " rounds=" << result.model.info.rounds_trained << " val_auroc=" << result.model.info.best_val_auroc << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& model_path, const std::string& cohort_path, const std::string& split,
             const std::string& folds_path, std::size_t n_bootstrap, const std::string& append_csv,
             const Common& common, std::ostream& out) {
  Manifest manifest("eval");
  const BoostedModel model = read_model(model_path, manifest);
  model.check_schema();
  const CohortTable cohort = read_cohort(cohort_path, manifest);
  cohort.label(model.target_code);
  const auto rows = select_rows(cohort, model, split, folds_path, manifest);
  const CohortTable subset = cohort.subset(rows);
  const EvalReport report = evaluate(model, subset, model.target_code, n_bootstrap, common.seed, common.threads);

  const fs::path out_path = common.out;
  std::string body;
  if (out_path.extension() == ".csv") {
    body = std::string(kReportCsvHeader) + "\n" + report_csv_row(report) + "\n";
  } else {
    json j = report_to_json(report);
    j["split"] = split;
    body = j.dump(1) + "\n";
  }

  std::string appended;
  if (!append_csv.empty()) {
    if (fs::exists(append_csv)) {
      appended = read_file(append_csv);
      if (!appended.starts_with(kReportCsvHeader)) {
        throw Error(ErrorCode::BadValue, append_csv + " is not an evaluation table");
      }
      if (!appended.empty() && appended.back() != '\n') appended.push_back('\n');
    } else {
      appended = std::string(kReportCsvHeader) + "\n";
    }
    appended += report_csv_row(report) + "\n";
  }

  manifest.set("seed", common.seed);
  manifest.set("config", {{"split", split}, {"n_bootstrap", n_bootstrap}});
  manifest.output(out_path);
  write_file_atomic(out_path, body);
  if (!append_csv.empty()) {
    manifest.output(append_csv);
    write_file_atomic(append_csv, appended);
  }
  write_file_atomic(sidecar_manifest(out_path), manifest.render());

  out << report.target_code << " AUROC " << report.auroc << " (" << report.ci_low << ", " << report.ci_high
      << ") prevalence " << report.prevalence << " n=" << report.n_test << "\n";
  return kExitOk;
}

int cmd_explain(const std::string& model_path, const std::string& cohort_path, const std::string& split,
                const std::string& folds_path, std::size_t max_dots, bool dump_attributions, const Common& common,
                std::ostream& out) {
  Manifest manifest("explain");
  const BoostedModel model = read_model(model_path, manifest);
  model.check_schema();
  const CohortTable cohort = read_cohort(cohort_path, manifest);
  auto rows = select_rows(cohort, model, split, folds_path, manifest);
  if (rows.empty()) throw Error(ErrorCode::EmptySet, "no rows selected for explanation");

  if (rows.size() > max_dots) {
    Rng rng(derive_seed(common.seed, kDotSampleStream));
    for (std::size_t i = 0; i < max_dots; ++i) std::swap(rows[i], rows[i + rng.below(rows.size() - i)]);
    rows.resize(max_dots);
    std::sort(rows.begin(), rows.end());
  }

  const AttributionMatrix attr = explain(model, cohort.features, rows, common.threads);
  const auto ranking = global_importance(attr);
  std::string importance = "rank,feature,mean_abs_shap\n";
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    importance += std::to_string(i + 1) + "," + std::string(kFeatureNames[ranking[i].feature]) + "," +
                  format_double(ranking[i].mean_abs_phi) + "\n";
  }

  const fs::path dir = common.out;
  BeeswarmOptions options;
  options.seed = common.seed;
  options.title = model.target_code + " (" + std::to_string(attr.n_rows()) + " rows)";
  const std::string csv = beeswarm_csv(attr);
  const std::string svg = beeswarm_svg(attr, options);

  manifest.set("seed", common.seed);
  manifest.set("config", {{"split", split}, {"max_dots", max_dots}, {"rows_explained", attr.n_rows()}});
  manifest.output(dir / "beeswarm.csv");
  manifest.output(dir / "beeswarm.svg");
  manifest.output(dir / "importance.csv");
  if (dump_attributions) manifest.output(dir / "attributions.csv");
  write_file_atomic(dir / "beeswarm.csv", csv);
  write_file_atomic(dir / "beeswarm.svg", svg);
  write_file_atomic(dir / "importance.csv", importance);
  if (dump_attributions) write_file_atomic(dir / "attributions.csv", attribution_to_csv(attr));
  write_file_atomic(dir / "manifest.json", manifest.render());

  out << "explained " << attr.n_rows() << " rows; top features:";
  for (std::size_t i = 0; i < 3; ++i) out << " " << kFeatureNames[ranking[i].feature];
  out << "\n";
  return kExitOk;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::IoError: return kExitIo;
    case ErrorCode::SingleClass:
    case ErrorCode::SingleClassTrain:
    case ErrorCode::SingleClassVal:
    case ErrorCode::ResampleExhausted: return kExitSingleClass;
    default: return kExitConfig;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"ECG-feature diagnosis models: synthetic cohorts, boosted trees, AUROC, Shapley explanations"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ECGDX_VERSION);

  Common common;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort CSV from a cohort spec");
  std::string spec_path;
  std::size_t n_rows = 0;
  synth->add_option("--spec", spec_path, "Cohort spec JSON")->required();
  synth->add_option("--n", n_rows, "Number of rows")->required()->check(CLI::PositiveNumber);
  add_common(*synth, common);

  auto* train_cmd = app.add_subcommand("train", "Train one target's model with an 18:1:1 stratified split");
  std::string cohort_path;
  std::string target;
  std::string config_path;
  train_cmd->add_option("--cohort", cohort_path, "Cohort CSV")->required();
  train_cmd->add_option("--target", target, "Target code (with or without dx_ prefix)")->required();
  train_cmd->add_option("--config", config_path, "Training config JSON");
  add_common(*train_cmd, common);

  auto* eval_cmd = app.add_subcommand("eval", "AUROC with bootstrap confidence interval");
  std::string model_path;
  std::string split = "test";
  std::string folds_path;
  std::size_t n_bootstrap = kDefaultBootstrap;
  std::string append_csv;
  eval_cmd->add_option("--model", model_path, "model.json from train")->required();
  eval_cmd->add_option("--cohort", cohort_path, "Cohort CSV")->required();
  eval_cmd->add_option("--split", split, "test: the held-out fold of the training cohort; all: every row")
      ->check(CLI::IsMember({"test", "all"}));
  eval_cmd->add_option("--folds", folds_path, "folds.csv from train (default: recompute from the model's fold seed)");
  eval_cmd->add_option("--n-bootstrap", n_bootstrap, "Bootstrap resamples")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--append-csv", append_csv, "Also append a row to this evaluation table");
  add_common(*eval_cmd, common);

  auto* explain_cmd = app.add_subcommand("explain", "Shapley attributions and beeswarm export");
  std::size_t max_dots = 5000;
  bool dump_attributions = false;
  explain_cmd->add_option("--model", model_path, "model.json from train")->required();
  explain_cmd->add_option("--cohort", cohort_path, "Cohort CSV")->required();
  explain_cmd->add_option("--split", split, "test or all")->check(CLI::IsMember({"test", "all"}));
  explain_cmd->add_option("--folds", folds_path, "folds.csv from train");
  explain_cmd->add_option("--max-dots", max_dots, "Maximum rows plotted")->check(CLI::PositiveNumber);
  explain_cmd->add_flag("--dump-attributions", dump_attributions, "Also write attributions.csv");
  add_common(*explain_cmd, common);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (synth->parsed()) return cmd_synth(spec_path, n_rows, common, out);
    if (train_cmd->parsed()) return cmd_train(cohort_path, target, config_path, common, out);
    if (eval_cmd->parsed()) {
      return cmd_eval(model_path, cohort_path, split, folds_path, n_bootstrap, append_csv, common, out);
    }
    if (explain_cmd->parsed()) {
      return cmd_explain(model_path, cohort_path, split, folds_path, max_dots, dump_attributions, common, out);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace ecgdx::cli
