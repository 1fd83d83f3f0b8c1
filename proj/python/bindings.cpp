#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include <json.hpp>

#include "commands.hpp"
#include "ecgdx/attribution.hpp"
#include "ecgdx/beeswarm.hpp"
#include "ecgdx/boosting.hpp"
#include "ecgdx/cohort.hpp"
#include "ecgdx/error.hpp"
#include "ecgdx/metrics.hpp"
#include "ecgdx/model_io.hpp"
#include "ecgdx/synth.hpp"

namespace py = pybind11;
using namespace ecgdx;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using LabelArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

FeatureMatrix to_matrix(const DoubleArray& x) {
  if (x.ndim() != 2 || x.shape(1) != static_cast<py::ssize_t>(kNumFeatures)) {
    throw Error(ErrorCode::SchemaMismatch, "features must have shape (n, 10)");
  }
  const auto n = static_cast<std::size_t>(x.shape(0));
  return FeatureMatrix(n, std::vector<double>(x.data(), x.data() + n * kNumFeatures));
}

DoubleArray from_matrix(const FeatureMatrix& m) {
  DoubleArray out({static_cast<py::ssize_t>(m.n_rows()), static_cast<py::ssize_t>(kNumFeatures)});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

template <typename T>
py::array_t<T> to_array(const std::vector<T>& v) {
  py::array_t<T> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

std::span<const double> span_of(const DoubleArray& a) { return {a.data(), static_cast<std::size_t>(a.size())}; }
std::span<const std::uint8_t> span_of(const LabelArray& a) { return {a.data(), static_cast<std::size_t>(a.size())}; }

CohortTable make_cohort(const DoubleArray& features, const std::map<std::string, LabelArray>& labels,
                        const std::string& source_tag) {
  CohortTable c;
  c.features = to_matrix(features);
  for (const auto& [code, y] : labels) {
    if (static_cast<std::size_t>(y.size()) != c.n_rows()) {
      throw Error(ErrorCode::LengthMismatch, "labels for " + code + " do not match the row count");
    }
    c.labels[normalize_target(code)] = LabelVector(y.data(), y.data() + y.size());
  }
  c.source_tag = source_tag;
  c.validate();
  return c;
}

py::dict report_dict(const EvalReport& r) {
  py::dict d;
  d["target_code"] = r.target_code;
  d["auroc"] = r.auroc;
  d["ci_low"] = r.ci_low;
  d["ci_high"] = r.ci_high;
  d["n_test"] = r.n_test;
  d["prevalence"] = r.prevalence;
  d["n_bootstrap"] = r.n_bootstrap;
  d["seed"] = r.seed;
  d["source_tag"] = r.source_tag;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core: cohorts, boosted trees, AUROC with bootstrap CI, exact TreeSHAP";

  static py::exception<Error> error_type(m, "EcgdxError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object err = py::reinterpret_borrow<py::object>(error_type)(e.what());
      err.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error_type.ptr(), err.ptr());
    }
  });

  m.attr("FEATURE_NAMES") = schema_names();

  py::class_<CohortTable>(m, "Cohort")
      .def(py::init(&make_cohort), py::arg("features"), py::arg("labels"), py::arg("source_tag") = "")
      .def_property_readonly("features", [](const CohortTable& c) { return from_matrix(c.features); })
      .def_property_readonly("labels",
                             [](const CohortTable& c) {
                               py::dict d;
                               for (const auto& [code, y] : c.labels) d[py::str(code)] = to_array(y);
                               return d;
                             })
      .def_readonly("source_tag", &CohortTable::source_tag)
      .def_property_readonly("n_rows", &CohortTable::n_rows)
      .def("__len__", &CohortTable::n_rows)
      .def("subset", [](const CohortTable& c, const std::vector<std::size_t>& rows) { return c.subset(rows); })
      .def("prevalence", [](const CohortTable& c, const std::string& target) { return prevalence(c, target); })
      .def("to_csv", &cohort_to_csv);

  m.def("load_cohort", &load_cohort, py::arg("path"), py::arg("source_tag") = "");
  m.def("parse_cohort_csv", &parse_cohort_csv, py::arg("text"), py::arg("source_tag") = "");
  m.def(
      "synth_cohort",
      [](const std::string& spec_json, std::size_t n, std::uint64_t seed) {
        return synth_cohort(cohort_spec_from_json(nlohmann::json::parse(spec_json)), n, seed);
      },
      py::arg("spec_json"), py::arg("n"), py::arg("seed") = 0, "Draw a cohort from a cohort spec given as JSON text.");
  m.def(
      "make_folds",
      [](const CohortTable& c, const std::string& target, std::uint64_t seed) {
        return to_array(make_folds(c, target, seed).fold_of_row);
      },
      py::arg("cohort"), py::arg("target"), py::arg("seed") = 0, "Fold id per row: 0-17 train, 18 val, 19 test.");

  py::class_<BoostedModel>(m, "Model")
      .def_readonly("base_score", &BoostedModel::base_score)
      .def_readonly("best_iteration", &BoostedModel::best_iteration)
      .def_readonly("target_code", &BoostedModel::target_code)
      .def_property_readonly("n_trees", [](const BoostedModel& b) { return b.trees.size(); })
      .def("predict_margin", [](const BoostedModel& b, const DoubleArray& x) {
        return to_array(predict_margins(b, to_matrix(x)));
      })
      .def("predict_proba", [](const BoostedModel& b, const DoubleArray& x) {
        return to_array(predict_probas(b, to_matrix(x)));
      })
      .def("to_json", &serialize_model)
      .def_static("from_json", [](const std::string& text) { return model_from_json(nlohmann::json::parse(text)); })
      .def_static("load", &load_model);

  m.def(
      "train",
      [](const CohortTable& train_set, const CohortTable& val_set, const std::string& target,
         const std::string& config_json) {
        const TrainConfig config = train_config_from_json(nlohmann::json::parse(config_json));
        py::gil_scoped_release release;
        return train(train_set, val_set, target, config).model;
      },
      py::arg("train_set"), py::arg("val_set"), py::arg("target"), py::arg("config_json") = "{}",
      "Boost until validation AUROC stops improving; config keys mirror the CLI config file.");

  m.def(
      "auroc", [](const DoubleArray& s, const LabelArray& y) { return auroc(span_of(s), span_of(y)); },
      py::arg("scores"), py::arg("labels"));
  m.def(
      "bootstrap_ci",
      [](const DoubleArray& s, const LabelArray& y, std::size_t n_bootstrap, double alpha, std::uint64_t seed,
         int threads) {
        const auto ci = bootstrap_ci(span_of(s), span_of(y), n_bootstrap, alpha, seed, threads);
        return py::make_tuple(ci.low, ci.high);
      },
      py::arg("scores"), py::arg("labels"), py::arg("n_bootstrap") = kDefaultBootstrap, py::arg("alpha") = 0.05,
      py::arg("seed") = 0, py::arg("threads") = 1);
  m.def(
      "evaluate",
      [](const BoostedModel& model, const CohortTable& test_set, std::size_t n_bootstrap, std::uint64_t seed) {
        return report_dict(evaluate(model, test_set, model.target_code, n_bootstrap, seed));
      },
      py::arg("model"), py::arg("test_set"), py::arg("n_bootstrap") = kDefaultBootstrap, py::arg("seed") = 0);

  m.def(
      "shap_values",
      [](const BoostedModel& model, const DoubleArray& x, int threads) {
        const auto attr = explain(model, to_matrix(x), threads);
        DoubleArray phi({static_cast<py::ssize_t>(attr.n_rows()), static_cast<py::ssize_t>(kNumFeatures)});
        for (std::size_t i = 0; i < attr.n_rows(); ++i) {
          std::copy(attr.phi[i].begin(), attr.phi[i].end(), phi.mutable_data() + i * kNumFeatures);
        }
        return py::make_tuple(attr.base_value, phi);
      },
      py::arg("model"), py::arg("features"), py::arg("threads") = 1,
      "Exact Shapley values in log-odds space: (base_value, phi of shape (n, 10)).");
  m.def(
      "beeswarm",
      [](const BoostedModel& model, const DoubleArray& x, std::uint64_t seed) {
        const auto attr = explain(model, to_matrix(x));
        return py::make_tuple(beeswarm_csv(attr), beeswarm_svg(attr, BeeswarmOptions{seed, model.target_code}));
      },
      py::arg("model"), py::arg("features"), py::arg("seed") = 0, "Beeswarm CSV and SVG text.");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out;
        std::ostringstream err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run a CLI subcommand in-process; returns (exit_code, stdout, stderr).");
}
