#include "synque/cli.hpp"
#include "synque/errors.hpp"
#include "synque/evalharness.hpp"
#include "synque/kernels.hpp"
#include "synque/lens.hpp"
#include "synque/llmclient.hpp"
#include "synque/repmetrics.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace synque;

namespace {

EmbeddingMatrix as_embeddings(const Eigen::MatrixXd& X, const std::string& prefix) {
  std::vector<std::string> ids;
  ids.reserve(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) ids.push_back(prefix + std::to_string(i));
  return EmbeddingMatrix(std::move(ids), X);
}

KernelSpec make_kernel(const std::string& family, int degree, double coef0, std::optional<double> gamma) {
  KernelSpec spec;
  spec.family = kernel_family_from_string(family);
  spec.degree = degree;
  spec.coef0 = coef0;
  spec.gamma = gamma;
  spec.validate();
  return spec;
}

py::dict as_dict(const ProxyScore& s) {
  py::dict d;
  d["metric"] = std::string(to_string(s.metric));
  d["raw"] = s.raw;
  d["synque_score"] = s.synque_score;
  d["meta"] = s.meta;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Synthetic dataset quality proxies";

  auto data_error = py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", data_error.ptr());
  py::register_exception<EndpointError>(m, "EndpointError", PyExc_RuntimeError);
  py::register_exception<UndefinedCorrelation>(m, "UndefinedCorrelation", PyExc_ArithmeticError);
  py::register_exception<UnparseableJudgement>(m, "UnparseableJudgement", PyExc_ValueError);

  m.def("metrics", [] {
    std::vector<std::string> names;
    for (Metric metric : all_metrics()) names.emplace_back(to_string(metric));
    return names;
  });

  m.def(
      "gram",
      [](const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const std::string& kernel, int degree, double coef0,
         std::optional<double> gamma) { return gram(X, Y, make_kernel(kernel, degree, coef0, gamma)); },
      py::arg("X"), py::arg("Y"), py::arg("kernel") = "polynomial", py::arg("degree") = 3, py::arg("coef0") = 1.0,
      py::arg("gamma") = py::none());

  m.def(
      "mmd2",
      [](const Eigen::MatrixXd& Xs, const Eigen::MatrixXd& Xr, const std::string& kernel, int degree, double coef0,
         std::optional<double> gamma) {
        return as_dict(mmd2(as_embeddings(Xs, "s"), as_embeddings(Xr, "r"), make_kernel(kernel, degree, coef0, gamma)));
      },
      py::arg("Xs"), py::arg("Xr"), py::arg("kernel") = "polynomial", py::arg("degree") = 3, py::arg("coef0") = 1.0,
      py::arg("gamma") = py::none());

  m.def(
      "mdm", [](const Eigen::MatrixXd& X, std::size_t k, std::int64_t seed) {
        return as_dict(mdm(as_embeddings(X, "s"), k, seed));
      },
      py::arg("X"), py::arg("k"), py::arg("seed") = 0);

  m.def(
      "kmedoids",
      [](const Eigen::MatrixXd& X, std::size_t k) {
        auto result = kmedoids(X, k);
        return py::make_tuple(result.medoid_indices, result.assignment, result.total_deviation);
      },
      py::arg("X"), py::arg("k"));

  m.def(
      "pad",
      [](const Eigen::MatrixXd& Xs, const Eigen::MatrixXd& Xr, const std::string& classifier, double holdout_fraction,
         std::int64_t seed) {
        if (classifier != "logistic" && classifier != "boosted_stumps")
          throw ConfigError("unknown PAD classifier '" + classifier + "'");
        PadConfig cfg;
        cfg.classifier = classifier == "boosted_stumps" ? PadClassifier::boosted_stumps : PadClassifier::logistic;
        cfg.holdout_fraction = holdout_fraction;
        return as_dict(pad(as_embeddings(Xs, "s"), as_embeddings(Xr, "r"), cfg, seed));
      },
      py::arg("Xs"), py::arg("Xr"), py::arg("classifier") = "logistic", py::arg("holdout_fraction") = 0.2,
      py::arg("seed") = 0);

  m.def(
      "mauve",
      [](const Eigen::MatrixXd& Xs, const Eigen::MatrixXd& Xr, std::optional<std::size_t> num_bins, double scaling,
         std::int64_t seed) {
        MauveConfig cfg;
        cfg.num_bins = num_bins;
        cfg.scaling = scaling;
        return as_dict(mauve(as_embeddings(Xs, "s"), as_embeddings(Xr, "r"), cfg, seed));
      },
      py::arg("Xs"), py::arg("Xr"), py::arg("num_bins") = py::none(), py::arg("scaling") = 5.0, py::arg("seed") = 0);

  m.def(
      "mauve_from_histograms",
      [](std::vector<double> P, std::vector<double> Q, double scaling) {
        MauveConfig cfg;
        cfg.scaling = scaling;
        return mauve_from_histograms(std::move(P), std::move(Q), cfg);
      },
      py::arg("P"), py::arg("Q"), py::arg("scaling") = 5.0);

  m.def("pearson", [](const std::vector<double>& a, const std::vector<double>& b) { return pearson(a, b); });
  m.def("spearman", [](const std::vector<double>& a, const std::vector<double>& b) { return spearman(a, b); });

  m.def(
      "debias",
      [](const Eigen::MatrixXd& grades, const Eigen::Vector4d& baselines, double epsilon) {
        if (grades.cols() != 4) throw DataError("grades must have 4 columns");
        ScoreGrid grid;
        grid.epsilon = epsilon;
        for (int j = 0; j < 4; ++j) grid.baselines[static_cast<std::size_t>(j)] = baselines[j];
        for (Eigen::Index i = 0; i < grades.rows(); ++i)
          grid.grades.push_back({grades(i, 0), grades(i, 1), grades(i, 2), grades(i, 3)});
        return debias(grid);
      },
      py::arg("grades"), py::arg("baselines"), py::arg("epsilon") = 1e-6);

  m.def("parse_judgement", [](const std::string& text) {
    Judgement j = parse_judgement(text);
    return py::make_tuple(std::string(to_string(j.word)), j.grade);
  });

  m.def(
      "topk_table",
      [](const std::map<std::string, double>& scores, const std::map<std::string, double>& performance, std::size_t k) {
        TopKSection t = topk_table(scores, PerformanceTable{performance}, k);
        py::dict d;
        d["k"] = t.k;
        d["selected"] = t.selected;
        d["selected_scores"] = t.selected_scores;
        d["selected_performance"] = t.selected_performance;
        d["topk_mean"] = t.topk_mean;
        d["pool_mean"] = t.pool_mean;
        d["improvement"] = t.improvement;
        return d;
      },
      py::arg("scores"), py::arg("performance"), py::arg("k"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv{"synque"};
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
