#include "treefx/effects.hpp"
#include "treefx/ice_pdp.hpp"
#include "treefx/models.hpp"
#include "treefx/selection.hpp"
#include "treefx/serialize.hpp"
#include "treefx/simulation.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

namespace py = pybind11;
using namespace treefx;

namespace {

SamplerConfig chain(int trees, int burn_in, int draws, int thin, std::uint64_t seed) {
  SamplerConfig c;
  c.num_trees = trees;
  c.burn_in = burn_in;
  c.num_draws = draws;
  c.thinning = thin;
  c.seed = seed;
  return c;
}

Design design_of(const Eigen::MatrixXd& X, std::optional<std::vector<std::string>> names, int propensity_col,
                 int treatment_col) {
  Design d;
  d.X = X;
  if (names) {
    d.names = *names;
  } else {
    for (Eigen::Index j = 0; j < X.cols(); ++j) d.names.push_back("x" + std::to_string(j + 1));
  }
  if (d.names.size() != static_cast<std::size_t>(X.cols())) throw py::value_error("names must match the columns of X");
  d.propensity_col = propensity_col;
  d.treatment_col = treatment_col;
  return d;
}

SplitPriorKind prior_kind(const std::string& prior) {
  if (prior == "uniform") return SplitPriorKind::Uniform;
  if (prior == "dirichlet") return SplitPriorKind::Dirichlet;
  throw py::value_error("prior must be 'uniform' or 'dirichlet'");
}

Eigen::MatrixXd s_matrix(const std::vector<std::vector<double>>& s) {
  if (s.empty()) return Eigen::MatrixXd(0, 0);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(s.size()), static_cast<Eigen::Index>(s[0].size()));
  for (std::size_t d = 0; d < s.size(); ++d) {
    for (std::size_t j = 0; j < s[d].size(); ++j) out(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(j)) = s[d][j];
  }
  return out;
}

py::dict curves_dict(const CurveSet& c) {
  py::dict out;
  out["var"] = c.var;
  out["grid"] = c.grid;
  out["ice"] = c.ice;
  out["rows"] = c.rows;
  out["pdp"] = c.pdp;
  if (c.pdp_lo) {
    out["pdp_lo"] = *c.pdp_lo;
    out["pdp_hi"] = *c.pdp_hi;
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bayesian tree ensembles for treatment effects and variable selection";
  m.attr("__version__") = kVersion;

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);

  py::class_<FitResult>(m, "FitResult")
      .def_property_readonly("num_draws", &FitResult::num_draws)
      .def_readonly("names", &FitResult::names)
      .def_readonly("propensity_col", &FitResult::propensity_col)
      .def_readonly("treatment_col", &FitResult::treatment_col)
      .def_readonly("sigma", &FitResult::sigma)
      .def_readonly("theta", &FitResult::theta)
      .def_readonly("usage", &FitResult::usage)
      .def_readonly("train_fit", &FitResult::train_fit)
      .def_property_readonly("is_probit", [](const FitResult& f) { return f.kind == ModelKind::Probit; })
      .def_property_readonly("s", [](const FitResult& f) { return s_matrix(f.s); })
      .def_property_readonly("pip", [](const FitResult& f) { return compute_pip(f.usage); })
      .def("predict_draws", &FitResult::predict_draws, py::arg("X"), py::call_guard<py::gil_scoped_release>())
      .def("predict", &FitResult::predict_mean, py::arg("X"), py::call_guard<py::gil_scoped_release>())
      .def("predict_probability", &FitResult::predict_probability, py::arg("X"),
           py::call_guard<py::gil_scoped_release>());

  py::class_<BcfFitResult>(m, "BcfFitResult")
      .def_property_readonly("num_draws", &BcfFitResult::num_draws)
      .def_readonly("names", &BcfFitResult::names)
      .def_readonly("propensity_col", &BcfFitResult::propensity_col)
      .def_readonly("sigma", &BcfFitResult::sigma)
      .def_readonly("nu_alpha", &BcfFitResult::nu_alpha)
      .def_readonly("usage", &BcfFitResult::usage)
      .def_readonly("m_fit", &BcfFitResult::m_fit)
      .def_readonly("alpha_fit", &BcfFitResult::alpha_fit)
      .def_readonly("total_fit", &BcfFitResult::total_fit)
      .def_property_readonly("pip", [](const BcfFitResult& f) { return compute_pip(f.usage); })
      .def("effect_draws", &BcfFitResult::effect_draws, py::arg("X"), py::call_guard<py::gil_scoped_release>())
      .def("prognostic_draws", &BcfFitResult::prognostic_draws, py::arg("X"),
           py::call_guard<py::gil_scoped_release>());

  m.def(
      "fit_bart",
      [](const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::optional<std::vector<std::string>> names,
         int propensity_col, int treatment_col, const std::string& prior, int trees, int burn_in, int draws, int thin,
         std::uint64_t seed, double k) {
        BartOptions opt;
        opt.sampler = chain(trees, burn_in, draws, thin, seed);
        opt.split_prior = prior_kind(prior);
        opt.k = k;
        const Design d = design_of(X, std::move(names), propensity_col, treatment_col);
        py::gil_scoped_release release;
        return fit_bart(d, y, opt);
      },
      py::arg("X"), py::arg("y"), py::arg("names") = py::none(), py::arg("propensity_col") = -1,
      py::arg("treatment_col") = -1, py::arg("prior") = "uniform", py::arg("trees") = 200, py::arg("burn_in") = 1000,
      py::arg("draws") = 1000, py::arg("thin") = 1, py::arg("seed") = 1, py::arg("k") = 2.0,
      "Regression BART (prior='uniform') or DART (prior='dirichlet').");

  m.def(
      "fit_probit",
      [](const Eigen::MatrixXd& X, const Eigen::VectorXi& z, std::optional<std::vector<std::string>> names,
         const std::string& prior, int trees, int burn_in, int draws, int thin, std::uint64_t seed) {
        BartOptions opt;
        opt.sampler = chain(trees, burn_in, draws, thin, seed);
        opt.split_prior = prior_kind(prior);
        const Design d = design_of(X, std::move(names), -1, -1);
        py::gil_scoped_release release;
        ProbitFit pf = fit_probit(d, z, opt);
        return std::make_pair(std::move(pf.fit), std::move(pf.pihat));
      },
      py::arg("X"), py::arg("z"), py::arg("names") = py::none(), py::arg("prior") = "uniform", py::arg("trees") = 50,
      py::arg("burn_in") = 1000, py::arg("draws") = 1000, py::arg("thin") = 1, py::arg("seed") = 1,
      "Probit classifier of z; returns (fit, posterior-mean probabilities at the rows of X).");

  m.def(
      "fit_glm_propensity",
      [](const Eigen::MatrixXd& X, const Eigen::VectorXi& z) {
        const GlmResult g = fit_glm_propensity(X, z);
        py::dict out;
        out["coefficients"] = g.coefficients;
        out["probability"] = g.probability;
        out["iterations"] = g.iterations;
        out["converged"] = g.converged;
        out["ridge"] = g.ridge;
        out["warning"] = g.warning;
        return out;
      },
      py::arg("X"), py::arg("z"), "Logistic regression of z on [1, X].");

  m.def(
      "fit_bcf",
      [](const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXi& z,
         std::optional<std::vector<std::string>> names, int propensity_col, int trees, int alpha_trees, int burn_in,
         int draws, int thin, std::uint64_t seed, double alpha0, double nu0) {
        BcfOptions opt;
        opt.sampler = chain(trees, burn_in, draws, thin, seed);
        opt.alpha = BcfPriorParams::with_defaults(alpha0, alpha_trees, nu0);
        const Design d = design_of(X, std::move(names), propensity_col, -1);
        py::gil_scoped_release release;
        return fit_bcf(d, y, z, opt);
      },
      py::arg("X"), py::arg("y"), py::arg("z"), py::arg("names") = py::none(), py::arg("propensity_col") = -1,
      py::arg("trees") = 200, py::arg("alpha_trees") = 50, py::arg("burn_in") = 1000, py::arg("draws") = 1000,
      py::arg("thin") = 1, py::arg("seed") = 1, py::arg("alpha0") = 0.5, py::arg("nu0") = 0.25,
      "y = m(x) + alpha(x) z + e; X excludes z.");

  m.def(
      "estimate_ite",
      [](const FitResult& fit, const Eigen::MatrixXd& X) { return estimate_ite_bart(fit, X).ite; }, py::arg("fit"),
      py::arg("X"), py::call_guard<py::gil_scoped_release>(), "Per-draw ITE matrix (draws x n).");
  m.def(
      "estimate_ite",
      [](const BcfFitResult& fit, const Eigen::MatrixXd& X) { return estimate_ite_bcf(fit, X).ite; }, py::arg("fit"),
      py::arg("X"), py::call_guard<py::gil_scoped_release>());
  m.def(
      "cate", [](const Eigen::MatrixXd& ite) { return cate(EffectDraws{ite}); }, py::arg("ite"),
      "Per-draw CATE from an ITE draw matrix.");
  m.def("credible_interval", &credible_interval, py::arg("draws"), py::arg("level") = 0.95);
  m.def("rmse", &rmse, py::arg("estimates"), py::arg("truth"));

  m.def(
      "ice_curves",
      [](const FitResult& fit, const Eigen::MatrixXd& X, int var, bool effect,
         std::optional<Eigen::VectorXd> grid) {
        py::gil_scoped_release release;
        const CurveSet c = effect ? ice_ite_curves(fit, X, var, grid) : ice_curves(mean_predictor(fit), X, var, grid);
        py::gil_scoped_acquire acquire;
        return curves_dict(c);
      },
      py::arg("fit"), py::arg("X"), py::arg("var"), py::arg("effect") = false, py::arg("grid") = py::none());
  m.def(
      "ice_curves",
      [](const BcfFitResult& fit, const Eigen::MatrixXd& X, int var, bool effect,
         std::optional<Eigen::VectorXd> grid) {
        if (!effect) throw py::value_error("BCF fits only support effect curves");
        py::gil_scoped_release release;
        const CurveSet c = ice_ite_curves(fit, X, var, grid);
        py::gil_scoped_acquire acquire;
        return curves_dict(c);
      },
      py::arg("fit"), py::arg("X"), py::arg("var"), py::arg("effect") = true, py::arg("grid") = py::none());
  m.def(
      "pdp_curve",
      [](const FitResult& fit, const Eigen::MatrixXd& X, int var, bool effect, std::optional<Eigen::VectorXd> grid) {
        return effect ? pdp_cate_curve(fit, X, var, grid) : pdp_curve(mean_predictor(fit), X, var, grid);
      },
      py::arg("fit"), py::arg("X"), py::arg("var"), py::arg("effect") = false, py::arg("grid") = py::none(),
      py::call_guard<py::gil_scoped_release>());
  m.def(
      "pdp_curve",
      [](const BcfFitResult& fit, const Eigen::MatrixXd& X, int var, bool, std::optional<Eigen::VectorXd> grid) {
        return pdp_cate_curve(fit, X, var, grid);
      },
      py::arg("fit"), py::arg("X"), py::arg("var"), py::arg("effect") = true, py::arg("grid") = py::none(),
      py::call_guard<py::gil_scoped_release>());
  m.def("observed_grid", &observed_grid, py::arg("X"), py::arg("var"));
  m.def("thin_grid", &thin_grid, py::arg("grid"), py::arg("max_grid"));

  m.def("compute_pip", &compute_pip, py::arg("usage"));
  m.def("select_variables", &select_variables, py::arg("pip"), py::arg("threshold") = 0.5);
  m.def(
      "selection_metrics",
      [](const std::vector<bool>& selected, const std::vector<bool>& relevant) {
        const SelectionMetrics s = selection_metrics(selected, relevant);
        py::dict out;
        out["precision"] = s.precision;
        out["recall"] = s.recall;
        out["f1"] = s.f1;
        out["precision_undefined"] = s.precision_undefined;
        out["recall_undefined"] = s.recall_undefined;
        return out;
      },
      py::arg("selected"), py::arg("relevant"));

  m.def(
      "simulate",
      [](const std::string& dgp, int n, int p, std::uint64_t seed) {
        Rng rng(mix_seed(seed, 0, 1));
        const DgpSample s = generate(parse_dgp(dgp), n, p, rng);
        py::dict out;
        out["X"] = s.X;
        out["z"] = s.z;
        out["y"] = s.y;
        out["pi_true"] = s.pi_true;
        out["mu_true"] = s.mu_true;
        out["alpha_true"] = s.alpha_true;
        out["sigma"] = s.sigma_used;
        out["cate_true"] = s.cate_true;
        out["relevant"] = s.relevant;
        return out;
      },
      py::arg("dgp"), py::arg("n"), py::arg("p"), py::arg("seed"),
      "One draw from the 'hahn', 'friedman' or 'hill' process.");

  m.def(
      "run_benchmark",
      [](const std::string& dgp, std::vector<std::string> models, int reps, std::optional<int> n,
         std::optional<int> p, std::optional<int> trees, std::optional<int> burn_in, std::optional<int> draws,
         std::optional<int> thin, std::uint64_t seed, int jobs) {
        BenchmarkSpec spec = BenchmarkSpec::desk(parse_dgp(dgp));
        if (!models.empty()) {
          spec.models.clear();
          for (const auto& l : models) spec.models.push_back(parse_model(l));
        }
        spec.replications = reps;
        if (n) spec.n = *n;
        if (p) spec.p = *p;
        if (trees) spec.sampler.num_trees = *trees;
        if (burn_in) spec.sampler.burn_in = spec.propensity_sampler.burn_in = *burn_in;
        if (draws) spec.sampler.num_draws = spec.propensity_sampler.num_draws = *draws;
        if (thin) spec.sampler.thinning = spec.propensity_sampler.thinning = *thin;
        spec.seed = seed;
        spec.jobs = jobs;
        py::gil_scoped_release release;
        const BenchmarkReport report = run_benchmark(spec);
        return std::make_pair(report_csv(report), report_json(report));
      },
      py::arg("dgp"), py::arg("models") = std::vector<std::string>{}, py::arg("reps") = 10, py::arg("n") = py::none(),
      py::arg("p") = py::none(), py::arg("trees") = py::none(), py::arg("burn_in") = py::none(),
      py::arg("draws") = py::none(), py::arg("thin") = py::none(), py::arg("seed") = 1, py::arg("jobs") = 1,
      "Desk-scale replication study; returns (csv, json) report text.");

  m.def(
      "save_model", [](const std::string& path, const FitResult& fit) { save_model(path, fit); }, py::arg("path"),
      py::arg("fit"));
  m.def(
      "save_model", [](const std::string& path, const BcfFitResult& fit) { save_model(path, fit); }, py::arg("path"),
      py::arg("fit"));
  m.def(
      "load_model",
      [](const std::string& path) -> py::object {
        SavedModel model = load_model(path);
        if (auto* f = std::get_if<FitResult>(&model)) return py::cast(std::move(*f));
        return py::cast(std::move(std::get<BcfFitResult>(model)));
      },
      py::arg("path"));
}
