// treefx command-line front end.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.

#include "treefx/data.hpp"
#include "treefx/effects.hpp"
#include "treefx/ice_pdp.hpp"
#include "treefx/models.hpp"
#include "treefx/selection.hpp"
#include "treefx/serialize.hpp"
#include "treefx/simulation.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace {

using namespace treefx;
using nlohmann::json;

/// Bad flags, missing columns and other problems the caller can fix.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int default_jobs() {
  if (const char* env = std::getenv("TREEFX_THREADS")) {
    try {
      return std::max(1, std::stoi(env));
    } catch (const std::exception&) {
      std::cerr << "warning: ignoring TREEFX_THREADS='" << env << "'\n";
    }
  }
  return 1;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// Every option of a subcommand with its parsed or default value.
json resolved_config(const CLI::App& cmd) {
  json cfg = json::object();
  for (const CLI::Option* opt : cmd.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    if (opt->count() > 0) {
      const auto& r = opt->results();
      cfg[name] = r.size() == 1 ? json(r[0]) : json(r);
    } else if (opt->get_type_size() == 0) {
      cfg[name] = false;
    } else if (!opt->get_default_str().empty()) {
      cfg[name] = opt->get_default_str();
    }
  }
  return cfg;
}

// `seed` is null for commands that draw no random numbers.
json metadata(const CLI::App& cmd, std::optional<std::uint64_t> seed) {
  return {{"tool", "treefx"}, {"version", kVersion}, {"command", cmd.get_name()},
          {"config", resolved_config(cmd)}, {"seed", seed ? json(*seed) : json(nullptr)}};
}

std::string csv_header(const json& meta) {
  return "# treefx " + std::string(kVersion) + "\n# config: " + meta["config"].dump() +
         "\n# seed: " + meta["seed"].dump() + "\n";
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

void emit(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
  } else {
    write_file(path, content);
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// ---- shared chain options ------------------------------------------------

struct ChainFlags {
  int trees = 200;
  int burn_in = 1000;
  int draws = 1000;
  int thin = 1;
  int max_cuts = kDefaultMaxCuts;
  std::uint64_t seed = 1;

  void add(CLI::App* cmd) {
    cmd->add_option("--trees", trees, "Number of trees")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--burn-in", burn_in, "Burn-in sweeps")->capture_default_str()->check(CLI::NonNegativeNumber);
    cmd->add_option("--draws", draws, "Post-burn-in sweeps")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--thin", thin, "Keep every k-th post-burn-in sweep")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--max-cuts", max_cuts, "Cutpoints per variable")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--seed", seed, "Master seed")->capture_default_str();
  }

  SamplerConfig sampler(std::uint64_t stream) const {
    SamplerConfig c;
    c.num_trees = trees;
    c.burn_in = burn_in;
    c.num_draws = draws;
    c.thinning = thin;
    c.max_cuts = max_cuts;
    c.seed = mix_seed(seed, stream);
    return c;
  }
};

// ---- model file helpers ---------------------------------------------------

const std::vector<std::string>& model_names(const SavedModel& m) {
  return std::visit([](const auto& fit) -> const std::vector<std::string>& { return fit.names; }, m);
}

int model_draws(const SavedModel& m) {
  return std::visit([](const auto& fit) { return fit.num_draws(); }, m);
}

SavedModel read_model(const std::string& path) { return load_model(path); }

struct Table {
  std::vector<std::string> header;
  Eigen::MatrixXd values;

  std::optional<Eigen::Index> find(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<Eigen::Index>(it - header.begin());
  }
};

Table read_table(const std::string& path) {
  auto [header, values] = read_numeric_csv(path);
  return {std::move(header), std::move(values)};
}

// Picks the model's design columns out of a data file by name. A missing
// treatment column is filled with zeros when `z_optional` is set.
Eigen::MatrixXd design_from_table(const Table& t, const std::vector<std::string>& names, int treatment_col,
                                  bool z_optional) {
  Eigen::MatrixXd X(t.values.rows(), static_cast<Eigen::Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto col = t.find(names[j]);
    if (!col) {
      if (static_cast<int>(j) == treatment_col && z_optional) {
        X.col(static_cast<Eigen::Index>(j)).setZero();
        continue;
      }
      std::string hint;
      if (names[j] == "pihat") hint = " (write it with `treefx fit --design-out`)";
      throw UsageError("data has no column '" + names[j] + "' required by the model" + hint);
    }
    X.col(static_cast<Eigen::Index>(j)) = t.values.col(*col);
  }
  return X;
}

Eigen::VectorXi treatment_from_table(const Table& t, const std::string& name) {
  const auto col = t.find(name);
  if (!col) throw UsageError("data has no treatment column '" + name + "'");
  Eigen::VectorXi z(t.values.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double v = t.values(i, *col);
    if (v != 0.0 && v != 1.0) throw UsageError("treatment column '" + name + "' is not 0/1");
    z(i) = static_cast<int>(v);
  }
  return z;
}

int var_index(const std::vector<std::string>& names, const std::string& var) {
  const auto it = std::find(names.begin(), names.end(), var);
  if (it == names.end()) throw UsageError("model has no variable '" + var + "'");
  return static_cast<int>(it - names.begin());
}

// ---- fit ---------------------------------------------------------------

struct FitFlags {
  std::string data;
  std::string response = "y";
  std::string treatment;
  std::string model = "bart";
  std::string prior = "uniform";
  std::string propensity = "none";
  std::string propensity_column = "pihat";
  int ps_trees = 50;
  std::vector<std::string> exclude;
  double k = 2.0;
  int alpha_trees = 50;
  double alpha0 = 0.5;
  double nu0 = 0.25;
  std::string out = "model.json";
  std::string summary;
  std::string design_out;
  ChainFlags chain;
};

Eigen::VectorXd estimate_propensity(const FitFlags& f, Dataset& data, json& notes) {
  if (!data.z) throw UsageError("--propensity " + f.propensity + " needs --treatment");
  if (f.propensity == "column") {
    const auto it = std::find(data.column_names.begin(), data.column_names.end(), f.propensity_column);
    if (it == data.column_names.end()) throw UsageError("no propensity column '" + f.propensity_column + "'");
    const auto j = static_cast<Eigen::Index>(it - data.column_names.begin());
    Eigen::VectorXd pi = data.X.col(j);
    Eigen::MatrixXd rest(data.X.rows(), data.X.cols() - 1);
    rest << data.X.leftCols(j), data.X.rightCols(data.X.cols() - j - 1);
    data.X = std::move(rest);
    data.column_names.erase(it);
    return pi;
  }
  const Design base = make_design(data, std::nullopt, false);
  if (f.propensity == "probit") {
    BartOptions opt;
    opt.sampler = f.chain.sampler(2);
    opt.sampler.num_trees = f.ps_trees;
    opt.split_prior = f.prior == "dirichlet" ? SplitPriorKind::Dirichlet : SplitPriorKind::Uniform;
    return fit_probit(base, *data.z, opt).pihat;
  }
  if (f.propensity == "glm") {
    GlmResult g = fit_glm_propensity(base.X, *data.z);
    if (!g.warning.empty()) {
      std::cerr << "warning: " << g.warning << "\n";
      notes["glm_warning"] = g.warning;
    }
    return g.probability;
  }
  Rng rng(mix_seed(f.chain.seed, 3));
  Eigen::VectorXd pi(data.X.rows());
  for (Eigen::Index i = 0; i < pi.size(); ++i) pi(i) = rng.uniform();
  return pi;
}

int run_fit(const FitFlags& f, const CLI::App& cmd) {
  std::optional<std::string> treatment;
  if (!f.treatment.empty()) treatment = f.treatment;
  if (f.model == "bcf" && !treatment) throw UsageError("--model bcf needs --treatment");
  if (f.model == "probit" && treatment) throw UsageError("--model probit takes no --treatment");
  Dataset data = load_csv(f.data, f.response, treatment);
  for (const std::string& name : f.exclude) {
    const auto it = std::find(data.column_names.begin(), data.column_names.end(), name);
    if (it == data.column_names.end()) throw UsageError("cannot exclude unknown column '" + name + "'");
    const auto j = static_cast<Eigen::Index>(it - data.column_names.begin());
    Eigen::MatrixXd rest(data.X.rows(), data.X.cols() - 1);
    rest << data.X.leftCols(j), data.X.rightCols(data.X.cols() - j - 1);
    data.X = std::move(rest);
    data.column_names.erase(it);
  }

  json meta = metadata(cmd, f.chain.seed);
  json notes = json::object();
  std::optional<Eigen::VectorXd> pihat;
  if (f.propensity != "none") pihat = estimate_propensity(f, data, notes);

  const SplitPriorKind prior = f.prior == "dirichlet" ? SplitPriorKind::Dirichlet : SplitPriorKind::Uniform;
  SavedModel model;
  Design design;
  json summary = {{"metadata", meta}};
  if (f.model == "bcf") {
    if (prior == SplitPriorKind::Dirichlet) throw UsageError("--prior dirichlet is not available for bcf");
    design = make_design(data, pihat, false);
    BcfOptions opt;
    opt.sampler = f.chain.sampler(4);
    opt.k = f.k;
    opt.alpha = BcfPriorParams::with_defaults(f.alpha0, f.alpha_trees, f.nu0);
    BcfFitResult fit = fit_bcf(design, data.y, *data.z, opt);
    const double nu = std::accumulate(fit.nu_alpha.begin(), fit.nu_alpha.end(), 0.0) / fit.num_draws();
    summary["nu_alpha_mean"] = nu;
    summary["sigma_mean"] = std::accumulate(fit.sigma.begin(), fit.sigma.end(), 0.0) / fit.num_draws();
    model = std::move(fit);
  } else {
    design = make_design(data, pihat, f.model == "bart" && treatment.has_value());
    BartOptions opt;
    opt.sampler = f.chain.sampler(4);
    opt.split_prior = prior;
    opt.k = f.k;
    FitResult fit;
    if (f.model == "probit") {
      Eigen::VectorXi labels(data.y.size());
      for (Eigen::Index i = 0; i < labels.size(); ++i) {
        if (data.y(i) != 0.0 && data.y(i) != 1.0) throw UsageError("--model probit needs a 0/1 response");
        labels(i) = static_cast<int>(data.y(i));
      }
      fit = fit_probit(design, labels, opt).fit;
    } else {
      fit = fit_bart(design, data.y, opt);
      summary["sigma_mean"] = std::accumulate(fit.sigma.begin(), fit.sigma.end(), 0.0) / fit.num_draws();
    }
    if (prior == SplitPriorKind::Dirichlet) {
      const SimplexSummary s = dirichlet_summary(fit.s);
      json sm = json::object();
      for (int j = 0; j < fit.num_vars(); ++j) sm[fit.names[static_cast<std::size_t>(j)]] = s.mean(j);
      summary["s_mean"] = sm;
    }
    const auto accept = [&fit](int m) {
      return fit.moves.proposed[m] > 0 ? static_cast<double>(fit.moves.accepted[m]) / fit.moves.proposed[m] : 0.0;
    };
    summary["acceptance"] = {{"grow", accept(0)}, {"prune", accept(1)}, {"change", accept(2)}};
    model = std::move(fit);
  }

  const Eigen::MatrixXi& usage = std::visit([](const auto& fit) -> const Eigen::MatrixXi& { return fit.usage; }, model);
  const Eigen::VectorXd pip = compute_pip(usage);
  json pj = json::object();
  for (std::size_t j = 0; j < design.names.size(); ++j) pj[design.names[j]] = pip(static_cast<Eigen::Index>(j));
  summary["model"] = f.model;
  summary["pip"] = pj;
  summary["draws"] = model_draws(model);
  summary["rows"] = data.rows();
  if (!notes.empty()) summary["notes"] = notes;

  save_model(f.out, model, meta.dump());
  if (!f.design_out.empty()) {
    std::ostringstream out;
    out << csv_header(meta);
    for (const std::string& n : design.names) out << n << ',';
    out << f.response;
    if (f.model == "bcf") out << ',' << f.treatment;
    out << '\n';
    for (Eigen::Index i = 0; i < design.X.rows(); ++i) {
      for (Eigen::Index j = 0; j < design.X.cols(); ++j) out << fmt(design.X(i, j)) << ',';
      out << fmt(data.y(i));
      if (f.model == "bcf") out << ',' << (*data.z)(i);
      out << '\n';
    }
    write_file(f.design_out, out.str());
  }
  emit(f.summary, summary.dump(2) + "\n");
  return 0;
}

// ---- predict -----------------------------------------------------------

struct PredictFlags {
  std::string model;
  std::string data;
  std::string treatment = "z";
  double level = 0.95;
  std::string out;
};

int run_predict(const PredictFlags& f, const CLI::App& cmd) {
  const SavedModel model = read_model(f.model);
  const Table t = read_table(f.data);
  const json meta = metadata(cmd, std::nullopt);
  std::ostringstream out;
  out << csv_header(meta);
  if (const auto* fit = std::get_if<FitResult>(&model)) {
    const Eigen::MatrixXd X = design_from_table(t, fit->names, fit->treatment_col, false);
    if (fit->kind == ModelKind::Probit) {
      const Eigen::VectorXd p = fit->predict_probability(X);
      out << "row,probability\n";
      for (Eigen::Index i = 0; i < p.size(); ++i) out << i << ',' << fmt(p(i)) << '\n';
    } else {
      const Eigen::MatrixXd draws = fit->predict_draws(X);
      out << "row,mean,lo,hi\n";
      for (Eigen::Index i = 0; i < draws.cols(); ++i) {
        const auto [lo, hi] = credible_interval(draws.col(i), f.level);
        out << i << ',' << fmt(draws.col(i).mean()) << ',' << fmt(lo) << ',' << fmt(hi) << '\n';
      }
    }
  } else {
    const auto& bcf = std::get<BcfFitResult>(model);
    const Eigen::MatrixXd X = design_from_table(t, bcf.names, -1, false);
    const Eigen::VectorXi z = treatment_from_table(t, f.treatment);
    Eigen::MatrixXd draws = bcf.prognostic_draws(X);
    const Eigen::MatrixXd alpha = bcf.effect_draws(X);
    for (Eigen::Index i = 0; i < draws.cols(); ++i) {
      if (z(i) == 1) draws.col(i) += alpha.col(i);
    }
    out << "row,mean,lo,hi\n";
    for (Eigen::Index i = 0; i < draws.cols(); ++i) {
      const auto [lo, hi] = credible_interval(draws.col(i), f.level);
      out << i << ',' << fmt(draws.col(i).mean()) << ',' << fmt(lo) << ',' << fmt(hi) << '\n';
    }
  }
  emit(f.out, out.str());
  return 0;
}

// ---- effects -----------------------------------------------------------

struct EffectsFlags {
  std::string model;
  std::string data;
  double level = 0.95;
  std::string out;
  std::string summary;
};

EffectDraws effect_draws(const SavedModel& model, const Table& t) {
  if (const auto* fit = std::get_if<FitResult>(&model)) {
    if (fit->kind != ModelKind::Regression || fit->treatment_col < 0) {
      throw UsageError("model has no treatment column; fit with --treatment");
    }
    return estimate_ite_bart(*fit, design_from_table(t, fit->names, fit->treatment_col, true));
  }
  const auto& fit = std::get<BcfFitResult>(model);
  return estimate_ite_bcf(fit, design_from_table(t, fit.names, -1, false));
}

int run_effects(const EffectsFlags& f, const CLI::App& cmd) {
  const SavedModel model = read_model(f.model);
  const Table t = read_table(f.data);
  const EffectDraws e = effect_draws(model, t);
  const json meta = metadata(cmd, std::nullopt);

  std::ostringstream out;
  out << csv_header(meta) << "individual,ite_mean,ite_lo,ite_hi\n";
  for (Eigen::Index i = 0; i < e.num_individuals(); ++i) {
    const auto [lo, hi] = credible_interval(e.ite.col(i), f.level);
    out << i << ',' << fmt(e.ite.col(i).mean()) << ',' << fmt(lo) << ',' << fmt(hi) << '\n';
  }
  emit(f.out, out.str());

  const Eigen::VectorXd c = cate(e);
  const auto [lo, hi] = credible_interval(c, f.level);
  const json summary = {{"metadata", meta},   {"cate_mean", c.mean()}, {"cate_lo", lo},
                        {"cate_hi", hi},      {"level", f.level},      {"draws", e.num_draws()},
                        {"individuals", e.num_individuals()}};
  if (!f.summary.empty()) write_file(f.summary, summary.dump(2) + "\n");
  return 0;
}

// ---- ice / pdp ---------------------------------------------------------

struct CurveFlags {
  std::string model;
  std::string data;
  std::string var;
  bool effect = false;
  int max_grid = 0;
  int max_individuals = 0;
  double bands = 0.0;
  std::uint64_t seed = 1;
  std::string out;
};

struct CurveInputs {
  Eigen::MatrixXd X;
  int var = 0;
  BatchPredictor predict;
  DrawPredictor draws;
};

CurveInputs curve_inputs(const SavedModel& model, const Table& t, const CurveFlags& f) {
  CurveInputs in;
  if (const auto* fit = std::get_if<FitResult>(&model)) {
    in.var = var_index(fit->names, f.var);
    if (f.effect) {
      if (fit->kind != ModelKind::Regression || fit->treatment_col < 0) {
        throw UsageError("--effect needs a model fit with a treatment column");
      }
      if (in.var == fit->treatment_col) throw UsageError("--var cannot be the treatment column with --effect");
      in.X = design_from_table(t, fit->names, fit->treatment_col, true);
      in.predict = ite_predictor(*fit);
      in.draws = ite_draw_predictor(*fit);
    } else {
      in.X = design_from_table(t, fit->names, fit->treatment_col, false);
      in.predict = mean_predictor(*fit);
      const FitResult* p = fit;
      in.draws = [p](const Eigen::MatrixXd& X) { return p->predict_draws(X); };
    }
    return in;
  }
  const auto& fit = std::get<BcfFitResult>(model);
  if (!f.effect) throw UsageError("BCF models only support treatment-effect curves; pass --effect");
  in.var = var_index(fit.names, f.var);
  in.X = design_from_table(t, fit.names, -1, false);
  in.predict = ite_predictor(fit);
  in.draws = ite_draw_predictor(fit);
  return in;
}

CurveSet build_curves(const SavedModel& model, const Table& t, const CurveFlags& f) {
  const CurveInputs in = curve_inputs(model, t, f);
  CurveSet curves = ice_curves(in.predict, in.X, in.var);
  const int n = static_cast<int>(curves.ice.rows());
  const int g = static_cast<int>(curves.grid.size());
  Rng rng(f.seed);
  curves = subsample_grid(curves, f.max_grid > 0 ? f.max_grid : g, f.max_individuals > 0 ? f.max_individuals : n, rng);
  if (f.bands > 0.0) add_pdp_bands(curves, in.draws, in.X, f.bands);
  return curves;
}

void add_curve_flags(CLI::App* cmd, CurveFlags& f, bool individuals) {
  cmd->add_option("--model", f.model, "Model file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--data", f.data, "Data CSV with the model's columns")->required()->check(CLI::ExistingFile);
  cmd->add_option("--var", f.var, "Variable to vary")->required();
  cmd->add_flag("--effect", f.effect, "Curves of the individual treatment effect");
  cmd->add_option("--max-grid", f.max_grid, "Keep at most this many grid points (0 = all)")->capture_default_str();
  if (individuals) {
    cmd->add_option("--max-individuals", f.max_individuals, "Display at most this many curves (0 = all)")
        ->capture_default_str();
  }
  cmd->add_option("--bands", f.bands, "Credible level for PDP bands (0 = none)")->capture_default_str()->check(
      CLI::Range(0.0, 0.999999));
  cmd->add_option("--seed", f.seed, "Seed for the displayed-curve subsample")->capture_default_str();
  cmd->add_option("--out", f.out, "Output CSV (default stdout)");
}

int run_ice(const CurveFlags& f, const CLI::App& cmd) {
  const SavedModel model = read_model(f.model);
  const CurveSet c = build_curves(model, read_table(f.data), f);
  std::ostringstream out;
  out << csv_header(metadata(cmd, f.seed)) << "grid,individual,value\n";
  for (std::size_t r = 0; r < c.rows.size(); ++r) {
    for (Eigen::Index g = 0; g < c.grid.size(); ++g) {
      out << fmt(c.grid(g)) << ',' << c.rows[r] << ',' << fmt(c.ice(static_cast<Eigen::Index>(r), g)) << '\n';
    }
  }
  for (Eigen::Index g = 0; g < c.grid.size(); ++g) out << fmt(c.grid(g)) << ",pdp," << fmt(c.pdp(g)) << '\n';
  if (c.pdp_lo) {
    for (Eigen::Index g = 0; g < c.grid.size(); ++g) out << fmt(c.grid(g)) << ",pdp_lo," << fmt((*c.pdp_lo)(g)) << '\n';
    for (Eigen::Index g = 0; g < c.grid.size(); ++g) out << fmt(c.grid(g)) << ",pdp_hi," << fmt((*c.pdp_hi)(g)) << '\n';
  }
  emit(f.out, out.str());
  return 0;
}

int run_pdp(const CurveFlags& f, const CLI::App& cmd) {
  const SavedModel model = read_model(f.model);
  const CurveSet c = build_curves(model, read_table(f.data), f);
  std::ostringstream out;
  out << csv_header(metadata(cmd, f.seed)) << "grid,pdp";
  if (c.pdp_lo) out << ",lo,hi";
  out << '\n';
  for (Eigen::Index g = 0; g < c.grid.size(); ++g) {
    out << fmt(c.grid(g)) << ',' << fmt(c.pdp(g));
    if (c.pdp_lo) out << ',' << fmt((*c.pdp_lo)(g)) << ',' << fmt((*c.pdp_hi)(g));
    out << '\n';
  }
  emit(f.out, out.str());
  return 0;
}

// ---- select ------------------------------------------------------------

struct SelectFlags {
  std::string model;
  std::vector<std::string> relevant;
  double level = 0.95;
  std::string out;
};

int run_select(const SelectFlags& f, const CLI::App& cmd) {
  const SavedModel model = read_model(f.model);
  const std::vector<std::string>& names = model_names(model);
  std::vector<bool> relevant;
  if (!f.relevant.empty()) {
    relevant.assign(names.size(), false);
    for (const std::string& r : f.relevant) relevant[static_cast<std::size_t>(var_index(names, r))] = true;
  }
  SelectionReport rep;
  if (const auto* fit = std::get_if<FitResult>(&model)) {
    rep = make_selection_report(names, fit->usage, fit->s, fit->split_prior == SplitPriorKind::Dirichlet, relevant,
                                fit->propensity_col);
  } else {
    const auto& bcf = std::get<BcfFitResult>(model);
    rep = make_selection_report(names, bcf.usage, {}, false, relevant, bcf.propensity_col);
  }
  json vars = json::array();
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    json v = {{"name", names[j]}, {"pip", rep.pip(jj)}, {"selected", static_cast<bool>(rep.selected[j])}};
    if (rep.s_summary.mean.size() > 0) {
      v["s_mean"] = rep.s_summary.mean(jj);
      v["s_lo"] = rep.s_summary.lo(jj);
      v["s_hi"] = rep.s_summary.hi(jj);
    }
    vars.push_back(v);
  }
  json doc = {{"metadata", metadata(cmd, std::nullopt)}, {"variables", vars}, {"threshold", 0.5}};
  if (rep.propensity_col >= 0) doc["propensity_selected"] = rep.propensity_selected;
  if (rep.has_truth) {
    doc["metrics"] = {{"precision", rep.metrics.precision},
                      {"recall", rep.metrics.recall},
                      {"f1", rep.metrics.f1},
                      {"precision_undefined", rep.metrics.precision_undefined},
                      {"recall_undefined", rep.metrics.recall_undefined}};
  }
  emit(f.out, doc.dump(2) + "\n");
  return 0;
}

// ---- simulate ------------------------------------------------------------

struct SimulateFlags {
  std::string dgp = "hahn";
  int n = 500;
  int p = 50;
  std::uint64_t seed = 0;
  std::string out;
  std::string truth_out;
};

int run_simulate(const SimulateFlags& f, const CLI::App& cmd) {
  Rng rng(mix_seed(f.seed, 0, 1));
  const DgpSample s = generate(parse_dgp(f.dgp), f.n, f.p, rng);
  const json meta = metadata(cmd, f.seed);
  std::ostringstream out;
  out << csv_header(meta);
  for (Eigen::Index j = 0; j < s.X.cols(); ++j) out << 'x' << j + 1 << ',';
  out << "z,y\n";
  for (Eigen::Index i = 0; i < s.X.rows(); ++i) {
    for (Eigen::Index j = 0; j < s.X.cols(); ++j) out << fmt(s.X(i, j)) << ',';
    out << s.z(i) << ',' << fmt(s.y(i)) << '\n';
  }
  emit(f.out, out.str());
  if (!f.truth_out.empty()) {
    std::ostringstream truth;
    truth << csv_header(meta) << "# sigma: " << fmt(s.sigma_used) << "\n# cate: " << fmt(s.cate_true) << '\n';
    truth << "pi_true,mu_true,alpha_true\n";
    for (Eigen::Index i = 0; i < s.X.rows(); ++i) {
      truth << fmt(s.pi_true(i)) << ',' << fmt(s.mu_true(i)) << ',' << fmt(s.alpha_true(i)) << '\n';
    }
    write_file(f.truth_out, truth.str());
  }
  return 0;
}

// ---- benchmark -----------------------------------------------------------

struct BenchmarkFlags {
  std::string dgp = "hahn";
  std::string models;
  int reps = 10;
  int n = 0;
  int p = 0;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool full_scale = false;
  ChainFlags chain;
  std::string out_csv = "benchmark.csv";
  std::string out_json = "benchmark.json";
};

int run_benchmark_cmd(const BenchmarkFlags& f, CLI::App& cmd) {
  const DgpKind dgp = parse_dgp(f.dgp);
  BenchmarkSpec spec = f.full_scale ? BenchmarkSpec::full_scale(dgp) : BenchmarkSpec::desk(dgp);
  auto given = [&cmd](const std::string& flag) { return cmd.get_option(flag)->count() > 0; };
  if (given("--reps")) spec.replications = f.reps;
  if (given("--n")) spec.n = f.n;
  if (given("--p")) spec.p = f.p;
  if (given("--trees")) spec.sampler.num_trees = f.chain.trees;
  if (given("--burn-in")) spec.sampler.burn_in = spec.propensity_sampler.burn_in = f.chain.burn_in;
  if (given("--draws")) spec.sampler.num_draws = spec.propensity_sampler.num_draws = f.chain.draws;
  if (given("--thin")) spec.sampler.thinning = spec.propensity_sampler.thinning = f.chain.thin;
  if (given("--max-cuts")) spec.sampler.max_cuts = spec.propensity_sampler.max_cuts = f.chain.max_cuts;
  if (!f.models.empty()) {
    spec.models.clear();
    for (const std::string& label : split_list(f.models)) spec.models.push_back(parse_model(label));
  }
  spec.seed = f.seed;
  spec.jobs = f.jobs;
  if (dgp == DgpKind::Hill && given("--p") && f.p != 6) throw UsageError("the hill process has 6 covariates");

  const BenchmarkReport report = run_benchmark(spec);
  write_file(f.out_csv, report_csv(report));
  write_file(f.out_json, report_json(report));
  int failed = 0;
  for (const CellResult& c : report.cells) failed += c.ok ? 0 : 1;
  std::cerr << report.cells.size() << " cells, " << failed << " failed\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian tree ensembles for treatment effects and variable selection", "treefx"};
  app.set_version_flag("--version", std::string(kVersion));
  app.set_config("--config", "", "TOML/INI config file; command-line flags take precedence");
  app.require_subcommand(1);

  FitFlags fit;
  CLI::App* fit_cmd = app.add_subcommand("fit", "Fit a model and write a model file");
  fit_cmd->add_option("--data", fit.data, "Input CSV")->required();
  fit_cmd->add_option("--response", fit.response, "Response column")->capture_default_str();
  fit_cmd->add_option("--treatment", fit.treatment, "Binary treatment column");
  fit_cmd->add_option("--model", fit.model, "bart, bcf or probit")
      ->capture_default_str()
      ->check(CLI::IsMember({"bart", "bcf", "probit"}));
  fit_cmd->add_option("--prior", fit.prior, "Split-variable prior: uniform or dirichlet")
      ->capture_default_str()
      ->check(CLI::IsMember({"uniform", "dirichlet"}));
  fit_cmd->add_option("--propensity", fit.propensity, "none, column, probit, glm or random")
      ->capture_default_str()
      ->check(CLI::IsMember({"none", "column", "probit", "glm", "random"}));
  fit_cmd->add_option("--propensity-column", fit.propensity_column, "Column holding a known propensity")
      ->capture_default_str();
  fit_cmd->add_option("--ps-trees", fit.ps_trees, "Trees in the probit propensity model")->capture_default_str();
  fit_cmd->add_option("--exclude", fit.exclude, "Columns to leave out of the covariates")->delimiter(',');
  fit_cmd->add_option("--k", fit.k, "Leaf prior scale")->capture_default_str()->check(CLI::PositiveNumber);
  fit_cmd->add_option("--alpha-trees", fit.alpha_trees, "BCF effect-forest size")->capture_default_str();
  fit_cmd->add_option("--alpha0", fit.alpha0, "BCF prior probability of a constant effect")->capture_default_str();
  fit_cmd->add_option("--nu0", fit.nu0, "BCF effect scale")->capture_default_str();
  fit_cmd->add_option("--out", fit.out, "Model file")->capture_default_str();
  fit_cmd->add_option("--summary", fit.summary, "Summary JSON (default stdout)");
  fit_cmd->add_option("--design-out", fit.design_out, "Write the design matrix, including pihat, as CSV");
  fit.chain.add(fit_cmd);

  PredictFlags predict;
  CLI::App* predict_cmd = app.add_subcommand("predict", "Posterior predictions from a model file");
  predict_cmd->add_option("--model", predict.model, "Model file")->required();
  predict_cmd->add_option("--data", predict.data, "Data CSV with the model's columns")->required();
  predict_cmd->add_option("--treatment", predict.treatment, "Treatment column (BCF models)")->capture_default_str();
  predict_cmd->add_option("--level", predict.level, "Credible level")->capture_default_str()->check(
      CLI::Range(0.0, 0.999999));
  predict_cmd->add_option("--out", predict.out, "Output CSV (default stdout)");

  EffectsFlags effects;
  CLI::App* effects_cmd = app.add_subcommand("effects", "Individual and average treatment effects");
  effects_cmd->add_option("--model", effects.model, "Model file")->required();
  effects_cmd->add_option("--data", effects.data, "Data CSV with the model's columns")->required();
  effects_cmd->add_option("--level", effects.level, "Credible level")->capture_default_str()->check(
      CLI::Range(0.0, 0.999999));
  effects_cmd->add_option("--out", effects.out, "Per-individual CSV (default stdout)");
  effects_cmd->add_option("--summary", effects.summary, "CATE summary JSON");

  CurveFlags ice;
  CLI::App* ice_cmd = app.add_subcommand("ice", "Individual conditional expectation curves");
  add_curve_flags(ice_cmd, ice, true);
  CurveFlags pdp;
  CLI::App* pdp_cmd = app.add_subcommand("pdp", "Partial dependence curve");
  add_curve_flags(pdp_cmd, pdp, false);

  SelectFlags select;
  CLI::App* select_cmd = app.add_subcommand("select", "Posterior inclusion probabilities and selection");
  select_cmd->add_option("--model", select.model, "Model file")->required();
  select_cmd->add_option("--relevant", select.relevant, "Truly relevant variables, for scoring")->delimiter(',');
  select_cmd->add_option("--out", select.out, "Output JSON (default stdout)");

  SimulateFlags simulate;
  CLI::App* simulate_cmd = app.add_subcommand("simulate", "Draw a data set from a simulation process");
  simulate_cmd->add_option("--dgp", simulate.dgp, "hahn, friedman or hill")->capture_default_str();
  simulate_cmd->add_option("--n", simulate.n, "Rows")->capture_default_str()->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--p", simulate.p, "Covariates (hill: always 6)")->capture_default_str();
  simulate_cmd->add_option("--seed", simulate.seed, "Master seed")->required();
  simulate_cmd->add_option("--out", simulate.out, "Output CSV (default stdout)");
  simulate_cmd->add_option("--truth-out", simulate.truth_out, "CSV of true propensities and effects");

  BenchmarkFlags bench;
  bench.jobs = default_jobs();
  CLI::App* bench_cmd = app.add_subcommand("benchmark", "Replicated simulation study");
  bench_cmd->add_option("--dgp", bench.dgp, "hahn, friedman or hill")->capture_default_str();
  bench_cmd->add_option("--models", bench.models, "Comma-separated labels such as Oracle-BART,PS-DART (default all)");
  bench_cmd->add_option("--reps", bench.reps, "Replications")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--n", bench.n, "Rows per replication")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--p", bench.p, "Covariates")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--trees", bench.chain.trees, "Trees in the outcome models")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--burn-in", bench.chain.burn_in, "Burn-in sweeps")->check(CLI::NonNegativeNumber);
  bench_cmd->add_option("--draws", bench.chain.draws, "Post-burn-in sweeps")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--thin", bench.chain.thin, "Thinning")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--max-cuts", bench.chain.max_cuts, "Cutpoints per variable")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--seed", bench.seed, "Master seed")->required();
  bench_cmd->add_option("--jobs", bench.jobs, "Worker threads (default $TREEFX_THREADS or 1)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  bench_cmd->add_flag("--full-scale", bench.full_scale, "Full replication protocol instead of desk scale");
  bench_cmd->add_option("--out-csv", bench.out_csv, "Per-cell CSV")->capture_default_str();
  bench_cmd->add_option("--out-json", bench.out_json, "Aggregate JSON")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*fit_cmd) return run_fit(fit, *fit_cmd);
    if (*predict_cmd) return run_predict(predict, *predict_cmd);
    if (*effects_cmd) return run_effects(effects, *effects_cmd);
    if (*ice_cmd) return run_ice(ice, *ice_cmd);
    if (*pdp_cmd) return run_pdp(pdp, *pdp_cmd);
    if (*select_cmd) return run_select(select, *select_cmd);
    if (*simulate_cmd) return run_simulate(simulate, *simulate_cmd);
    if (*bench_cmd) return run_benchmark_cmd(bench, *bench_cmd);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
