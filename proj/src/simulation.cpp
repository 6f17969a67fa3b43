#include "treefx/simulation.hpp"

#include "treefx/effects.hpp"
#include "treefx/selection.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace treefx {

namespace {

using nlohmann::json;

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Fills mu, pi, z, alpha, theta, sigma, y and cate from X and the
// covariate surface already stored in `s.prognostic`.
void finish_sample(DgpSample& s, Rng& rng, double (*alpha_of)(double), std::optional<double> noise_sd) {
  const Eigen::Index n = s.X.rows();
  s.mu_true.resize(n);
  s.pi_true.resize(n);
  s.alpha_true.resize(n);
  s.theta_true.resize(n);
  s.z.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    s.mu_true(i) = mu_rule(s.X(i, 0), s.X(i, 1));
    s.pi_true(i) = normal_cdf(s.mu_true(i));
    s.alpha_true(i) = alpha_of(s.X(i, 2));
    s.theta_true(i) = s.mu_true(i) + s.alpha_true(i) * s.pi_true(i);
  }
  for (Eigen::Index i = 0; i < n; ++i) s.z(i) = rng.uniform() < s.pi_true(i) ? 1 : 0;
  s.sigma_used = noise_sd ? *noise_sd : sigma_rule(s.theta_true);
  s.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    s.y(i) = s.prognostic(i) + s.mu_true(i) + s.z(i) * s.alpha_true(i) + rng.normal(0.0, s.sigma_used);
  }
  s.cate_true = s.alpha_true.mean();
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

json sampler_json(const SamplerConfig& c) {
  return {{"num_trees", c.num_trees}, {"burn_in", c.burn_in},   {"num_draws", c.num_draws},
          {"thinning", c.thinning},   {"max_cuts", c.max_cuts}, {"kept_draws", c.kept_draws()},
          {"moves", {c.moves.grow, c.moves.prune, c.moves.change}}};
}

json spec_json_value(const BenchmarkSpec& spec) {
  json models = json::array();
  for (const ModelConfig& m : spec.models) models.push_back(m.label());
  return {{"dgp", dgp_name(spec.dgp)},
          {"n", spec.n},
          {"p", spec.p},
          {"replications", spec.replications},
          {"models", models},
          {"sampler", sampler_json(spec.sampler)},
          {"propensity_sampler", sampler_json(spec.propensity_sampler)},
          {"bcf", {{"alpha_trees", spec.bcf_alpha_trees}, {"alpha0", spec.bcf_alpha0}, {"nu0", spec.bcf_nu0}}},
          {"seed", spec.seed},
          {"conventions",
           {{"cate_rmse", "per replication |posterior mean CATE - true sample CATE|, averaged over replications"},
            {"relevant", "covariates driving outcome or assignment, plus propensity and treatment columns when present"},
            {"hill_beta", "resampled every replication"},
            {"pip_threshold", "selected iff PIP > 0.5"}}}};
}

// Propensity columns shared by the cells of one replication.
struct ReplicationInputs {
  DgpSample sample;
  std::optional<Eigen::VectorXd> probit_bart;
  std::optional<Eigen::VectorXd> probit_dart;
  std::optional<Eigen::VectorXd> glm;
  std::optional<Eigen::VectorXd> random;
  std::string probit_bart_error;
  std::string probit_dart_error;
  std::string glm_error;
};

template <class Fn>
void parallel_for(int count, int jobs, Fn&& fn) {
  jobs = std::max(1, std::min(jobs, count));
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> workers;
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (int i = next++; i < count; i = next++) fn(i);
    });
  }
  for (auto& t : workers) t.join();
}

}  // namespace

Dataset DgpSample::dataset() const {
  Dataset d;
  d.y = y;
  d.X = X;
  d.z = z;
  for (Eigen::Index j = 0; j < X.cols(); ++j) d.column_names.push_back("x" + std::to_string(j + 1));
  return d;
}

double mu_rule(double x1, double x2) { return x1 < x2 ? 1.0 : -1.0; }

double hahn_alpha(double x3) {
  return 0.5 * (x3 > -0.75 ? 1.0 : 0.0) + 0.25 * (x3 > 0.0 ? 1.0 : 0.0) + 0.25 * (x3 > 0.75 ? 1.0 : 0.0);
}

double friedman_alpha(double x3) {
  return 0.5 * (x3 > 0.25 ? 1.0 : 0.0) + 0.25 * (x3 > 0.5 ? 1.0 : 0.0) + 0.25 * (x3 > 0.75 ? 1.0 : 0.0);
}

double friedman_surface(double x1, double x2, double x3, double x4, double x5) {
  return 10.0 * std::sin(std::numbers::pi * x1 * x2) + 20.0 * (x3 - 0.5) * (x3 - 0.5) + 10.0 * x4 + 5.0 * x5;
}

double sigma_rule(const Eigen::VectorXd& theta) {
  if (theta.size() == 0) throw std::invalid_argument("sigma_rule: empty theta");
  return (theta.maxCoeff() - theta.minCoeff()) / 8.0;
}

DgpSample gen_hahn(int n, int p, Rng& rng) {
  if (p < 3) throw std::invalid_argument("gen_hahn needs p >= 3");
  if (n < 2) throw std::invalid_argument("gen_hahn needs n >= 2");
  DgpSample s;
  s.kind = DgpKind::Hahn;
  s.X.resize(n, p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) s.X(i, j) = rng.normal();
  }
  s.prognostic = 0.1 * s.X.col(0) + 0.1 * s.X.col(1);
  s.relevant = {0, 1, 2};
  finish_sample(s, rng, hahn_alpha, std::nullopt);
  return s;
}

DgpSample gen_friedman(int n, int p, Rng& rng) {
  if (p < 5) throw std::invalid_argument("gen_friedman needs p >= 5");
  if (n < 2) throw std::invalid_argument("gen_friedman needs n >= 2");
  DgpSample s;
  s.kind = DgpKind::Friedman;
  s.X.resize(n, p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) s.X(i, j) = rng.uniform();
  }
  s.prognostic.resize(n);
  for (int i = 0; i < n; ++i) {
    s.prognostic(i) = friedman_surface(s.X(i, 0), s.X(i, 1), s.X(i, 2), s.X(i, 3), s.X(i, 4));
  }
  s.relevant = {0, 1, 2, 3, 4};
  finish_sample(s, rng, friedman_alpha, std::nullopt);
  return s;
}

DgpSample gen_hill_synthetic(int n, Rng& rng) {
  if (n < 2) throw std::invalid_argument("gen_hill_synthetic needs n >= 2");
  constexpr int p = 6;
  static constexpr double kBetaProb[] = {0.05, 0.1, 0.15, 0.2, 0.5};
  DgpSample s;
  s.kind = DgpKind::Hill;
  s.beta.resize(p);
  for (int l = 0; l < p; ++l) s.beta(l) = static_cast<double>(rng.categorical(kBetaProb));
  s.X.resize(n, p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) s.X(i, j) = rng.normal();
  }
  s.prognostic = s.X * s.beta;
  for (int l = 0; l < p; ++l) {
    if (l < 3 || s.beta(l) != 0.0) s.relevant.push_back(l);
  }
  finish_sample(s, rng, hahn_alpha, 0.5);
  return s;
}

DgpSample generate(DgpKind kind, int n, int p, Rng& rng) {
  switch (kind) {
    case DgpKind::Hahn:
      return gen_hahn(n, p, rng);
    case DgpKind::Friedman:
      return gen_friedman(n, p, rng);
    case DgpKind::Hill:
      return gen_hill_synthetic(n, rng);
  }
  throw std::invalid_argument("unknown data-generating process");
}

const char* dgp_name(DgpKind kind) {
  switch (kind) {
    case DgpKind::Hahn:
      return "hahn";
    case DgpKind::Friedman:
      return "friedman";
    case DgpKind::Hill:
      return "hill";
  }
  return "?";
}

DgpKind parse_dgp(const std::string& name) {
  const std::string s = lower(name);
  if (s == "hahn") return DgpKind::Hahn;
  if (s == "friedman") return DgpKind::Friedman;
  if (s == "hill") return DgpKind::Hill;
  throw std::invalid_argument("unknown dgp '" + name + "' (expected hahn, friedman or hill)");
}

const char* propensity_name(PropensityMode mode) {
  switch (mode) {
    case PropensityMode::Vanilla:
      return "Vanilla";
    case PropensityMode::Oracle:
      return "Oracle";
    case PropensityMode::Probit:
      return "PS";
    case PropensityMode::Glm:
      return "GLM";
    case PropensityMode::Random:
      return "Rand";
  }
  return "?";
}

const char* family_name(ModelFamily family) {
  switch (family) {
    case ModelFamily::Bart:
      return "BART";
    case ModelFamily::Dart:
      return "DART";
    case ModelFamily::Bcf:
      return "BCF";
  }
  return "?";
}

std::string ModelConfig::label() const {
  return std::string(propensity_name(propensity)) + "-" + family_name(family);
}

ModelConfig parse_model(const std::string& label) {
  const auto dash = label.find('-');
  if (dash == std::string::npos) throw std::invalid_argument("model label '" + label + "' must look like Oracle-BART");
  const std::string ps = lower(label.substr(0, dash));
  const std::string fam = lower(label.substr(dash + 1));
  ModelConfig m;
  if (ps == "vanilla") {
    m.propensity = PropensityMode::Vanilla;
  } else if (ps == "oracle") {
    m.propensity = PropensityMode::Oracle;
  } else if (ps == "ps" || ps == "probit") {
    m.propensity = PropensityMode::Probit;
  } else if (ps == "glm") {
    m.propensity = PropensityMode::Glm;
  } else if (ps == "rand" || ps == "random") {
    m.propensity = PropensityMode::Random;
  } else {
    throw std::invalid_argument("unknown propensity configuration in '" + label + "'");
  }
  if (fam == "bart") {
    m.family = ModelFamily::Bart;
  } else if (fam == "dart") {
    m.family = ModelFamily::Dart;
  } else if (fam == "bcf") {
    m.family = ModelFamily::Bcf;
  } else {
    throw std::invalid_argument("unknown model family in '" + label + "'");
  }
  return m;
}

std::vector<ModelConfig> all_models() {
  std::vector<ModelConfig> out;
  for (ModelFamily f : {ModelFamily::Bart, ModelFamily::Dart, ModelFamily::Bcf}) {
    for (PropensityMode p : {PropensityMode::Vanilla, PropensityMode::Oracle, PropensityMode::Probit,
                             PropensityMode::Glm, PropensityMode::Random}) {
      out.push_back({p, f});
    }
  }
  return out;
}

BenchmarkSpec BenchmarkSpec::desk(DgpKind dgp) {
  BenchmarkSpec spec;
  spec.dgp = dgp;
  spec.n = 500;
  spec.p = dgp == DgpKind::Hill ? 6 : 50;
  spec.replications = 10;
  spec.sampler.num_trees = 200;
  spec.sampler.burn_in = 1000;
  spec.sampler.num_draws = 1000;
  spec.sampler.thinning = 10;
  spec.propensity_sampler = spec.sampler;
  spec.propensity_sampler.num_trees = 50;
  return spec;
}

BenchmarkSpec BenchmarkSpec::full_scale(DgpKind dgp) {
  BenchmarkSpec spec = desk(dgp);
  if (dgp == DgpKind::Hill) {
    spec.n = 985;
    spec.replications = 1000;
    spec.sampler.burn_in = 1000;
    spec.sampler.num_draws = 2000;
    spec.sampler.thinning = 1;
  } else {
    spec.n = 1000;
    spec.p = 98;
    spec.replications = 100;
    spec.sampler = SamplerConfig::sparse_preset();
  }
  spec.propensity_sampler = spec.sampler;
  spec.propensity_sampler.num_trees = 50;
  return spec;
}

std::vector<bool> relevant_columns(const DgpSample& sample, const Design& design) {
  std::vector<bool> out(static_cast<std::size_t>(design.cols()), false);
  for (int c : sample.relevant) {
    if (c < design.cols()) out[static_cast<std::size_t>(c)] = true;
  }
  if (design.propensity_col >= 0) out[static_cast<std::size_t>(design.propensity_col)] = true;
  if (design.treatment_col >= 0) out[static_cast<std::size_t>(design.treatment_col)] = true;
  return out;
}

MetricSummary summarize(const std::vector<double>& values) {
  MetricSummary s;
  s.count = static_cast<int>(values.size());
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / s.count;
  if (s.count > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / (s.count - 1));
  }
  return s;
}

BenchmarkReport run_benchmark(const BenchmarkSpec& spec) {
  if (spec.replications < 1) throw std::invalid_argument("need at least one replication");
  if (spec.models.empty()) throw std::invalid_argument("no models requested");
  spec.sampler.validate();
  spec.propensity_sampler.validate();

  bool need_probit_bart = false;
  bool need_probit_dart = false;
  bool need_glm = false;
  bool need_random = false;
  for (const ModelConfig& m : spec.models) {
    if (m.propensity == PropensityMode::Probit) {
      (m.family == ModelFamily::Dart ? need_probit_dart : need_probit_bart) = true;
    }
    need_glm |= m.propensity == PropensityMode::Glm;
    need_random |= m.propensity == PropensityMode::Random;
  }

  const int R = spec.replications;
  std::vector<ReplicationInputs> inputs(static_cast<std::size_t>(R));
  for (int r = 0; r < R; ++r) {
    Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(r), 1));
    inputs[static_cast<std::size_t>(r)].sample = generate(spec.dgp, spec.n, spec.p, rng);
  }

  // Propensity estimates: one task per (replication, kind).
  enum Task { ProbitBart, ProbitDart, Glm, Random };
  std::vector<std::pair<int, Task>> tasks;
  for (int r = 0; r < R; ++r) {
    if (need_probit_bart) tasks.emplace_back(r, ProbitBart);
    if (need_probit_dart) tasks.emplace_back(r, ProbitDart);
    if (need_glm) tasks.emplace_back(r, Glm);
    if (need_random) tasks.emplace_back(r, Random);
  }
  parallel_for(static_cast<int>(tasks.size()), spec.jobs, [&](int t) {
    const auto [r, kind] = tasks[static_cast<std::size_t>(t)];
    ReplicationInputs& in = inputs[static_cast<std::size_t>(r)];
    const Dataset data = in.sample.dataset();
    switch (kind) {
      case ProbitBart:
      case ProbitDart: {
        BartOptions opt;
        opt.sampler = spec.propensity_sampler;
        opt.sampler.seed = mix_seed(spec.seed, static_cast<std::uint64_t>(r), 2, kind == ProbitDart ? 1 : 0);
        opt.split_prior = kind == ProbitDart ? SplitPriorKind::Dirichlet : SplitPriorKind::Uniform;
        try {
          const Design d = make_design(data, std::nullopt, false);
          Eigen::VectorXd pi = fit_probit(d, in.sample.z, opt).pihat;
          (kind == ProbitDart ? in.probit_dart : in.probit_bart) = std::move(pi);
        } catch (const std::exception& e) {
          (kind == ProbitDart ? in.probit_dart_error : in.probit_bart_error) = e.what();
        }
        break;
      }
      case Glm:
        try {
          in.glm = fit_glm_propensity(in.sample.X, in.sample.z).probability;
        } catch (const std::exception& e) {
          in.glm_error = e.what();
        }
        break;
      case Random: {
        Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(r), 3));
        Eigen::VectorXd u(in.sample.X.rows());
        for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = rng.uniform();
        in.random = std::move(u);
        break;
      }
    }
  });

  BenchmarkReport report;
  report.spec = spec;
  const int M = static_cast<int>(spec.models.size());
  report.cells.resize(static_cast<std::size_t>(R * M));
  parallel_for(R * M, spec.jobs, [&](int c) {
    const int r = c / M;
    const ModelConfig model = spec.models[static_cast<std::size_t>(c % M)];
    const ReplicationInputs& in = inputs[static_cast<std::size_t>(r)];
    CellResult& cell = report.cells[static_cast<std::size_t>(c)];
    cell.replication = r;
    cell.model = model;
    cell.cate_true = in.sample.cate_true;
    try {
      std::optional<Eigen::VectorXd> pihat;
      switch (model.propensity) {
        case PropensityMode::Vanilla:
          break;
        case PropensityMode::Oracle:
          pihat = in.sample.pi_true;
          break;
        case PropensityMode::Probit: {
          const bool dart = model.family == ModelFamily::Dart;
          pihat = dart ? in.probit_dart : in.probit_bart;
          if (!pihat) throw std::runtime_error("propensity fit failed: " + (dart ? in.probit_dart_error : in.probit_bart_error));
          break;
        }
        case PropensityMode::Glm:
          pihat = in.glm;
          if (!pihat) throw std::runtime_error("propensity fit failed: " + in.glm_error);
          break;
        case PropensityMode::Random:
          pihat = in.random;
          break;
      }

      const Dataset data = in.sample.dataset();
      const std::uint64_t seed = mix_seed(spec.seed, static_cast<std::uint64_t>(r), 4, static_cast<std::uint64_t>(model.id()));
      EffectDraws effects;
      Eigen::MatrixXi usage;
      std::vector<bool> relevant;
      int ps_col = -1;
      if (model.family == ModelFamily::Bcf) {
        const Design design = make_design(data, pihat, false);
        BcfOptions opt;
        opt.sampler = spec.sampler;
        opt.sampler.seed = seed;
        opt.alpha = BcfPriorParams::with_defaults(spec.bcf_alpha0, spec.bcf_alpha_trees, spec.bcf_nu0);
        const BcfFitResult fit = fit_bcf(design, data.y, in.sample.z, opt);
        effects = EffectDraws{fit.alpha_fit};
        usage = fit.usage;
        relevant = relevant_columns(in.sample, design);
        ps_col = design.propensity_col;
      } else {
        const Design design = make_design(data, pihat, true);
        BartOptions opt;
        opt.sampler = spec.sampler;
        opt.sampler.seed = seed;
        opt.split_prior = model.family == ModelFamily::Dart ? SplitPriorKind::Dirichlet : SplitPriorKind::Uniform;
        const FitResult fit = fit_bart(design, data.y, opt);
        effects = estimate_ite_bart(fit, design.X);
        usage = fit.usage;
        relevant = relevant_columns(in.sample, design);
        ps_col = design.propensity_col;
      }

      const Eigen::VectorXd cate_draws = cate(effects);
      cell.cate_estimate = cate_draws.mean();
      const auto [lo, hi] = credible_interval(cate_draws, 0.95);
      cell.cate_lo = lo;
      cell.cate_hi = hi;
      cell.cate_rmse = std::abs(cell.cate_estimate - cell.cate_true);
      cell.ite_rmse = rmse(effects.ite_mean(), in.sample.alpha_true);
      const std::vector<bool> selected = select_variables(compute_pip(usage));
      const SelectionMetrics m = selection_metrics(selected, relevant);
      cell.precision = m.precision;
      cell.recall = m.recall;
      cell.f1 = m.f1;
      cell.precision_undefined = m.precision_undefined;
      cell.recall_undefined = m.recall_undefined;
      cell.ps_selected = ps_col >= 0 ? (selected[static_cast<std::size_t>(ps_col)] ? 1 : 0) : -1;
      cell.ok = true;
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.error = e.what();
    }
  });
  return report;
}

std::vector<ModelAggregate> BenchmarkReport::aggregate() const {
  std::vector<ModelAggregate> out;
  for (const ModelConfig& model : spec.models) {
    ModelAggregate a;
    a.model = model;
    std::vector<double> cr, ir, pr, rc, f1;
    std::vector<bool> ps;
    for (const CellResult& c : cells) {
      if (c.model.id() != model.id()) continue;
      if (!c.ok) {
        ++a.failed;
        continue;
      }
      ++a.succeeded;
      cr.push_back(c.cate_rmse);
      ir.push_back(c.ite_rmse);
      pr.push_back(c.precision);
      rc.push_back(c.recall);
      f1.push_back(c.f1);
      if (c.ps_selected >= 0) ps.push_back(c.ps_selected == 1);
    }
    a.cate_rmse = summarize(cr);
    a.ite_rmse = summarize(ir);
    a.precision = summarize(pr);
    a.recall = summarize(rc);
    a.f1 = summarize(f1);
    a.has_propensity = !ps.empty();
    a.ps_usage = ps_usage(ps);
    out.push_back(a);
  }
  return out;
}

const ModelAggregate* BenchmarkReport::find(const std::vector<ModelAggregate>& aggregates,
                                            const std::string& label) const {
  const int id = parse_model(label).id();
  for (const ModelAggregate& a : aggregates) {
    if (a.model.id() == id) return &a;
  }
  return nullptr;
}

std::string spec_to_json(const BenchmarkSpec& spec) { return spec_json_value(spec).dump(); }

std::string report_csv(const BenchmarkReport& report) {
  std::ostringstream out;
  out << "# treefx " << kVersion << "\n";
  out << "# config: " << spec_to_json(report.spec) << "\n";
  out << "# seed: " << report.spec.seed << "\n";
  out << "replication,model,propensity,family,status,cate_true,cate_estimate,cate_lo,cate_hi,cate_rmse,"
         "ite_rmse,precision,recall,f1,precision_undefined,recall_undefined,ps_selected,error\n";
  for (const CellResult& c : report.cells) {
    std::string error = c.error;
    std::replace(error.begin(), error.end(), ',', ';');
    std::replace(error.begin(), error.end(), '\n', ' ');
    out << c.replication << ',' << c.model.label() << ',' << propensity_name(c.model.propensity) << ','
        << family_name(c.model.family) << ',' << (c.ok ? "ok" : "failed") << ',' << fmt(c.cate_true) << ','
        << fmt(c.cate_estimate) << ',' << fmt(c.cate_lo) << ',' << fmt(c.cate_hi) << ',' << fmt(c.cate_rmse)
        << ',' << fmt(c.ite_rmse) << ',' << fmt(c.precision) << ',' << fmt(c.recall) << ',' << fmt(c.f1) << ','
        << (c.precision_undefined ? 1 : 0) << ',' << (c.recall_undefined ? 1 : 0) << ',';
    if (c.ps_selected >= 0) out << c.ps_selected;
    out << ',' << error << '\n';
  }
  return out.str();
}

std::string report_json(const BenchmarkReport& report) {
  auto metric = [](const MetricSummary& s) { return json{{"mean", s.mean}, {"sd", s.sd}, {"count", s.count}}; };
  json models = json::object();
  for (const ModelAggregate& a : report.aggregate()) {
    json entry = {{"succeeded", a.succeeded},
                  {"failed", a.failed},
                  {"cate_rmse", metric(a.cate_rmse)},
                  {"ite_rmse", metric(a.ite_rmse)},
                  {"precision", metric(a.precision)},
                  {"recall", metric(a.recall)},
                  {"f1", metric(a.f1)}};
    entry["ps_usage"] = a.has_propensity ? json(a.ps_usage) : json(nullptr);
    models[a.model.label()] = entry;
  }
  json doc = {{"tool", "treefx"},
              {"version", kVersion},
              {"seed", report.spec.seed},
              {"config", spec_json_value(report.spec)},
              {"models", models}};
  return doc.dump(2) + "\n";
}

}  // namespace treefx
