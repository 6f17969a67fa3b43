#pragma once

#include "treefx/models.hpp"
#include "treefx/random.hpp"
#include "treefx/sampler.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace treefx {

inline constexpr const char* kVersion = "0.1.0";

enum class DgpKind { Hahn, Friedman, Hill };

/// One draw from a data-generating process with every latent quantity kept.
struct DgpSample {
  DgpKind kind = DgpKind::Hahn;
  Eigen::MatrixXd X;
  Eigen::VectorXi z;
  Eigen::VectorXd y;
  Eigen::VectorXd pi_true;
  Eigen::VectorXd mu_true;
  Eigen::VectorXd alpha_true;
  Eigen::VectorXd theta_true;
  Eigen::VectorXd prognostic;  // covariate surface excluding mu and the effect
  Eigen::VectorXd beta;        // Hill-style coefficients
  double sigma_used = 0.0;
  double cate_true = 0.0;
  std::vector<int> relevant;   // covariate columns the outcome or assignment depends on

  Dataset dataset() const;
};

double mu_rule(double x1, double x2);
double hahn_alpha(double x3);
double friedman_alpha(double x3);
double friedman_surface(double x1, double x2, double x3, double x4, double x5);
/// (max theta - min theta) / 8 with theta_i = mu_i + alpha_i Phi(mu_i).
double sigma_rule(const Eigen::VectorXd& theta);

/// N(0, 1) covariates, y = 0.1 x1 + 0.1 x2 + mu + z alpha + e. Needs p >= 3.
DgpSample gen_hahn(int n, int p, Rng& rng);
/// U(0, 1) covariates and a Friedman surface in x1..x5. Needs p >= 5.
DgpSample gen_friedman(int n, int p, Rng& rng);
/// Six N(0, 1) covariates, y = sum beta_l x_l + mu + z alpha + e with
/// e ~ N(0, 0.5^2) and beta_l drawn from {0, ..., 4} with probabilities
/// (0.05, 0.1, 0.15, 0.2, 0.5).
DgpSample gen_hill_synthetic(int n, Rng& rng);
DgpSample generate(DgpKind kind, int n, int p, Rng& rng);

const char* dgp_name(DgpKind kind);
DgpKind parse_dgp(const std::string& name);

enum class PropensityMode { Vanilla, Oracle, Probit, Glm, Random };
enum class ModelFamily { Bart, Dart, Bcf };

struct ModelConfig {
  PropensityMode propensity = PropensityMode::Vanilla;
  ModelFamily family = ModelFamily::Bart;

  std::string label() const;  // e.g. "Oracle-BART"
  int id() const { return static_cast<int>(propensity) * 3 + static_cast<int>(family); }
};

const char* propensity_name(PropensityMode mode);  // Vanilla, Oracle, PS, GLM, Rand
const char* family_name(ModelFamily family);       // BART, DART, BCF
/// Parses labels such as "Oracle-BART" or "ps-dart".
ModelConfig parse_model(const std::string& label);
/// Every propensity mode crossed with every family.
std::vector<ModelConfig> all_models();

struct BenchmarkSpec {
  DgpKind dgp = DgpKind::Hahn;
  int n = 500;
  int p = 50;
  int replications = 10;
  std::vector<ModelConfig> models = all_models();
  SamplerConfig sampler;             // outcome models
  SamplerConfig propensity_sampler;  // probit propensity models
  int bcf_alpha_trees = 50;
  double bcf_alpha0 = 0.5;
  double bcf_nu0 = 0.25;
  std::uint64_t seed = 1;
  int jobs = 1;

  /// n = 500, p = 50, 10 replications; 1000 burn-in sweeps and 1000 sweeps
  /// thinned by 10; 50-tree probit propensity models.
  static BenchmarkSpec desk(DgpKind dgp);
  /// The full replication protocol for the given process.
  static BenchmarkSpec full_scale(DgpKind dgp);
};

struct CellResult {
  int replication = 0;
  ModelConfig model;
  bool ok = false;
  std::string error;
  double cate_true = 0.0;
  double cate_estimate = 0.0;
  double cate_lo = 0.0;
  double cate_hi = 0.0;
  double cate_rmse = 0.0;
  double ite_rmse = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_undefined = false;
  bool recall_undefined = false;
  int ps_selected = -1;  // -1 when the configuration has no propensity column
};

struct MetricSummary {
  double mean = 0.0;
  double sd = 0.0;
  int count = 0;
};

struct ModelAggregate {
  ModelConfig model;
  int succeeded = 0;
  int failed = 0;
  MetricSummary cate_rmse;
  MetricSummary ite_rmse;
  MetricSummary precision;
  MetricSummary recall;
  MetricSummary f1;
  double ps_usage = 0.0;  // percent; meaningful only when has_propensity
  bool has_propensity = false;
};

struct BenchmarkReport {
  BenchmarkSpec spec;
  std::vector<CellResult> cells;  // replication-major, models in configured order

  std::vector<ModelAggregate> aggregate() const;
  const ModelAggregate* find(const std::vector<ModelAggregate>& aggregates, const std::string& label) const;
};

/// Covariate columns relevant to the outcome or assignment of a sample,
/// expanded to a design: the propensity and treatment columns count as
/// relevant whenever present.
std::vector<bool> relevant_columns(const DgpSample& sample, const Design& design);

/// Runs every (replication, model) cell. Seeds are derived per cell from
/// the master seed, so results do not depend on `jobs`. Failed cells are
/// recorded and the run continues.
BenchmarkReport run_benchmark(const BenchmarkSpec& spec);

MetricSummary summarize(const std::vector<double>& values);

std::string spec_to_json(const BenchmarkSpec& spec);
/// One row per cell, preceded by '#' lines with the version, resolved
/// configuration and master seed.
std::string report_csv(const BenchmarkReport& report);
/// Mean and sd per metric per model, with the same metadata.
std::string report_json(const BenchmarkReport& report);

}  // namespace treefx
