#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace treefx {

/// Column means of a draws x P 0/1 usage matrix.
Eigen::VectorXd compute_pip(const Eigen::MatrixXi& usage);

/// pip > 0.5, strictly.
std::vector<bool> select_variables(const Eigen::VectorXd& pip, double threshold = 0.5);

struct SelectionMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int true_positives = 0;
  int false_positives = 0;
  int false_negatives = 0;
  bool precision_undefined = false;  // nothing selected
  bool recall_undefined = false;     // nothing relevant
};

/// Undefined ratios are reported as 0 with their flag set; F1 is 0 when
/// precision + recall is 0.
SelectionMetrics selection_metrics(const std::vector<bool>& selected, const std::vector<bool>& relevant);

/// Percentage of replications in which the propensity column was selected.
double ps_usage(const std::vector<bool>& selected_per_replication);

struct SimplexSummary {
  Eigen::VectorXd mean;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

/// Per-variable posterior mean and central credible interval of s draws.
SimplexSummary dirichlet_summary(const std::vector<std::vector<double>>& s_draws, double level = 0.95);

struct SelectionReport {
  std::vector<std::string> names;
  Eigen::VectorXd pip;
  std::vector<bool> selected;
  SimplexSummary s_summary;  // empty unless the fit used the Dirichlet prior
  bool has_truth = false;
  SelectionMetrics metrics;
  int propensity_col = -1;
  bool propensity_selected = false;
};

/// `relevant` may be empty when no ground truth is available.
SelectionReport make_selection_report(const std::vector<std::string>& names, const Eigen::MatrixXi& usage,
                                      const std::vector<std::vector<double>>& s_draws, bool dirichlet,
                                      const std::vector<bool>& relevant, int propensity_col);

}  // namespace treefx
