#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace treefx {

/// Raised for malformed or invalid input data (CLI maps it to exit code 2).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Response, covariates and optional binary treatment for n individuals.
struct Dataset {
  Eigen::VectorXd y;
  Eigen::MatrixXd X;  // n x p, column-major
  std::optional<Eigen::VectorXi> z;
  std::vector<std::string> column_names;  // one per column of X

  Eigen::Index rows() const { return X.rows(); }
  Eigen::Index cols() const { return X.cols(); }

  /// Throws DataError when the invariants do not hold: n >= 2, finite
  /// covariates, z binary with both arms present.
  void validate() const;
};

/// Affine map of the response onto [-0.5, 0.5].
class ResponseScaler {
 public:
  ResponseScaler() = default;
  ResponseScaler(double y_min, double y_max);

  double y_min() const { return y_min_; }
  double y_max() const { return y_max_; }
  double range() const { return y_max_ - y_min_; }

  double forward(double v) const { return (v - y_min_) / range() - 0.5; }
  double inverse(double v) const { return (v + 0.5) * range() + y_min_; }
  Eigen::VectorXd forward(const Eigen::VectorXd& v) const;
  Eigen::VectorXd inverse(const Eigen::VectorXd& v) const;

 private:
  double y_min_ = -0.5;
  double y_max_ = 0.5;
};

/// Returns the scaled response and the scaler that produced it. Throws
/// DataError("degenerate response") for constant input.
std::pair<Eigen::VectorXd, ResponseScaler> standardize_response(const Eigen::VectorXd& y);

/// Sorted cutpoints per variable; a split on variable l at cutpoint index k
/// sends x_l <= cuts[l][k] to the left child.
class SplitCandidates {
 public:
  SplitCandidates() = default;
  explicit SplitCandidates(std::vector<std::vector<double>> cuts) : cuts_(std::move(cuts)) {}

  int num_vars() const { return static_cast<int>(cuts_.size()); }
  int count(int var) const { return static_cast<int>(cuts_[var].size()); }
  double cut(int var, int index) const { return cuts_[var][index]; }
  const std::vector<double>& cuts(int var) const { return cuts_[var]; }
  const std::vector<std::vector<double>>& all() const { return cuts_; }

 private:
  std::vector<std::vector<double>> cuts_;
};

constexpr int kDefaultMaxCuts = 100;

/// Midpoints between consecutive distinct values, or `max_cuts` midpoints at
/// evenly spaced quantiles of the distinct values when there are more than
/// max_cuts + 1 of them.
SplitCandidates build_split_candidates(const Eigen::MatrixXd& X, int max_cuts = kDefaultMaxCuts);

/// Reads a headered, comma-separated numeric file. `response_col` becomes y,
/// `treatment_col` (if given) becomes z, and every other column is a covariate.
Dataset load_csv(const std::string& path, const std::string& response_col,
                 const std::optional<std::string>& treatment_col = std::nullopt);

/// Reads every column of a headered numeric CSV file into a matrix.
std::pair<std::vector<std::string>, Eigen::MatrixXd> read_numeric_csv(const std::string& path);

}  // namespace treefx
