#include "treefx/selection.hpp"

#include "treefx/effects.hpp"

#include <stdexcept>

namespace treefx {

Eigen::VectorXd compute_pip(const Eigen::MatrixXi& usage) {
  if (usage.rows() == 0) throw std::invalid_argument("compute_pip needs at least one draw");
  return usage.cast<double>().colwise().mean().transpose();
}

std::vector<bool> select_variables(const Eigen::VectorXd& pip, double threshold) {
  std::vector<bool> out(static_cast<std::size_t>(pip.size()));
  for (Eigen::Index v = 0; v < pip.size(); ++v) out[static_cast<std::size_t>(v)] = pip(v) > threshold;
  return out;
}

SelectionMetrics selection_metrics(const std::vector<bool>& selected, const std::vector<bool>& relevant) {
  if (selected.size() != relevant.size()) throw std::invalid_argument("selection_metrics: length mismatch");
  SelectionMetrics m;
  for (std::size_t v = 0; v < selected.size(); ++v) {
    if (selected[v] && relevant[v]) ++m.true_positives;
    if (selected[v] && !relevant[v]) ++m.false_positives;
    if (!selected[v] && relevant[v]) ++m.false_negatives;
  }
  const int sel = m.true_positives + m.false_positives;
  const int rel = m.true_positives + m.false_negatives;
  m.precision_undefined = sel == 0;
  m.recall_undefined = rel == 0;
  m.precision = sel == 0 ? 0.0 : static_cast<double>(m.true_positives) / sel;
  m.recall = rel == 0 ? 0.0 : static_cast<double>(m.true_positives) / rel;
  const double denom = m.precision + m.recall;
  m.f1 = denom > 0.0 ? 2.0 * m.precision * m.recall / denom : 0.0;
  return m;
}

double ps_usage(const std::vector<bool>& selected_per_replication) {
  if (selected_per_replication.empty()) return 0.0;
  int count = 0;
  for (bool s : selected_per_replication) count += s ? 1 : 0;
  return 100.0 * count / static_cast<double>(selected_per_replication.size());
}

SimplexSummary dirichlet_summary(const std::vector<std::vector<double>>& s_draws, double level) {
  if (s_draws.empty()) throw std::invalid_argument("dirichlet_summary needs at least one draw");
  const auto D = static_cast<Eigen::Index>(s_draws.size());
  const auto P = static_cast<Eigen::Index>(s_draws.front().size());
  Eigen::MatrixXd draws(D, P);
  for (Eigen::Index d = 0; d < D; ++d) {
    const auto& row = s_draws[static_cast<std::size_t>(d)];
    if (static_cast<Eigen::Index>(row.size()) != P) throw std::invalid_argument("s draws of unequal length");
    for (Eigen::Index v = 0; v < P; ++v) draws(d, v) = row[static_cast<std::size_t>(v)];
  }
  SimplexSummary out;
  out.mean = draws.colwise().mean().transpose();
  out.lo.resize(P);
  out.hi.resize(P);
  for (Eigen::Index v = 0; v < P; ++v) {
    const auto [lo, hi] = credible_interval(draws.col(v), level);
    out.lo(v) = lo;
    out.hi(v) = hi;
  }
  return out;
}

SelectionReport make_selection_report(const std::vector<std::string>& names, const Eigen::MatrixXi& usage,
                                      const std::vector<std::vector<double>>& s_draws, bool dirichlet,
                                      const std::vector<bool>& relevant, int propensity_col) {
  SelectionReport r;
  r.names = names;
  r.pip = compute_pip(usage);
  r.selected = select_variables(r.pip);
  if (dirichlet && !s_draws.empty()) r.s_summary = dirichlet_summary(s_draws);
  if (!relevant.empty()) {
    r.has_truth = true;
    r.metrics = selection_metrics(r.selected, relevant);
  }
  r.propensity_col = propensity_col;
  r.propensity_selected = propensity_col >= 0 && r.selected[static_cast<std::size_t>(propensity_col)];
  return r;
}

}  // namespace treefx
