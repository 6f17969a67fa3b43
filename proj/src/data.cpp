#include "treefx/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace treefx {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream stream(line);
  while (std::getline(stream, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_cell(const std::string& raw, std::size_t row, const std::string& column) {
  const std::string cell = trim(raw);
  if (cell.empty()) {
    throw DataError("empty cell at row " + std::to_string(row) + ", column '" + column + "'");
  }
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw DataError("non-numeric cell '" + cell + "' at row " + std::to_string(row) +
                    ", column '" + column + "'");
  }
  if (!std::isfinite(value)) {
    throw DataError("non-finite value at row " + std::to_string(row) + ", column '" + column +
                    "'");
  }
  return value;
}

}  // namespace

void Dataset::validate() const {
  if (X.rows() < 2) throw DataError("dataset needs at least 2 rows");
  if (y.size() != X.rows()) throw DataError("response length does not match covariate rows");
  if (static_cast<Eigen::Index>(column_names.size()) != X.cols()) {
    throw DataError("column name count does not match covariate columns");
  }
  if (!X.allFinite()) throw DataError("covariates contain non-finite values");
  if (!y.allFinite()) throw DataError("response contains non-finite values");
  if (z) {
    if (z->size() != X.rows()) throw DataError("treatment length does not match rows");
    int treated = 0;
    for (Eigen::Index i = 0; i < z->size(); ++i) {
      const int v = (*z)(i);
      if (v != 0 && v != 1) throw DataError("treatment must be binary");
      treated += v;
    }
    if (treated == 0 || treated == z->size()) {
      throw DataError("treatment must contain both treated and control rows");
    }
  }
}

ResponseScaler::ResponseScaler(double y_min, double y_max) : y_min_(y_min), y_max_(y_max) {
  if (!(y_max > y_min)) throw DataError("degenerate response");
}

Eigen::VectorXd ResponseScaler::forward(const Eigen::VectorXd& v) const {
  return v.unaryExpr([this](double x) { return forward(x); });
}

Eigen::VectorXd ResponseScaler::inverse(const Eigen::VectorXd& v) const {
  return v.unaryExpr([this](double x) { return inverse(x); });
}

std::pair<Eigen::VectorXd, ResponseScaler> standardize_response(const Eigen::VectorXd& y) {
  if (y.size() < 2) throw DataError("response needs at least 2 values");
  const double lo = y.minCoeff();
  const double hi = y.maxCoeff();
  if (!(hi > lo)) throw DataError("degenerate response");
  ResponseScaler scaler(lo, hi);
  Eigen::VectorXd scaled = scaler.forward(y);
  // Pin the extremes exactly; the affine map can be off by an ulp.
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y(i) == lo) scaled(i) = -0.5;
    if (y(i) == hi) scaled(i) = 0.5;
  }
  return {std::move(scaled), scaler};
}

SplitCandidates build_split_candidates(const Eigen::MatrixXd& X, int max_cuts) {
  if (max_cuts < 1) throw std::invalid_argument("max_cuts must be at least 1");
  std::vector<std::vector<double>> cuts(static_cast<std::size_t>(X.cols()));
  std::vector<double> values;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    values.assign(X.col(j).data(), X.col(j).data() + X.rows());
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    const std::size_t distinct = values.size();
    auto& out = cuts[static_cast<std::size_t>(j)];
    if (distinct < 2) continue;
    const auto cap = static_cast<std::size_t>(max_cuts);
    if (distinct <= cap + 1) {
      out.reserve(distinct - 1);
      for (std::size_t i = 1; i < distinct; ++i) out.push_back(0.5 * (values[i - 1] + values[i]));
    } else {
      out.reserve(cap);
      for (std::size_t k = 1; k <= cap; ++k) {
        const std::size_t i = k * distinct / (cap + 1);
        out.push_back(0.5 * (values[i - 1] + values[i]));
      }
    }
  }
  return SplitCandidates(std::move(cuts));
}

std::pair<std::vector<std::string>, Eigen::MatrixXd> read_numeric_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + path + "' is empty");
  while (!line.empty() && line[0] == '#') {
    if (!std::getline(in, line)) throw DataError("'" + path + "' has no header row");
  }
  std::vector<std::string> header = split_line(line);
  for (auto& h : header) h = trim(h);

  std::vector<std::vector<double>> rows;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    auto cells = split_line(line);
    if (cells.size() != header.size()) {
      throw DataError("row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                      " cells, expected " + std::to_string(header.size()));
    }
    std::vector<double> values(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) values[c] = parse_cell(cells[c], row, header[c]);
    rows.push_back(std::move(values));
  }
  Eigen::MatrixXd M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(header.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return {std::move(header), std::move(M)};
}

Dataset load_csv(const std::string& path, const std::string& response_col,
                 const std::optional<std::string>& treatment_col) {
  auto [header, M] = read_numeric_csv(path);
  auto find = [&header](const std::string& name) -> Eigen::Index {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("column '" + name + "' not found");
    return static_cast<Eigen::Index>(it - header.begin());
  };
  const Eigen::Index y_col = find(response_col);
  const Eigen::Index z_col = treatment_col ? find(*treatment_col) : -1;

  Dataset data;
  data.y = M.col(y_col);
  if (z_col >= 0) {
    Eigen::VectorXi z(M.rows());
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
      const double v = M(i, z_col);
      if (v != 0.0 && v != 1.0) throw DataError("treatment must be binary (row " + std::to_string(i + 1) + ")");
      z(i) = static_cast<int>(v);
    }
    data.z = std::move(z);
  }
  std::vector<Eigen::Index> keep;
  for (Eigen::Index c = 0; c < M.cols(); ++c) {
    if (c != y_col && c != z_col) keep.push_back(c);
  }
  data.X.resize(M.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    data.X.col(static_cast<Eigen::Index>(k)) = M.col(keep[k]);
    data.column_names.push_back(header[static_cast<std::size_t>(keep[k])]);
  }
  data.validate();
  return data;
}

}  // namespace treefx
