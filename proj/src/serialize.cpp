#include "treefx/serialize.hpp"

#include "treefx/simulation.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace treefx {

namespace {

using nlohmann::json;

json node_json(const Tree& tree, int id) {
  const Node& n = tree.node(id);
  if (n.is_leaf()) return {{"mu", n.mu}};
  return {{"var", n.var},
          {"cut", n.cut},
          {"threshold", n.threshold},
          {"left", node_json(tree, n.left)},
          {"right", node_json(tree, n.right)}};
}

void read_node(const json& j, Tree& tree, int id) {
  if (j.contains("mu")) {
    tree.node(id).mu = j.at("mu").get<double>();
    return;
  }
  const int left = tree.grow(id, j.at("var").get<int>(), j.at("cut").get<int>(), j.at("threshold").get<double>());
  const int right = tree.node(id).right;
  read_node(j.at("left"), tree, left);
  read_node(j.at("right"), tree, right);
}

Tree tree_from(const json& j) {
  Tree tree;
  read_node(j, tree, 0);
  return tree;
}

json forests_json(const std::vector<Forest>& forests) {
  json out = json::array();
  for (const Forest& f : forests) {
    json trees = json::array();
    for (const Tree& t : f.trees) trees.push_back(node_json(t, 0));
    out.push_back(std::move(trees));
  }
  return out;
}

std::vector<Forest> forests_from(const json& j) {
  std::vector<Forest> out;
  for (const json& draw : j) {
    Forest f;
    for (const json& t : draw) f.trees.push_back(tree_from(t));
    out.push_back(std::move(f));
  }
  return out;
}

json sampler_json(const SamplerConfig& c) {
  return {{"num_trees", c.num_trees}, {"burn_in", c.burn_in}, {"num_draws", c.num_draws},
          {"thinning", c.thinning},   {"seed", c.seed},       {"max_cuts", c.max_cuts},
          {"moves", {c.moves.grow, c.moves.prune, c.moves.change}}};
}

SamplerConfig sampler_from(const json& j) {
  SamplerConfig c;
  c.num_trees = j.at("num_trees").get<int>();
  c.burn_in = j.at("burn_in").get<int>();
  c.num_draws = j.at("num_draws").get<int>();
  c.thinning = j.at("thinning").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.max_cuts = j.at("max_cuts").get<int>();
  const auto& m = j.at("moves");
  c.moves = {m.at(0).get<double>(), m.at(1).get<double>(), m.at(2).get<double>()};
  return c;
}

json sigma_json(const SigmaPriorParams& s) {
  return {{"nu", s.nu}, {"q", s.q}, {"lambda", s.lambda}, {"sigma_hat", s.sigma_hat}};
}

SigmaPriorParams sigma_from(const json& j) {
  SigmaPriorParams s;
  s.nu = j.at("nu").get<double>();
  s.q = j.at("q").get<double>();
  s.lambda = j.at("lambda").get<double>();
  s.sigma_hat = j.at("sigma_hat").get<double>();
  return s;
}

json usage_json(const Eigen::MatrixXi& usage) {
  json out = json::array();
  for (Eigen::Index d = 0; d < usage.rows(); ++d) {
    std::vector<int> row(static_cast<std::size_t>(usage.cols()));
    for (Eigen::Index v = 0; v < usage.cols(); ++v) row[static_cast<std::size_t>(v)] = usage(d, v);
    out.push_back(row);
  }
  return out;
}

Eigen::MatrixXi usage_from(const json& j, Eigen::Index cols) {
  Eigen::MatrixXi out(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t d = 0; d < j.size(); ++d) {
    const auto row = j[d].get<std::vector<int>>();
    if (static_cast<Eigen::Index>(row.size()) != cols) throw std::runtime_error("usage row has the wrong length");
    for (Eigen::Index v = 0; v < cols; ++v) out(static_cast<Eigen::Index>(d), v) = row[static_cast<std::size_t>(v)];
  }
  return out;
}

json fit_json(const FitResult& fit) {
  const BartOptions& o = fit.options;
  return {{"model", fit.kind == ModelKind::Probit ? "probit" : "bart"},
          {"split_prior", fit.split_prior == SplitPriorKind::Dirichlet ? "dirichlet" : "uniform"},
          {"names", fit.names},
          {"propensity_col", fit.propensity_col},
          {"treatment_col", fit.treatment_col},
          {"scaler", {{"y_min", fit.scaler.y_min()}, {"y_max", fit.scaler.y_max()}}},
          {"offset", fit.offset},
          {"options",
           {{"sampler", sampler_json(o.sampler)},
            {"tree", {{"eta", o.tree.eta}, {"beta", o.tree.beta}}},
            {"k", o.k},
            {"sigma", sigma_json(o.sigma)},
            {"dart_a", o.dart_a},
            {"dart_b", o.dart_b},
            {"theta_grid", o.theta_grid}}},
          {"sigma", fit.sigma},
          {"s", fit.s},
          {"theta", fit.theta},
          {"usage", usage_json(fit.usage)},
          {"forests", forests_json(fit.forests)}};
}

FitResult fit_from(const json& j) {
  FitResult fit;
  fit.kind = j.at("model").get<std::string>() == "probit" ? ModelKind::Probit : ModelKind::Regression;
  fit.split_prior = j.at("split_prior").get<std::string>() == "dirichlet" ? SplitPriorKind::Dirichlet
                                                                          : SplitPriorKind::Uniform;
  fit.names = j.at("names").get<std::vector<std::string>>();
  fit.propensity_col = j.at("propensity_col").get<int>();
  fit.treatment_col = j.at("treatment_col").get<int>();
  const auto& sc = j.at("scaler");
  fit.scaler = ResponseScaler(sc.at("y_min").get<double>(), sc.at("y_max").get<double>());
  fit.offset = j.at("offset").get<double>();
  const auto& o = j.at("options");
  fit.options.sampler = sampler_from(o.at("sampler"));
  fit.options.split_prior = fit.split_prior;
  fit.options.tree = {o.at("tree").at("eta").get<double>(), o.at("tree").at("beta").get<double>()};
  fit.options.k = o.at("k").get<double>();
  fit.options.sigma = sigma_from(o.at("sigma"));
  fit.options.dart_a = o.at("dart_a").get<double>();
  fit.options.dart_b = o.at("dart_b").get<double>();
  fit.options.theta_grid = o.at("theta_grid").get<int>();
  fit.sigma = j.at("sigma").get<std::vector<double>>();
  fit.s = j.at("s").get<std::vector<std::vector<double>>>();
  fit.theta = j.at("theta").get<std::vector<double>>();
  fit.usage = usage_from(j.at("usage"), static_cast<Eigen::Index>(fit.names.size()));
  fit.forests = forests_from(j.at("forests"));
  return fit;
}

json bcf_json(const BcfFitResult& fit) {
  const BcfOptions& o = fit.options;
  return {{"model", "bcf"},
          {"names", fit.names},
          {"propensity_col", fit.propensity_col},
          {"scaler", {{"y_min", fit.scaler.y_min()}, {"y_max", fit.scaler.y_max()}}},
          {"options",
           {{"sampler", sampler_json(o.sampler)},
            {"tree", {{"eta", o.tree.eta}, {"beta", o.tree.beta}}},
            {"k", o.k},
            {"sigma", sigma_json(o.sigma)},
            {"alpha",
             {{"alpha0", o.alpha.alpha0},
              {"num_trees", o.alpha.num_trees},
              {"eta", o.alpha.eta},
              {"beta", o.alpha.beta},
              {"nu0", o.alpha.nu0}}}}},
          {"sigma", fit.sigma},
          {"nu_alpha", fit.nu_alpha},
          {"usage", usage_json(fit.usage)},
          {"m_forests", forests_json(fit.m_forests)},
          {"alpha_forests", forests_json(fit.alpha_forests)}};
}

BcfFitResult bcf_from(const json& j) {
  BcfFitResult fit;
  fit.names = j.at("names").get<std::vector<std::string>>();
  fit.propensity_col = j.at("propensity_col").get<int>();
  const auto& sc = j.at("scaler");
  fit.scaler = ResponseScaler(sc.at("y_min").get<double>(), sc.at("y_max").get<double>());
  const auto& o = j.at("options");
  fit.options.sampler = sampler_from(o.at("sampler"));
  fit.options.tree = {o.at("tree").at("eta").get<double>(), o.at("tree").at("beta").get<double>()};
  fit.options.k = o.at("k").get<double>();
  fit.options.sigma = sigma_from(o.at("sigma"));
  const auto& a = o.at("alpha");
  fit.options.alpha.alpha0 = a.at("alpha0").get<double>();
  fit.options.alpha.num_trees = a.at("num_trees").get<int>();
  fit.options.alpha.eta = a.at("eta").get<double>();
  fit.options.alpha.beta = a.at("beta").get<double>();
  fit.options.alpha.nu0 = a.at("nu0").get<double>();
  fit.sigma = j.at("sigma").get<std::vector<double>>();
  fit.nu_alpha = j.at("nu_alpha").get<std::vector<double>>();
  fit.usage = usage_from(j.at("usage"), static_cast<Eigen::Index>(fit.names.size()));
  fit.m_forests = forests_from(j.at("m_forests"));
  fit.alpha_forests = forests_from(j.at("alpha_forests"));
  if (fit.m_forests.size() != fit.alpha_forests.size()) throw std::runtime_error("forest draw counts differ");
  return fit;
}

}  // namespace

std::string tree_to_json(const Tree& tree) { return node_json(tree, 0).dump(); }

Tree tree_from_json(const std::string& text) {
  try {
    return tree_from(json::parse(text));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed tree: ") + e.what());
  }
}

std::string model_to_json(const SavedModel& model, const std::string& metadata) {
  json doc = std::visit(
      [](const auto& fit) -> json {
        if constexpr (std::is_same_v<std::decay_t<decltype(fit)>, FitResult>) {
          return fit_json(fit);
        } else {
          return bcf_json(fit);
        }
      },
      model);
  doc["format"] = "treefx-model";
  doc["version"] = kVersion;
  doc["metadata"] = metadata.empty() ? json::object() : json::parse(metadata);
  return doc.dump();
}

SavedModel model_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    if (doc.value("format", "") != "treefx-model") throw DataError("not a treefx model file");
    if (doc.at("model").get<std::string>() == "bcf") return bcf_from(doc);
    return fit_from(doc);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const std::string& path, const SavedModel& model, const std::string& metadata) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file '" + path + "'");
  out << model_to_json(model, metadata) << '\n';
  if (!out) throw std::runtime_error("failed writing model file '" + path + "'");
}

SavedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return model_from_json(buf.str());
}

}  // namespace treefx
