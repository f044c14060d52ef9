#include "etdlab/mdp_json.hpp"

#include <fstream>

#include "etdlab/errors.hpp"

namespace etdlab {

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const Json& doc) {
  if (!doc.is_array() || doc.empty() || !doc[0].is_array())
    throw InvalidModel("expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(doc.size());
  const auto cols = static_cast<Eigen::Index>(doc[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (doc[i].size() != static_cast<std::size_t>(cols)) throw InvalidModel("ragged matrix rows");
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = doc[i][j].get<double>();
  }
  return m;
}

Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector vector_from_json(const Json& doc) {
  if (!doc.is_array()) throw InvalidModel("expected an array");
  Vector v(static_cast<Eigen::Index>(doc.size()));
  for (std::size_t i = 0; i < doc.size(); ++i) v(static_cast<Eigen::Index>(i)) = doc[i].get<double>();
  return v;
}

Json mdp_to_json(const TabularMdp& mdp) {
  Json transition = Json::array();
  for (std::size_t s = 0; s < mdp.num_states(); ++s) {
    Json per_action = Json::array();
    for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
      auto row = mdp.transition_row(s, a);
      per_action.push_back(Json(std::vector<double>(row.begin(), row.end())));
    }
    transition.push_back(std::move(per_action));
  }
  return Json{{"num_states", mdp.num_states()},
              {"num_actions", mdp.num_actions()},
              {"transition", std::move(transition)},
              {"reward", matrix_to_json(mdp.rewards())},
              {"discount", vector_to_json(mdp.discounts())},
              {"features", matrix_to_json(mdp.features())},
              {"start_distribution", vector_to_json(mdp.start_distribution())},
              {"episode_horizon", mdp.episode_horizon()}};
}

TabularMdp mdp_from_json(const Json& doc) {
  try {
    const auto ns = doc.at("num_states").get<std::size_t>();
    const auto na = doc.at("num_actions").get<std::size_t>();
    const Json& tr = doc.at("transition");
    if (tr.size() != ns) throw InvalidModel("transition must have num_states entries");
    std::vector<double> flat;
    flat.reserve(ns * na * ns);
    for (const auto& per_action : tr) {
      if (per_action.size() != na) throw InvalidModel("transition[s] must have num_actions entries");
      for (const auto& row : per_action) {
        if (row.size() != ns) throw InvalidModel("transition[s][a] must have num_states entries");
        for (const auto& p : row) flat.push_back(p.get<double>());
      }
    }
    Vector start;
    if (doc.contains("start_distribution")) start = vector_from_json(doc["start_distribution"]);
    const std::size_t horizon = doc.value("episode_horizon", std::size_t{0});
    return TabularMdp(ns, na, std::move(flat), matrix_from_json(doc.at("reward")),
                      vector_from_json(doc.at("discount")), matrix_from_json(doc.at("features")),
                      std::move(start), horizon);
  } catch (const Json::exception& e) {
    throw InvalidModel(std::string("malformed MDP document: ") + e.what());
  }
}

Json policy_to_json(const Policy& policy) { return Json{{"probs", matrix_to_json(policy.probs())}}; }

Policy policy_from_json(const Json& doc) {
  try {
    return Policy(matrix_from_json(doc.at("probs")));
  } catch (const Json::exception& e) {
    throw InvalidModel(std::string("malformed policy document: ") + e.what());
  }
}

MdpFile load_mdp_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidModel("cannot open MDP file " + path);
  Json doc;
  try {
    in >> doc;
  } catch (const Json::exception& e) {
    throw InvalidModel("cannot parse " + path + ": " + e.what());
  }
  MdpFile out{mdp_from_json(doc.contains("mdp") ? doc["mdp"] : doc), {}, {}};
  const auto ns = out.mdp.num_states(), na = out.mdp.num_actions();
  out.behavior = doc.contains("behavior") ? policy_from_json(doc["behavior"]) : Policy::uniform(ns, na);
  out.target = doc.contains("target") ? policy_from_json(doc["target"]) : out.behavior;
  if (out.behavior.num_states() != ns || out.behavior.num_actions() != na ||
      out.target.num_states() != ns || out.target.num_actions() != na)
    throw InvalidModel("policy shape does not match the MDP in " + path);
  return out;
}

void save_mdp_file(const std::string& path, const TabularMdp& mdp, const Policy& target,
                   const Policy& behavior) {
  std::ofstream out(path);
  if (!out) throw InvalidModel("cannot write " + path);
  out << Json{{"mdp", mdp_to_json(mdp)}, {"target", policy_to_json(target)},
              {"behavior", policy_to_json(behavior)}}
             .dump(2)
      << '\n';
}

}  // namespace etdlab
