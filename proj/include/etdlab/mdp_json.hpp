#pragma once

#include <string>

#include "etdlab/mdp.hpp"
#include "json.hpp"

namespace etdlab {

using Json = nlohmann::json;

/// {num_states, num_actions, transition[s][a][s'], reward[s][a], discount[s],
///  features[s][k], start_distribution[s], episode_horizon}
Json mdp_to_json(const TabularMdp& mdp);
TabularMdp mdp_from_json(const Json& doc);

/// probs[s][a]
Json policy_to_json(const Policy& policy);
Policy policy_from_json(const Json& doc);

Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& doc);
Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& doc);

/// Reads an MDP file, optionally with embedded "target" and "behavior" policies.
struct MdpFile {
  TabularMdp mdp;
  Policy target;
  Policy behavior;
};
MdpFile load_mdp_file(const std::string& path);
void save_mdp_file(const std::string& path, const TabularMdp& mdp, const Policy& target,
                   const Policy& behavior);

}  // namespace etdlab
