#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "etdlab/mdp.hpp"

namespace etdlab {

struct EnvBundle {
  std::string name;
  TabularMdp mdp;
  Policy target;
  Policy behavior;
};

/// Two states, actions {left=0, right=1}. Right moves to (or stays in) state 2,
/// left moves to (or stays in) state 1. Target always goes right; behavior is uniform.
EnvBundle make_two_state(double gamma = 0.9);

/// Default Collision features: 9x6 binary, each row with 3 active columns,
/// rows distinct, drawn from a fixed seed.
Matrix collision_default_features();
inline constexpr std::uint64_t kCollisionFeatureSeed = 20240607;
inline constexpr std::size_t kCollisionHorizon = 100;

/// Nine-state corridor, actions {forward=0, retreat=1}. Retreat from S5..S8
/// returns to a uniform state in S1..S4; S9 traps. Episodes start uniformly
/// in S1..S4 and last `horizon` steps. `reward` is paid on entering S9.
EnvBundle make_collision(double reward = 1.0, double gamma = 0.9,
                         std::optional<Matrix> features = std::nullopt,
                         std::size_t horizon = kCollisionHorizon);

/// Seven states (six top, one bottom), actions {up=0, down=1}.
EnvBundle make_baird(double gamma = 0.9);

/// Dense random MDP: Dirichlet(1) transition rows, Gaussian features, random
/// target policy, behavior policy with every probability >= 0.01.
EnvBundle make_random_mdp(std::uint64_t seed, std::size_t num_states, std::size_t num_actions,
                          std::size_t feature_dim, double gamma);

struct EnvOptions {
  std::optional<double> gamma;
  std::optional<double> reward;
  std::optional<Matrix> features;
  std::uint64_t seed = 0;
  std::size_t num_states = 5;
  std::size_t num_actions = 2;
  std::size_t feature_dim = 3;
};

const std::vector<std::string>& env_names();

/// Builds an environment by name; throws InvalidModel listing valid names.
EnvBundle make_env(const std::string& name, const EnvOptions& options = {});

}  // namespace etdlab
