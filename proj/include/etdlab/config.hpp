#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "etdlab/envs.hpp"
#include "etdlab/learners.hpp"
#include "etdlab/mdp_json.hpp"

namespace etdlab {

/// One JSON document drives every subcommand; command-line flags override fields.
struct Config {
  std::string env = "two-state";
  std::optional<double> gamma;
  std::optional<double> reward;
  std::optional<std::string> features_path;  // JSON array of rows
  std::optional<std::string> mdp_file;       // replaces the named environment
  std::uint64_t env_seed = 0;                // for `random`
  std::size_t num_states = 5;
  std::size_t num_actions = 2;
  std::size_t feature_dim = 3;

  std::vector<std::string> algorithms{"nstep-td"};
  std::optional<std::string> scheme;
  std::size_t n = 1;
  double alpha = 0.0078125;
  double rho_bar = 1.0;        // target clip
  double c_bar = 1.0;          // target clip
  double trace_rho_bar = 1.0;  // Clip-NETD / Clip-WETD trace clip
  std::optional<double> beta;
  double eta = 1.0;
  std::optional<double> max_trace;
  bool frozen_window = false;
  bool ace = false;

  std::vector<double> alphas;
  std::vector<std::size_t> ns;
  bool paper_grid = false;

  std::vector<std::uint64_t> seeds{0};
  std::optional<std::size_t> steps;
  std::size_t record_every = 100;
  std::optional<std::vector<double>> theta0;
  bool unweighted = false;

  std::string variant = "nstep";
  std::string out = "out";
  int jobs = 0;

  bool operator==(const Config&) const = default;
};

Json config_to_json(const Config& c);
/// Throws ContractViolation on unknown keys or wrongly typed values.
Config config_from_json(const Json& doc);
Config load_config(const std::string& path);

/// Builds and validates the spec for `algorithm` from the shared fields.
AlgorithmSpec spec_from_config(const Config& c, const std::string& algorithm);
EnvBundle env_from_config(const Config& c);

}  // namespace etdlab
