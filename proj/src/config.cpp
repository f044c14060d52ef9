#include "etdlab/config.hpp"

#include <fstream>
#include <set>

#include "etdlab/errors.hpp"

namespace etdlab {

namespace {

template <typename T>
void read(const Json& doc, const char* key, T& field) {
  if (!doc.contains(key) || doc[key].is_null()) return;
  try {
    field = doc[key].get<T>();
  } catch (const Json::exception&) {
    throw ContractViolation(std::string("config field '") + key + "' has the wrong type");
  }
}

template <typename T>
void read(const Json& doc, const char* key, std::optional<T>& field) {
  if (!doc.contains(key) || doc[key].is_null()) return;
  T value{};
  read(doc, key, value);
  field = std::move(value);
}

template <typename T>
void write(Json& doc, const char* key, const std::optional<T>& field) {
  if (field) doc[key] = *field;
}

}  // namespace

Json config_to_json(const Config& c) {
  Json doc{{"env", c.env},
           {"env_seed", c.env_seed},
           {"num_states", c.num_states},
           {"num_actions", c.num_actions},
           {"feature_dim", c.feature_dim},
           {"algorithms", c.algorithms},
           {"n", c.n},
           {"alpha", c.alpha},
           {"rho_bar", c.rho_bar},
           {"c_bar", c.c_bar},
           {"trace_rho_bar", c.trace_rho_bar},
           {"eta", c.eta},
           {"frozen_window", c.frozen_window},
           {"ace", c.ace},
           {"alphas", c.alphas},
           {"ns", c.ns},
           {"paper_grid", c.paper_grid},
           {"seeds", c.seeds},
           {"record_every", c.record_every},
           {"unweighted", c.unweighted},
           {"variant", c.variant},
           {"out", c.out},
           {"jobs", c.jobs}};
  write(doc, "gamma", c.gamma);
  write(doc, "reward", c.reward);
  write(doc, "features_path", c.features_path);
  write(doc, "mdp_file", c.mdp_file);
  write(doc, "scheme", c.scheme);
  write(doc, "beta", c.beta);
  write(doc, "max_trace", c.max_trace);
  write(doc, "steps", c.steps);
  write(doc, "theta0", c.theta0);
  return doc;
}

Config config_from_json(const Json& doc) {
  if (!doc.is_object()) throw ContractViolation("config must be a JSON object");
  static const std::set<std::string> known{
      "env",   "gamma",   "reward",  "features_path", "mdp_file",      "env_seed",   "num_states", "num_actions",
      "feature_dim", "algorithms", "scheme", "n", "alpha", "rho_bar", "c_bar", "trace_rho_bar", "beta", "eta",
      "max_trace", "frozen_window", "ace", "alphas", "ns", "paper_grid", "seeds", "steps", "record_every",
      "theta0", "unweighted", "variant", "out", "jobs"};
  for (const auto& [key, _] : doc.items())
    if (!known.count(key)) throw ContractViolation("unknown config field '" + key + "'");
  Config c;
  read(doc, "env", c.env);
  read(doc, "gamma", c.gamma);
  read(doc, "reward", c.reward);
  read(doc, "features_path", c.features_path);
  read(doc, "mdp_file", c.mdp_file);
  read(doc, "env_seed", c.env_seed);
  read(doc, "num_states", c.num_states);
  read(doc, "num_actions", c.num_actions);
  read(doc, "feature_dim", c.feature_dim);
  read(doc, "algorithms", c.algorithms);
  read(doc, "scheme", c.scheme);
  read(doc, "n", c.n);
  read(doc, "alpha", c.alpha);
  read(doc, "rho_bar", c.rho_bar);
  read(doc, "c_bar", c.c_bar);
  read(doc, "trace_rho_bar", c.trace_rho_bar);
  read(doc, "beta", c.beta);
  read(doc, "eta", c.eta);
  read(doc, "max_trace", c.max_trace);
  read(doc, "frozen_window", c.frozen_window);
  read(doc, "ace", c.ace);
  read(doc, "alphas", c.alphas);
  read(doc, "ns", c.ns);
  read(doc, "paper_grid", c.paper_grid);
  read(doc, "seeds", c.seeds);
  read(doc, "steps", c.steps);
  read(doc, "record_every", c.record_every);
  read(doc, "theta0", c.theta0);
  read(doc, "unweighted", c.unweighted);
  read(doc, "variant", c.variant);
  read(doc, "out", c.out);
  read(doc, "jobs", c.jobs);
  return c;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ContractViolation("cannot open config file " + path);
  try {
    return config_from_json(Json::parse(in));
  } catch (const Json::parse_error& e) {
    throw ContractViolation("cannot parse config " + path + ": " + e.what());
  }
}

AlgorithmSpec spec_from_config(const Config& c, const std::string& algorithm) {
  const Algorithm a = parse_algorithm(algorithm);
  std::optional<Scheme> scheme;
  if (c.scheme) scheme = parse_scheme(*c.scheme);
  AlgorithmSpec spec = make_spec(a, c.n, scheme);
  spec.trace_weights.rho_bar = c.trace_rho_bar;
  spec.trace_weights.beta = c.beta;
  spec.trace_weights.eta = c.eta;
  spec.trace_weights.max_trace = c.max_trace;
  if (spec.target_clips) spec.target_clips = TargetClips{c.rho_bar, c.c_bar};
  spec.frozen_window = c.frozen_window;
  spec.ace = c.ace;
  validate(spec);
  return spec;
}

EnvBundle env_from_config(const Config& c) {
  if (c.mdp_file) {
    auto file = load_mdp_file(*c.mdp_file);
    return {c.env.empty() ? "custom" : c.env, std::move(file.mdp), std::move(file.target),
            std::move(file.behavior)};
  }
  EnvOptions opts;
  opts.gamma = c.gamma;
  opts.reward = c.reward;
  opts.seed = c.env_seed;
  opts.num_states = c.num_states;
  opts.num_actions = c.num_actions;
  opts.feature_dim = c.feature_dim;
  if (c.features_path) {
    std::ifstream in(*c.features_path);
    if (!in) throw InvalidModel("cannot open features file " + *c.features_path);
    opts.features = matrix_from_json(Json::parse(in));
  }
  return make_env(c.env, opts);
}

}  // namespace etdlab
