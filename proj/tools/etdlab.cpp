// etdlab command-line entry point: run, sweep, stability, list.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "etdlab/config.hpp"
#include "etdlab/errors.hpp"
#include "etdlab/harness.hpp"
#include "etdlab/stability.hpp"

namespace {

using namespace etdlab;

constexpr int kUsageError = 2;

struct Overrides {
  std::optional<std::string> env, features, mdp_file, scheme, variant, out;
  std::optional<double> gamma, reward, alpha, rho_bar, c_bar, trace_rho_bar, beta, eta, max_trace;
  std::optional<std::uint64_t> seed, env_seed;
  std::optional<std::size_t> seeds, steps, record_every, n;
  std::optional<int> jobs;
  std::vector<std::string> algorithms;
  std::vector<double> alphas;
  std::vector<std::size_t> ns;
  bool paper_grid = false, frozen_window = false, unweighted = false, ace = false, emit_config = false;
  std::string config_path;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "JSON config file; flags override its fields");
  cmd->add_option("--env", o.env, "two-state, collision, baird or random");
  cmd->add_option("--gamma", o.gamma, "Discount override");
  cmd->add_option("--reward", o.reward, "Collision reward on entering S9");
  cmd->add_option("--features", o.features, "JSON file holding the feature matrix");
  cmd->add_option("--mdp-file", o.mdp_file, "JSON MDP (with optional target/behavior policies)");
  cmd->add_option("--env-seed", o.env_seed, "Seed for the random environment");
  cmd->add_option("--n", o.n, "Window length");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_flag("--emit-config", o.emit_config, "Print the effective config as JSON and exit");
}

void add_learning(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--scheme", o.scheme, "fixed or mixed");
  cmd->add_option("--rho-bar", o.rho_bar, "Target clip rho_bar (V-trace family)");
  cmd->add_option("--c-bar", o.c_bar, "Target clip c_bar (V-trace family)");
  cmd->add_option("--trace-rho-bar", o.trace_rho_bar, "Trace clip for clip-netd / clip-wetd");
  cmd->add_option("--beta", o.beta, "Replaces gamma inside the trace recursion");
  cmd->add_option("--eta", o.eta, "Emphasis interpolation in (0, 1]");
  cmd->add_option("--max-trace", o.max_trace, "Ceiling on the trace value");
  cmd->add_flag("--frozen-window", o.frozen_window, "Mixed scheme: freeze theta within a window");
  cmd->add_flag("--unweighted", o.unweighted, "Uniform state weights in RMSVE");
  cmd->add_option("--seed", o.seed, "First seed (default: $ETDLAB_SEED or 0)");
  cmd->add_option("--seeds", o.seeds, "Number of consecutive seeds");
  cmd->add_option("--steps", o.steps, "Transitions per run");
  cmd->add_option("--record-every", o.record_every, "RMSVE sampling period");
  cmd->add_option("--jobs", o.jobs, "Concurrent runs (0 = all cores)");
}

Config resolve(const Overrides& o) {
  Config c = o.config_path.empty() ? Config{} : load_config(o.config_path);
  if (o.config_path.empty()) {
    if (const char* env_seed = std::getenv("ETDLAB_SEED")) {
      try {
        c.seeds = {std::stoull(env_seed)};
      } catch (const std::exception&) {
        throw ContractViolation(std::string("ETDLAB_SEED is not an unsigned integer: ") + env_seed);
      }
    }
  }
  if (o.env) c.env = *o.env;
  if (o.gamma) c.gamma = o.gamma;
  if (o.reward) c.reward = o.reward;
  if (o.features) c.features_path = o.features;
  if (o.mdp_file) c.mdp_file = o.mdp_file;
  if (o.env_seed) c.env_seed = *o.env_seed;
  if (o.n) c.n = *o.n;
  if (o.out) c.out = *o.out;
  if (o.scheme) c.scheme = o.scheme;
  if (o.alpha) c.alpha = *o.alpha;
  if (o.rho_bar) c.rho_bar = *o.rho_bar;
  if (o.c_bar) c.c_bar = *o.c_bar;
  if (o.trace_rho_bar) c.trace_rho_bar = *o.trace_rho_bar;
  if (o.beta) c.beta = o.beta;
  if (o.eta) c.eta = *o.eta;
  if (o.max_trace) c.max_trace = o.max_trace;
  if (o.frozen_window) c.frozen_window = true;
  if (o.unweighted) c.unweighted = true;
  if (o.ace) c.ace = true;
  if (o.steps) c.steps = o.steps;
  if (o.record_every) c.record_every = *o.record_every;
  if (o.jobs) c.jobs = *o.jobs;
  if (o.variant) c.variant = *o.variant;
  if (!o.algorithms.empty()) c.algorithms = o.algorithms;
  if (!o.alphas.empty()) c.alphas = o.alphas;
  if (!o.ns.empty()) c.ns = o.ns;
  if (o.paper_grid) c.paper_grid = true;
  if (o.seed || o.seeds) {
    std::uint64_t base = o.seed ? *o.seed : (c.seeds.empty() ? 0 : c.seeds.front());
    const std::size_t count = o.seeds.value_or(1);
    c.seeds.clear();
    for (std::size_t k = 0; k < count; ++k) c.seeds.push_back(base + k);
  }
  return c;
}

EvalContext context_for(const Config& c) {
  std::optional<Vector> theta0;
  if (c.theta0) theta0 = Eigen::Map<const Vector>(c.theta0->data(), static_cast<Eigen::Index>(c.theta0->size()));
  return make_eval_context(env_from_config(c), c.unweighted, theta0);
}

std::string csv_name(const std::string& env, const AlgorithmSpec& spec) {
  return env + "_" + to_string(spec.algorithm) + "_" + to_string(spec.scheme) + ".csv";
}

int cmd_run(const Config& c) {
  if (c.seeds.empty()) throw ContractViolation("seed list is empty");
  if (c.algorithms.empty()) throw ContractViolation("no algorithm given");
  std::vector<AlgorithmSpec> specs;
  for (const auto& a : c.algorithms) specs.push_back(spec_from_config(c, a));
  const EvalContext ctx = context_for(c);
  const std::size_t steps = c.steps.value_or(default_steps(ctx.env->name));
  std::filesystem::create_directories(c.out);
  for (const auto& spec : specs) {
    SweepGrid grid{{spec}, {c.alpha}, {spec.n}, c.seeds, steps, c.record_every};
    const SweepResult result = sweep(ctx, grid, c.jobs);
    const auto path = std::filesystem::path(c.out) / csv_name(ctx.env->name, spec);
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    write_runs_csv(out, result.runs);
    std::size_t diverged = 0;
    for (const auto& r : result.runs) diverged += r.diverged ? 1 : 0;
    std::cout << path.string() << ": " << result.runs.size() << " runs, " << diverged << " diverged, mean time-averaged RMSVE "
              << result.cells.front().mean << '\n';
  }
  return 0;
}

int cmd_sweep(const Config& c) {
  if (c.seeds.empty()) throw ContractViolation("seed list is empty");
  if (c.algorithms.empty()) throw ContractViolation("no algorithm given");
  std::vector<AlgorithmSpec> specs;
  for (const auto& a : c.algorithms) specs.push_back(spec_from_config(c, a));
  const EvalContext ctx = context_for(c);
  SweepGrid grid;
  grid.specs = specs;
  grid.alphas = c.paper_grid ? grid_alphas() : (c.alphas.empty() ? std::vector<double>{c.alpha} : c.alphas);
  grid.ns = c.paper_grid ? grid_ns() : (c.ns.empty() ? std::vector<std::size_t>{c.n} : c.ns);
  grid.seeds = c.seeds;
  grid.steps = c.steps.value_or(default_steps(ctx.env->name));
  grid.record_every = c.record_every;
  const SweepResult result = sweep(ctx, grid, c.jobs);
  write_sweep(c.out, result, grid);
  std::cout << (std::filesystem::path(c.out) / "summary.json").string() << ": " << result.cells.size() << " cells\n";
  for (const auto& id : result.spec_ids()) {
    const auto& best = result.best_cell(id);
    std::cout << "  best " << id << ": alpha=" << best.alpha << " n=" << best.n << " mean=" << best.mean << '\n';
  }
  return 0;
}

int cmd_stability(const Config& c) {
  const KeyVariant variant = parse_key_variant(c.variant);
  const EnvBundle env = env_from_config(c);
  const auto report = key_matrix(env.mdp, env.target, env.behavior, c.n, variant, TargetClips{c.rho_bar, c.c_bar});
  const Json doc{{"variant", to_string(report.variant)},
                 {"key_matrix", matrix_to_json(report.key_matrix)},
                 {"projected_A", matrix_to_json(report.projected_A)},
                 {"min_sym_eig", report.min_sym_eig},
                 {"stable", report.stable},
                 {"approximate", report.approximate}};
  std::cout << doc.dump(2) << '\n';
  return 0;
}

int cmd_list() {
  std::cout << "environments:";
  for (const auto& n : env_names()) std::cout << ' ' << n;
  std::cout << "\nalgorithms:";
  for (const auto& n : algorithm_names()) std::cout << ' ' << n;
  std::cout << "\nschemes: fixed mixed\nvariants:";
  for (const auto& n : key_variant_names()) std::cout << ' ' << n;
  std::cout << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Off-policy emphatic TD experiments with linear function approximation"};
  app.require_subcommand(1);
  Overrides o;

  auto* run = app.add_subcommand("run", "Run one algorithm at one step size over several seeds");
  add_common(run, o);
  add_learning(run, o);
  run->add_option("--alg", o.algorithms, "Algorithm name (repeatable)");
  run->add_option("--alpha", o.alpha, "Step size");
  run->add_flag("--ace", o.ace, "Apply emphasis to the policy gradient as well");

  auto* sw = app.add_subcommand("sweep", "Grid over algorithms, step sizes, window lengths and seeds");
  add_common(sw, o);
  add_learning(sw, o);
  sw->add_option("--alg", o.algorithms, "Algorithm name (repeatable)");
  sw->add_option("--alpha", o.alpha, "Single step size when no grid is given");
  sw->add_option("--alphas", o.alphas, "Step-size grid")->delimiter(',');
  sw->add_option("--ns", o.ns, "Window-length grid")->delimiter(',');
  sw->add_flag("--paper-grid", o.paper_grid, "alpha = 2^-14..2^-2, n = 1..5");

  auto* st = app.add_subcommand("stability", "Closed-form key matrix report as JSON");
  add_common(st, o);
  st->add_option("--variant", o.variant, "nstep, netd_emphatic, vtrace, wevtrace_emphatic, nevtrace_emphatic");
  st->add_option("--rho-bar", o.rho_bar, "V-trace rho_bar");
  st->add_option("--c-bar", o.c_bar, "V-trace c_bar");

  auto* ls = app.add_subcommand("list", "Print valid names");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (ls->parsed()) return cmd_list();
    const Config c = resolve(o);
    if (o.emit_config) {
      std::cout << config_to_json(c).dump(2) << '\n';
      return 0;
    }
    if (run->parsed()) return cmd_run(c);
    if (sw->parsed()) return cmd_sweep(c);
    if (st->parsed()) return cmd_stability(c);
  } catch (const ContractViolation& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const InvalidModel& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kUsageError;
}
