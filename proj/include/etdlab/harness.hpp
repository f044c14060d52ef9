#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "etdlab/envs.hpp"
#include "etdlab/learners.hpp"
#include "etdlab/mdp_json.hpp"

namespace etdlab {

/// Score given to a diverged run, and the cap on its recorded error.
inline constexpr double kDivergencePenalty = 1e8;

/// Default theta_0: Baird (1,1,1,1,1,1,10,1), two-state 1, everything else 0.
Vector default_theta0(const std::string& env, std::size_t feature_dim);
/// Default run length: two-state 20k, Collision 100 episodes of 100 steps, Baird 100k.
std::size_t default_steps(const std::string& env);

/// Everything a run needs besides the spec, shared read-only across runs.
struct EvalContext {
  std::shared_ptr<const EnvBundle> env;
  Vector state_weights;  // d_mu, or uniform when unweighted
  Vector v_target;       // v_pi
  Vector theta0;
};

EvalContext make_eval_context(EnvBundle env, bool unweighted = false, std::optional<Vector> theta0 = std::nullopt);

/// sqrt(sum_s w(s) (theta.phi(s) - v(s))^2)
double rmsve(const EvalContext& ctx, const Vector& theta);

struct RunRecord {
  std::string spec_id;
  std::string env;
  std::uint64_t seed = 0;
  double alpha = 0.0;
  std::size_t n = 1;
  std::size_t record_every = 1;
  /// Errors at steps 0, record_every, 2*record_every, ...; after divergence
  /// the remaining entries hold kDivergencePenalty.
  std::vector<double> rmsve;
  bool diverged = false;
  Vector final_theta;

  double initial() const { return rmsve.front(); }
  double final() const { return rmsve.back(); }
  /// Mean of the series, or kDivergencePenalty for a diverged run.
  double time_averaged() const;

  bool operator==(const RunRecord& o) const;
};

/// One run on a fresh behavior stream seeded by `seed` alone, so every spec
/// and step size sees the same experience for a given seed.
RunRecord run_evaluation(const EvalContext& ctx, const AlgorithmSpec& spec, double alpha, std::size_t steps,
                         std::uint64_t seed, std::size_t record_every);

struct SweepGrid {
  std::vector<AlgorithmSpec> specs;  // each spec's n is replaced by the grid value
  std::vector<double> alphas;
  std::vector<std::size_t> ns;
  std::vector<std::uint64_t> seeds;
  std::size_t steps = 0;
  std::size_t record_every = 100;
};

/// alpha = 2^-14 ... 2^-2, n = 1 ... 5.
std::vector<double> grid_alphas();
std::vector<std::size_t> grid_ns();

struct CellStats {
  std::size_t spec_index = 0;
  std::string spec_id;
  double alpha = 0.0;
  std::size_t n = 1;
  double mean = 0.0;  // of time-averaged RMSVE across seeds
  double std = 0.0;   // population convention
  double diverged_fraction = 0.0;
  std::size_t first_run = 0;  // runs[first_run .. first_run + seeds)
};

struct SweepResult {
  std::string env;
  std::vector<CellStats> cells;
  std::vector<RunRecord> runs;  // cell-major, seed-minor
  std::size_t seeds_per_cell = 0;

  /// Cell with the lowest mean for `spec_id`, optionally restricted to one n.
  const CellStats& best_cell(const std::string& spec_id, std::optional<std::size_t> n = std::nullopt) const;
  /// spec ids in first-seen order.
  std::vector<std::string> spec_ids() const;
  std::vector<RunRecord> cell_runs(const CellStats& cell) const;
};

/// OpenMP sweep; `jobs` caps the thread count (0 = runtime default).
SweepResult sweep(const EvalContext& ctx, const SweepGrid& grid, int jobs = 0);
/// Single-threaded reference; results are bitwise identical to `sweep`.
SweepResult sweep_serial(const EvalContext& ctx, const SweepGrid& grid);

struct AggregateCurve {
  std::vector<double> mean;
  std::vector<double> std;  // population convention: divide by k
  double diverged_fraction = 0.0;
};

/// Pointwise statistics over records sharing (env, spec, alpha, n).
AggregateCurve aggregate(const std::vector<RunRecord>& records);

/// step,seed,alpha,n,rmsve,diverged
void write_runs_csv(std::ostream& out, const std::vector<RunRecord>& records);
Json sweep_summary_json(const SweepResult& result, const SweepGrid& grid);
/// Writes summary.json and one CSV per cell into `dir`.
void write_sweep(const std::string& dir, const SweepResult& result, const SweepGrid& grid);
std::string cell_csv_name(const CellStats& cell);

struct ActorCriticRecord {
  Vector final_theta;
  Matrix final_policy;  // pi_w[s][a]
  bool diverged = false;
};

/// Toy off-policy actor-critic on a fixed behavior stream.
ActorCriticRecord run_actor_critic(const EvalContext& ctx, const AlgorithmSpec& spec, double alpha_v,
                                   double alpha_pi, std::size_t steps, std::uint64_t seed,
                                   double entropy_coef = 0.0);

}  // namespace etdlab
