#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "etdlab/mdp.hpp"
#include "etdlab/traces.hpp"

namespace etdlab {

inline constexpr double kDivergenceThreshold = 1e8;

struct LinearValueFn {
  Vector theta;
  double operator()(const TabularMdp& mdp, std::size_t s) const { return mdp.phi(s).dot(theta); }
};

enum class Algorithm { nstep_td, netd, wetd, clip_netd, clip_wetd, vtrace, nevtrace, wevtrace };
enum class Scheme { fixed, mixed };

struct TargetClips {
  double rho_bar = 1.0;
  double c_bar = 1.0;
};

struct AlgorithmSpec {
  Algorithm algorithm = Algorithm::nstep_td;
  Scheme scheme = Scheme::fixed;
  std::size_t n = 1;
  TraceWeights trace_weights;
  std::optional<TargetClips> target_clips;
  bool ace = false;
  /// Mixed scheme only: every inner update of a window uses the window-start theta.
  bool frozen_window = false;
};

const std::vector<std::string>& algorithm_names();
std::string to_string(Algorithm a);
std::string to_string(Scheme s);
/// Throws ContractViolation listing valid names.
Algorithm parse_algorithm(const std::string& name);
Scheme parse_scheme(const std::string& name);

TraceKind trace_kind(Algorithm a);
bool is_vtrace_family(Algorithm a);
bool is_emphatic(Algorithm a);

/// A spec with the defaults for `a`: the scheme it requires (fixed for the
/// baselines), clip thresholds of 1 where relevant.
AlgorithmSpec make_spec(Algorithm a, std::size_t n = 1, std::optional<Scheme> scheme = std::nullopt);

/// Throws ContractViolation for combinations outside the supported table,
/// naming the offending pair.
void validate(const AlgorithmSpec& spec);

/// Short identifier, e.g. "clip-netd/fixed".
std::string spec_id(const AlgorithmSpec& spec);

/// Per-(s, a) weights resolved from a spec and a policy pair.
struct WeightTables {
  Matrix rho;       // pi/mu
  Matrix trace;     // weight entering the trace recursion
  Matrix target_r;  // weight on each TD error
  Matrix target_c;  // weight on each continuation
};
WeightTables make_weight_tables(const AlgorithmSpec& spec, const Policy& pi, const Policy& mu);

/// delta = r + gamma' theta.phi(s') - theta.phi(s).
double td_error(const Vector& theta, const Transition& tr, const TabularMdp& mdp);

/// sum_i (prod_{j<i} c_j gamma_{j+1}) r_i delta_i over the window.
double nstep_error(const Vector& theta, std::span<const Transition> window, std::span<const double> r,
                   std::span<const double> c, const TabularMdp& mdp);

/// nstep_error times phi(S_t). Throws ContractViolation if the window exceeds `n`.
Vector nstep_update_direction(const Vector& theta, std::span<const Transition> window,
                              std::span<const double> r, std::span<const double> c,
                              const TabularMdp& mdp, std::size_t n);

/// V(S_t) + sum_i (prod_{j<i} min(c_bar, rho_j) gamma_{j+1}) min(rho_bar, rho_i) delta_i.
double vtrace_target(const Vector& theta, std::span<const Transition> window, const Policy& pi,
                     const Policy& mu, double rho_bar, double c_bar, const TabularMdp& mdp);

/// pi_rho_bar(a|s) = min(rho_bar mu(a|s), pi(a|s)) / nu(s).
Policy vtrace_fixed_point_policy(const Policy& pi, const Policy& mu, double rho_bar);

/// Forward-view off-policy lambda-return over `traj` starting at its first element:
///   V(S_t) + sum_i (prod_{j<i} rho_j gamma_{j+1} lambda_j) lambda_i rho_i delta_i.
/// lambda[0] is the weight at the start index; for a windowed schedule that is
/// the in-window value (1, or rho_bar_t/rho_t), not the boundary zero.
double td_lambda_return(const Vector& theta, std::span<const Transition> traj, std::span<const double> rho,
                        std::span<const double> lambda, const TabularMdp& mdp);

/// Streaming learner for one spec. Fixed scheme: one update per step once
/// n transitions are buffered. Mixed scheme: n inner updates per window.
class Learner {
 public:
  Learner(const TabularMdp& mdp, AlgorithmSpec spec, WeightTables weights, Vector theta0);

  /// Consumes one transition and applies every update it unlocks.
  /// Returns false once the parameters have diverged; later calls do nothing.
  bool observe(const Transition& tr, double alpha);

  const Vector& theta() const { return theta_; }
  bool diverged() const { return diverged_; }
  std::size_t updates() const { return updates_; }
  const AlgorithmSpec& spec() const { return spec_; }
  /// Emphasis applied by the most recent update.
  double last_emphasis() const { return last_emphasis_; }

 private:
  void update_at(std::size_t offset, double emphasis, double alpha, const Vector& theta_for_error);
  void check_divergence();

  const TabularMdp* mdp_;
  AlgorithmSpec spec_;
  WeightTables weights_;
  Vector theta_;
  EmphasisState emphasis_;
  std::vector<Transition> buffer_;
  std::vector<double> r_, c_;
  std::size_t next_index_ = 0;  // global index of buffer_[0]
  double pending_factor_ = 1.0;
  double last_emphasis_ = 1.0;
  std::size_t updates_ = 0;
  bool diverged_ = false;
};

/// Feeds a stretch of transitions to a learner; stops early on divergence.
void apply_algorithm_step(Learner& learner, std::span<const Transition> stream, double alpha);

/// pi_w(a|s) proportional to exp(phi(s)^T w[:, a]).
class SoftmaxPolicy {
 public:
  SoftmaxPolicy(std::size_t feature_dim, std::size_t num_actions);
  explicit SoftmaxPolicy(Matrix w) : w_(std::move(w)) {}

  Vector probs(const TabularMdp& mdp, std::size_t s) const;
  Policy as_policy(const TabularMdp& mdp) const;
  /// d log pi_w(a|s) / dw, shaped like w.
  Matrix grad_log(const TabularMdp& mdp, std::size_t s, std::size_t a) const;

  Matrix& w() { return w_; }
  const Matrix& w() const { return w_; }

 private:
  Matrix w_;
};

/// Off-policy actor-critic with a V-trace critic on fixed windows. The same
/// emphasis multiplies the critic step and, when spec.ace is set, the actor step.
class ActorCritic {
 public:
  ActorCritic(const TabularMdp& mdp, const Policy& behavior, AlgorithmSpec spec, Vector theta0,
              SoftmaxPolicy actor, double entropy_coef = 0.0);

  bool observe(const Transition& tr, double alpha_v, double alpha_pi);

  const Vector& theta() const { return theta_; }
  const SoftmaxPolicy& actor() const { return actor_; }
  bool diverged() const { return diverged_; }

 private:
  const TabularMdp* mdp_;
  const Policy* behavior_;
  AlgorithmSpec spec_;
  Vector theta_;
  SoftmaxPolicy actor_;
  double entropy_coef_;
  EmphasisState emphasis_;
  std::vector<Transition> buffer_;
  double pending_factor_ = 1.0;
  bool diverged_ = false;
};

/// One window of the actor-critic update: critic on window[0], actor on A_t.
/// `emphasis` is M_t; pass 1 for the plain V-trace actor-critic.
void ace_actor_critic_step(const AlgorithmSpec& spec, Vector& theta, SoftmaxPolicy& actor, double emphasis,
                           std::span<const Transition> window, const TabularMdp& mdp, const Policy& behavior,
                           double alpha_v, double alpha_pi, double entropy_coef = 0.0);

}  // namespace etdlab
