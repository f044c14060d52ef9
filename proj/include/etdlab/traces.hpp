#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "etdlab/mdp.hpp"

namespace etdlab {

enum class TraceKind { none, followon, netd };

/// How IS ratios are transformed before entering a trace recursion.
enum class RhoTransform { raw, clipped, vtrace_policy };

struct TraceWeights {
  RhoTransform rho_transform = RhoTransform::raw;
  /// Clip threshold for `clipped`; for `vtrace_policy` the target's rho_bar is used.
  double rho_bar = 1.0;
  /// Replaces gamma in the recursion. A zero gamma (restart) still resets the trace.
  std::optional<double> beta;
  double eta = 1.0;
  /// Hard ceiling on the trace value itself.
  std::optional<double> max_trace;
};

/// Follow-on scalar or NETD delay line, advanced one time step at a time.
///
/// Step 0 yields 1. Each later step takes the factor gamma_t * w_{t-1}
/// linking t-1 to t, already transformed and beta-substituted.
class EmphasisState {
 public:
  EmphasisState() = default;
  static EmphasisState followon(std::optional<double> max_trace = std::nullopt);
  static EmphasisState netd(std::size_t n, std::optional<double> max_trace = std::nullopt);

  TraceKind kind() const { return kind_; }
  std::size_t n() const { return n_; }
  /// Index of the most recent value, or -1 before the first call.
  long long t() const { return t_; }
  double value() const { return value_; }

  /// Produces the trace value for the next time step. The first call ignores `factor`.
  double advance(double factor);

  // Building blocks, exposed for tests.
  double& scalar() { return value_; }
  const std::vector<double>& delay_line() const { return delay_; }
  /// Product of the last n factors (netd kind, t >= n).
  double block_weight() const;

 private:
  friend double followon_step(EmphasisState&, double, double);
  friend double netd_step(EmphasisState&, double);

  TraceKind kind_ = TraceKind::none;
  std::size_t n_ = 1;
  long long t_ = -1;
  double value_ = 1.0;
  std::vector<double> delay_;    // F^(n) for the last n steps, slot t mod n
  std::vector<double> factors_;  // gamma_k w_{k-1} for the last n steps, slot k mod n
  std::optional<double> max_trace_;
};

/// F_t = gamma_t * rho_prev * F_{t-1} + 1. Throws ContractViolation on negative input.
double followon_step(EmphasisState& state, double gamma_t, double rho_prev);

/// F^(n)_t = block_weight * F^(n)_{t-n} + 1, overwriting the oldest slot.
/// Throws ContractViolation before n steps have been seen.
double netd_step(EmphasisState& state, double block_weight);

/// M = 1 - eta(1 - lambda) + eta(1 - lambda) F.
inline double wetd_emphasis(double trace, double lambda, double eta) {
  const double w = eta * (1.0 - lambda);
  return 1.0 - w + w * trace;
}

/// 0 at window starts (t mod n = 0), 1 elsewhere.
double lambda_schedule(std::size_t t, std::size_t n);

/// 0 at window starts, min(rho_bar, rho_t)/rho_t elsewhere.
double lambda_v_schedule(std::size_t t, std::size_t n, double rho_t, double rho_bar);

/// nu(s) = sum_a min(rho_bar mu(a|s), pi(a|s)).
double vtrace_normalizer(const Policy& pi, const Policy& mu, double rho_bar, std::size_t s);

/// min(rho_bar, pi/mu) / nu(s), i.e. pi_rho_bar(a|s) / mu(a|s).
double rho_v(const Policy& pi, const Policy& mu, double rho_bar, std::size_t s, std::size_t a);

/// The multiplier gamma_t would get in a recursion under `weights`.
inline double trace_discount(double gamma_t, const TraceWeights& weights) {
  if (weights.beta && gamma_t > 0.0) return *weights.beta;
  return gamma_t;
}

}  // namespace etdlab
