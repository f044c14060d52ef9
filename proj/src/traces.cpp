#include "etdlab/traces.hpp"

#include <algorithm>
#include <cmath>

#include "etdlab/errors.hpp"

namespace etdlab {

EmphasisState EmphasisState::followon(std::optional<double> max_trace) {
  EmphasisState s;
  s.kind_ = TraceKind::followon;
  s.max_trace_ = max_trace;
  return s;
}

EmphasisState EmphasisState::netd(std::size_t n, std::optional<double> max_trace) {
  if (n == 0) throw ContractViolation("NETD window must be at least 1");
  EmphasisState s;
  s.kind_ = TraceKind::netd;
  s.n_ = n;
  s.delay_.assign(n, 1.0);
  s.factors_.assign(n, 1.0);
  s.max_trace_ = max_trace;
  return s;
}

double EmphasisState::block_weight() const {
  double w = 1.0;
  for (double f : factors_) w *= f;
  return w;
}

double EmphasisState::advance(double factor) {
  if (t_ < 0 || kind_ == TraceKind::none) {
    ++t_;
    value_ = 1.0;
    return value_;
  }
  if (kind_ == TraceKind::followon) return followon_step(*this, factor, 1.0);
  if (factor < 0.0 || std::isnan(factor)) throw ContractViolation("trace factor must be nonnegative");
  const auto next = static_cast<std::size_t>(t_ + 1);
  factors_[next % n_] = factor;
  if (next < n_) {
    // Initial slots stay at 1.
    t_ = static_cast<long long>(next);
    value_ = 1.0;
    return value_;
  }
  return netd_step(*this, block_weight());
}

double followon_step(EmphasisState& state, double gamma_t, double rho_prev) {
  if (state.kind_ != TraceKind::followon) throw ContractViolation("followon_step on a non-followon state");
  if (gamma_t < 0.0 || rho_prev < 0.0 || std::isnan(gamma_t) || std::isnan(rho_prev))
    throw ContractViolation("follow-on inputs must be nonnegative");
  double f = state.t_ < 0 ? 1.0 : gamma_t * rho_prev * state.value_ + 1.0;
  if (state.max_trace_) f = std::min(f, *state.max_trace_);
  ++state.t_;
  state.value_ = f;
  return f;
}

double netd_step(EmphasisState& state, double block_weight) {
  if (state.kind_ != TraceKind::netd) throw ContractViolation("netd_step on a non-netd state");
  const long long t = state.t_ + 1;
  if (t < static_cast<long long>(state.n_))
    throw ContractViolation("NETD trace needs n steps of history before it can be advanced");
  if (block_weight < 0.0 || std::isnan(block_weight))
    throw ContractViolation("NETD block weight must be nonnegative");
  const std::size_t slot = static_cast<std::size_t>(t) % state.n_;
  double f = block_weight * state.delay_[slot] + 1.0;
  if (state.max_trace_) f = std::min(f, *state.max_trace_);
  state.delay_[slot] = f;
  state.t_ = t;
  state.value_ = f;
  return f;
}

double lambda_schedule(std::size_t t, std::size_t n) {
  if (n == 0) throw ContractViolation("window length must be at least 1");
  return t % n == 0 ? 0.0 : 1.0;
}

double lambda_v_schedule(std::size_t t, std::size_t n, double rho_t, double rho_bar) {
  if (n == 0) throw ContractViolation("window length must be at least 1");
  if (t % n == 0) return 0.0;
  if (!(rho_t > 0.0)) throw CoverageError("lambda^v needs a positive IS ratio inside a window");
  return std::min(rho_bar, rho_t) / rho_t;
}

double vtrace_normalizer(const Policy& pi, const Policy& mu, double rho_bar, std::size_t s) {
  double nu = 0.0;
  for (std::size_t a = 0; a < pi.num_actions(); ++a)
    if (mu(s, a) > 0.0) nu += std::min(rho_bar * mu(s, a), pi(s, a));
  return nu;
}

double rho_v(const Policy& pi, const Policy& mu, double rho_bar, std::size_t s, std::size_t a) {
  if (!(rho_bar > 0.0)) throw ContractViolation("rho_bar must be positive");
  const double nu = vtrace_normalizer(pi, mu, rho_bar, s);
  if (!(nu > 0.0))
    throw DegeneratePolicyError("clipped target policy has an all-zero row at state " + std::to_string(s));
  const double rho = is_ratio(pi, mu, s, a);
  return std::min(rho_bar, rho) / nu;
}

}  // namespace etdlab
