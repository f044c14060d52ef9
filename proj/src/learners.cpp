#include "etdlab/learners.hpp"

#include <algorithm>
#include <cmath>

#include "etdlab/errors.hpp"

namespace etdlab {

namespace {

struct AlgorithmRow {
  Algorithm algorithm;
  const char* name;
  TraceKind trace;
  RhoTransform transform;
  std::optional<Scheme> required_scheme;
  bool vtrace_target;
};

constexpr AlgorithmRow kRows[] = {
    {Algorithm::nstep_td, "nstep-td", TraceKind::none, RhoTransform::raw, std::nullopt, false},
    {Algorithm::netd, "netd", TraceKind::netd, RhoTransform::raw, Scheme::fixed, false},
    {Algorithm::wetd, "wetd", TraceKind::followon, RhoTransform::raw, Scheme::mixed, false},
    {Algorithm::clip_netd, "clip-netd", TraceKind::netd, RhoTransform::clipped, Scheme::fixed, false},
    {Algorithm::clip_wetd, "clip-wetd", TraceKind::followon, RhoTransform::clipped, Scheme::mixed, false},
    {Algorithm::vtrace, "vtrace", TraceKind::none, RhoTransform::raw, std::nullopt, true},
    {Algorithm::nevtrace, "nevtrace", TraceKind::netd, RhoTransform::vtrace_policy, Scheme::fixed, true},
    {Algorithm::wevtrace, "wevtrace", TraceKind::followon, RhoTransform::vtrace_policy, Scheme::mixed, true},
};

const AlgorithmRow& row(Algorithm a) {
  for (const auto& r : kRows)
    if (r.algorithm == a) return r;
  throw ContractViolation("unknown algorithm");
}

const char* transform_name(RhoTransform t) {
  switch (t) {
    case RhoTransform::raw: return "raw";
    case RhoTransform::clipped: return "clipped";
    case RhoTransform::vtrace_policy: return "vtrace_policy";
  }
  return "?";
}

double value(const Vector& theta, const TabularMdp& mdp, std::size_t s) { return mdp.phi(s).dot(theta); }

}  // namespace

const std::vector<std::string>& algorithm_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& r : kRows) out.emplace_back(r.name);
    return out;
  }();
  return names;
}

std::string to_string(Algorithm a) { return row(a).name; }
std::string to_string(Scheme s) { return s == Scheme::fixed ? "fixed" : "mixed"; }

Algorithm parse_algorithm(const std::string& name) {
  for (const auto& r : kRows)
    if (name == r.name) return r.algorithm;
  std::string valid;
  for (const auto& n : algorithm_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ContractViolation("unknown algorithm '" + name + "'; valid names: " + valid);
}

Scheme parse_scheme(const std::string& name) {
  if (name == "fixed") return Scheme::fixed;
  if (name == "mixed") return Scheme::mixed;
  throw ContractViolation("unknown update scheme '" + name + "'; valid names: fixed, mixed");
}

TraceKind trace_kind(Algorithm a) { return row(a).trace; }
bool is_vtrace_family(Algorithm a) { return row(a).vtrace_target; }
bool is_emphatic(Algorithm a) { return row(a).trace != TraceKind::none; }

AlgorithmSpec make_spec(Algorithm a, std::size_t n, std::optional<Scheme> scheme) {
  const auto& r = row(a);
  AlgorithmSpec spec;
  spec.algorithm = a;
  spec.n = n;
  spec.scheme = scheme.value_or(r.required_scheme.value_or(Scheme::fixed));
  spec.trace_weights.rho_transform = r.transform;
  if (r.vtrace_target) spec.target_clips = TargetClips{};
  return spec;
}

void validate(const AlgorithmSpec& spec) {
  const auto& r = row(spec.algorithm);
  const std::string name = r.name;
  if (spec.n < 1) throw ContractViolation("window length n must be at least 1");
  if (r.required_scheme && spec.scheme != *r.required_scheme)
    throw ContractViolation("algorithm '" + name + "' requires the " + to_string(*r.required_scheme) +
                            " update scheme, got '" + to_string(spec.scheme) + "'");
  const auto& tw = spec.trace_weights;
  if (r.trace != TraceKind::none && tw.rho_transform != r.transform)
    throw ContractViolation("algorithm '" + name + "' requires the '" + transform_name(r.transform) +
                            "' trace transform, got '" + transform_name(tw.rho_transform) + "'");
  if (r.vtrace_target != spec.target_clips.has_value())
    throw ContractViolation(r.vtrace_target ? "algorithm '" + name + "' requires target clips (rho_bar, c_bar)"
                                            : "algorithm '" + name + "' does not take target clips");
  if (spec.target_clips && !(spec.target_clips->rho_bar > 0.0 && spec.target_clips->c_bar > 0.0))
    throw ContractViolation("target clips rho_bar and c_bar must be positive");
  if (!(tw.rho_bar > 0.0)) throw ContractViolation("trace rho_bar must be positive");
  if (tw.beta && !(*tw.beta >= 0.0 && *tw.beta < 1.0)) throw ContractViolation("beta must lie in [0, 1)");
  if (!(tw.eta > 0.0 && tw.eta <= 1.0)) throw ContractViolation("eta must lie in (0, 1]");
  if (tw.max_trace && !(*tw.max_trace >= 1.0)) throw ContractViolation("max_trace must be at least 1");
}

std::string spec_id(const AlgorithmSpec& spec) { return to_string(spec.algorithm) + "/" + to_string(spec.scheme); }

WeightTables make_weight_tables(const AlgorithmSpec& spec, const Policy& pi, const Policy& mu) {
  validate(spec);
  if (pi.num_states() != mu.num_states() || pi.num_actions() != mu.num_actions())
    throw ContractViolation("target and behavior policies differ in shape");
  WeightTables w;
  w.rho = is_ratio_table(pi, mu);
  const auto ns = pi.num_states(), na = pi.num_actions();
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t a = 0; a < na; ++a)
      if (mu(s, a) == 0.0 && pi(s, a) > 0.0)
        throw CoverageError("behavior policy never takes action " + std::to_string(a) + " in state " +
                            std::to_string(s) + " but the target policy does");
  const auto& tw = spec.trace_weights;
  switch (tw.rho_transform) {
    case RhoTransform::raw: w.trace = w.rho; break;
    case RhoTransform::clipped: w.trace = w.rho.cwiseMin(tw.rho_bar); break;
    case RhoTransform::vtrace_policy: {
      const double rb = spec.target_clips ? spec.target_clips->rho_bar : tw.rho_bar;
      w.trace = Matrix::Zero(ns, na);
      for (std::size_t s = 0; s < ns; ++s)
        for (std::size_t a = 0; a < na; ++a)
          if (mu(s, a) > 0.0) w.trace(s, a) = rho_v(pi, mu, rb, s, a);
      break;
    }
  }
  if (spec.target_clips) {
    w.target_r = w.rho.cwiseMin(spec.target_clips->rho_bar);
    w.target_c = w.rho.cwiseMin(spec.target_clips->c_bar);
  } else {
    w.target_r = w.rho;
    w.target_c = w.rho;
  }
  return w;
}

double td_error(const Vector& theta, const Transition& tr, const TabularMdp& mdp) {
  return tr.reward + tr.discount_next * value(theta, mdp, tr.next_state) - value(theta, mdp, tr.state);
}

double nstep_error(const Vector& theta, std::span<const Transition> window, std::span<const double> r,
                   std::span<const double> c, const TabularMdp& mdp) {
  double acc = 0.0;
  double coef = 1.0;
  for (std::size_t i = 0; i < window.size(); ++i) {
    acc += coef * r[i] * td_error(theta, window[i], mdp);
    coef *= c[i] * window[i].discount_next;
    if (coef == 0.0) break;
  }
  return acc;
}

Vector nstep_update_direction(const Vector& theta, std::span<const Transition> window,
                              std::span<const double> r, std::span<const double> c,
                              const TabularMdp& mdp, std::size_t n) {
  if (window.empty() || window.size() > n) throw ContractViolation("window must hold between 1 and n transitions");
  if (r.size() < window.size() || c.size() < window.size())
    throw ContractViolation("one weight per transition is required");
  if (!is_chained(window)) throw ContractViolation("window transitions do not chain");
  return nstep_error(theta, window, r, c, mdp) * mdp.phi(window[0].state).transpose();
}

double vtrace_target(const Vector& theta, std::span<const Transition> window, const Policy& pi,
                     const Policy& mu, double rho_bar, double c_bar, const TabularMdp& mdp) {
  if (window.empty()) throw ContractViolation("V-trace target needs at least one transition");
  std::vector<double> r(window.size()), c(window.size());
  for (std::size_t i = 0; i < window.size(); ++i) {
    const double rho = is_ratio(pi, mu, window[i].state, window[i].action);
    r[i] = std::min(rho_bar, rho);
    c[i] = std::min(c_bar, rho);
  }
  return value(theta, mdp, window[0].state) + nstep_error(theta, window, r, c, mdp);
}

Policy vtrace_fixed_point_policy(const Policy& pi, const Policy& mu, double rho_bar) {
  Matrix out(pi.num_states(), pi.num_actions());
  for (std::size_t s = 0; s < pi.num_states(); ++s) {
    const double nu = vtrace_normalizer(pi, mu, rho_bar, s);
    if (!(nu > 0.0))
      throw DegeneratePolicyError("clipped target policy has an all-zero row at state " + std::to_string(s));
    for (std::size_t a = 0; a < pi.num_actions(); ++a)
      out(s, a) = mu(s, a) > 0.0 ? std::min(rho_bar * mu(s, a), pi(s, a)) / nu : 0.0;
    // Renormalize once more so rounding cannot push the row sum past tolerance.
    out.row(s) /= out.row(s).sum();
  }
  return Policy(std::move(out));
}

double td_lambda_return(const Vector& theta, std::span<const Transition> traj, std::span<const double> rho,
                        std::span<const double> lambda, const TabularMdp& mdp) {
  if (traj.empty()) throw ContractViolation("lambda-return needs at least one transition");
  double g = value(theta, mdp, traj[0].state);
  double prod = 1.0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    g += prod * lambda[i] * rho[i] * td_error(theta, traj[i], mdp);
    prod *= rho[i] * traj[i].discount_next * lambda[i];
    if (prod == 0.0) break;
  }
  return g;
}

Learner::Learner(const TabularMdp& mdp, AlgorithmSpec spec, WeightTables weights, Vector theta0)
    : mdp_(&mdp), spec_(std::move(spec)), weights_(std::move(weights)), theta_(std::move(theta0)) {
  validate(spec_);
  if (static_cast<std::size_t>(theta_.size()) != mdp.feature_dim())
    throw ContractViolation("theta length must equal the feature dimension");
  switch (trace_kind(spec_.algorithm)) {
    case TraceKind::followon: emphasis_ = EmphasisState::followon(spec_.trace_weights.max_trace); break;
    case TraceKind::netd: emphasis_ = EmphasisState::netd(spec_.n, spec_.trace_weights.max_trace); break;
    case TraceKind::none: break;
  }
  buffer_.reserve(spec_.n);
  r_.resize(spec_.n);
  c_.resize(spec_.n);
  check_divergence();
}

void Learner::update_at(std::size_t offset, double emphasis, double alpha, const Vector& theta_for_error) {
  const std::span<const Transition> window(buffer_.data() + offset, buffer_.size() - offset);
  for (std::size_t i = 0; i < window.size(); ++i) {
    r_[i] = weights_.target_r(window[i].state, window[i].action);
    c_[i] = weights_.target_c(window[i].state, window[i].action);
  }
  const double err = nstep_error(theta_for_error, window, r_, c_, *mdp_);
  theta_ += (alpha * emphasis * err) * mdp_->phi(window[0].state).transpose();
  last_emphasis_ = emphasis;
  ++updates_;
  check_divergence();
}

void Learner::check_divergence() {
  if (!theta_.allFinite() || theta_.cwiseAbs().maxCoeff() > kDivergenceThreshold) diverged_ = true;
}

bool Learner::observe(const Transition& tr, double alpha) {
  if (diverged_) return false;
  buffer_.push_back(tr);
  if (buffer_.size() < spec_.n) return true;

  const TraceKind kind = trace_kind(spec_.algorithm);
  const auto& tw = spec_.trace_weights;
  // Trace value for the transition at buffer_[k], advancing the recursion by one step.
  auto trace_at = [&](std::size_t k) {
    if (kind == TraceKind::none) return 1.0;
    const double f = emphasis_.advance(pending_factor_);
    const Transition& cur = buffer_[k];
    pending_factor_ = trace_discount(cur.discount_next, tw) * weights_.trace(cur.state, cur.action);
    return f;
  };

  if (spec_.scheme == Scheme::fixed) {
    const double f = trace_at(0);
    const double m = kind == TraceKind::none ? 1.0 : wetd_emphasis(f, 0.0, tw.eta);
    update_at(0, m, alpha, theta_);
    buffer_.erase(buffer_.begin());
    ++next_index_;
    return !diverged_;
  }

  Vector frozen;
  if (spec_.frozen_window) frozen = theta_;
  for (std::size_t k = 0; k < spec_.n && !diverged_; ++k) {
    const double f = trace_at(k);
    const double lambda = lambda_schedule(next_index_ + k, spec_.n);
    const double m = kind == TraceKind::none ? 1.0 : wetd_emphasis(f, lambda, tw.eta);
    update_at(k, m, alpha, spec_.frozen_window ? frozen : theta_);
  }
  buffer_.clear();
  next_index_ += spec_.n;
  return !diverged_;
}

void apply_algorithm_step(Learner& learner, std::span<const Transition> stream, double alpha) {
  for (const auto& tr : stream)
    if (!learner.observe(tr, alpha)) break;
}

SoftmaxPolicy::SoftmaxPolicy(std::size_t feature_dim, std::size_t num_actions)
    : w_(Matrix::Zero(feature_dim, num_actions)) {}

Vector SoftmaxPolicy::probs(const TabularMdp& mdp, std::size_t s) const {
  Vector logits = (mdp.phi(s) * w_).transpose();
  logits.array() -= logits.maxCoeff();
  Vector p = logits.array().exp();
  return p / p.sum();
}

Policy SoftmaxPolicy::as_policy(const TabularMdp& mdp) const {
  Matrix out(mdp.num_states(), w_.cols());
  for (std::size_t s = 0; s < mdp.num_states(); ++s) out.row(s) = probs(mdp, s).transpose();
  return Policy(std::move(out));
}

Matrix SoftmaxPolicy::grad_log(const TabularMdp& mdp, std::size_t s, std::size_t a) const {
  Vector onehot = -probs(mdp, s);
  onehot(a) += 1.0;
  return mdp.phi(s).transpose() * onehot.transpose();
}

void ace_actor_critic_step(const AlgorithmSpec& spec, Vector& theta, SoftmaxPolicy& actor, double emphasis,
                           std::span<const Transition> window, const TabularMdp& mdp, const Policy& behavior,
                           double alpha_v, double alpha_pi, double entropy_coef) {
  if (window.empty()) throw ContractViolation("actor-critic step needs at least one transition");
  const TargetClips clips = spec.target_clips.value_or(TargetClips{});
  std::vector<double> r(window.size()), c(window.size());
  for (std::size_t i = 0; i < window.size(); ++i) {
    const auto& tr = window[i];
    const double mu = behavior(tr.state, tr.action);
    if (!(mu > 0.0)) throw CoverageError("behavior policy took an action it assigns zero probability");
    const double rho = actor.probs(mdp, tr.state)(static_cast<Eigen::Index>(tr.action)) / mu;
    r[i] = std::min(clips.rho_bar, rho);
    c[i] = std::min(clips.c_bar, rho);
  }
  const Transition& first = window[0];
  const double v_t = value(theta, mdp, first.state);
  double g_next = value(theta, mdp, first.next_state);
  if (window.size() > 1)
    g_next += nstep_error(theta, window.subspan(1), std::span<const double>(r).subspan(1),
                          std::span<const double>(c).subspan(1), mdp);
  const double advantage = first.reward + first.discount_next * g_next - v_t;
  const double critic_err = nstep_error(theta, window, r, c, mdp);
  const double actor_m = spec.ace ? emphasis : 1.0;

  Matrix step = (actor_m * r[0] * advantage) * actor.grad_log(mdp, first.state, first.action);
  if (entropy_coef != 0.0) {
    // grad of -sum_a pi_a log pi_a.
    const Vector p = actor.probs(mdp, first.state);
    for (Eigen::Index a = 0; a < p.size(); ++a)
      step -= entropy_coef * p(a) * (std::log(p(a)) + 1.0) *
              actor.grad_log(mdp, first.state, static_cast<std::size_t>(a));
  }
  actor.w() += alpha_pi * step;
  theta += (alpha_v * emphasis * critic_err) * mdp.phi(first.state).transpose();
}

ActorCritic::ActorCritic(const TabularMdp& mdp, const Policy& behavior, AlgorithmSpec spec, Vector theta0,
                         SoftmaxPolicy actor, double entropy_coef)
    : mdp_(&mdp),
      behavior_(&behavior),
      spec_(std::move(spec)),
      theta_(std::move(theta0)),
      actor_(std::move(actor)),
      entropy_coef_(entropy_coef) {
  validate(spec_);
  switch (trace_kind(spec_.algorithm)) {
    case TraceKind::followon: emphasis_ = EmphasisState::followon(spec_.trace_weights.max_trace); break;
    case TraceKind::netd: emphasis_ = EmphasisState::netd(spec_.n, spec_.trace_weights.max_trace); break;
    case TraceKind::none: break;
  }
}

bool ActorCritic::observe(const Transition& tr, double alpha_v, double alpha_pi) {
  if (diverged_) return false;
  buffer_.push_back(tr);
  if (buffer_.size() < spec_.n) return true;
  const auto& tw = spec_.trace_weights;
  double m = 1.0;
  if (trace_kind(spec_.algorithm) != TraceKind::none) {
    m = wetd_emphasis(emphasis_.advance(pending_factor_), 0.0, tw.eta);
    const Transition& cur = buffer_[0];
    const double mu = (*behavior_)(cur.state, cur.action);
    const double rho = actor_.probs(*mdp_, cur.state)(static_cast<Eigen::Index>(cur.action)) / mu;
    double w = rho;
    const double rb = spec_.target_clips ? spec_.target_clips->rho_bar : tw.rho_bar;
    if (tw.rho_transform == RhoTransform::clipped) {
      w = std::min(tw.rho_bar, rho);
    } else if (tw.rho_transform == RhoTransform::vtrace_policy) {
      const Policy current = actor_.as_policy(*mdp_);
      w = rho_v(current, *behavior_, rb, cur.state, cur.action);
    }
    pending_factor_ = trace_discount(cur.discount_next, tw) * w;
  }
  ace_actor_critic_step(spec_, theta_, actor_, m, buffer_, *mdp_, *behavior_, alpha_v, alpha_pi, entropy_coef_);
  buffer_.erase(buffer_.begin());
  if (!theta_.allFinite() || theta_.cwiseAbs().maxCoeff() > kDivergenceThreshold || !actor_.w().allFinite())
    diverged_ = true;
  return !diverged_;
}

}  // namespace etdlab
