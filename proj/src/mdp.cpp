#include "etdlab/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "etdlab/errors.hpp"

namespace etdlab {

namespace {

constexpr double kRowTolerance = 1e-12;

std::vector<double> running_sums(std::span<const double> probs, std::size_t row_len) {
  std::vector<double> out(probs.size());
  for (std::size_t base = 0; base < probs.size(); base += row_len) {
    double acc = 0.0;
    for (std::size_t i = 0; i < row_len; ++i) {
      acc += probs[base + i];
      out[base + i] = acc;
    }
    // Pin the last entry so a draw in [0,1) always lands inside the row.
    out[base + row_len - 1] = 1.0;
  }
  return out;
}

void check_distribution(std::span<const double> row, const char* what, std::size_t index) {
  double sum = 0.0;
  for (double p : row) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      std::ostringstream msg;
      msg << what << " row " << index << " has a negative or non-finite entry";
      throw InvalidModel(msg.str());
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kRowTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << what << " row " << index << " sums to " << sum << ", expected 1";
    throw InvalidModel(msg.str());
  }
}

}  // namespace

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x9e3779b9u};
  return Rng(seq);
}

std::size_t sample_from_cdf(std::span<const double> cdf, double u) {
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end()) --it;
  return static_cast<std::size_t>(it - cdf.begin());
}

Policy::Policy(Matrix probs) : probs_(std::move(probs)) {
  if (probs_.rows() == 0 || probs_.cols() == 0) throw InvalidModel("policy must be non-empty");
  const auto actions = static_cast<std::size_t>(probs_.cols());
  std::vector<double> flat(static_cast<std::size_t>(probs_.size()));
  for (Eigen::Index s = 0; s < probs_.rows(); ++s) {
    for (Eigen::Index a = 0; a < probs_.cols(); ++a) flat[s * actions + a] = probs_(s, a);
    check_distribution({flat.data() + s * actions, actions}, "policy", static_cast<std::size_t>(s));
  }
  cdf_ = running_sums(flat, actions);
}

Policy Policy::uniform(std::size_t num_states, std::size_t num_actions) {
  return Policy(Matrix::Constant(num_states, num_actions, 1.0 / static_cast<double>(num_actions)));
}

Policy Policy::deterministic(std::size_t num_states, std::size_t num_actions, std::size_t action) {
  Matrix probs = Matrix::Zero(num_states, num_actions);
  probs.col(action).setOnes();
  return Policy(std::move(probs));
}

TabularMdp::TabularMdp(std::size_t num_states, std::size_t num_actions,
                       std::vector<double> transition, Matrix reward, Vector discount,
                       Matrix features, Vector start_distribution, std::size_t episode_horizon)
    : num_states_(num_states),
      num_actions_(num_actions),
      transition_(std::move(transition)),
      reward_(std::move(reward)),
      discount_(std::move(discount)),
      features_(std::move(features)),
      start_(std::move(start_distribution)),
      horizon_(episode_horizon) {
  if (num_states_ == 0 || num_actions_ == 0) throw InvalidModel("MDP needs at least one state and action");
  if (transition_.size() != num_states_ * num_actions_ * num_states_)
    throw InvalidModel("transition tensor must have num_states*num_actions*num_states entries");
  if (static_cast<std::size_t>(reward_.rows()) != num_states_ ||
      static_cast<std::size_t>(reward_.cols()) != num_actions_)
    throw InvalidModel("reward table must be num_states x num_actions");
  if (static_cast<std::size_t>(discount_.size()) != num_states_)
    throw InvalidModel("discount vector must have one entry per state");
  if (static_cast<std::size_t>(features_.rows()) != num_states_ || features_.cols() < 1)
    throw InvalidModel("feature matrix must be num_states x feature_dim with feature_dim >= 1");
  for (std::size_t s = 0; s < num_states_; ++s) {
    if (!(discount_(s) >= 0.0 && discount_(s) <= 1.0))
      throw InvalidModel("discounts must lie in [0, 1]");
    for (std::size_t a = 0; a < num_actions_; ++a)
      check_distribution(transition_row(s, a), "transition", s * num_actions_ + a);
  }
  if (!reward_.allFinite() || !features_.allFinite()) throw InvalidModel("non-finite reward or feature");
  if (start_.size() == 0) start_ = Vector::Constant(num_states_, 1.0 / static_cast<double>(num_states_));
  if (static_cast<std::size_t>(start_.size()) != num_states_)
    throw InvalidModel("start distribution must have one entry per state");
  check_distribution({start_.data(), num_states_}, "start distribution", 0);
  transition_cdf_ = running_sums(transition_, num_states_);
  start_cdf_ = running_sums({start_.data(), num_states_}, num_states_);
}

bool is_chained(std::span<const Transition> trajectory) {
  for (std::size_t k = 1; k < trajectory.size(); ++k) {
    const auto& prev = trajectory[k - 1];
    if (prev.discount_next != 0.0 && prev.next_state != trajectory[k].state) return false;
  }
  return true;
}

Matrix state_transition_matrix(const TabularMdp& mdp, const Policy& policy) {
  const std::size_t n = mdp.num_states();
  Matrix chain = Matrix::Zero(n, n);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
      const double pa = policy(s, a);
      if (pa == 0.0) continue;
      auto row = mdp.transition_row(s, a);
      for (std::size_t next = 0; next < n; ++next) chain(s, next) += pa * row[next];
    }
  return chain;
}

Vector expected_reward(const TabularMdp& mdp, const Policy& policy) {
  return mdp.rewards().cwiseProduct(policy.probs()).rowwise().sum();
}

Vector stationary_distribution(const Matrix& chain, const StationaryOptions& options) {
  const auto n = chain.rows();
  Eigen::RowVectorXd d = Eigen::RowVectorXd::Constant(n, 1.0 / static_cast<double>(n));
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    Eigen::RowVectorXd next = d * chain;
    next /= next.sum();
    const double change = (next - d).cwiseAbs().maxCoeff();
    d = std::move(next);
    if (change < options.tolerance) return d.transpose();
  }
  throw ReducibleChainError("power iteration did not converge; the chain is reducible or periodic");
}

Vector episodic_visit_distribution(const Matrix& chain, const Vector& start, std::size_t horizon) {
  Eigen::RowVectorXd current = start.transpose();
  Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(start.size());
  for (std::size_t k = 0; k < horizon; ++k) {
    acc += current;
    current = current * chain;
  }
  return (acc / static_cast<double>(horizon)).transpose();
}

Vector stationary_distribution(const TabularMdp& mdp, const Policy& policy,
                               const StationaryOptions& options) {
  const Matrix chain = state_transition_matrix(mdp, policy);
  if (mdp.episodic()) return episodic_visit_distribution(chain, mdp.start_distribution(), mdp.episode_horizon());
  try {
    return stationary_distribution(chain, options);
  } catch (const ReducibleChainError&) {
    throw ReducibleChainError("stationary distribution of the given policy did not converge after " +
                              std::to_string(options.max_iterations) + " iterations");
  }
}

Vector true_values(const TabularMdp& mdp, const Policy& policy) {
  const auto n = static_cast<Eigen::Index>(mdp.num_states());
  const Matrix discounted = state_transition_matrix(mdp, policy) * mdp.discounts().asDiagonal();
  const Matrix system = Matrix::Identity(n, n) - discounted;
  Eigen::FullPivLU<Matrix> lu(system);
  if (!lu.isInvertible())
    throw NonContractiveError("I - P_pi Gamma is singular: discounting is not contractive");
  const Vector r = expected_reward(mdp, policy);
  Vector v = lu.solve(r);
  const double residual = (v - r - discounted * v).cwiseAbs().maxCoeff();
  if (!std::isfinite(residual) || residual > 1e-8 * std::max(1.0, v.cwiseAbs().maxCoeff()))
    throw NonContractiveError("value solve is ill-conditioned: discounting is not contractive");
  return v;
}

double is_ratio(const Policy& pi, const Policy& mu, std::size_t s, std::size_t a) {
  const double behavior = mu(s, a);
  if (behavior <= 0.0) {
    throw CoverageError("behavior policy has zero probability for action " + std::to_string(a) +
                        " in state " + std::to_string(s));
  }
  return pi(s, a) / behavior;
}

Matrix is_ratio_table(const Policy& pi, const Policy& mu) {
  Matrix out = Matrix::Zero(pi.probs().rows(), pi.probs().cols());
  for (Eigen::Index s = 0; s < out.rows(); ++s)
    for (Eigen::Index a = 0; a < out.cols(); ++a)
      if (mu(s, a) > 0.0) out(s, a) = pi(s, a) / mu(s, a);
  return out;
}

Transition sample_step(const TabularMdp& mdp, const Policy& policy, std::size_t state, Rng& rng) {
  if (state >= mdp.num_states()) throw ContractViolation("state index out of range");
  Transition tr;
  tr.state = state;
  tr.action = sample_from_cdf(policy.cdf(state), uniform01(rng));
  tr.next_state = sample_from_cdf(mdp.transition_cdf(state, tr.action), uniform01(rng));
  tr.reward = mdp.reward(state, tr.action);
  tr.discount_next = mdp.discount(tr.next_state);
  return tr;
}

BehaviorStream::BehaviorStream(const TabularMdp& mdp, const Policy& behavior, Rng rng)
    : mdp_(&mdp), behavior_(&behavior), rng_(std::move(rng)) {
  state_ = sample_from_cdf(mdp_->start_cdf(), uniform01(rng_));
}

Transition BehaviorStream::next() {
  Transition tr = sample_step(*mdp_, *behavior_, state_, rng_);
  ++episode_step_;
  if (mdp_->episodic() && episode_step_ >= mdp_->episode_horizon()) {
    tr.discount_next = 0.0;
    tr.next_state = sample_from_cdf(mdp_->start_cdf(), uniform01(rng_));
    episode_step_ = 0;
  }
  state_ = tr.next_state;
  return tr;
}

}  // namespace etdlab
