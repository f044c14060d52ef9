#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace etdlab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Rng = std::mt19937_64;

/// Seeds a generator from a (seed, stream) pair; distinct pairs give unrelated streams.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

/// Uniform double in [0, 1) built from the top 53 bits of one draw.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Index i with cdf[i-1] <= u < cdf[i]; `cdf` is a running sum ending at 1.
std::size_t sample_from_cdf(std::span<const double> cdf, double u);

/// Action distribution per state, indexed [s][a]. Rows sum to one.
class Policy {
 public:
  Policy() = default;
  explicit Policy(Matrix probs);

  static Policy uniform(std::size_t num_states, std::size_t num_actions);
  static Policy deterministic(std::size_t num_states, std::size_t num_actions, std::size_t action);

  std::size_t num_states() const { return static_cast<std::size_t>(probs_.rows()); }
  std::size_t num_actions() const { return static_cast<std::size_t>(probs_.cols()); }
  double operator()(std::size_t s, std::size_t a) const { return probs_(s, a); }
  const Matrix& probs() const { return probs_; }

  /// Running sums of row s, for sampling.
  std::span<const double> cdf(std::size_t s) const {
    return {cdf_.data() + s * num_actions(), num_actions()};
  }

 private:
  Matrix probs_;
  std::vector<double> cdf_;
};

/// Finite MDP with action-dependent rewards, per-state discounts and a linear
/// feature map. Episodic problems carry a start distribution and a horizon;
/// continuing problems have horizon 0.
class TabularMdp {
 public:
  TabularMdp() = default;
  /// `transition` is flat, indexed [s][a][s'].
  TabularMdp(std::size_t num_states, std::size_t num_actions, std::vector<double> transition,
             Matrix reward, Vector discount, Matrix features, Vector start_distribution = {},
             std::size_t episode_horizon = 0);

  std::size_t num_states() const { return num_states_; }
  std::size_t num_actions() const { return num_actions_; }
  std::size_t feature_dim() const { return static_cast<std::size_t>(features_.cols()); }

  double transition(std::size_t s, std::size_t a, std::size_t next) const {
    return transition_[(s * num_actions_ + a) * num_states_ + next];
  }
  std::span<const double> transition_row(std::size_t s, std::size_t a) const {
    return {transition_.data() + (s * num_actions_ + a) * num_states_, num_states_};
  }
  std::span<const double> transition_cdf(std::size_t s, std::size_t a) const {
    return {transition_cdf_.data() + (s * num_actions_ + a) * num_states_, num_states_};
  }
  const std::vector<double>& transition_tensor() const { return transition_; }

  double reward(std::size_t s, std::size_t a) const { return reward_(s, a); }
  const Matrix& rewards() const { return reward_; }
  double discount(std::size_t s) const { return discount_(s); }
  const Vector& discounts() const { return discount_; }
  const RowMatrix& features() const { return features_; }
  auto phi(std::size_t s) const { return features_.row(s); }

  const Vector& start_distribution() const { return start_; }
  std::span<const double> start_cdf() const { return start_cdf_; }
  std::size_t episode_horizon() const { return horizon_; }
  bool episodic() const { return horizon_ > 0; }

 private:
  std::size_t num_states_ = 0;
  std::size_t num_actions_ = 0;
  std::vector<double> transition_;
  std::vector<double> transition_cdf_;
  Matrix reward_;
  Vector discount_;
  RowMatrix features_;
  Vector start_;
  std::vector<double> start_cdf_;
  std::size_t horizon_ = 0;
};

/// One step of experience. `discount_next` is gamma(S_{t+1}), or 0 when the
/// step ends an episode and `next_state` is a fresh start state.
struct Transition {
  std::size_t state = 0;
  std::size_t action = 0;
  double reward = 0.0;
  std::size_t next_state = 0;
  double discount_next = 0.0;

  bool operator==(const Transition&) const = default;
};

using Trajectory = std::vector<Transition>;

/// True when each transition starts where the previous one ended, except
/// after a zero-discount restart.
bool is_chained(std::span<const Transition> trajectory);

/// Action-marginalized state chain P_pi[s][s'].
Matrix state_transition_matrix(const TabularMdp& mdp, const Policy& policy);

/// r_pi(s) = sum_a pi(a|s) r(s,a).
Vector expected_reward(const TabularMdp& mdp, const Policy& policy);

struct StationaryOptions {
  std::size_t max_iterations = 1'000'000;
  double tolerance = 1e-12;
};

/// Long-run state visit distribution under `policy`.
///
/// Continuing MDPs: the fixed point of d^T P_pi = d^T, by power iteration
/// from the uniform vector. Throws ReducibleChainError if it never settles.
///
/// Episodic MDPs: the average of start^T P_pi^k over k < horizon, which is
/// the exact visit frequency of a stream that restarts every `horizon` steps.
Vector stationary_distribution(const TabularMdp& mdp, const Policy& policy,
                               const StationaryOptions& options = {});

/// Power-iteration fixed point of a row-stochastic matrix.
Vector stationary_distribution(const Matrix& chain, const StationaryOptions& options = {});

/// (1/H) sum_{k<H} start^T P^k.
Vector episodic_visit_distribution(const Matrix& chain, const Vector& start, std::size_t horizon);

/// v = (I - P_pi Gamma)^{-1} r_pi. Throws NonContractiveError when singular.
Vector true_values(const TabularMdp& mdp, const Policy& policy);

/// pi(a|s) / mu(a|s). Throws CoverageError when mu(a|s) = 0.
double is_ratio(const Policy& pi, const Policy& mu, std::size_t s, std::size_t a);

/// All ratios at once, indexed [s][a]; entries with mu = 0 are left at 0.
Matrix is_ratio_table(const Policy& pi, const Policy& mu);

/// Draws A ~ policy(.|state), S' ~ P(.|state, A) and fills reward and gamma(S').
Transition sample_step(const TabularMdp& mdp, const Policy& policy, std::size_t state, Rng& rng);

/// Endless behavior stream. Episodic MDPs are restarted every
/// `episode_horizon` steps: the last transition of an episode carries
/// discount 0 and lands on a state drawn from the start distribution.
class BehaviorStream {
 public:
  BehaviorStream(const TabularMdp& mdp, const Policy& behavior, Rng rng);

  Transition next();
  std::size_t state() const { return state_; }

 private:
  const TabularMdp* mdp_;
  const Policy* behavior_;
  Rng rng_;
  std::size_t state_ = 0;
  std::size_t episode_step_ = 0;
};

}  // namespace etdlab
