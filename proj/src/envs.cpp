#include "etdlab/envs.hpp"

#include <algorithm>
#include <numeric>

#include "etdlab/errors.hpp"

namespace etdlab {

namespace {

// Flat [s][a][s'] builder.
struct TensorBuilder {
  std::size_t ns, na;
  std::vector<double> data;
  TensorBuilder(std::size_t states, std::size_t actions)
      : ns(states), na(actions), data(states * actions * states, 0.0) {}
  double& at(std::size_t s, std::size_t a, std::size_t next) { return data[(s * na + a) * ns + next]; }
};

std::vector<double> dirichlet_ones(std::size_t k, Rng& rng) {
  std::gamma_distribution<double> g(1.0, 1.0);
  std::vector<double> out(k);
  double sum = 0.0;
  for (auto& x : out) {
    x = g(rng);
    sum += x;
  }
  for (auto& x : out) x /= sum;
  // Absorb rounding so the row sums to 1 to the last bit we can control.
  out.back() = 1.0 - std::accumulate(out.begin(), out.end() - 1, 0.0);
  return out;
}

}  // namespace

EnvBundle make_two_state(double gamma) {
  TensorBuilder p(2, 2);
  p.at(0, 0, 0) = 1.0;
  p.at(0, 1, 1) = 1.0;
  p.at(1, 0, 0) = 1.0;
  p.at(1, 1, 1) = 1.0;
  Matrix phi(2, 1);
  phi << 1.0, 2.0;
  TabularMdp mdp(2, 2, std::move(p.data), Matrix::Zero(2, 2), Vector::Constant(2, gamma), phi);
  return {"two-state", std::move(mdp), Policy::deterministic(2, 2, 1), Policy::uniform(2, 2)};
}

Matrix collision_default_features() {
  std::vector<std::vector<int>> subsets;
  for (int a = 0; a < 6; ++a)
    for (int b = a + 1; b < 6; ++b)
      for (int c = b + 1; c < 6; ++c) subsets.push_back({a, b, c});
  Rng rng = make_rng(kCollisionFeatureSeed);
  // Fisher-Yates with our own uniform draw keeps the result library-independent.
  for (std::size_t i = subsets.size() - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i + 1));
    std::swap(subsets[i], subsets[j]);
  }
  Matrix phi = Matrix::Zero(9, 6);
  for (int s = 0; s < 9; ++s)
    for (int col : subsets[s]) phi(s, col) = 1.0;
  return phi;
}

EnvBundle make_collision(double reward, double gamma, std::optional<Matrix> features,
                         std::size_t horizon) {
  constexpr std::size_t kStates = 9;
  constexpr std::size_t kForward = 0, kRetreat = 1;
  Matrix phi = features ? *features : collision_default_features();
  if (phi.rows() != static_cast<Eigen::Index>(kStates))
    throw InvalidModel("collision features must have 9 rows, got " + std::to_string(phi.rows()));
  TensorBuilder p(kStates, 2);
  for (std::size_t s = 0; s < kStates; ++s) {
    const std::size_t fwd = std::min(s + 1, kStates - 1);
    p.at(s, kForward, fwd) = 1.0;
    if (s >= 4 && s <= 7) {
      for (std::size_t back = 0; back < 4; ++back) p.at(s, kRetreat, back) = 0.25;
    } else {
      // Retreat is never chosen here; give it the forward dynamics.
      p.at(s, kRetreat, fwd) = 1.0;
    }
  }
  Matrix r = Matrix::Zero(kStates, 2);
  r(7, kForward) = reward;
  Matrix mu_probs(kStates, 2);
  for (std::size_t s = 0; s < kStates; ++s) {
    const double fwd = (s >= 4 && s <= 7) ? 0.5 : 1.0;
    mu_probs(s, kForward) = fwd;
    mu_probs(s, kRetreat) = 1.0 - fwd;
  }
  Vector start = Vector::Zero(kStates);
  start.head(4).setConstant(0.25);
  TabularMdp mdp(kStates, 2, std::move(p.data), std::move(r), Vector::Constant(kStates, gamma),
                 std::move(phi), std::move(start), horizon);
  return {"collision", std::move(mdp), Policy::deterministic(kStates, 2, kForward),
          Policy(std::move(mu_probs))};
}

EnvBundle make_baird(double gamma) {
  constexpr std::size_t kStates = 7, kUp = 0, kDown = 1, kBottom = 6;
  TensorBuilder p(kStates, 2);
  for (std::size_t s = 0; s < kStates; ++s) {
    for (std::size_t top = 0; top < 6; ++top) p.at(s, kUp, top) = 1.0 / 6.0;
    p.at(s, kDown, kBottom) = 1.0;
  }
  Matrix phi = Matrix::Zero(kStates, 8);
  for (std::size_t s = 0; s < 6; ++s) {
    phi(s, s) = 2.0;
    phi(s, 7) = 1.0;
  }
  phi(kBottom, 6) = 1.0;
  phi(kBottom, 7) = 2.0;
  Matrix mu_probs(kStates, 2);
  mu_probs.col(kUp).setConstant(6.0 / 7.0);
  mu_probs.col(kDown).setConstant(1.0 / 7.0);
  TabularMdp mdp(kStates, 2, std::move(p.data), Matrix::Zero(kStates, 2),
                 Vector::Constant(kStates, gamma), std::move(phi));
  return {"baird", std::move(mdp), Policy::deterministic(kStates, 2, kDown), Policy(std::move(mu_probs))};
}

EnvBundle make_random_mdp(std::uint64_t seed, std::size_t num_states, std::size_t num_actions,
                          std::size_t feature_dim, double gamma) {
  if (num_states < 2 || num_actions < 1 || feature_dim < 1)
    throw InvalidModel("random MDP needs num_states >= 2, num_actions >= 1, feature_dim >= 1");
  Rng rng = make_rng(seed, 0x52414e44);
  TensorBuilder p(num_states, num_actions);
  for (std::size_t s = 0; s < num_states; ++s)
    for (std::size_t a = 0; a < num_actions; ++a) {
      auto row = dirichlet_ones(num_states, rng);
      std::copy(row.begin(), row.end(), p.data.begin() + static_cast<std::ptrdiff_t>((s * num_actions + a) * num_states));
    }
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix r(num_states, num_actions);
  for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = normal(rng);
  Matrix phi(num_states, feature_dim);
  for (std::size_t s = 0; s < num_states; ++s)
    for (std::size_t k = 0; k < feature_dim; ++k) phi(s, k) = normal(rng);
  constexpr double kFloor = 0.01;
  Matrix pi(num_states, num_actions), mu(num_states, num_actions);
  for (std::size_t s = 0; s < num_states; ++s) {
    auto tp = dirichlet_ones(num_actions, rng);
    auto bp = dirichlet_ones(num_actions, rng);
    const double scale = 1.0 - kFloor * static_cast<double>(num_actions);
    double acc = 0.0;
    for (std::size_t a = 0; a < num_actions; ++a) {
      pi(s, a) = tp[a];
      mu(s, a) = a + 1 < num_actions ? kFloor + scale * bp[a] : 0.0;
      acc += mu(s, a);
    }
    mu(s, num_actions - 1) = 1.0 - acc;
  }
  TabularMdp mdp(num_states, num_actions, std::move(p.data), std::move(r),
                 Vector::Constant(num_states, gamma), std::move(phi));
  return {"random", std::move(mdp), Policy(std::move(pi)), Policy(std::move(mu))};
}

const std::vector<std::string>& env_names() {
  static const std::vector<std::string> names{"two-state", "collision", "baird", "random"};
  return names;
}

EnvBundle make_env(const std::string& name, const EnvOptions& options) {
  if (name == "two-state") {
    auto env = make_two_state(options.gamma.value_or(0.9));
    if (options.features) {
      const auto& m = env.mdp;
      env.mdp = TabularMdp(m.num_states(), m.num_actions(), m.transition_tensor(), m.rewards(),
                           m.discounts(), *options.features);
    }
    return env;
  }
  if (name == "collision")
    return make_collision(options.reward.value_or(1.0), options.gamma.value_or(0.9), options.features);
  if (name == "baird") {
    auto env = make_baird(options.gamma.value_or(0.9));
    if (options.features) {
      const auto& m = env.mdp;
      env.mdp = TabularMdp(m.num_states(), m.num_actions(), m.transition_tensor(), m.rewards(),
                           m.discounts(), *options.features);
    }
    return env;
  }
  if (name == "random")
    return make_random_mdp(options.seed, options.num_states, options.num_actions,
                           options.feature_dim, options.gamma.value_or(0.9));
  std::string valid;
  for (const auto& n : env_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw InvalidModel("unknown environment '" + name + "'; valid names: " + valid);
}

}  // namespace etdlab
