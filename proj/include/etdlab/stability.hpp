#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "etdlab/learners.hpp"
#include "etdlab/mdp.hpp"

namespace etdlab {

enum class KeyVariant { nstep, netd_emphatic, vtrace, wevtrace_emphatic, nevtrace_emphatic };

const std::vector<std::string>& key_variant_names();
std::string to_string(KeyVariant v);
KeyVariant parse_key_variant(const std::string& name);

struct KeyMatrixReport {
  KeyVariant variant = KeyVariant::nstep;
  Matrix key_matrix;   // state space
  Matrix projected_A;  // Phi^T K Phi
  double min_sym_eig = 0.0;
  bool stable = false;
  /// The closed form drops a commutation term and is not exact.
  bool approximate = false;
};

struct PdCheck {
  bool positive_definite = false;
  double min_sym_eig = 0.0;
};

/// Positive definiteness of the symmetric part (A + A^T)/2, threshold 1e-12.
PdCheck is_positive_definite(const Matrix& a);

/// Emphatic weighting f(s) = d_mu(s) * lim E[F_t | S_t = s].
struct EmphasisVector {
  Vector f;
};

/// (P_x Gamma)[s][s'] = sum_a mu(a|s) x(s,a) p(s'|s,a) gamma(s').
Matrix weighted_discounted_chain(const TabularMdp& mdp, const Policy& mu, const Matrix& x);

/// f = (I - ((P_pi Gamma)^n)^T)^{-1} d_mu.
EmphasisVector netd_emphasis_vector(const TabularMdp& mdp, const Policy& pi, const Policy& mu, std::size_t n);
/// f^v = (I - (P_{pi_rho_bar} Gamma)^T)^{-1} d_mu.
EmphasisVector wevtrace_emphasis_vector(const TabularMdp& mdp, const Policy& pi, const Policy& mu, double rho_bar);
/// f^(n),v = (I - N^n ((P_{pi_rho_bar} Gamma)^n)^T)^{-1} d_mu, the approximate form.
EmphasisVector nevtrace_emphasis_vector(const TabularMdp& mdp, const Policy& pi, const Policy& mu, std::size_t n,
                                        double rho_bar);

/// nu(s) for every state.
Vector vtrace_normalizers(const Policy& pi, const Policy& mu, double rho_bar);

/// Closed-form key matrix. `clips` supplies rho_bar and c_bar for the V-trace variants.
/// For vtrace with n > 1 the n-step form D_mu sum_{k<n} C^k N (I - P_{pi_rho_bar} Gamma) is used,
/// which reduces to N D_mu (I - P_{pi_rho_bar} Gamma) at n = 1.
KeyMatrixReport key_matrix(const TabularMdp& mdp, const Policy& pi, const Policy& mu, std::size_t n,
                           KeyVariant variant, TargetClips clips = {});

/// Wraps a state-space key matrix into a report.
KeyMatrixReport make_report(const TabularMdp& mdp, KeyVariant variant, Matrix key, bool approximate);

/// Exact state-space expected-update matrix of a spec: E[update] = -Phi^T K Phi theta + b.
/// Covers both schemes and every trace kind; `max_trace` is ignored.
Matrix expected_key_matrix(const TabularMdp& mdp, const Policy& pi, const Policy& mu, const AlgorithmSpec& spec);

/// Phi^T expected_key_matrix Phi.
Matrix expected_update_matrix(const TabularMdp& mdp, const Policy& pi, const Policy& mu, const AlgorithmSpec& spec);

/// Lower bounds on the column sums of D_mu (I - (P_pi Gamma)^n), one per state.
Vector safety_margin(const TabularMdp& mdp, const Policy& pi, const Policy& mu, std::size_t n);

struct MonteCarloEstimate {
  Matrix estimate;
  Matrix std_error;  // batch means
  std::size_t updates = 0;
};

/// Running average of M_t phi(S_t) u_t^T along one behavior trajectory, with
/// u_t = sum_i (prod_{j<i} c_j gamma_{j+1}) r_i (phi(S_i) - gamma_{i+1} phi(S_{i+1})).
MonteCarloEstimate monte_carlo_key_matrix(const TabularMdp& mdp, const Policy& pi, const Policy& mu,
                                          const AlgorithmSpec& spec, std::size_t steps, std::uint64_t seed,
                                          std::size_t batches = 50);

}  // namespace etdlab
