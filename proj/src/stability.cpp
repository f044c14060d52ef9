#include "etdlab/stability.hpp"

#include <algorithm>
#include <cmath>

#include "etdlab/errors.hpp"

namespace etdlab {

namespace {

Matrix power(const Matrix& m, std::size_t k) {
  Matrix out = Matrix::Identity(m.rows(), m.cols());
  for (std::size_t i = 0; i < k; ++i) out = out * m;
  return out;
}

Vector solve_checked(const Matrix& system, const Vector& rhs, const char* what) {
  Eigen::FullPivLU<Matrix> lu(system);
  if (!lu.isInvertible()) throw NonContractiveError(std::string(what) + ": system is singular");
  Vector x = lu.solve(rhs);
  if (!x.allFinite()) throw NonContractiveError(std::string(what) + ": solution is not finite");
  return x;
}

Matrix discounted_chain(const TabularMdp& mdp, const Policy& policy) {
  return state_transition_matrix(mdp, policy) * mdp.discounts().asDiagonal();
}

}  // namespace

const std::vector<std::string>& key_variant_names() {
  static const std::vector<std::string> names{"nstep", "netd_emphatic", "vtrace", "wevtrace_emphatic",
                                              "nevtrace_emphatic"};
  return names;
}

std::string to_string(KeyVariant v) { return key_variant_names()[static_cast<std::size_t>(v)]; }

KeyVariant parse_key_variant(const std::string& name) {
  const auto& names = key_variant_names();
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<KeyVariant>(i);
  std::string valid;
  for (const auto& n : names) valid += (valid.empty() ? "" : ", ") + n;
  throw ContractViolation("unknown variant '" + name + "'; valid names: " + valid);
}

PdCheck is_positive_definite(const Matrix& a) {
  if (a.rows() != a.cols() || a.rows() == 0) throw ContractViolation("positive definiteness needs a square matrix");
  const Matrix sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw Error("eigenvalue solve failed");
  const double lo = eig.eigenvalues().minCoeff();
  return {lo > 1e-12, lo};
}

Matrix weighted_discounted_chain(const TabularMdp& mdp, const Policy& mu, const Matrix& x) {
  const std::size_t ns = mdp.num_states();
  Matrix out = Matrix::Zero(ns, ns);
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
      const double w = mu(s, a) * x(s, a);
      if (w == 0.0) continue;
      auto row = mdp.transition_row(s, a);
      for (std::size_t next = 0; next < ns; ++next) out(s, next) += w * row[next] * mdp.discount(next);
    }
  return out;
}

Vector vtrace_normalizers(const Policy& pi, const Policy& mu, double rho_bar) {
  Vector nu(pi.num_states());
  for (std::size_t s = 0; s < pi.num_states(); ++s) nu(s) = vtrace_normalizer(pi, mu, rho_bar, s);
  return nu;
}

EmphasisVector netd_emphasis_vector(const TabularMdp& mdp, const Policy& pi, const Policy& mu, std::size_t n) {
  const Vector d = stationary_distribution(mdp, mu);
  const Matrix q = power(discounted_chain(mdp, pi), n);
  const auto ns = q.rows();
  return {solve_checked(Matrix::Identity(ns, ns) - q.transpose(), d, "NETD emphasis")};
}

EmphasisVector wevtrace_emphasis_vector(const TabularMdp& mdp, const Policy& pi, const Policy& mu, double rho_bar) {
  const Vector d = stationary_distribution(mdp, mu);
  const Matrix p = discounted_chain(mdp, vtrace_fixed_point_policy(pi, mu, rho_bar));
  const auto ns = p.rows();
  return {solve_checked(Matrix::Identity(ns, ns) - p.transpose(), d, "WEVtrace emphasis")};
}

EmphasisVector nevtrace_emphasis_vector(const TabularMdp& mdp, const Policy& pi, const Policy& mu, std::size_t n,
                                        double rho_bar) {
  const Vector d = stationary_distribution(mdp, mu);
  const Matrix q = power(discounted_chain(mdp, vtrace_fixed_point_policy(pi, mu, rho_bar)), n);
  const Vector nu_n = vtrace_normalizers(pi, mu, rho_bar).array().pow(static_cast<double>(n));
  const auto ns = q.rows();
  return {solve_checked(Matrix::Identity(ns, ns) - nu_n.asDiagonal() * q.transpose(), d, "NEVtrace emphasis")};
}

KeyMatrixReport make_report(const TabularMdp& mdp, KeyVariant variant, Matrix key, bool approximate) {
  KeyMatrixReport r;
  r.variant = variant;
  r.projected_A = mdp.features().transpose() * key * mdp.features();
  r.key_matrix = std::move(key);
  const auto pd = is_positive_definite(r.projected_A);
  r.min_sym_eig = pd.min_sym_eig;
  r.stable = pd.positive_definite;
  r.approximate = approximate;
  return r;
}

KeyMatrixReport key_matrix(const TabularMdp& mdp, const Policy& pi, const Policy& mu, std::size_t n,
                           KeyVariant variant, TargetClips clips) {
  if (n < 1) throw ContractViolation("n must be at least 1");
  const auto ns = static_cast<Eigen::Index>(mdp.num_states());
  const Matrix eye = Matrix::Identity(ns, ns);
  const Vector d = stationary_distribution(mdp, mu);
  switch (variant) {
    case KeyVariant::nstep:
      return make_report(mdp, variant, d.asDiagonal() * (eye - power(discounted_chain(mdp, pi), n)), false);
    case KeyVariant::netd_emphatic: {
      const Vector f = netd_emphasis_vector(mdp, pi, mu, n).f;
      return make_report(mdp, variant, f.asDiagonal() * (eye - power(discounted_chain(mdp, pi), n)), false);
    }
    case KeyVariant::vtrace: {
      const Matrix p = discounted_chain(mdp, vtrace_fixed_point_policy(pi, mu, clips.rho_bar));
      const Vector nu = vtrace_normalizers(pi, mu, clips.rho_bar);
      const Matrix c = weighted_discounted_chain(mdp, mu, is_ratio_table(pi, mu).cwiseMin(clips.c_bar));
      Matrix sum = Matrix::Zero(ns, ns), ck = eye;
      for (std::size_t k = 0; k < n; ++k) {
        sum += ck;
        ck = ck * c;
      }
      return make_report(mdp, variant, d.asDiagonal() * sum * nu.asDiagonal() * (eye - p), false);
    }
    case KeyVariant::wevtrace_emphatic: {
      const Matrix p = discounted_chain(mdp, vtrace_fixed_point_policy(pi, mu, clips.rho_bar));
      const Vector nu = vtrace_normalizers(pi, mu, clips.rho_bar);
      const Vector f = wevtrace_emphasis_vector(mdp, pi, mu, clips.rho_bar).f;
      return make_report(mdp, variant, nu.cwiseProduct(f).asDiagonal() * (eye - p), false);
    }
    case KeyVariant::nevtrace_emphatic: {
      const Matrix q = power(discounted_chain(mdp, vtrace_fixed_point_policy(pi, mu, clips.rho_bar)), n);
      const Vector nu_n = vtrace_normalizers(pi, mu, clips.rho_bar).array().pow(static_cast<double>(n));
      const Vector f = nevtrace_emphasis_vector(mdp, pi, mu, n, clips.rho_bar).f;
      return make_report(mdp, variant, f.asDiagonal() * (eye - nu_n.asDiagonal() * q), true);
    }
  }
  throw ContractViolation("unknown key-matrix variant");
}

Matrix expected_key_matrix(const TabularMdp& mdp, const Policy& pi, const Policy& mu, const AlgorithmSpec& spec) {
  const WeightTables w = make_weight_tables(spec, pi, mu);
  const auto ns = static_cast<Eigen::Index>(mdp.num_states());
  const std::size_t n = spec.n;
  const Vector d = stationary_distribution(mdp, mu);

  Vector nu_r = (mu.probs().cwiseProduct(w.target_r)).rowwise().sum();
  const Matrix b = Matrix(nu_r.asDiagonal()) - weighted_discounted_chain(mdp, mu, w.target_r);
  const Matrix c = weighted_discounted_chain(mdp, mu, w.target_c);
  // u[m] = sum_{k<m} C^k B
  std::vector<Matrix> u(n + 1, Matrix::Zero(ns, ns));
  Matrix ck = Matrix::Identity(ns, ns);
  for (std::size_t m = 1; m <= n; ++m) {
    u[m] = u[m - 1] + ck * b;
    ck = ck * c;
  }

  Vector m0 = d;
  const TraceKind kind = trace_kind(spec.algorithm);
  if (kind != TraceKind::none) {
    // The trace factor uses beta in place of a positive gamma.
    TabularMdp trace_mdp = mdp;
    if (spec.trace_weights.beta) {
      Vector g = mdp.discounts();
      for (Eigen::Index s = 0; s < g.size(); ++s)
        if (g(s) > 0.0) g(s) = *spec.trace_weights.beta;
      trace_mdp = TabularMdp(mdp.num_states(), mdp.num_actions(), mdp.transition_tensor(), mdp.rewards(), g,
                             mdp.features(), mdp.start_distribution(), mdp.episode_horizon());
    }
    const Matrix pw = weighted_discounted_chain(trace_mdp, mu, w.trace);
    const Matrix q = kind == TraceKind::netd ? power(pw, n) : pw;
    const Vector f = solve_checked(Matrix::Identity(ns, ns) - q.transpose(), d, "emphasis vector");
    const double eta = spec.trace_weights.eta;
    m0 = (1.0 - eta) * d + eta * f;
  }

  if (spec.scheme == Scheme::fixed) return m0.asDiagonal() * u[n];
  Matrix k = m0.asDiagonal() * u[n];
  for (std::size_t j = 1; j < n; ++j) k += d.asDiagonal() * u[n - j];
  return k / static_cast<double>(n);
}

Matrix expected_update_matrix(const TabularMdp& mdp, const Policy& pi, const Policy& mu, const AlgorithmSpec& spec) {
  return mdp.features().transpose() * expected_key_matrix(mdp, pi, mu, spec) * mdp.features();
}

Vector safety_margin(const TabularMdp& mdp, const Policy& pi, const Policy& mu, std::size_t n) {
  const Vector d_mu = stationary_distribution(mdp, mu);
  const Vector d_pi = stationary_distribution(mdp, pi);
  const auto ns = static_cast<Eigen::Index>(mdp.num_states());
  const Matrix iq = Matrix::Identity(ns, ns) - power(discounted_chain(mdp, pi), n);
  const double gap = (d_mu - d_pi).cwiseAbs().maxCoeff();
  Vector margin(ns);
  for (Eigen::Index i = 0; i < ns; ++i)
    margin(i) = d_pi(i) * (1.0 - std::pow(mdp.discount(static_cast<std::size_t>(i)), static_cast<double>(n))) -
                gap * iq.col(i).cwiseAbs().sum();
  return margin;
}

MonteCarloEstimate monte_carlo_key_matrix(const TabularMdp& mdp, const Policy& pi, const Policy& mu,
                                          const AlgorithmSpec& spec, std::size_t steps, std::uint64_t seed,
                                          std::size_t batches) {
  const WeightTables w = make_weight_tables(spec, pi, mu);
  const std::size_t n = spec.n;
  const auto dim = static_cast<Eigen::Index>(mdp.feature_dim());
  const TraceKind kind = trace_kind(spec.algorithm);
  const auto& tw = spec.trace_weights;
  EmphasisState emphasis;
  if (kind == TraceKind::followon) emphasis = EmphasisState::followon(tw.max_trace);
  if (kind == TraceKind::netd) emphasis = EmphasisState::netd(n, tw.max_trace);

  BehaviorStream stream(mdp, mu, make_rng(seed, 0));
  std::vector<Transition> buf;
  buf.reserve(n);
  double pending = 1.0;
  std::size_t index = 0;

  if (batches == 0) batches = 1;
  const std::size_t total_updates = steps >= n ? (spec.scheme == Scheme::fixed ? steps - n + 1 : (steps / n) * n) : 0;
  const std::size_t per_batch = std::max<std::size_t>(1, total_updates / batches);
  std::vector<Matrix> batch_sums;
  Matrix current = Matrix::Zero(dim, dim);
  std::size_t in_batch = 0, updates = 0;
  Matrix total = Matrix::Zero(dim, dim);
  Vector u(dim);

  auto trace_at = [&](std::size_t k) {
    if (kind == TraceKind::none) return 1.0;
    const double f = emphasis.advance(pending);
    pending = trace_discount(buf[k].discount_next, tw) * w.trace(buf[k].state, buf[k].action);
    return f;
  };
  auto accumulate = [&](std::size_t offset, double m) {
    u.setZero();
    double coef = 1.0;
    for (std::size_t i = offset; i < buf.size(); ++i) {
      const auto& tr = buf[i];
      u += (coef * w.target_r(tr.state, tr.action)) *
           (mdp.phi(tr.state) - tr.discount_next * mdp.phi(tr.next_state)).transpose();
      coef *= w.target_c(tr.state, tr.action) * tr.discount_next;
      if (coef == 0.0) break;
    }
    const Matrix term = m * mdp.phi(buf[offset].state).transpose() * u.transpose();
    current += term;
    total += term;
    ++updates;
    if (++in_batch == per_batch) {
      batch_sums.push_back(current / static_cast<double>(per_batch));
      current.setZero();
      in_batch = 0;
    }
  };

  for (std::size_t t = 0; t < steps; ++t) {
    buf.push_back(stream.next());
    if (buf.size() < n) continue;
    if (spec.scheme == Scheme::fixed) {
      const double f = trace_at(0);
      accumulate(0, kind == TraceKind::none ? 1.0 : wetd_emphasis(f, 0.0, tw.eta));
      buf.erase(buf.begin());
      ++index;
    } else {
      for (std::size_t k = 0; k < n; ++k) {
        const double f = trace_at(k);
        const double m = kind == TraceKind::none ? 1.0 : wetd_emphasis(f, lambda_schedule(index + k, n), tw.eta);
        accumulate(k, m);
      }
      buf.clear();
      index += n;
    }
  }

  MonteCarloEstimate out;
  out.updates = updates;
  out.estimate = updates > 0 ? Matrix(total / static_cast<double>(updates)) : Matrix::Zero(dim, dim);
  out.std_error = Matrix::Zero(dim, dim);
  const std::size_t b = batch_sums.size();
  if (b >= 2) {
    Matrix mean = Matrix::Zero(dim, dim);
    for (const auto& m : batch_sums) mean += m;
    mean /= static_cast<double>(b);
    Matrix var = Matrix::Zero(dim, dim);
    for (const auto& m : batch_sums) var += (m - mean).cwiseAbs2();
    var /= static_cast<double>(b - 1);
    out.std_error = (var / static_cast<double>(b)).cwiseSqrt();
  }
  return out;
}

}  // namespace etdlab
