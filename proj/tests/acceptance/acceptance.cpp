// Acceptance suite: one line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "etdlab/envs.hpp"
#include "etdlab/harness.hpp"
#include "etdlab/stability.hpp"

using namespace etdlab;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string f(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::vector<std::uint64_t> seed_range(std::size_t k) {
  std::vector<std::uint64_t> s(k);
  for (std::size_t i = 0; i < k; ++i) s[i] = i;
  return s;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

SweepResult alpha_sweep(const EvalContext& ctx, const AlgorithmSpec& spec, std::size_t seeds, std::size_t steps,
                        std::size_t record_every) {
  SweepGrid g;
  g.specs = {spec};
  g.alphas = grid_alphas();
  g.ns = {spec.n};
  g.seeds = seed_range(seeds);
  g.steps = steps;
  g.record_every = record_every;
  return sweep(ctx, g);
}

std::string alpha_str(double a) { return f("2^%d", static_cast<int>(std::lround(std::log2(a)))); }

Outcome ac1() {
  const auto t0 = std::chrono::steady_clock::now();
  const EvalContext ctx = make_eval_context(make_two_state());
  const auto res = alpha_sweep(ctx, make_spec(Algorithm::nstep_td, 1), 50, default_steps("two-state"), 100);
  const auto& best = res.best_cell("nstep-td/fixed");
  std::size_t bad = 0;
  const auto runs = res.cell_runs(best);
  for (const auto& r : runs) bad += (r.diverged || r.final() > r.initial()) ? 1 : 0;
  const double frac = static_cast<double>(bad) / static_cast<double>(runs.size());
  const double secs = seconds_since(t0);
  return {frac >= 0.9 && secs < 10.0,
          f("best alpha %s, %zu/%zu runs end above their start or diverged, %.2fs", alpha_str(best.alpha).c_str(),
            bad, runs.size(), secs)};
}

Outcome ac2() {
  const auto t0 = std::chrono::steady_clock::now();
  const EvalContext ctx = make_eval_context(make_two_state());
  const auto res = alpha_sweep(ctx, make_spec(Algorithm::clip_netd, 1), 50, default_steps("two-state"), 100);
  const auto& best = res.best_cell("clip-netd/fixed");
  const auto runs = res.cell_runs(best);
  std::vector<double> finals;
  std::size_t ok = 0;
  for (const auto& r : runs) {
    finals.push_back(r.final());
    ok += r.diverged ? 0 : 1;
  }
  const double med = median(finals), init = runs.front().initial();
  const double frac = static_cast<double>(ok) / static_cast<double>(runs.size());
  const double secs = seconds_since(t0);
  return {med < 0.05 * init && frac >= 0.95 && secs < 10.0,
          f("best alpha %s, median final %.3g vs initial %.3g, %.0f%% non-diverged, %.2fs",
            alpha_str(best.alpha).c_str(), med, init, 100 * frac, secs)};
}

Outcome ac3() {
  const EvalContext ctx = make_eval_context(make_two_state());
  // Slow divergence at the smallest step sizes needs a long horizon.
  const std::size_t long_steps = std::size_t{1} << 22;
  const auto vt = alpha_sweep(ctx, make_spec(Algorithm::vtrace, 1), 20, long_steps, long_steps / 64);
  std::size_t flagged = 0;
  for (const auto& r : vt.runs) flagged += r.diverged ? 1 : 0;
  const auto nev = alpha_sweep(ctx, make_spec(Algorithm::nevtrace, 1), 20, default_steps("two-state"), 100);
  const auto& best = nev.best_cell("nevtrace/fixed");
  std::vector<double> finals;
  const auto runs = nev.cell_runs(best);
  for (const auto& r : runs) finals.push_back(r.final());
  const double med = median(finals), init = runs.front().initial();
  return {flagged == vt.runs.size() && med < init,
          f("V-trace %zu/%zu runs flagged over 13 step sizes; NEVtrace best alpha %s median final %.3g < initial %.3g",
            flagged, vt.runs.size(), alpha_str(best.alpha).c_str(), med, init)};
}

Outcome ac4() {
  const auto e99 = make_two_state(0.99);
  const auto r2 = key_matrix(e99.mdp, e99.target, e99.behavior, 2, KeyVariant::nstep);
  Matrix want(2, 2);
  want << 0.5, -0.49005, 0.0, 0.00995;
  const double err = (r2.key_matrix - want).cwiseAbs().maxCoeff();
  const bool pd = is_positive_definite(r2.key_matrix).positive_definite;
  const auto e9 = make_two_state(0.9);
  const auto r1 = key_matrix(e9.mdp, e9.target, e9.behavior, 1, KeyVariant::nstep);
  const double pa = r1.projected_A(0, 0);
  return {err <= 1e-12 && !pd && std::abs(pa + 0.2) <= 1e-12,
          f("n=2 gamma=0.99 max error %.2g, positive definite=%s; n=1 gamma=0.9 projected A %.15g", err,
            pd ? "yes" : "no", pa)};
}

std::vector<EnvBundle> random_suite() {
  std::vector<EnvBundle> out;
  for (std::uint64_t seed = 0; seed < 100; ++seed)
    out.push_back(make_random_mdp(1000 + seed, 2 + seed % 5, 2 + seed % 2, 2, 0.9));
  return out;
}

Outcome ac5() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::size_t not_pd = 0, checks = 0;
  for (const auto& env : random_suite()) {
    const Vector d = stationary_distribution(env.mdp, env.behavior);
    for (std::size_t n = 1; n <= 5; ++n) {
      const auto r = key_matrix(env.mdp, env.target, env.behavior, n, KeyVariant::netd_emphatic);
      worst = std::max(worst, (r.key_matrix.colwise().sum().transpose() - d).cwiseAbs().maxCoeff());
      not_pd += is_positive_definite(r.key_matrix).positive_definite ? 0 : 1;
      ++checks;
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-10 && not_pd == 0 && secs < 5.0,
          f("%zu cases, max identity error %.2g, %zu not positive definite, %.2fs", checks, worst, not_pd, secs)};
}

Outcome ac6() {
  double worst = 0.0;
  std::size_t checks = 0;
  for (const auto& env : random_suite()) {
    const Vector d = stationary_distribution(env.mdp, env.behavior);
    for (double rho_bar : {0.5, 1.0, 2.0}) {
      const Vector fv = wevtrace_emphasis_vector(env.mdp, env.target, env.behavior, rho_bar).f;
      const Vector nu = vtrace_normalizers(env.target, env.behavior, rho_bar);
      const Policy pib = vtrace_fixed_point_policy(env.target, env.behavior, rho_bar);
      const Matrix p = state_transition_matrix(env.mdp, pib) * env.mdp.discounts().asDiagonal();
      const auto ns = p.rows();
      const Eigen::RowVectorXd lhs =
          Eigen::RowVectorXd::Ones(ns) * fv.asDiagonal() * (Matrix::Identity(ns, ns) - p) * nu.asDiagonal();
      const Eigen::RowVectorXd rhs = d.transpose() * nu.asDiagonal();
      worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
      ++checks;
    }
  }
  return {worst <= 1e-10, f("%zu cases, max identity error %.2g", checks, worst)};
}

Outcome ac7() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto env = make_two_state();
  const auto td = monte_carlo_key_matrix(env.mdp, env.target, env.behavior, make_spec(Algorithm::nstep_td, 1),
                                         1'000'000, 0);
  const auto netd = monte_carlo_key_matrix(env.mdp, env.target, env.behavior, make_spec(Algorithm::netd, 1),
                                           10'000'000, 0);
  const double a = td.estimate(0, 0), b = netd.estimate(0, 0);
  const double secs = seconds_since(t0);
  return {std::abs(a + 0.2) <= 0.02 && std::abs(b - 3.4) <= 0.2 && secs < 60.0,
          f("n-step TD %.4f (target -0.2 +- 0.02), NETD %.4f (target 3.4 +- 0.2, batch s.e. %.3g), %.1fs", a, b,
            netd.std_error(0, 0), secs)};
}

Outcome ac8() {
  std::size_t violations = 0, comparisons = 0;
  Rng pick = make_rng(88);
  for (int k = 0; k < 1000; ++k) {
    const auto env = make_random_mdp(5000 + static_cast<std::uint64_t>(k), 3 + k % 4, 2 + k % 2, 2, 0.5 + 0.49 * uniform01(pick));
    BehaviorStream stream(env.mdp, env.behavior, make_rng(static_cast<std::uint64_t>(k), 1));
    Trajectory traj;
    for (int t = 0; t < 60; ++t) traj.push_back(stream.next());
    for (std::size_t n = 2; n <= 5; ++n) {
      auto fo = EmphasisState::followon();
      auto nd = EmphasisState::netd(n);
      double factor = 0.0;
      for (std::size_t t = 0; t < traj.size(); ++t) {
        const double a = fo.advance(factor), b = nd.advance(factor);
        if (t > 0) {
          ++comparisons;
          violations += a > b ? 0 : 1;
        }
        const auto& tr = traj[t];
        factor = tr.discount_next * env.target(tr.state, tr.action) / env.behavior(tr.state, tr.action);
      }
    }
  }
  return {violations == 0, f("%zu comparisons, %zu violations", comparisons, violations)};
}

Outcome ac9() {
  auto fo = EmphasisState::followon();
  double v = 0.0;
  for (int t = 0; t < 20000; ++t) v = fo.advance(0.99);
  double worst = std::abs(v - 100.0);
  std::string detail = f("follow-on %.9f", v);
  for (std::size_t n : {10u, 30u, 100u}) {
    auto nd = EmphasisState::netd(n);
    double x = 0.0;
    for (int t = 0; t < 500000; ++t) x = nd.advance(0.99);
    worst = std::max(worst, std::abs(x - 1.0 / (1.0 - std::pow(0.99, static_cast<double>(n)))));
    detail += f(", n=%zu %.6f", n, x);
  }
  return {worst <= 1e-6, detail + f(" (max error %.2g)", worst)};
}

Outcome ac10() {
  double worst_n = 0.0, worst_v = 0.0;
  std::size_t checks = 0;
  for (int k = 0; k < 1000; ++k) {
    const auto env = make_random_mdp(9000 + static_cast<std::uint64_t>(k), 3 + k % 3, 2 + k % 2, 3, 0.9);
    const std::size_t n = 1 + static_cast<std::size_t>(k) % 5;
    const double rho_bar = 0.5 + 0.25 * (k % 5);
    BehaviorStream stream(env.mdp, env.behavior, make_rng(static_cast<std::uint64_t>(k), 2));
    Trajectory traj;
    for (std::size_t t = 0; t < 4 * n + 3; ++t) traj.push_back(stream.next());
    Rng th = make_rng(static_cast<std::uint64_t>(k), 3);
    Vector theta(3);
    for (Eigen::Index i = 0; i < 3; ++i) theta(i) = 2.0 * uniform01(th) - 1.0;
    std::vector<double> rho(traj.size());
    for (std::size_t t = 0; t < traj.size(); ++t)
      rho[t] = env.target(traj[t].state, traj[t].action) / env.behavior(traj[t].state, traj[t].action);

    for (std::size_t t = 0; t + n < traj.size(); ++t) {
      const std::size_t end = (t / n + 1) * n;  // first index of the next window
      if (end > traj.size()) break;
      const std::span<const Transition> rest(traj.data() + t, traj.size() - t);
      const std::span<const Transition> window(traj.data() + t, end - t);
      const std::span<const double> rho_rest(rho.data() + t, rho.size() - t);

      std::vector<double> lam(rest.size()), lam_v(rest.size());
      for (std::size_t i = 0; i < rest.size(); ++i) {
        lam[i] = i == 0 ? 1.0 : lambda_schedule(t + i, n);
        lam_v[i] = i == 0 ? std::min(rho_bar, rho[t]) / rho[t] : lambda_v_schedule(t + i, n, rho[t + i], rho_bar);
      }
      const double lr = td_lambda_return(theta, rest, rho_rest, lam, env.mdp);
      const double mixed = env.mdp.phi(traj[t].state).dot(theta) +
                           nstep_error(theta, window, std::span<const double>(rho.data() + t, window.size()),
                                       std::span<const double>(rho.data() + t, window.size()), env.mdp);
      worst_n = std::max(worst_n, std::abs(lr - mixed) / std::max(1.0, std::abs(mixed)));

      const double lrv = td_lambda_return(theta, rest, rho_rest, lam_v, env.mdp);
      const double vt = vtrace_target(theta, window, env.target, env.behavior, rho_bar, rho_bar, env.mdp);
      worst_v = std::max(worst_v, std::abs(lrv - vt) / std::max(1.0, std::abs(vt)));
      ++checks;
    }
  }
  return {worst_n <= 1e-12 && worst_v <= 1e-12,
          f("%zu start points, max relative gap n-step %.2g, V-trace %.2g", checks, worst_n, worst_v)};
}

Outcome ac11() {
  const auto t0 = std::chrono::steady_clock::now();
  const EvalContext ctx = make_eval_context(make_collision());
  struct Best {
    std::string name;
    double mean, alpha;
    bool emphatic;
  };
  std::vector<Best> bests;
  for (const char* name : {"nstep-td", "vtrace", "netd", "wetd", "nevtrace", "wevtrace"}) {
    const auto spec = make_spec(parse_algorithm(name), 2);
    const auto res = alpha_sweep(ctx, spec, 200, default_steps("collision"), 100);
    const auto& b = res.best_cell(spec_id(spec));
    bests.push_back({name, b.mean, b.alpha, is_emphatic(spec.algorithm)});
  }
  double worst_emphatic = 0.0, best_baseline = 1e300, max_emph_alpha = 0.0, min_base_alpha = 1e300;
  std::string detail;
  for (const auto& b : bests) {
    detail += f("%s %.4f@%s ", b.name.c_str(), b.mean, alpha_str(b.alpha).c_str());
    if (b.emphatic) {
      worst_emphatic = std::max(worst_emphatic, b.mean);
      max_emph_alpha = std::max(max_emph_alpha, b.alpha);
    } else {
      best_baseline = std::min(best_baseline, b.mean);
      min_base_alpha = std::min(min_base_alpha, b.alpha);
    }
  }
  const double secs = seconds_since(t0);
  return {worst_emphatic < best_baseline && max_emph_alpha < min_base_alpha && secs < 120.0,
          detail + f("| %.1fs", secs)};
}

Outcome ac12() {
  const EvalContext ctx = make_eval_context(make_baird());
  const std::size_t steps = default_steps("baird"), every = 1000;
  std::string detail;
  bool pass = true;
  for (const char* name : {"nstep-td", "vtrace"}) {
    const auto spec = make_spec(parse_algorithm(name), 1);
    const auto res = alpha_sweep(ctx, spec, 200, steps, every);
    const auto& best = res.best_cell(spec_id(spec));
    std::size_t bad = 0;
    const auto runs = res.cell_runs(best);
    for (const auto& r : runs) bad += (r.diverged || r.final() > r.initial()) ? 1 : 0;
    pass = pass && bad * 100 >= 95 * runs.size();
    detail += f("%s %zu/%zu diverging at %s; ", name, bad, runs.size(), alpha_str(best.alpha).c_str());
  }
  {
    const auto spec = make_spec(Algorithm::netd, 1);
    const auto res = alpha_sweep(ctx, spec, 200, steps, every);
    const auto& best = res.best_cell(spec_id(spec));
    const auto curve = aggregate(res.cell_runs(best));
    const auto runs = res.cell_runs(best);
    std::vector<double> med(curve.mean.size());
    for (std::size_t i = 0; i < med.size(); ++i) {
      std::vector<double> col;
      for (const auto& r : runs) col.push_back(r.rmsve[i]);
      med[i] = median(col);
    }
    const std::size_t half = med.size() / 2;
    // Least-squares slope of the median over the final half.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double m = static_cast<double>(med.size() - half);
    for (std::size_t i = half; i < med.size(); ++i) {
      const double x = static_cast<double>(i), y = med[i];
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    const bool decreasing = med.back() < med[half] && slope < 0.0;
    pass = pass && decreasing;
    detail += f("NETD best %s median %.3g -> %.3g over final half (slope %.2g); ", alpha_str(best.alpha).c_str(),
                med[half], med.back(), slope);
  }
  double clip_final[2] = {0, 0};
  for (int k = 0; k < 2; ++k) {
    const std::size_t n = k == 0 ? 1 : 5;
    const auto spec = make_spec(Algorithm::clip_netd, n);
    const auto res = alpha_sweep(ctx, spec, 200, steps, every);
    const auto& best = res.best_cell(spec_id(spec));
    std::vector<double> finals;
    for (const auto& r : res.cell_runs(best)) finals.push_back(r.final());
    clip_final[k] = median(finals);
    detail += f("Clip-NETD n=%zu best %s median final %.3g; ", n, alpha_str(best.alpha).c_str(), clip_final[k]);
  }
  pass = pass && clip_final[1] < clip_final[0];
  return {pass, detail};
}

Outcome ac13() {
  const auto env = make_random_mdp(1313, 5, 4, 6, 0.9);
  Rng rng = make_rng(13);
  std::normal_distribution<double> normal(0.0, 1.0);
  SoftmaxPolicy actor(6, 4);
  for (Eigen::Index i = 0; i < actor.w().size(); ++i) actor.w().data()[i] = normal(rng);
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t s = 0; s < 5; ++s)
    for (std::size_t a = 0; a < 4; ++a) {
      const Matrix g = actor.grad_log(env.mdp, s, a);
      for (Eigen::Index i = 0; i < g.size(); ++i) {
        SoftmaxPolicy up = actor, down = actor;
        up.w().data()[i] += h;
        down.w().data()[i] -= h;
        const auto ai = static_cast<Eigen::Index>(a);
        const double fd = (std::log(up.probs(env.mdp, s)(ai)) - std::log(down.probs(env.mdp, s)(ai))) / (2.0 * h);
        worst = std::max(worst, std::abs(fd - g.data()[i]));
      }
    }
  return {worst < 1e-6, f("max abs error %.2g over %d entries", worst, 5 * 4 * 24)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"two-state TD instability", ac1},
      {"two-state Clip-NETD convergence", ac2},
      {"V-trace vs NEVtrace", ac3},
      {"key-matrix numerics", ac4},
      {"emphatic column-sum identity", ac5},
      {"V-trace emphatic identity", ac6},
      {"Monte-Carlo vs closed form", ac7},
      {"follow-on dominates NETD trace", ac8},
      {"trace fixed points", ac9},
      {"forward-view equivalences", ac10},
      {"Collision ordering", ac11},
      {"Baird", ac12},
      {"actor gradient check", ac13},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[%s] %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
