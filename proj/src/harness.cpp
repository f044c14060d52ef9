#include "etdlab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <ostream>

#include <omp.h>

#include "etdlab/errors.hpp"

namespace etdlab {

namespace {

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

struct PreparedGrid {
  std::vector<CellStats> cells;
  std::vector<AlgorithmSpec> cell_specs;
};

PreparedGrid prepare(const SweepGrid& grid) {
  if (grid.specs.empty() || grid.alphas.empty() || grid.ns.empty() || grid.seeds.empty())
    throw ContractViolation("sweep grids must be non-empty");
  PreparedGrid p;
  for (std::size_t si = 0; si < grid.specs.size(); ++si)
    for (std::size_t n : grid.ns)
      for (double alpha : grid.alphas) {
        AlgorithmSpec spec = grid.specs[si];
        spec.n = n;
        validate(spec);
        CellStats c;
        c.spec_index = si;
        c.spec_id = spec_id(spec);
        c.alpha = alpha;
        c.n = n;
        c.first_run = p.cells.size() * grid.seeds.size();
        p.cells.push_back(c);
        p.cell_specs.push_back(spec);
      }
  return p;
}

SweepResult finish(const EvalContext& ctx, PreparedGrid p, std::vector<RunRecord> runs, std::size_t seeds) {
  SweepResult r;
  r.env = ctx.env->name;
  r.seeds_per_cell = seeds;
  for (auto& c : p.cells) {
    double sum = 0.0, diverged = 0.0;
    for (std::size_t k = 0; k < seeds; ++k) {
      const auto& run = runs[c.first_run + k];
      sum += run.time_averaged();
      diverged += run.diverged ? 1.0 : 0.0;
    }
    c.mean = sum / static_cast<double>(seeds);
    double var = 0.0;
    for (std::size_t k = 0; k < seeds; ++k) {
      const double e = runs[c.first_run + k].time_averaged() - c.mean;
      var += e * e;
    }
    c.std = std::sqrt(var / static_cast<double>(seeds));
    c.diverged_fraction = diverged / static_cast<double>(seeds);
  }
  r.cells = std::move(p.cells);
  r.runs = std::move(runs);
  return r;
}

}  // namespace

Vector default_theta0(const std::string& env, std::size_t feature_dim) {
  if (env == "baird" && feature_dim == 8) {
    Vector t = Vector::Ones(8);
    t(6) = 10.0;
    return t;
  }
  if (env == "two-state") return Vector::Ones(static_cast<Eigen::Index>(feature_dim));
  return Vector::Zero(static_cast<Eigen::Index>(feature_dim));
}

std::size_t default_steps(const std::string& env) {
  if (env == "two-state") return 20'000;
  if (env == "collision") return 100 * kCollisionHorizon;
  if (env == "baird") return 100'000;
  return 20'000;
}

EvalContext make_eval_context(EnvBundle env, bool unweighted, std::optional<Vector> theta0) {
  EvalContext ctx;
  const auto ns = static_cast<Eigen::Index>(env.mdp.num_states());
  ctx.state_weights = unweighted ? Vector::Constant(ns, 1.0 / static_cast<double>(ns))
                                 : stationary_distribution(env.mdp, env.behavior);
  ctx.v_target = true_values(env.mdp, env.target);
  ctx.theta0 = theta0 ? *theta0 : default_theta0(env.name, env.mdp.feature_dim());
  if (static_cast<std::size_t>(ctx.theta0.size()) != env.mdp.feature_dim())
    throw ContractViolation("theta0 length must equal the feature dimension");
  ctx.env = std::make_shared<const EnvBundle>(std::move(env));
  return ctx;
}

double rmsve(const EvalContext& ctx, const Vector& theta) {
  const Vector err = ctx.env->mdp.features() * theta - ctx.v_target;
  return std::sqrt(ctx.state_weights.dot(err.cwiseAbs2()));
}

double RunRecord::time_averaged() const {
  if (diverged) return kDivergencePenalty;
  double sum = 0.0;
  for (double x : rmsve) sum += x;
  return sum / static_cast<double>(rmsve.size());
}

bool RunRecord::operator==(const RunRecord& o) const {
  return spec_id == o.spec_id && env == o.env && seed == o.seed && alpha == o.alpha && n == o.n &&
         record_every == o.record_every && rmsve == o.rmsve && diverged == o.diverged &&
         final_theta.size() == o.final_theta.size() && final_theta == o.final_theta;
}

RunRecord run_evaluation(const EvalContext& ctx, const AlgorithmSpec& spec, double alpha, std::size_t steps,
                         std::uint64_t seed, std::size_t record_every) {
  if (record_every == 0) throw ContractViolation("record_every must be positive");
  const EnvBundle& env = *ctx.env;
  RunRecord rec;
  rec.spec_id = spec_id(spec);
  rec.env = env.name;
  rec.seed = seed;
  rec.alpha = alpha;
  rec.n = spec.n;
  rec.record_every = record_every;
  const std::size_t samples = steps / record_every + 1;
  rec.rmsve.reserve(samples);

  Learner learner(env.mdp, spec, make_weight_tables(spec, env.target, env.behavior), ctx.theta0);
  BehaviorStream stream(env.mdp, env.behavior, make_rng(seed, 0));
  rec.rmsve.push_back(std::min(rmsve(ctx, learner.theta()), kDivergencePenalty));
  for (std::size_t t = 1; t <= steps; ++t) {
    if (!learner.observe(stream.next(), alpha)) break;
    if (t % record_every == 0) rec.rmsve.push_back(std::min(rmsve(ctx, learner.theta()), kDivergencePenalty));
  }
  rec.diverged = learner.diverged();
  while (rec.rmsve.size() < samples) rec.rmsve.push_back(kDivergencePenalty);
  rec.final_theta = learner.theta();
  return rec;
}

std::vector<double> grid_alphas() {
  std::vector<double> out;
  for (int i = -14; i <= -2; ++i) out.push_back(std::ldexp(1.0, i));
  return out;
}

std::vector<std::size_t> grid_ns() { return {1, 2, 3, 4, 5}; }

const CellStats& SweepResult::best_cell(const std::string& id, std::optional<std::size_t> n) const {
  const CellStats* best = nullptr;
  for (const auto& c : cells) {
    if (c.spec_id != id || (n && c.n != *n)) continue;
    if (!best || c.mean < best->mean) best = &c;
  }
  if (!best) throw ContractViolation("no sweep cell for '" + id + "'");
  return *best;
}

std::vector<std::string> SweepResult::spec_ids() const {
  std::vector<std::string> out;
  for (const auto& c : cells)
    if (std::find(out.begin(), out.end(), c.spec_id) == out.end()) out.push_back(c.spec_id);
  return out;
}

std::vector<RunRecord> SweepResult::cell_runs(const CellStats& cell) const {
  return {runs.begin() + static_cast<std::ptrdiff_t>(cell.first_run),
          runs.begin() + static_cast<std::ptrdiff_t>(cell.first_run + seeds_per_cell)};
}

SweepResult sweep_serial(const EvalContext& ctx, const SweepGrid& grid) {
  PreparedGrid p = prepare(grid);
  const std::size_t seeds = grid.seeds.size();
  std::vector<RunRecord> runs(p.cells.size() * seeds);
  for (std::size_t c = 0; c < p.cells.size(); ++c)
    for (std::size_t k = 0; k < seeds; ++k)
      runs[c * seeds + k] =
          run_evaluation(ctx, p.cell_specs[c], p.cells[c].alpha, grid.steps, grid.seeds[k], grid.record_every);
  return finish(ctx, std::move(p), std::move(runs), seeds);
}

SweepResult sweep(const EvalContext& ctx, const SweepGrid& grid, int jobs) {
  PreparedGrid p = prepare(grid);
  const std::size_t seeds = grid.seeds.size();
  const auto total = static_cast<long long>(p.cells.size() * seeds);
  std::vector<RunRecord> runs(static_cast<std::size_t>(total));
  std::exception_ptr failure;
  const int threads = jobs > 0 ? jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (long long j = 0; j < total; ++j) {
    const auto c = static_cast<std::size_t>(j) / seeds;
    const auto k = static_cast<std::size_t>(j) % seeds;
    try {
      runs[static_cast<std::size_t>(j)] =
          run_evaluation(ctx, p.cell_specs[c], p.cells[c].alpha, grid.steps, grid.seeds[k], grid.record_every);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return finish(ctx, std::move(p), std::move(runs), seeds);
}

AggregateCurve aggregate(const std::vector<RunRecord>& records) {
  if (records.empty()) throw ContractViolation("aggregate needs at least one record");
  const auto& first = records.front();
  for (const auto& r : records)
    if (r.env != first.env || r.spec_id != first.spec_id || r.alpha != first.alpha || r.n != first.n ||
        r.rmsve.size() != first.rmsve.size())
      throw ContractViolation("aggregate needs records sharing (env, spec, alpha, n)");
  const std::size_t len = first.rmsve.size();
  const auto k = static_cast<double>(records.size());
  AggregateCurve out;
  out.mean.assign(len, 0.0);
  out.std.assign(len, 0.0);
  for (const auto& r : records) {
    for (std::size_t i = 0; i < len; ++i) out.mean[i] += r.rmsve[i];
    out.diverged_fraction += r.diverged ? 1.0 : 0.0;
  }
  for (auto& m : out.mean) m /= k;
  for (const auto& r : records)
    for (std::size_t i = 0; i < len; ++i) out.std[i] += (r.rmsve[i] - out.mean[i]) * (r.rmsve[i] - out.mean[i]);
  for (auto& s : out.std) s = std::sqrt(s / k);
  out.diverged_fraction /= k;
  return out;
}

void write_runs_csv(std::ostream& out, const std::vector<RunRecord>& records) {
  out << "step,seed,alpha,n,rmsve,diverged\n";
  for (const auto& r : records)
    for (std::size_t i = 0; i < r.rmsve.size(); ++i)
      out << i * r.record_every << ',' << r.seed << ',' << fmt(r.alpha) << ',' << r.n << ',' << fmt(r.rmsve[i])
          << ',' << (r.diverged ? 1 : 0) << '\n';
}

std::string cell_csv_name(const CellStats& cell) {
  std::string id = cell.spec_id;
  for (auto& ch : id)
    if (ch == '/') ch = '_';
  char buf[64];
  std::snprintf(buf, sizeof buf, "_n%zu_alpha%.6g.csv", cell.n, cell.alpha);
  return id + buf;
}

Json sweep_summary_json(const SweepResult& result, const SweepGrid& grid) {
  Json cells = Json::array();
  for (const auto& c : result.cells)
    cells.push_back({{"spec", c.spec_id},
                     {"alpha", c.alpha},
                     {"n", c.n},
                     {"mean_time_averaged_rmsve", c.mean},
                     {"std_time_averaged_rmsve", c.std},
                     {"diverged_fraction", c.diverged_fraction},
                     {"csv", cell_csv_name(c)}});
  Json best = Json::object();
  for (const auto& id : result.spec_ids()) {
    const auto& b = result.best_cell(id);
    best[id] = {{"alpha", b.alpha}, {"n", b.n}, {"mean_time_averaged_rmsve", b.mean}};
  }
  return Json{{"env", result.env},        {"steps", grid.steps}, {"record_every", grid.record_every},
              {"seeds", grid.seeds},      {"alphas", grid.alphas}, {"ns", grid.ns},
              {"cells", std::move(cells)}, {"best_cell", std::move(best)}};
}

void write_sweep(const std::string& dir, const SweepResult& result, const SweepGrid& grid) {
  std::filesystem::create_directories(dir);
  for (const auto& c : result.cells) {
    std::ofstream out(std::filesystem::path(dir) / cell_csv_name(c));
    if (!out) throw Error("cannot write into " + dir);
    write_runs_csv(out, result.cell_runs(c));
  }
  std::ofstream summary(std::filesystem::path(dir) / "summary.json");
  if (!summary) throw Error("cannot write into " + dir);
  summary << sweep_summary_json(result, grid).dump(2) << '\n';
}

ActorCriticRecord run_actor_critic(const EvalContext& ctx, const AlgorithmSpec& spec, double alpha_v,
                                   double alpha_pi, std::size_t steps, std::uint64_t seed, double entropy_coef) {
  const EnvBundle& env = *ctx.env;
  ActorCritic ac(env.mdp, env.behavior, spec, ctx.theta0, SoftmaxPolicy(env.mdp.feature_dim(), env.mdp.num_actions()),
                 entropy_coef);
  BehaviorStream stream(env.mdp, env.behavior, make_rng(seed, 0));
  for (std::size_t t = 0; t < steps; ++t)
    if (!ac.observe(stream.next(), alpha_v, alpha_pi)) break;
  return {ac.theta(), ac.actor().as_policy(env.mdp).probs(), ac.diverged()};
}

}  // namespace etdlab
