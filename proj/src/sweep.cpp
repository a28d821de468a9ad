#include "esrr/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <thread>

#include "esrr/errors.hpp"
#include "esrr/logging.hpp"

namespace esrr {

void AdmissibleRegion::validate() const {
  if (!(alpha > 0) || !(lambda0 > 0))
    throw Error(ErrorCode::BAD_CONFIG, "alpha and lambda0 must be > 0");
  if (lambda_grid.empty()) throw Error(ErrorCode::BAD_CONFIG, "empty lambda grid");
  for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
    if (!(lambda_grid[i] > 0) || lambda_grid[i] > lambda0)
      throw Error(ErrorCode::BAD_CONFIG, "lambda grid values must lie in (0, lambda0]");
    if (i > 0 && lambda_grid[i] >= lambda_grid[i - 1])
      throw Error(ErrorCode::BAD_CONFIG, "lambda grid must be decreasing");
  }
  for (double f : noise_fractions)
    if (f < 0.0 || f > 1.0)
      throw Error(ErrorCode::BAD_CONFIG, "noise fractions must lie in [0, 1]");
  if (noise_fractions.empty() || seeds.empty())
    throw Error(ErrorCode::BAD_CONFIG, "need at least one noise fraction and one seed");
}

Eigen::VectorXd draw_noise(int n, double magnitude, std::uint64_t seed) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  if (magnitude <= 0.0) return w;
  // hand-rolled Box-Muller: std::normal_distribution is not portable bit-wise
  std::mt19937_64 rng(seed);
  auto uniform = [&] { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
  for (int i = 0; i < n; i += 2) {
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    w[i] = r * std::cos(2.0 * std::numbers::pi * u2);
    if (i + 1 < n) w[i + 1] = r * std::sin(2.0 * std::numbers::pi * u2);
  }
  const double norm = w.norm();
  if (norm == 0.0) w[0] = 1.0;  // never happens with Box-Muller, but stay safe
  return w * (magnitude / w.norm());
}

namespace {

struct PairDistance {
  int ti, ri;
  double dist;
  double pos_err, coeff_err, dir_err;
};

std::optional<PairDistance> admissible_pair(const WeightedAtom& t, const WeightedAtom& r,
                                            int ti, int ri, double eps) {
  if (t.atom.index() != r.atom.index()) return std::nullopt;
  PairDistance pd{ti, ri, 0.0, 0.0, std::abs(t.c - r.c), 0.0};
  if (const auto* ts = std::get_if<TorusSpike>(&t.atom)) {
    const auto& rs = std::get<TorusSpike>(r.atom);
    if (ts->sign != rs.sign) return std::nullopt;
    pd.pos_err = torus_dist(ts->x, rs.x);
    pd.dist = pd.pos_err;
  } else if (const auto* tc = std::get_if<CanonicalSpike>(&t.atom)) {
    const auto& rc = std::get<CanonicalSpike>(r.atom);
    if (tc->k != rc.k || tc->sign != rc.sign) return std::nullopt;
  } else if (const auto* tv = std::get_if<VectorSpike>(&t.atom)) {
    const auto& rv = std::get<VectorSpike>(r.atom);
    pd.pos_err = torus_dist(tv->x, rv.x);
    pd.dir_err = (tv->a - rv.a).norm();
    if (pd.dir_err > eps) return std::nullopt;
    pd.dist = std::max(pd.pos_err, pd.dir_err);
  } else {
    const auto& ta = std::get<AxisSpike>(t.atom);
    const auto& ra = std::get<AxisSpike>(r.atom);
    if (ta.k != ra.k || ta.sign != ra.sign) return std::nullopt;
    pd.pos_err = torus_dist(ta.x, ra.x);
    pd.dist = pd.pos_err;
  }
  if (pd.pos_err > eps) return std::nullopt;
  return pd;
}

}  // namespace

std::optional<MatchResult> match_atoms(const SparseSignal& truth,
                                       const SparseSignal& recovered, double eps) {
  const int n = truth.size();
  if (recovered.size() != n) return std::nullopt;

  std::vector<PairDistance> pairs;
  for (int ti = 0; ti < n; ++ti)
    for (int ri = 0; ri < n; ++ri)
      if (auto pd = admissible_pair(truth.atoms[ti], recovered.atoms[ri], ti, ri, eps))
        pairs.push_back(*pd);
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const PairDistance& a, const PairDistance& b) { return a.dist < b.dist; });

  MatchResult m;
  m.assignment.assign(n, -1);
  m.position_errors.assign(n, 0.0);
  m.coefficient_errors.assign(n, 0.0);
  m.direction_errors.assign(n, 0.0);
  std::vector<bool> used(n, false);
  int matched = 0;
  for (const auto& pd : pairs) {
    if (m.assignment[pd.ti] >= 0 || used[pd.ri]) continue;
    m.assignment[pd.ti] = pd.ri;
    used[pd.ri] = true;
    m.position_errors[pd.ti] = pd.pos_err;
    m.coefficient_errors[pd.ti] = pd.coeff_err;
    m.direction_errors[pd.ti] = pd.dir_err;
    ++matched;
  }
  if (matched != n) return std::nullopt;
  return m;
}

bool EsrrReport::all_pass() const {
  return std::all_of(cells.begin(), cells.end(),
                     [](const EsrrCell& c) { return c.esrr_verdict; });
}

bool EsrrReport::any_solver_failed() const {
  return std::any_of(cells.begin(), cells.end(),
                     [](const EsrrCell& c) { return c.solver_failed; });
}

std::string EsrrReport::to_csv() const {
  std::string out =
      "family,lambda,seed,noise_norm,atom_count,count_match,max_pos_err,"
      "max_coeff_err,max_dir_err,verdict,objective,wall_ms\n";
  char buf[512];
  for (const auto& c : cells) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%llu,%.17g,%d,%d,%.17g,%.17g,%.17g,%d,%.17g,%.17g\n",
                  to_string(family).c_str(), c.lambda,
                  static_cast<unsigned long long>(c.seed), c.noise_norm, c.atom_count,
                  c.count_match ? 1 : 0, c.max_pos_err, c.max_coeff_err, c.max_dir_err,
                  c.esrr_verdict ? 1 : 0, c.objective, c.wall_ms);
    out += buf;
  }
  return out;
}

double loglog_slope(const std::vector<double>& lambdas, const std::vector<double>& errs) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (lambdas[i] > 0 && errs[i] > 0) {
      lx.push_back(std::log(lambdas[i]));
      ly.push_back(std::log(errs[i]));
    }
  }
  const int m = static_cast<int>(lx.size());
  if (m < 2) return std::numeric_limits<double>::quiet_NaN();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < m; ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  const double denom = m * sxx - sx * sx;
  if (std::abs(denom) < 1e-30) return std::numeric_limits<double>::quiet_NaN();
  return (m * sxy - sx * sy) / denom;
}

EsrrReport run_sweep(const ProblemInstance& prob, const SparseSignal& u0,
                     const AdmissibleRegion& region, double eps,
                     const SolverConfig& solver_cfg, int threads) {
  region.validate();
  u0.validate();
  const Eigen::VectorXd y0 = forward_signal(prob, u0);

  EsrrReport rep;
  rep.family = prob.family;
  rep.epsilon = eps;
  for (double lambda : region.lambda_grid)
    for (double frac : region.noise_fractions)
      for (std::uint64_t seed : region.seeds) {
        EsrrCell cell;
        cell.lambda = lambda;
        cell.noise_fraction = frac;
        cell.seed = seed;
        cell.noise_norm = frac * region.alpha * lambda;
        rep.cells.push_back(cell);
      }

  auto run_cell = [&](EsrrCell& cell) {
    const auto t0 = std::chrono::steady_clock::now();
    const Eigen::VectorXd w = draw_noise(prob.N, cell.noise_norm, cell.seed);
    try {
      const SolveResult res = solve(prob, y0 + w, cell.lambda, solver_cfg);
      cell.objective = res.objective;
      cell.atom_count = res.u.size();
      cell.solver_failed = !res.converged;
      cell.count_match = res.u.size() == u0.size();
      if (!cell.solver_failed) {
        cell.matching = match_atoms(u0, res.u, eps);
        if (cell.matching) {
          const auto& m = *cell.matching;
          auto vmax = [](const std::vector<double>& v) {
            return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
          };
          cell.max_pos_err = vmax(m.position_errors);
          cell.max_coeff_err = vmax(m.coefficient_errors);
          cell.max_dir_err = vmax(m.direction_errors);
          cell.esrr_verdict = cell.count_match && cell.max_pos_err <= eps &&
                              cell.max_coeff_err <= eps && cell.max_dir_err <= eps;
        }
      }
    } catch (const Error& e) {
      log::warn(std::string("sweep cell failed: ") + e.what());
      cell.solver_failed = true;
    }
    cell.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
  };

  if (threads <= 1) {
    for (auto& cell : rep.cells) run_cell(cell);
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < rep.cells.size(); i = next.fetch_add(1))
          run_cell(rep.cells[i]);
      });
    for (auto& th : pool) th.join();
  }

  // decay diagnostic on the noiseless column (first seed per lambda)
  std::vector<double> ls, errs;
  for (double lambda : region.lambda_grid) {
    for (const auto& cell : rep.cells) {
      if (cell.lambda == lambda && cell.noise_fraction == 0.0 && cell.matching &&
          !cell.solver_failed) {
        ls.push_back(lambda);
        errs.push_back(cell.max_pos_err);
        break;
      }
    }
  }
  rep.decay_slope = loglog_slope(ls, errs);
  return rep;
}

FrontierResult shrink_lambda0(const ProblemInstance& prob, const SparseSignal& u0,
                              AdmissibleRegion region, double eps,
                              const SolverConfig& solver_cfg, int max_rounds, int threads) {
  FrontierResult out;
  for (int round = 0; round <= max_rounds; ++round) {
    out.rounds = round;
    out.report = run_sweep(prob, u0, region, eps, solver_cfg, threads);
    if (out.report.all_pass()) {
      out.found = true;
      out.region = region;
      return out;
    }
    region.lambda0 *= 0.5;
    for (double& l : region.lambda_grid) l *= 0.5;
  }
  out.region = region;
  return out;
}

UniquenessReport uniqueness_probe(const ProblemInstance& prob, const Eigen::VectorXd& y,
                                  double lambda, const SolveResult& result, int trials,
                                  const SolverConfig& cfg, std::uint64_t seed) {
  UniquenessReport rep;
  if (!result.converged)
    throw Error(ErrorCode::BAD_CONFIG, "uniqueness probe needs a converged result");

  std::mt19937_64 rng(seed);
  auto uniform = [&] { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
  double obj_min = result.objective, obj_max = result.objective;
  for (int t = 0; t < trials; ++t) {
    SparseSignal init = result.u;
    for (auto& wa : init.atoms) {
      const double jitter = 2e-3 * (uniform() - 0.5);
      if (auto* ts = std::get_if<TorusSpike>(&wa.atom)) ts->x = TorusPoint(ts->x.x + jitter);
      if (auto* vs = std::get_if<VectorSpike>(&wa.atom)) {
        vs->x = TorusPoint(vs->x.x + jitter);
        for (int c = 0; c < vs->a.size(); ++c) vs->a[c] += 2e-3 * (uniform() - 0.5);
        vs->a.normalize();
      }
      if (auto* as = std::get_if<AxisSpike>(&wa.atom)) as->x = TorusPoint(as->x.x + jitter);
      wa.c = std::max(wa.c * (1.0 + 0.1 * (uniform() - 0.5)), 1e-8);
    }
    const SolveResult re = solve(prob, y, lambda, cfg, init);
    obj_min = std::min(obj_min, re.objective);
    obj_max = std::max(obj_max, re.objective);
    double dist = 0.0;
    if (re.u.size() != result.u.size()) {
      dist = 1.0;
    } else if (auto m = match_atoms(result.u, re.u, 0.49)) {
      for (std::size_t i = 0; i < m->position_errors.size(); ++i)
        dist = std::max({dist, m->position_errors[i], m->direction_errors[i],
                         m->coefficient_errors[i]});
    } else {
      dist = 1.0;
    }
    rep.max_atom_distance = std::max(rep.max_atom_distance, dist);
  }
  rep.objective_spread = obj_max - obj_min;
  rep.consistent = rep.objective_spread <= 1e-8 && rep.max_atom_distance <= 1e-6;
  return rep;
}

}  // namespace esrr
