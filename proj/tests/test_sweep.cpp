#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>

#include "esrr/errors.hpp"
#include "esrr/sweep.hpp"

using namespace esrr;
namespace {

// kernel 18 of this bank sits far from both measure spikes, so the canonical
// coordinate atom does not fight the torus spikes for the same residual mass
SparseSignal demix_truth() {
  return SparseSignal{{{1.0, TorusSpike{+1, TorusPoint{0.3}}},
                       {0.7, TorusSpike{-1, TorusPoint{0.7}}},
                       {0.5, CanonicalSpike{18, +1}}}};
}

ProblemInstance demix_problem() {
  return ProblemInstance::make(Family::Demixing, KernelBank::gaussian_random(20, 1, 0.06, 5));
}

AdmissibleRegion small_region() {
  AdmissibleRegion r;
  r.alpha = 0.1;
  r.lambda0 = 1e-2;
  r.lambda_grid = {1e-2, 1e-3};
  r.noise_fractions = {0.0, 1.0};
  r.seeds = {1, 2};
  return r;
}
}  // namespace

TEST_CASE("draw_noise is deterministic with exact magnitude") {
  Eigen::VectorXd w1 = draw_noise(10, 0.25, 42);
  Eigen::VectorXd w2 = draw_noise(10, 0.25, 42);
  CHECK((w1 - w2).norm() == 0.0);  // bitwise identical
  CHECK(w1.norm() == doctest::Approx(0.25).epsilon(1e-14));
  Eigen::VectorXd w3 = draw_noise(10, 0.25, 43);
  CHECK((w1 - w3).norm() > 1e-3);
  CHECK(draw_noise(10, 0.0, 42).norm() == 0.0);
}

TEST_CASE("region validation") {
  auto r = small_region();
  CHECK_NOTHROW(r.validate());
  auto bad = small_region();
  bad.lambda_grid = {1e-3, 1e-2};  // not decreasing
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = small_region();
  bad.lambda_grid = {2e-2};  // above lambda0
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = small_region();
  bad.noise_fractions = {1.5};  // leaves the admissible set
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = small_region();
  bad.alpha = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("match_atoms on hand-built pairs") {
  SparseSignal truth{{{1.0, TorusSpike{+1, TorusPoint{0.2}}},
                      {0.5, TorusSpike{-1, TorusPoint{0.7}}}}};
  SparseSignal rec{{{0.52, TorusSpike{-1, TorusPoint{0.701}}},
                    {0.98, TorusSpike{+1, TorusPoint{0.199}}}}};
  auto m = match_atoms(truth, rec, 0.05);
  REQUIRE(m.has_value());
  CHECK(m->assignment == std::vector<int>{1, 0});
  CHECK(m->position_errors[0] == doctest::Approx(0.001));
  CHECK(m->coefficient_errors[0] == doctest::Approx(0.02));
  CHECK(m->coefficient_errors[1] == doctest::Approx(0.02));

  // count mismatch
  SparseSignal extra = rec;
  extra.atoms.push_back({0.01, TorusSpike{+1, TorusPoint{0.5}}});
  CHECK_FALSE(match_atoms(truth, extra, 0.05).has_value());

  // wrong sign tag blocks the pairing even at zero distance
  SparseSignal flipped{{{1.0, TorusSpike{-1, TorusPoint{0.2}}},
                        {0.5, TorusSpike{-1, TorusPoint{0.7}}}}};
  CHECK_FALSE(match_atoms(truth, flipped, 0.05).has_value());

  // too far for the epsilon ball
  SparseSignal far{{{1.0, TorusSpike{+1, TorusPoint{0.3}}},
                    {0.5, TorusSpike{-1, TorusPoint{0.7}}}}};
  CHECK_FALSE(match_atoms(truth, far, 0.05).has_value());
}

TEST_CASE("match_atoms recovers a random permutation with exact errors") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    int n = 2 + static_cast<int>(rng() % 3);
    SparseSignal truth;
    for (int i = 0; i < n; ++i)
      truth.atoms.push_back(
          {0.5 + unif(rng), TorusSpike{unif(rng) < 0.5 ? -1 : +1, TorusPoint{(i + 0.2) / n}}});
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    SparseSignal rec;
    rec.atoms.resize(n);
    std::vector<double> dpos(n), dc(n);
    for (int i = 0; i < n; ++i) {
      const auto& t = std::get<TorusSpike>(truth.atoms[i].atom);
      dpos[i] = 1e-3 * (2 * unif(rng) - 1);
      dc[i] = 1e-3 * (2 * unif(rng) - 1);
      rec.atoms[perm[i]] = {truth.atoms[i].c + dc[i],
                            TorusSpike{t.sign, TorusPoint{t.x.x + dpos[i]}}};
    }
    auto m = match_atoms(truth, rec, 0.05);
    REQUIRE(m.has_value());
    for (int i = 0; i < n; ++i) {
      CHECK(m->assignment[i] == perm[i]);
      CHECK(m->position_errors[i] == doctest::Approx(std::abs(dpos[i])).epsilon(1e-9));
      CHECK(m->coefficient_errors[i] == doctest::Approx(std::abs(dc[i])).epsilon(1e-9));
    }
  }
}

TEST_CASE("match_atoms reports direction errors for group atoms") {
  Eigen::VectorXd a(2), b(2);
  a << 1.0, 0.0;
  b << std::cos(0.01), std::sin(0.01);
  SparseSignal truth{{{1.0, VectorSpike{a, TorusPoint{0.4}}}}};
  SparseSignal rec{{{1.0, VectorSpike{b, TorusPoint{0.4}}}}};
  auto m = match_atoms(truth, rec, 0.05);
  REQUIRE(m.has_value());
  CHECK(m->direction_errors[0] == doctest::Approx((a - b).norm()).epsilon(1e-9));
}

TEST_CASE("run_sweep produces verdicts, determinism, and a sensible csv") {
  auto prob = demix_problem();
  auto u0 = demix_truth();
  auto region = small_region();
  SolverConfig cfg;
  auto rep1 = run_sweep(prob, u0, region, 0.05, cfg);
  REQUIRE(rep1.cells.size() == 2 * 2 * 2);
  CHECK(rep1.all_pass());
  CHECK_FALSE(rep1.any_solver_failed());

  // deterministic modulo timing
  auto rep2 = run_sweep(prob, u0, region, 0.05, cfg);
  REQUIRE(rep2.cells.size() == rep1.cells.size());
  for (std::size_t i = 0; i < rep1.cells.size(); ++i) {
    CHECK(rep1.cells[i].objective == rep2.cells[i].objective);
    CHECK(rep1.cells[i].max_pos_err == rep2.cells[i].max_pos_err);
    CHECK(rep1.cells[i].esrr_verdict == rep2.cells[i].esrr_verdict);
  }

  // cells arrive in (lambda, fraction, seed) order with the advertised norms
  CHECK(rep1.cells[0].lambda == 1e-2);
  CHECK(rep1.cells[0].noise_fraction == 0.0);
  CHECK(rep1.cells[0].noise_norm == 0.0);
  CHECK(rep1.cells[3].noise_norm == doctest::Approx(0.1 * 1e-2));
  CHECK(rep1.cells[4].lambda == 1e-3);

  std::string csv = rep1.to_csv();
  CHECK(csv.rfind("family,lambda,seed,noise_norm,atom_count,count_match,max_pos_err,"
                  "max_coeff_err,max_dir_err,verdict,objective,wall_ms",
                  0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);  // header + 8 cells
}

TEST_CASE("run_sweep with threads matches the serial result") {
  auto prob = demix_problem();
  auto u0 = demix_truth();
  auto region = small_region();
  SolverConfig cfg;
  auto serial = run_sweep(prob, u0, region, 0.05, cfg, 1);
  auto parallel = run_sweep(prob, u0, region, 0.05, cfg, 4);
  REQUIRE(serial.cells.size() == parallel.cells.size());
  for (std::size_t i = 0; i < serial.cells.size(); ++i) {
    CHECK(serial.cells[i].lambda == parallel.cells[i].lambda);
    CHECK(serial.cells[i].seed == parallel.cells[i].seed);
    CHECK(serial.cells[i].objective == parallel.cells[i].objective);
    CHECK(serial.cells[i].max_pos_err == parallel.cells[i].max_pos_err);
  }
}

TEST_CASE("noiseless recovery error shrinks with lambda") {
  auto prob = ProblemInstance::make(Family::ScalarBlasso, KernelBank::fourier_basis(15));
  SparseSignal u0{{{1.0, TorusSpike{+1, TorusPoint{0.22}}},
                   {0.8, TorusSpike{-1, TorusPoint{0.67}}}}};
  AdmissibleRegion region;
  region.alpha = 0.1;
  region.lambda0 = 1e-2;
  region.lambda_grid = {1e-2, 1e-3, 1e-4};
  region.noise_fractions = {0.0};
  region.seeds = {1};
  auto rep = run_sweep(prob, u0, region, 0.05, SolverConfig{});
  REQUIRE(rep.cells.size() == 3);
  CHECK(rep.all_pass());
  // noiseless: tighter lambda pins the support better
  CHECK(rep.cells[2].max_pos_err <= rep.cells[0].max_pos_err + 1e-12);
  CHECK(std::isfinite(rep.decay_slope));
  CHECK(rep.decay_slope > 0.0);
}

TEST_CASE("loglog_slope recovers a planted power law") {
  std::vector<double> lambdas{1e-2, 1e-3, 1e-4, 1e-5};
  std::vector<double> errs;
  for (double l : lambdas) errs.push_back(3.0 * std::pow(l, 1.7));
  CHECK(loglog_slope(lambdas, errs) == doctest::Approx(1.7).epsilon(1e-10));
  CHECK(std::isnan(loglog_slope({1e-2}, {1.0})));
  // zero errors are skipped rather than breaking the log
  CHECK(std::isnan(loglog_slope({1e-2, 1e-3}, {0.0, 0.0})));
}

TEST_CASE("uniqueness probe agrees with itself on a well-posed instance") {
  auto prob = ProblemInstance::make(Family::ScalarBlasso, KernelBank::fourier_basis(15));
  SparseSignal u0{{{1.0, TorusSpike{+1, TorusPoint{0.3}}}}};
  Eigen::VectorXd y = forward_signal(prob, u0);
  double lambda = 1e-3;
  auto res = solve(prob, y, lambda);
  REQUIRE(res.converged);
  auto rep = uniqueness_probe(prob, y, lambda, res, 5, SolverConfig{});
  CHECK(rep.consistent);
  CHECK(rep.objective_spread <= 1e-8);
  CHECK(rep.max_atom_distance <= 1e-6);
}

TEST_CASE("shrink_lambda0 finds a passing frontier for a hard start") {
  auto prob = ProblemInstance::make(Family::ScalarBlasso, KernelBank::fourier_basis(15));
  SparseSignal u0{{{1.0, TorusSpike{+1, TorusPoint{0.25}}},
                   {0.9, TorusSpike{+1, TorusPoint{0.75}}}}};
  AdmissibleRegion region;
  region.alpha = 0.1;
  // deliberately coarse: lambda as large as the smallest coefficient
  region.lambda0 = 0.9;
  region.lambda_grid = {0.9, 0.09};
  region.noise_fractions = {0.0, 1.0};
  region.seeds = {5};
  auto fr = shrink_lambda0(prob, u0, region, 0.05, SolverConfig{}, 8);
  CHECK(fr.found);
  CHECK(fr.report.all_pass());
  CHECK(fr.region.lambda0 < 0.9);
  CHECK(fr.rounds >= 1);
}
