#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "esrr/atoms.hpp"
#include "esrr/certificate.hpp"
#include "esrr/solver.hpp"

namespace esrr {

// Parameter/noise cells (lambda, w) with |w| = fraction * alpha * lambda,
// so every generated pair satisfies |w| <= alpha * lambda <= alpha * lambda0.
struct AdmissibleRegion {
  double alpha{0.1};
  double lambda0{1e-2};
  std::vector<double> lambda_grid;       // decreasing, in (0, lambda0]
  std::vector<double> noise_fractions;   // in [0, 1]
  std::vector<std::uint64_t> seeds;

  void validate() const;
};

// Deterministic-given-seed vector uniform on the sphere of radius magnitude.
Eigen::VectorXd draw_noise(int n, double magnitude, std::uint64_t seed);

struct MatchResult {
  std::vector<int> assignment;  // truth index -> recovered index
  std::vector<double> position_errors;
  std::vector<double> coefficient_errors;
  std::vector<double> direction_errors;  // group-l2 only, else zeros
};

// Greedy minimal-distance bijection between same-variant atoms. Admissible
// pairs must agree on discrete tags and have smooth distances <= eps.
// nullopt when counts differ or no admissible bijection exists.
std::optional<MatchResult> match_atoms(const SparseSignal& truth,
                                       const SparseSignal& recovered, double eps);

struct EsrrCell {
  double lambda{0.0};
  double noise_fraction{0.0};
  std::uint64_t seed{0};
  double noise_norm{0.0};
  bool solver_failed{false};
  int atom_count{0};
  bool count_match{false};
  std::optional<MatchResult> matching;
  double max_pos_err{0.0};
  double max_coeff_err{0.0};
  double max_dir_err{0.0};
  bool esrr_verdict{false};
  double objective{0.0};
  double wall_ms{0.0};
};

struct EsrrReport {
  Family family{Family::ScalarBlasso};
  double epsilon{0.05};
  std::vector<EsrrCell> cells;
  // log-log slope of max position error vs lambda on the noiseless column;
  // NaN when fewer than two usable points exist
  double decay_slope{std::numeric_limits<double>::quiet_NaN()};

  bool all_pass() const;
  bool any_solver_failed() const;
  std::string to_csv() const;
};

// Solves every (lambda, fraction, seed) cell against y = K u0 + w, matches
// recovered atoms to the ground truth and records per-cell verdicts. Cells
// run independently; `threads` > 1 fans them out with results collected in
// deterministic order.
EsrrReport run_sweep(const ProblemInstance& prob, const SparseSignal& u0,
                     const AdmissibleRegion& region, double eps,
                     const SolverConfig& solver_cfg, int threads = 1);

struct UniquenessReport {
  double objective_spread{0.0};
  double max_atom_distance{0.0};
  bool consistent{false};
};

// Re-solves from randomized perturbed initializations; agreement across runs
// supports (does not prove) uniqueness of the minimizer.
UniquenessReport uniqueness_probe(const ProblemInstance& prob, const Eigen::VectorXd& y,
                                  double lambda, const SolveResult& result, int trials,
                                  const SolverConfig& cfg, std::uint64_t seed = 1234);

// Least-squares slope of log(err) vs log(lambda); NaN when under-determined.
double loglog_slope(const std::vector<double>& lambdas, const std::vector<double>& errs);

struct FrontierResult {
  AdmissibleRegion region;  // the shrunk region
  EsrrReport report;        // sweep at that region
  bool found{false};
  int rounds{0};
};

// Halves lambda0 (rescaling the lambda grid proportionally) until the whole
// sweep passes, up to max_rounds; measures an empirical admissible frontier.
FrontierResult shrink_lambda0(const ProblemInstance& prob, const SparseSignal& u0,
                              AdmissibleRegion region, double eps,
                              const SolverConfig& solver_cfg, int max_rounds = 6,
                              int threads = 1);

}  // namespace esrr
