#pragma once

#include <Eigen/Dense>
#include <utility>

#include "esrr/atoms.hpp"
#include "esrr/certificate.hpp"

namespace esrr {

struct SolverConfig {
  int max_outer_iters{200};
  int lmo_grid{4096};
  int polish_iters{20};   // Newton steps refining the LMO grid winner
  int slide_iters{50};    // local-descent steps per outer iteration
  double coeff_tol{1e-10};
  double gap_tol{1e-7};
  double prune_tol{1e-10};

  void validate() const;
};

struct SolveResult {
  SparseSignal u;
  double objective{0.0};
  double certificate_sup{0.0};  // sup over Ext(B) of the pairing at termination
  int iterations{0};
  bool converged{false};
};

// 1/2 |K u - y|^2 + lambda R(u)
double objective_value(const ProblemInstance& prob, const SparseSignal& u,
                       const Eigen::VectorXd& y, double lambda);

// Regularized dual variable p = (y - K u) / lambda.
Certificate residual_certificate(const ProblemInstance& prob, const SparseSignal& u,
                                 const Eigen::VectorXd& y, double lambda);

// Linear minimization oracle: the extreme point maximizing <K*p, u> over
// Ext(B), by grid scan (ties to the smallest grid index) plus safeguarded
// Newton polish confined to the winning grid cell.
std::pair<Atom, double> lmo(const ProblemInstance& prob, const Certificate& cert,
                            const SolverConfig& cfg = {});

// argmin_{c >= 0} 1/2 c^T Q c - b^T c for PSD Q (non-negative least squares
// in normal-equation form). Lawson-Hanson active set; throws NO_CONVERGENCE
// past the iteration cap.
Eigen::VectorXd nnls_normal(const Eigen::MatrixXd& Q, const Eigen::VectorXd& b,
                            double enter_tol = 1e-12);

// Fully corrective step: min_{c >= 0} 1/2 |A c - y|^2 + lambda sum(c) with
// A the atom-column dictionary. Lawson-Hanson active set; throws
// NO_CONVERGENCE past the iteration cap.
Eigen::VectorXd coefficient_subproblem(const ProblemInstance& prob,
                                       const std::vector<Atom>& atoms,
                                       const Eigen::VectorXd& y, double lambda,
                                       const SolverConfig& cfg = {});

// Joint local descent on smooth atom parameters (positions, directions) and
// coefficients. Objective never increases; discrete tags never change;
// directions stay unit norm.
SparseSignal slide(const ProblemInstance& prob, const SparseSignal& u,
                   const Eigen::VectorXd& y, double lambda,
                   const SolverConfig& cfg = {});

// Sliding conditional gradient loop: insert the LMO atom, re-fit
// coefficients, slide, prune and merge, until the residual certificate is
// dual feasible up to gap_tol. Non-converged runs return the best iterate
// with converged = false.
SolveResult solve(const ProblemInstance& prob, const Eigen::VectorXd& y, double lambda,
                  const SolverConfig& cfg = {}, const SparseSignal& init = {});

}  // namespace esrr
