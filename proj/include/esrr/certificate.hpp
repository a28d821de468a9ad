#pragma once

#include <Eigen/Dense>
#include <vector>

#include "esrr/atoms.hpp"

namespace esrr {

// Dual vector p in R^N together with the induced function eta = K* p.
// Holds a non-owning reference to the problem; keep the problem alive.
struct Certificate {
  Eigen::VectorXd p;
  const ProblemInstance* prob{nullptr};
};

// <K*p, atom> = <p, K atom>.
double eta_eval(const Certificate& cert, const Atom& atom);

// eta^(order)(x) = sum_i p_i phi_i^(order)(x), a d-vector.
Eigen::VectorXd eta_function(const Certificate& cert, TorusPoint x, int order);

// One polished local maximum of the extreme-point pairing u -> <K*p, u>.
struct ExtremeHit {
  Atom atom;
  double value{0.0};
};

// All local maxima of the pairing over Ext(B), found by dense grid scan plus
// safeguarded Newton polish. For demixing this includes the coordinate atoms
// (0, a e_k). Sorted by decreasing value.
std::vector<ExtremeHit> certificate_scan(const Certificate& cert, int grid,
                                         int polish_iters = 20);

// sup over Ext(B) of <K*p, u>; feasible iff <= 1.
double dual_feasibility_margin(const Certificate& cert, int grid = 8192);

struct QpOptions {
  int grid{512};          // initial sampling of the semi-infinite constraint
  int max_refinements{3}; // grid doublings when verification fails
  int max_cuts{400};
  double feas_tol{1e-7};  // accepted margin above 1 at verification
};

// Minimal-norm dual vector interpolating the support of u0: minimizes |p|^2
// subject to <p, K u0_i> = 1 and dual feasibility, the latter enforced by
// lazily generated cuts at polished scan maxima plus (for demixing) all 2N
// coordinate constraints |p_k| <= 1. Throws INFEASIBLE when the equality
// system is contradictory and GRID_INSUFFICIENT when verification keeps
// failing after the configured refinements.
Certificate minimal_norm_certificate_qp(const ProblemInstance& prob,
                                        const SparseSignal& u0,
                                        const QpOptions& opts = {});

struct SolverConfig;  // solver.hpp

struct LimitCertificate {
  Certificate cert;
  // |p_{lambda_j} - p_{lambda_{j+1}}| along the sequence
  std::vector<double> cauchy_residuals;
};

// Vanishing-regularization construction: for y0 = K u0 solve the regularized
// problem along a decreasing lambda sequence and return p = (y0 - K u) / lambda
// at the smallest lambda. Throws SOLVER_FAILED if any solve does not converge.
LimitCertificate minimal_norm_certificate_limit(const ProblemInstance& prob,
                                                const SparseSignal& u0,
                                                const std::vector<double>& lambdas,
                                                const SolverConfig& cfg);

struct MndscTols {
  double interp_tol{1e-6};
  double exc_tol{1e-4};
  double exclusion_radius{0.05};
  double curv_tol{1e-6};
};

struct CurvatureEntry {
  Atom atom;
  double value{0.0};  // signed second-derivative quantity; pass iff < -curv_tol
  bool checked{true}; // isolated atoms skip the curvature condition
};

struct MndscReport {
  bool source_condition_ok{false};
  std::vector<double> support_interpolation;  // <eta0, u0_i> per support atom
  std::vector<ExtremeHit> spurious_maximizers;
  std::vector<CurvatureEntry> curvature;
  double feasibility_margin{0.0};
  bool verdict{false};
  std::vector<std::string> reasons;
};

// Checks the three non-degeneracy conditions of the recovery theorems:
// (a) the certificate interpolates the support and is dual feasible,
// (b) no extreme point outside the exclusion neighborhoods of the support
//     pairs to >= 1 - exc_tol,
// (c) the pairing has strictly negative second derivative at each support
//     atom with a smooth position parameter (isolated atoms are exempt).
MndscReport check_mndsc(const ProblemInstance& prob, const SparseSignal& u0,
                        const Certificate& cert, const MndscTols& tols = {},
                        int grid = 8192);

// d^2/dt^2 <eta, gamma(t)> along the unit-normalized interpolating curve
// gamma(t) = (a_t/|a_t|) delta_{x_t}, a_t = t a2 + (1-t) a1, with x_t on the
// shorter torus arc from x1 to x2. Throws DEGENERATE_DIRECTIONS when a_t
// nearly vanishes.
double group_curve_second_derivative(const Certificate& cert, const Eigen::VectorXd& a1,
                                     const Eigen::VectorXd& a2, TorusPoint x1,
                                     TorusPoint x2, double t);

}  // namespace esrr
