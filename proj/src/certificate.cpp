#include "esrr/certificate.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "esrr/errors.hpp"
#include "esrr/logging.hpp"
#include "esrr/solver.hpp"

namespace esrr {

double eta_eval(const Certificate& cert, const Atom& atom) {
  return cert.p.dot(forward_atom(*cert.prob, atom));
}

Eigen::VectorXd eta_function(const Certificate& cert, TorusPoint x, int order) {
  return cert.prob->bank.frame(x, order).transpose() * cert.p;
}

namespace {

// Safeguarded Newton ascent of a smooth 1-d objective, confined to the grid
// cell [x0 - h, x0 + h]. f0/f1/f2 are value and derivatives.
std::pair<double, double> polish_max(const std::function<double(double)>& f0,
                                     const std::function<double(double)>& f1,
                                     const std::function<double(double)>& f2,
                                     double x0, double h, int iters) {
  double off = 0.0;
  double best = f0(x0);
  for (int it = 0; it < iters; ++it) {
    const double x = x0 + off;
    const double d1 = f1(x);
    const double d2 = f2(x);
    if (!(d2 < -1e-18)) break;  // not locally concave; keep the scan point
    double step = -d1 / d2;
    step = std::clamp(step, -h - off, h - off);
    bool improved = false;
    for (int half = 0; half < 6; ++half) {
      const double cand = f0(x0 + off + step);
      if (cand > best) {
        off += step;
        best = cand;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved || std::abs(d1) < 1e-15 * std::max(1.0, std::abs(best))) break;
  }
  return {x0 + off, best};
}

// cyclic local maxima indices of s; ties resolved toward the smaller index
std::vector<int> local_maxima(const std::vector<double>& s) {
  const int n = static_cast<int>(s.size());
  std::vector<int> out;
  for (int i = 0; i < n; ++i) {
    const double prev = s[(i + n - 1) % n];
    const double next = s[(i + 1) % n];
    if (s[i] >= prev && s[i] > next) out.push_back(i);
  }
  if (out.empty()) out.push_back(0);  // flat ridge: smallest grid index
  return out;
}

}  // namespace

std::vector<ExtremeHit> certificate_scan(const Certificate& cert, int grid,
                                         int polish_iters) {
  const ProblemInstance& prob = *cert.prob;
  const double h = 1.0 / grid;
  std::vector<ExtremeHit> hits;

  auto eta = [&](double x, int order) { return eta_function(cert, TorusPoint(x), order); };

  if (prob.family == Family::ScalarBlasso || prob.family == Family::Demixing) {
    std::vector<double> vals(grid), s(grid);
    for (int i = 0; i < grid; ++i) {
      vals[i] = eta(i * h, 0)[0];
      s[i] = std::abs(vals[i]);
    }
    for (int i : local_maxima(s)) {
      const double sigma = vals[i] >= 0.0 ? 1.0 : -1.0;
      auto [x, v] = polish_max([&](double x) { return sigma * eta(x, 0)[0]; },
                               [&](double x) { return sigma * eta(x, 1)[0]; },
                               [&](double x) { return sigma * eta(x, 2)[0]; }, i * h, h,
                               polish_iters);
      hits.push_back({TorusSpike{sigma > 0 ? +1 : -1, TorusPoint(x)}, v});
    }
    if (prob.family == Family::Demixing) {
      for (int k = 0; k < prob.N; ++k) {
        const int sign = cert.p[k] >= 0.0 ? +1 : -1;
        hits.push_back({CanonicalSpike{k, sign}, std::abs(cert.p[k])});
      }
    }
  } else if (prob.family == Family::GroupL2) {
    std::vector<double> s(grid);
    for (int i = 0; i < grid; ++i) s[i] = eta(i * h, 0).norm();
    auto m0 = [&](double x) { return 0.5 * eta(x, 0).squaredNorm(); };
    auto m1 = [&](double x) { return eta(x, 0).dot(eta(x, 1)); };
    auto m2 = [&](double x) {
      return eta(x, 1).squaredNorm() + eta(x, 0).dot(eta(x, 2));
    };
    for (int i : local_maxima(s)) {
      auto [x, m] = polish_max(m0, m1, m2, i * h, h, polish_iters);
      const Eigen::VectorXd e = eta(x, 0);
      const double norm = e.norm();
      Eigen::VectorXd a = Eigen::VectorXd::Unit(prob.d, 0);
      if (norm > 1e-14) a = e / norm;
      hits.push_back({VectorSpike{a, TorusPoint(x)}, norm});
    }
  } else {  // GroupL1
    for (int k = 0; k < prob.d; ++k) {
      std::vector<double> vals(grid), s(grid);
      for (int i = 0; i < grid; ++i) {
        vals[i] = eta(i * h, 0)[k];
        s[i] = std::abs(vals[i]);
      }
      for (int i : local_maxima(s)) {
        const double sigma = vals[i] >= 0.0 ? 1.0 : -1.0;
        auto [x, v] = polish_max([&](double x) { return sigma * eta(x, 0)[k]; },
                                 [&](double x) { return sigma * eta(x, 1)[k]; },
                                 [&](double x) { return sigma * eta(x, 2)[k]; }, i * h, h,
                                 polish_iters);
        hits.push_back({AxisSpike{k, sigma > 0 ? +1 : -1, TorusPoint(x)}, v});
      }
    }
  }

  std::stable_sort(hits.begin(), hits.end(),
                   [](const ExtremeHit& a, const ExtremeHit& b) { return a.value > b.value; });
  return hits;
}

double dual_feasibility_margin(const Certificate& cert, int grid) {
  const auto hits = certificate_scan(cert, grid);
  return hits.empty() ? 0.0 : hits.front().value;
}

namespace {

// min 1/2 |p|^2 s.t. E p = 1, G p <= 1. Null-space reduction p = p0 + Z q
// turns this into the least-distance problem min |q| s.t. (G Z) q <= 1 - G p0,
// solved through the classic NNLS reduction (Lawson-Hanson), which terminates
// finitely even with duplicate or degenerate cut rows.
Eigen::VectorXd min_norm_with_cuts(const Eigen::MatrixXd& E, const Eigen::MatrixXd& G,
                                   int dim) {
  Eigen::VectorXd p0;
  Eigen::MatrixXd Z;  // orthonormal basis of ker E
  if (E.rows() == 0) {
    p0 = Eigen::VectorXd::Zero(dim);
    Z = Eigen::MatrixXd::Identity(dim, dim);
  } else {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(E, Eigen::ComputeThinU | Eigen::ComputeFullV);
    p0 = svd.solve(Eigen::VectorXd::Ones(E.rows()));  // min-norm interpolant
    const double thresh = 1e-12 * svd.singularValues()(0);
    int rank = 0;
    while (rank < svd.singularValues().size() && svd.singularValues()(rank) > thresh)
      ++rank;
    Z = svd.matrixV().rightCols(dim - rank);
  }

  if (G.rows() == 0) return p0;
  if (Z.cols() == 0) {
    if ((G * p0 - Eigen::VectorXd::Ones(G.rows())).maxCoeff() > 1e-9)
      throw Error(ErrorCode::INFEASIBLE, "support determines the dual vector uniquely "
                                         "but it is not dual feasible");
    return p0;
  }

  const Eigen::MatrixXd A = G * Z;  // cuts in null-space coordinates
  const Eigen::VectorXd slack = Eigen::VectorXd::Ones(G.rows()) - G * p0;
  const int m = static_cast<int>(A.rows());
  const int k = static_cast<int>(A.cols());
  // least distance: min |q| s.t. (-A) q >= -slack, via NNLS on [(-A)^T; -slack^T]
  Eigen::MatrixXd M(k + 1, m);
  M.topRows(k) = -A.transpose();
  M.row(k) = -slack.transpose();
  Eigen::VectorXd f = Eigen::VectorXd::Zero(k + 1);
  f(k) = 1.0;
  const Eigen::VectorXd u = nnls_normal(M.transpose() * M, M.transpose() * f);
  const Eigen::VectorXd r = M * u - f;
  if (r.norm() < 1e-10)
    throw Error(ErrorCode::INFEASIBLE, "no dual-feasible vector interpolates the support");
  const Eigen::VectorXd q = -r.head(k) / r(k);
  return p0 + Z * q;
}

}  // namespace

Certificate minimal_norm_certificate_qp(const ProblemInstance& prob,
                                        const SparseSignal& u0, const QpOptions& opts) {
  u0.validate();
  const auto indep = gram_independence_check(prob, u0);
  if (!indep.independent)
    throw Error(ErrorCode::INFEASIBLE, "support atom images are linearly dependent");

  const int n = u0.size();
  Eigen::MatrixXd E(n, prob.N);
  for (int i = 0; i < n; ++i) E.row(i) = forward_atom(prob, u0.atoms[i].atom).transpose();

  if (n > 0) {
    // consistency of the interpolation system (opposite-sign duplicates etc.)
    const Eigen::VectorXd mu =
        E.transpose() * (E * E.transpose()).fullPivLu().solve(Eigen::VectorXd::Ones(n));
    if ((E * mu - Eigen::VectorXd::Ones(n)).cwiseAbs().maxCoeff() > 1e-8)
      throw Error(ErrorCode::INFEASIBLE, "no dual vector interpolates the support");
  }

  std::vector<Eigen::VectorXd> cuts;
  if (prob.family == Family::Demixing) {
    for (int k = 0; k < prob.N; ++k)
      for (int sign : {+1, -1})
        cuts.push_back(forward_atom(prob, CanonicalSpike{k, sign}));
  }

  int grid = opts.grid;
  Certificate cert{Eigen::VectorXd::Zero(prob.N), &prob};
  for (int refinement = 0; refinement <= opts.max_refinements; ++refinement, grid *= 2) {
    double prev_norm = -1.0;
    for (int round = 0; round < opts.max_cuts; ++round) {
      Eigen::MatrixXd G(static_cast<int>(cuts.size()), prob.N);
      for (std::size_t j = 0; j < cuts.size(); ++j) G.row(j) = cuts[j].transpose();
      cert.p = min_norm_with_cuts(E, G, prob.N);

      // drop strictly inactive cuts so the working set stays small; the scan
      // re-generates any cut that becomes violated again
      std::vector<Eigen::VectorXd> active;
      for (const auto& g : cuts)
        if (g.dot(cert.p) >= 1.0 - 1e-9) active.push_back(g);
      cuts = std::move(active);

      log::debug("certificate qp: refinement " + std::to_string(refinement) + " round " +
                 std::to_string(round) + ", " + std::to_string(cuts.size()) +
                 " active cuts, |p| " + std::to_string(cert.p.norm()));

      // near the optimum the cut values converge geometrically while |p|
      // stalls; once the norm stops moving, further cuts cannot change the
      // solution and we go straight to verification
      const bool stalled = prev_norm >= 0.0 && cert.p.norm() - prev_norm < 1e-13 * cert.p.norm();
      prev_norm = cert.p.norm();

      const auto hits = certificate_scan(cert, grid);
      double worst = 0.0;
      int added = 0;
      for (const auto& hit : hits) {
        worst = std::max(worst, hit.value);
        if (!stalled && hit.value > 1.0 + 1e-12 && added < 8) {
          cuts.push_back(forward_atom(prob, hit.atom));
          ++added;
        }
      }
      if (added == 0) {
        // converged on this grid; verify at a finer scan before accepting
        const double margin = dual_feasibility_margin(cert, 2 * grid);
        if (margin <= 1.0 + opts.feas_tol) {
          log::debug("certificate qp: margin " + std::to_string(margin) + " with " +
                     std::to_string(cuts.size()) + " cuts");
          return cert;
        }
        break;  // refine the grid
      }
    }
  }
  throw Error(ErrorCode::GRID_INSUFFICIENT,
              "dual feasibility not certified after grid refinements");
}

LimitCertificate minimal_norm_certificate_limit(const ProblemInstance& prob,
                                                const SparseSignal& u0,
                                                const std::vector<double>& lambdas,
                                                const SolverConfig& cfg) {
  u0.validate();
  const Eigen::VectorXd y0 = forward_signal(prob, u0);
  LimitCertificate out;
  out.cert.prob = &prob;
  out.cert.p = Eigen::VectorXd::Zero(prob.N);
  Eigen::VectorXd prev;
  SparseSignal warm = u0;
  for (double lambda : lambdas) {
    const SolveResult res = solve(prob, y0, lambda, cfg, warm);
    if (!res.converged)
      throw Error(ErrorCode::SOLVER_FAILED,
                  "regularized solve did not converge at lambda " + std::to_string(lambda));
    out.cert.p = (y0 - forward_signal(prob, res.u)) / lambda;
    if (prev.size() > 0) out.cauchy_residuals.push_back((out.cert.p - prev).norm());
    prev = out.cert.p;
    warm = res.u;
  }
  return out;
}

namespace {

bool in_support_neighborhood(const Atom& hit, const SparseSignal& u0, double eps) {
  for (const auto& [c, sup] : u0.atoms) {
    if (hit.index() != sup.index()) continue;
    if (const auto* t = std::get_if<TorusSpike>(&hit)) {
      const auto& s = std::get<TorusSpike>(sup);
      if (t->sign == s.sign && torus_dist(t->x, s.x) <= eps) return true;
    } else if (const auto* cs = std::get_if<CanonicalSpike>(&hit)) {
      const auto& s = std::get<CanonicalSpike>(sup);
      if (cs->k == s.k && cs->sign == s.sign) return true;
    } else if (const auto* v = std::get_if<VectorSpike>(&hit)) {
      const auto& s = std::get<VectorSpike>(sup);
      if (torus_dist(v->x, s.x) <= eps && (v->a - s.a).norm() <= eps) return true;
    } else {
      const auto& a = std::get<AxisSpike>(hit);
      const auto& s = std::get<AxisSpike>(sup);
      if (a.k == s.k && a.sign == s.sign && torus_dist(a.x, s.x) <= eps) return true;
    }
  }
  return false;
}

}  // namespace

MndscReport check_mndsc(const ProblemInstance& prob, const SparseSignal& u0,
                        const Certificate& cert, const MndscTols& tols, int grid) {
  MndscReport rep;

  // a) source condition: support interpolation + dual feasibility
  bool interp_ok = true;
  for (const auto& [c, atom] : u0.atoms) {
    const double v = eta_eval(cert, atom);
    rep.support_interpolation.push_back(v);
    if (std::abs(v - 1.0) > tols.interp_tol) interp_ok = false;
  }
  rep.feasibility_margin = dual_feasibility_margin(cert, grid);
  rep.source_condition_ok = interp_ok && rep.feasibility_margin <= 1.0 + tols.interp_tol;
  if (!interp_ok) rep.reasons.push_back("support interpolation off unit value");
  if (rep.feasibility_margin > 1.0 + tols.interp_tol)
    rep.reasons.push_back("dual vector infeasible: margin " +
                          std::to_string(rep.feasibility_margin));

  // b) extreme critical set: near-unit pairings outside support neighborhoods
  for (const auto& hit : certificate_scan(cert, grid)) {
    if (hit.value < 1.0 - tols.exc_tol) continue;
    if (!in_support_neighborhood(hit.atom, u0, tols.exclusion_radius))
      rep.spurious_maximizers.push_back(hit);
  }
  if (!rep.spurious_maximizers.empty())
    rep.reasons.push_back("spurious near-unit extreme point at " +
                          describe(rep.spurious_maximizers.front().atom));

  // c) strict concavity of the pairing at each support atom; atoms with no
  // smooth position parameter are isolated and exempt
  bool curvature_ok = true;
  for (const auto& [c, atom] : u0.atoms) {
    CurvatureEntry entry;
    entry.atom = atom;
    if (const auto* t = std::get_if<TorusSpike>(&atom)) {
      entry.value = t->sign * eta_function(cert, t->x, 2)[0];
    } else if (const auto* v = std::get_if<VectorSpike>(&atom)) {
      entry.value = eta_function(cert, v->x, 2).dot(v->a);
    } else if (const auto* a = std::get_if<AxisSpike>(&atom)) {
      entry.value = a->sign * eta_function(cert, a->x, 2)[a->k];
    } else {
      entry.checked = false;
    }
    if (entry.checked && !(entry.value < -tols.curv_tol)) {
      curvature_ok = false;
      rep.reasons.push_back("curvature margin " + std::to_string(entry.value) + " at " +
                            describe(atom));
    }
    rep.curvature.push_back(std::move(entry));
  }

  rep.verdict = rep.source_condition_ok && rep.spurious_maximizers.empty() && curvature_ok;
  return rep;
}

double group_curve_second_derivative(const Certificate& cert, const Eigen::VectorXd& a1,
                                     const Eigen::VectorXd& a2, TorusPoint x1,
                                     TorusPoint x2, double t) {
  const Eigen::VectorXd v = a2 - a1;
  const Eigen::VectorXd at = a1 + t * v;
  const double norm = at.norm();
  if (norm <= 1e-9)
    throw Error(ErrorCode::DEGENERATE_DIRECTIONS, "interpolated direction vanishes");

  const double dx = torus_arc(x1, x2);
  const TorusPoint xt(x1.x + t * dx);
  const double adv = at.dot(v);
  const Eigen::VectorXd st = norm * norm * v - adv * at;

  // second derivative of the normalized direction a_t/|a_t|
  const Eigen::VectorXd ddir =
      (norm * norm * (adv * v - v.squaredNorm() * at) - 3.0 * adv * st) /
      std::pow(norm, 5);

  const double term1 = 2.0 * st.dot(eta_function(cert, xt, 1)) * dx / std::pow(norm, 3);
  const double term2 = at.dot(eta_function(cert, xt, 2)) * dx * dx / norm;
  const double term3 = ddir.dot(eta_function(cert, xt, 0));
  return term1 + term2 + term3;
}

}  // namespace esrr
