#include "esrr/solver.hpp"

#include <algorithm>
#include <cmath>

#include "esrr/errors.hpp"
#include "esrr/logging.hpp"

namespace esrr {

void SolverConfig::validate() const {
  if (lmo_grid < 16) throw Error(ErrorCode::BAD_CONFIG, "lmo_grid must be >= 16");
  if (!(coeff_tol > 0) || !(gap_tol > 0) || !(prune_tol > 0))
    throw Error(ErrorCode::BAD_CONFIG, "solver tolerances must be > 0");
}

double objective_value(const ProblemInstance& prob, const SparseSignal& u,
                       const Eigen::VectorXd& y, double lambda) {
  return 0.5 * (forward_signal(prob, u) - y).squaredNorm() +
         lambda * regularizer_value(prob, u);
}

Certificate residual_certificate(const ProblemInstance& prob, const SparseSignal& u,
                                 const Eigen::VectorXd& y, double lambda) {
  if (!(lambda > 0)) throw Error(ErrorCode::BAD_CONFIG, "lambda must be > 0");
  return Certificate{(y - forward_signal(prob, u)) / lambda, &prob};
}

std::pair<Atom, double> lmo(const ProblemInstance& prob, const Certificate& cert,
                            const SolverConfig& cfg) {
  const auto hits = certificate_scan(cert, cfg.lmo_grid, cfg.polish_iters);
  return {hits.front().atom, hits.front().value};
}

Eigen::VectorXd nnls_normal(const Eigen::MatrixXd& Q, const Eigen::VectorXd& b,
                            double enter_tol) {
  const int n = static_cast<int>(Q.rows());
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
  if (n == 0) return c;

  std::vector<bool> passive(n, false);
  const int cap = 3 * n + 50;
  for (int outer = 0; outer < cap; ++outer) {
    // most positive descent direction among the zero set
    const Eigen::VectorXd g = b - Q * c;
    int enter = -1;
    double best = enter_tol;
    for (int j = 0; j < n; ++j) {
      if (!passive[j] && g[j] > best) {
        best = g[j];
        enter = j;
      }
    }
    if (enter < 0) return c;
    passive[enter] = true;

    for (int inner = 0; inner < cap; ++inner) {
      std::vector<int> P;
      for (int j = 0; j < n; ++j)
        if (passive[j]) P.push_back(j);
      Eigen::MatrixXd M(P.size(), P.size());
      Eigen::VectorXd rhs(P.size());
      for (std::size_t r = 0; r < P.size(); ++r) {
        rhs[r] = b[P[r]];
        for (std::size_t s = 0; s < P.size(); ++s) M(r, s) = Q(P[r], P[s]);
      }
      const Eigen::VectorXd z = M.ldlt().solve(rhs);

      double alpha = 1.0;
      int blocker = -1;
      for (std::size_t r = 0; r < P.size(); ++r) {
        if (z[r] <= 0.0) {
          const double cj = c[P[r]];
          const double a = cj / (cj - z[r]);
          if (a < alpha) {
            alpha = a;
            blocker = static_cast<int>(r);
          }
        }
      }
      if (blocker < 0) {
        for (std::size_t r = 0; r < P.size(); ++r) c[P[r]] = z[r];
        break;
      }
      for (std::size_t r = 0; r < P.size(); ++r)
        c[P[r]] = c[P[r]] + alpha * (z[r] - c[P[r]]);
      c[P[blocker]] = 0.0;
      for (std::size_t r = 0; r < P.size(); ++r) {
        if (c[P[r]] <= 1e-300) {
          c[P[r]] = 0.0;
          passive[P[r]] = false;
        }
      }
    }
  }
  throw Error(ErrorCode::NO_CONVERGENCE, "nonnegative coefficient fit stalled");
}

Eigen::VectorXd coefficient_subproblem(const ProblemInstance& prob,
                                       const std::vector<Atom>& atoms,
                                       const Eigen::VectorXd& y, double lambda,
                                       const SolverConfig& cfg) {
  const int n = static_cast<int>(atoms.size());
  if (n == 0) return Eigen::VectorXd::Zero(0);
  const Eigen::MatrixXd A = atom_columns(prob, atoms);
  return nnls_normal(A.transpose() * A,
                     A.transpose() * y - Eigen::VectorXd::Constant(n, lambda),
                     cfg.coeff_tol);
}

namespace {

// Smooth local model for the sliding step: each atom contributes a block of
// parameters. Scalar-coefficient atoms carry (x, c) or just (c); group-l2
// atoms carry (x, b) with b = c * a unnormalized, so the unit-norm constraint
// disappears from the parametrization.
struct SlideModel {
  const ProblemInstance& prob;
  std::vector<Atom> tags;       // discrete structure (signs, indices) is fixed
  std::vector<int> offset;      // parameter offset per atom
  int dim{0};

  explicit SlideModel(const ProblemInstance& p, const SparseSignal& u) : prob(p) {
    for (const auto& [c, atom] : u.atoms) {
      tags.push_back(atom);
      offset.push_back(dim);
      dim += std::visit(
          [&](const auto& a) -> int {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, CanonicalSpike>) return 1;
            else if constexpr (std::is_same_v<T, VectorSpike>) return 1 + prob.d;
            else return 2;  // (x, c)
          },
          atom);
    }
  }

  Eigen::VectorXd pack(const SparseSignal& u) const {
    Eigen::VectorXd th(dim);
    for (std::size_t i = 0; i < tags.size(); ++i) {
      const auto& [c, atom] = u.atoms[i];
      const int o = offset[i];
      if (const auto* t = std::get_if<TorusSpike>(&atom)) {
        th[o] = t->x.x;
        th[o + 1] = c;
      } else if (std::get_if<CanonicalSpike>(&atom)) {
        th[o] = c;
      } else if (const auto* v = std::get_if<VectorSpike>(&atom)) {
        th[o] = v->x.x;
        th.segment(o + 1, prob.d) = c * v->a;
      } else {
        th[o] = std::get<AxisSpike>(atom).x.x;
        th[o + 1] = c;
      }
    }
    return th;
  }

  SparseSignal unpack(const Eigen::VectorXd& th) const {
    SparseSignal u;
    for (std::size_t i = 0; i < tags.size(); ++i) {
      const int o = offset[i];
      Atom atom = tags[i];
      double c = 0.0;
      if (auto* t = std::get_if<TorusSpike>(&atom)) {
        t->x = TorusPoint(th[o]);
        c = th[o + 1];
      } else if (std::get_if<CanonicalSpike>(&atom)) {
        c = th[o];
      } else if (auto* v = std::get_if<VectorSpike>(&atom)) {
        v->x = TorusPoint(th[o]);
        const Eigen::VectorXd b = th.segment(o + 1, prob.d);
        c = b.norm();
        v->a = c > 0 ? Eigen::VectorXd(b / c) : Eigen::VectorXd::Unit(prob.d, 0);
      } else {
        auto& a = std::get<AxisSpike>(atom);
        a.x = TorusPoint(th[o]);
        c = th[o + 1];
      }
      u.atoms.push_back({c, std::move(atom)});
    }
    return u;
  }

  // residual K u - y, Jacobian, and the nonsmooth-free objective pieces
  void residual_jacobian(const Eigen::VectorXd& th, const Eigen::VectorXd& y,
                         Eigen::VectorXd& r, Eigen::MatrixXd& J) const {
    r = -y;
    J.setZero(prob.N, dim);
    for (std::size_t i = 0; i < tags.size(); ++i) {
      const int o = offset[i];
      if (const auto* t = std::get_if<TorusSpike>(&tags[i])) {
        const TorusPoint x(th[o]);
        const double c = th[o + 1];
        const Eigen::VectorXd phi = prob.bank.frame(x, 0).col(0);
        const Eigen::VectorXd dphi = prob.bank.frame(x, 1).col(0);
        r += c * t->sign * phi;
        J.col(o) = c * t->sign * dphi;
        J.col(o + 1) = t->sign * phi;
      } else if (const auto* cs = std::get_if<CanonicalSpike>(&tags[i])) {
        r[cs->k] += th[o] * cs->sign;
        J(cs->k, o) = cs->sign;
      } else if (std::get_if<VectorSpike>(&tags[i])) {
        const TorusPoint x(th[o]);
        const Eigen::VectorXd b = th.segment(o + 1, prob.d);
        const Eigen::MatrixXd F0 = prob.bank.frame(x, 0);
        r += F0 * b;
        J.col(o) = prob.bank.frame(x, 1) * b;
        J.block(0, o + 1, prob.N, prob.d) = F0;
      } else {
        const auto& a = std::get<AxisSpike>(tags[i]);
        const TorusPoint x(th[o]);
        const double c = th[o + 1];
        r += c * a.sign * prob.bank.frame(x, 0).col(a.k);
        J.col(o) = c * a.sign * prob.bank.frame(x, 1).col(a.k);
        J.col(o + 1) = a.sign * prob.bank.frame(x, 0).col(a.k);
      }
    }
  }

  // lambda * sum of masses, plus its gradient and (PSD) Hessian blocks
  double penalty(const Eigen::VectorXd& th, double lambda, Eigen::VectorXd* grad,
                 Eigen::MatrixXd* hess) const {
    double val = 0.0;
    for (std::size_t i = 0; i < tags.size(); ++i) {
      const int o = offset[i];
      if (std::get_if<VectorSpike>(&tags[i])) {
        const Eigen::VectorXd b = th.segment(o + 1, prob.d);
        const double nb = b.norm();
        val += lambda * nb;
        if (grad && nb > 1e-300) {
          grad->segment(o + 1, prob.d) += lambda * b / nb;
          if (hess)
            hess->block(o + 1, o + 1, prob.d, prob.d) +=
                lambda / nb *
                (Eigen::MatrixXd::Identity(prob.d, prob.d) - (b / nb) * (b / nb).transpose());
        }
      } else {
        const int co = std::get_if<CanonicalSpike>(&tags[i]) ? o : o + 1;
        val += lambda * th[co];
        if (grad) (*grad)[co] += lambda;
      }
    }
    return val;
  }

  bool masses_positive(const Eigen::VectorXd& th) const {
    for (std::size_t i = 0; i < tags.size(); ++i) {
      const int o = offset[i];
      if (std::get_if<VectorSpike>(&tags[i])) {
        if (th.segment(o + 1, prob.d).norm() <= 1e-14) return false;
      } else {
        const int co = std::get_if<CanonicalSpike>(&tags[i]) ? o : o + 1;
        if (th[co] <= 0.0) return false;
      }
    }
    return true;
  }
};

}  // namespace

SparseSignal slide(const ProblemInstance& prob, const SparseSignal& u,
                   const Eigen::VectorXd& y, double lambda, const SolverConfig& cfg) {
  if (u.empty()) return u;
  const SlideModel model(prob, u);
  Eigen::VectorXd th = model.pack(u);

  Eigen::VectorXd r;
  Eigen::MatrixXd J;
  auto objective = [&](const Eigen::VectorXd& t) {
    Eigen::VectorXd rr;
    Eigen::MatrixXd JJ;
    model.residual_jacobian(t, y, rr, JJ);
    return 0.5 * rr.squaredNorm() + model.penalty(t, lambda, nullptr, nullptr);
  };

  double f = objective(th);
  double nu = 1e-8;
  for (int it = 0; it < cfg.slide_iters; ++it) {
    model.residual_jacobian(th, y, r, J);
    Eigen::VectorXd g = J.transpose() * r;
    Eigen::MatrixXd H = J.transpose() * J;
    model.penalty(th, lambda, &g, &H);
    const double scale = std::max(1.0, H.diagonal().maxCoeff());
    if (g.cwiseAbs().maxCoeff() < 1e-14 * scale) break;

    bool accepted = false;
    for (int attempt = 0; attempt < 12; ++attempt) {
      Eigen::MatrixXd Hn = H;
      Hn.diagonal().array() += nu * scale;
      Eigen::VectorXd step = Hn.ldlt().solve(-g);
      // keep masses strictly positive along the step
      double t = 1.0;
      for (int half = 0; half < 40 && !model.masses_positive(th + t * step); ++half)
        t *= 0.5;
      const Eigen::VectorXd cand = th + t * step;
      const double fc = model.masses_positive(cand) ? objective(cand) : f + 1.0;
      if (fc < f) {
        th = cand;
        f = fc;
        nu = std::max(nu / 3.0, 1e-12);
        accepted = true;
        break;
      }
      nu *= 5.0;
    }
    if (!accepted) break;
  }
  return model.unpack(th);
}

namespace {

SparseSignal prune_and_merge(SparseSignal u, double prune_tol) {
  SparseSignal out;
  for (auto& wa : u.atoms) {
    if (wa.c <= prune_tol) continue;
    bool merged = false;
    for (auto& kept : out.atoms) {
      if (atoms_equal(kept.atom, wa.atom, 1e-6)) {
        kept.c += wa.c;
        merged = true;
        break;
      }
    }
    if (!merged) out.atoms.push_back(std::move(wa));
  }
  return out;
}

SparseSignal refit(const ProblemInstance& prob, SparseSignal u, const Eigen::VectorXd& y,
                   double lambda, const SolverConfig& cfg) {
  std::vector<Atom> atoms;
  for (const auto& wa : u.atoms) atoms.push_back(wa.atom);
  const Eigen::VectorXd c = coefficient_subproblem(prob, atoms, y, lambda, cfg);
  SparseSignal out;
  for (int j = 0; j < c.size(); ++j)
    if (c[j] > 0.0) out.atoms.push_back({c[j], atoms[j]});
  return out;
}

// same discrete tags, smooth parameters close enough that a single atom could
// plausibly do both jobs
bool merge_candidates(const Atom& a, const Atom& b) {
  if (a.index() != b.index()) return false;
  constexpr double kRadius = 0.02;
  if (const auto* ta = std::get_if<TorusSpike>(&a)) {
    const auto& tb = std::get<TorusSpike>(b);
    return ta->sign == tb.sign && torus_dist(ta->x, tb.x) <= kRadius;
  }
  if (const auto* va = std::get_if<VectorSpike>(&a)) {
    const auto& vb = std::get<VectorSpike>(b);
    return torus_dist(va->x, vb.x) <= kRadius && (va->a - vb.a).norm() <= 0.1;
  }
  if (const auto* xa = std::get_if<AxisSpike>(&a)) {
    const auto& xb = std::get<AxisSpike>(b);
    return xa->k == xb.k && xa->sign == xb.sign && torus_dist(xa->x, xb.x) <= kRadius;
  }
  return false;  // canonical spikes with equal tags are merged structurally
}

// Local descent can stall with one spike split across two nearby atoms. Try
// collapsing such pairs; keep a merge only when re-optimization shows it does
// not cost anything.
SparseSignal merge_close_atoms(const ProblemInstance& prob, SparseSignal u,
                               const Eigen::VectorXd& y, double lambda,
                               const SolverConfig& cfg) {
  double f = objective_value(prob, u, y, lambda);
  bool improved = true;
  while (improved && u.size() > 1) {
    improved = false;
    for (std::size_t i = 0; i < u.atoms.size() && !improved; ++i) {
      for (std::size_t j = i + 1; j < u.atoms.size() && !improved; ++j) {
        if (!merge_candidates(u.atoms[i].atom, u.atoms[j].atom)) continue;
        SparseSignal cand;
        const bool keep_i = u.atoms[i].c >= u.atoms[j].c;
        for (std::size_t r = 0; r < u.atoms.size(); ++r) {
          if (r == (keep_i ? j : i)) continue;
          WeightedAtom wa = u.atoms[r];
          if (r == (keep_i ? i : j)) wa.c = u.atoms[i].c + u.atoms[j].c;
          cand.atoms.push_back(std::move(wa));
        }
        cand = slide(prob, refit(prob, cand, y, lambda, cfg), y, lambda, cfg);
        cand = prune_and_merge(refit(prob, cand, y, lambda, cfg), cfg.prune_tol);
        const double fc = objective_value(prob, cand, y, lambda);
        if (fc <= f + 1e-12) {
          u = std::move(cand);
          f = std::min(f, fc);
          improved = true;
        }
      }
    }
  }
  return u;
}

}  // namespace

SolveResult solve(const ProblemInstance& prob, const Eigen::VectorXd& y, double lambda,
                  const SolverConfig& cfg, const SparseSignal& init) {
  cfg.validate();
  if (!(lambda > 0)) throw Error(ErrorCode::BAD_CONFIG, "lambda must be > 0");

  SolveResult res;
  res.u = prune_and_merge(init, cfg.prune_tol);
  if (!res.u.empty()) {
    res.u = refit(prob, res.u, y, lambda, cfg);
    res.u = slide(prob, res.u, y, lambda, cfg);
    res.u = prune_and_merge(refit(prob, res.u, y, lambda, cfg), cfg.prune_tol);
  }

  for (int it = 0; it < cfg.max_outer_iters; ++it) {
    res.iterations = it;
    const Certificate cert = residual_certificate(prob, res.u, y, lambda);
    const auto [atom, value] = lmo(prob, cert, cfg);
    res.certificate_sup = value;
    if (value <= 1.0 + cfg.gap_tol) {
      res.converged = true;
      break;
    }

    SparseSignal candidate = res.u;
    bool duplicate = false;
    for (const auto& wa : candidate.atoms)
      if (atoms_equal(wa.atom, atom, 1e-9)) duplicate = true;
    if (!duplicate) candidate.atoms.push_back({0.0, atom});

    candidate = refit(prob, candidate, y, lambda, cfg);
    candidate = slide(prob, candidate, y, lambda, cfg);
    candidate = prune_and_merge(refit(prob, candidate, y, lambda, cfg), cfg.prune_tol);
    candidate = merge_close_atoms(prob, candidate, y, lambda, cfg);
    res.u = std::move(candidate);
  }
  res.objective = objective_value(prob, res.u, y, lambda);
  if (!res.converged)
    log::warn("solve: MAX_ITERS reached, certificate sup " +
              std::to_string(res.certificate_sup));
  return res;
}

}  // namespace esrr
