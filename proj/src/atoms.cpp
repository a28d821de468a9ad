#include "esrr/atoms.hpp"

#include <Eigen/SVD>
#include <sstream>

#include "esrr/errors.hpp"

namespace esrr {

std::string to_string(Family f) {
  switch (f) {
    case Family::ScalarBlasso: return "scalar-blasso";
    case Family::Demixing: return "demixing";
    case Family::GroupL2: return "group-l2";
    case Family::GroupL1: return "group-l1";
  }
  return "?";
}

std::optional<Family> family_from_string(const std::string& s) {
  if (s == "scalar-blasso") return Family::ScalarBlasso;
  if (s == "demixing") return Family::Demixing;
  if (s == "group-l2") return Family::GroupL2;
  if (s == "group-l1") return Family::GroupL1;
  return std::nullopt;
}

bool atoms_equal(const Atom& a, const Atom& b, double tol) {
  if (a.index() != b.index()) return false;
  if (const auto* ta = std::get_if<TorusSpike>(&a)) {
    const auto& tb = std::get<TorusSpike>(b);
    return ta->sign == tb.sign && torus_dist(ta->x, tb.x) <= tol;
  }
  if (const auto* ca = std::get_if<CanonicalSpike>(&a)) {
    const auto& cb = std::get<CanonicalSpike>(b);
    return ca->k == cb.k && ca->sign == cb.sign;
  }
  if (const auto* va = std::get_if<VectorSpike>(&a)) {
    const auto& vb = std::get<VectorSpike>(b);
    return torus_dist(va->x, vb.x) <= tol && (va->a - vb.a).norm() <= tol;
  }
  const auto& xa = std::get<AxisSpike>(a);
  const auto& xb = std::get<AxisSpike>(b);
  return xa.k == xb.k && xa.sign == xb.sign && torus_dist(xa.x, xb.x) <= tol;
}

std::string describe(const Atom& a) {
  std::ostringstream os;
  if (const auto* t = std::get_if<TorusSpike>(&a)) {
    os << "torus-spike(sign=" << t->sign << ", x=" << t->x.x << ")";
  } else if (const auto* c = std::get_if<CanonicalSpike>(&a)) {
    os << "canonical-spike(k=" << c->k << ", sign=" << c->sign << ")";
  } else if (const auto* v = std::get_if<VectorSpike>(&a)) {
    os << "vector-spike(x=" << v->x.x << ", a=[" << v->a.transpose() << "])";
  } else {
    const auto& x = std::get<AxisSpike>(a);
    os << "axis-spike(k=" << x.k << ", sign=" << x.sign << ", x=" << x.x.x << ")";
  }
  return os.str();
}

void SparseSignal::validate() const {
  for (const auto& [c, atom] : atoms) {
    if (!(c > 0.0)) throw Error(ErrorCode::BAD_CONFIG, "coefficients must be > 0");
    if (const auto* v = std::get_if<VectorSpike>(&atom)) {
      if (std::abs(v->a.norm() - 1.0) > 1e-12)
        throw Error(ErrorCode::BAD_CONFIG, "vector-spike direction must be unit norm");
    }
  }
  for (std::size_t i = 0; i < atoms.size(); ++i)
    for (std::size_t j = i + 1; j < atoms.size(); ++j)
      if (atoms_equal(atoms[i].atom, atoms[j].atom))
        throw Error(ErrorCode::BAD_CONFIG, "duplicate atom: " + describe(atoms[i].atom));
}

ProblemInstance ProblemInstance::make(Family family, KernelBank bank) {
  ProblemInstance p;
  p.family = family;
  p.N = bank.size();
  p.d = bank.dim();
  p.bank = std::move(bank);
  if ((family == Family::ScalarBlasso || family == Family::Demixing) && p.d != 1)
    throw Error(ErrorCode::BAD_CONFIG, to_string(family) + " requires d = 1");
  return p;
}

void require_atom_family(const ProblemInstance& prob, const Atom& atom) {
  const bool ok = std::visit(
      [&](const auto& a) -> bool {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, TorusSpike>)
          return prob.family == Family::ScalarBlasso || prob.family == Family::Demixing;
        else if constexpr (std::is_same_v<T, CanonicalSpike>)
          return prob.family == Family::Demixing && a.k >= 0 && a.k < prob.N;
        else if constexpr (std::is_same_v<T, VectorSpike>)
          return prob.family == Family::GroupL2 && a.a.size() == prob.d;
        else
          return prob.family == Family::GroupL1 && a.k >= 0 && a.k < prob.d;
      },
      atom);
  if (!ok)
    throw Error(ErrorCode::FAMILY_MISMATCH,
                describe(atom) + " not valid for family " + to_string(prob.family));
}

Eigen::VectorXd forward_atom(const ProblemInstance& prob, const Atom& atom) {
  require_atom_family(prob, atom);
  return std::visit(
      [&](const auto& a) -> Eigen::VectorXd {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, TorusSpike>) {
          return a.sign * prob.bank.frame(a.x, 0).col(0);
        } else if constexpr (std::is_same_v<T, CanonicalSpike>) {
          Eigen::VectorXd v = Eigen::VectorXd::Zero(prob.N);
          v[a.k] = a.sign;
          return v;
        } else if constexpr (std::is_same_v<T, VectorSpike>) {
          return prob.bank.frame(a.x, 0) * a.a;
        } else {
          return a.sign * prob.bank.frame(a.x, 0).col(a.k);
        }
      },
      atom);
}

Eigen::VectorXd forward_signal(const ProblemInstance& prob, const SparseSignal& u) {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(prob.N);
  for (const auto& [c, atom] : u.atoms) y += c * forward_atom(prob, atom);
  return y;
}

double regularizer_value(const ProblemInstance& prob, const SparseSignal& u) {
  double r = 0.0;
  for (const auto& [c, atom] : u.atoms) {
    require_atom_family(prob, atom);
    r += c;
  }
  return r;
}

Eigen::MatrixXd atom_columns(const ProblemInstance& prob, const std::vector<Atom>& atoms) {
  Eigen::MatrixXd A(prob.N, static_cast<int>(atoms.size()));
  for (int j = 0; j < static_cast<int>(atoms.size()); ++j)
    A.col(j) = forward_atom(prob, atoms[j]);
  return A;
}

GramIndependence gram_independence_check(const ProblemInstance& prob,
                                         const SparseSignal& u) {
  const int n = u.size();
  if (n > prob.N)
    throw Error(ErrorCode::TOO_MANY_ATOMS,
                std::to_string(n) + " atoms > " + std::to_string(prob.N) + " measurements");
  GramIndependence g;
  if (n == 0) {
    g.independent = true;
    return g;
  }
  std::vector<Atom> atoms;
  atoms.reserve(n);
  for (const auto& wa : u.atoms) atoms.push_back(wa.atom);
  const Eigen::MatrixXd A = atom_columns(prob, atoms);
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  g.largest_singular = svd.singularValues()[0];
  g.smallest_singular = svd.singularValues()[n - 1];
  const double thresh = 1e-10 * g.largest_singular;
  g.rank = static_cast<int>((svd.singularValues().array() > thresh).count());
  g.independent = g.rank == n;
  return g;
}

}  // namespace esrr
