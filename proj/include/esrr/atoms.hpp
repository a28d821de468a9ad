#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "esrr/kernels.hpp"
#include "esrr/torus.hpp"

namespace esrr {

enum class Family { ScalarBlasso, Demixing, GroupL2, GroupL1 };

std::string to_string(Family f);
std::optional<Family> family_from_string(const std::string& s);

// Extreme points of the regularizer unit ball, one parametrization per
// problem family.

// signed Dirac on the torus (scalar BLASSO; measure part of demixing)
struct TorusSpike {
  int sign{+1};  // -1 or +1
  TorusPoint x;
};

// signed canonical basis vector in R^N (direct spike part of demixing)
struct CanonicalSpike {
  int k{0};  // 0-based index into R^N
  int sign{+1};
};

// unit-direction vector Dirac (group BLASSO with the l2 ball)
struct VectorSpike {
  Eigen::VectorXd a;  // unit l2 norm
  TorusPoint x;
};

// single-axis signed Dirac (group BLASSO with the l1 ball)
struct AxisSpike {
  int k{0};  // 0-based axis in R^d
  int sign{+1};
  TorusPoint x;
};

using Atom = std::variant<TorusSpike, CanonicalSpike, VectorSpike, AxisSpike>;

bool atoms_equal(const Atom& a, const Atom& b, double tol = 1e-9);
std::string describe(const Atom& a);

// Finite positive combination of extreme points. Signs and directions live
// in the atoms; every coefficient is strictly positive.
struct WeightedAtom {
  double c{0.0};
  Atom atom;
};

struct SparseSignal {
  std::vector<WeightedAtom> atoms;

  int size() const { return static_cast<int>(atoms.size()); }
  bool empty() const { return atoms.empty(); }
  // throws BAD_CONFIG on non-positive coefficients or duplicate atoms
  void validate() const;
};

// Problem family + kernel bank; fixes the operator K, its adjoint, and the
// regularizer R.
struct ProblemInstance {
  Family family{Family::ScalarBlasso};
  KernelBank bank;
  int N{0};  // measurement count
  int d{1};  // kernel codomain dimension

  static ProblemInstance make(Family family, KernelBank bank);
};

// throws FAMILY_MISMATCH if not compatible
void require_atom_family(const ProblemInstance& prob, const Atom& atom);

// K applied to a single extreme point, as a column in R^N.
Eigen::VectorXd forward_atom(const ProblemInstance& prob, const Atom& atom);

// K applied to a sparse signal: sum of coefficient-scaled atom images.
Eigen::VectorXd forward_signal(const ProblemInstance& prob, const SparseSignal& u);

// R(u) = sum of coefficients (every atom has unit regularizer).
double regularizer_value(const ProblemInstance& prob, const SparseSignal& u);

struct GramIndependence {
  bool independent{false};
  int rank{0};
  double smallest_singular{0.0};
  double largest_singular{0.0};
};

// Linear independence of {K u_i} via SVD of the atom-column matrix.
// Throws TOO_MANY_ATOMS when the signal has more atoms than measurements.
GramIndependence gram_independence_check(const ProblemInstance& prob,
                                         const SparseSignal& u);

// Dictionary matrix with forward_atom columns, N x n.
Eigen::MatrixXd atom_columns(const ProblemInstance& prob, const std::vector<Atom>& atoms);

}  // namespace esrr
