#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "esrr/torus.hpp"

namespace esrr {

enum class KernelKind { FourierFeatures, PeriodizedGaussian };

// Bank of N kernels T -> R^d of class C^2, with analytic derivatives of
// order 0, 1, 2. Immutable after construction.
//
// fourier-features: component c of kernel i is cos(2*pi*f*x + theta) with
// integer frequency f = freq(i,c), phase theta = phase(i,c). Integer
// frequencies make periodicity exact.
//
// periodized-gaussian: component c of kernel i is a unit-height Gaussian of
// the given width centered at center(i,c), periodized over the 5 nearest
// images (exact to below 1e-15 for widths >= 0.02).
class KernelBank {
 public:
  KernelBank() = default;  // empty bank; use the factories below

  static KernelBank fourier(Eigen::MatrixXi freq, Eigen::MatrixXd phase);
  static KernelBank fourier_random(int n, int d, int max_freq, std::uint64_t seed);
  // Full real Fourier frame up to the largest cutoff that fits in n kernels
  // (d = 1): 1, cos(2pi x), sin(2pi x), cos(4pi x), ...
  static KernelBank fourier_basis(int n);
  static KernelBank gaussian(Eigen::MatrixXd centers, double width);
  static KernelBank gaussian_random(int n, int d, double width, std::uint64_t seed);

  int size() const { return n_; }
  int dim() const { return d_; }
  KernelKind kind() const { return kind_; }

  const Eigen::MatrixXi& frequencies() const { return freq_; }
  const Eigen::MatrixXd& phases() const { return phase_; }
  const Eigen::MatrixXd& centers() const { return center_; }
  double width() const { return width_; }

  // phi_i(x), phi_i'(x) or phi_i''(x) as a d-vector.
  Eigen::VectorXd eval(int i, TorusPoint x, int order) const;

  // All kernels at once: N x d matrix whose row i is phi_i^(order)(x).
  Eigen::MatrixXd frame(TorusPoint x, int order) const;

 private:
  void check_c2() const;

  int n_{0};
  int d_{0};
  KernelKind kind_{KernelKind::FourierFeatures};
  Eigen::MatrixXi freq_;
  Eigen::MatrixXd phase_;
  Eigen::MatrixXd center_;
  double width_{0.0};
};

struct DerivativeReport {
  bool pass{false};
  double tol{0.0};
  // max relative error per kernel, over both derivative orders
  std::vector<double> max_rel_error;
  int worst_kernel{-1};
  double worst_error{0.0};
};

// Compares analytic order-1/2 derivatives against central finite differences
// (step 1e-5) at `samples` seeded-random points. Throws FAILS_VALIDATION on
// failure; the report identifies the worst offender either way.
DerivativeReport validate_kernel_derivatives(const KernelBank& bank, int samples,
                                             double tol, std::uint64_t seed = 0,
                                             bool throw_on_fail = true);

// Same check against an arbitrary evaluator (i, x, order) -> R^d.
using KernelEvalFn = std::function<Eigen::VectorXd(int, TorusPoint, int)>;
DerivativeReport validate_kernel_derivatives(const KernelEvalFn& eval, int n, int samples,
                                             double tol, std::uint64_t seed = 0,
                                             bool throw_on_fail = true);

}  // namespace esrr
