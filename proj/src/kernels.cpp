#include "esrr/kernels.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "esrr/errors.hpp"

namespace esrr {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

KernelBank KernelBank::fourier(Eigen::MatrixXi freq, Eigen::MatrixXd phase) {
  if (freq.rows() != phase.rows() || freq.cols() != phase.cols() || freq.rows() < 1 ||
      freq.cols() < 1) {
    throw Error(ErrorCode::BAD_CONFIG, "fourier bank needs matching non-empty freq/phase");
  }
  KernelBank b;
  b.n_ = static_cast<int>(freq.rows());
  b.d_ = static_cast<int>(freq.cols());
  b.kind_ = KernelKind::FourierFeatures;
  b.freq_ = std::move(freq);
  b.phase_ = std::move(phase);
  b.check_c2();
  return b;
}

KernelBank KernelBank::fourier_random(int n, int d, int max_freq, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Eigen::MatrixXi freq(n, d);
  Eigen::MatrixXd phase(n, d);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < d; ++c) {
      freq(i, c) = static_cast<int>(rng() % static_cast<std::uint64_t>(max_freq + 1));
      phase(i, c) = kTwoPi * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
    }
  }
  return fourier(std::move(freq), std::move(phase));
}

KernelBank KernelBank::fourier_basis(int n) {
  Eigen::MatrixXi freq(n, 1);
  Eigen::MatrixXd phase(n, 1);
  // kernel 0 is the constant; then cos/sin pairs of increasing frequency
  for (int i = 0; i < n; ++i) {
    freq(i, 0) = (i + 1) / 2;
    phase(i, 0) = (i >= 1 && i % 2 == 0) ? -std::numbers::pi / 2.0 : 0.0;
  }
  return fourier(std::move(freq), std::move(phase));
}

KernelBank KernelBank::gaussian(Eigen::MatrixXd centers, double width) {
  if (centers.rows() < 1 || centers.cols() < 1) {
    throw Error(ErrorCode::BAD_CONFIG, "gaussian bank needs non-empty centers");
  }
  // 5-image truncation is only below 1e-15 for widths >= 0.02
  if (width < 0.02) {
    throw Error(ErrorCode::BAD_CONFIG, "gaussian width must be >= 0.02");
  }
  KernelBank b;
  b.n_ = static_cast<int>(centers.rows());
  b.d_ = static_cast<int>(centers.cols());
  b.kind_ = KernelKind::PeriodizedGaussian;
  for (int i = 0; i < b.n_; ++i)
    for (int c = 0; c < b.d_; ++c) centers(i, c) = torus_wrap(centers(i, c));
  b.center_ = std::move(centers);
  b.width_ = width;
  b.check_c2();
  return b;
}

KernelBank KernelBank::gaussian_random(int n, int d, double width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd centers(n, d);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c)
      centers(i, c) = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return gaussian(std::move(centers), width);
}

Eigen::VectorXd KernelBank::eval(int i, TorusPoint x, int order) const {
  Eigen::VectorXd out(d_);
  if (kind_ == KernelKind::FourierFeatures) {
    for (int c = 0; c < d_; ++c) {
      const double w = kTwoPi * freq_(i, c);
      const double arg = w * x.x + phase_(i, c);
      switch (order) {
        case 0: out[c] = std::cos(arg); break;
        case 1: out[c] = -w * std::sin(arg); break;
        default: out[c] = -w * w * std::cos(arg); break;
      }
    }
  } else {
    const double s2 = width_ * width_;
    for (int c = 0; c < d_; ++c) {
      // signed offset to the nearest image, then sum the 5 closest
      double u0 = torus_wrap(x.x - center_(i, c) + 0.5) - 0.5;
      double acc = 0.0;
      for (int m = -2; m <= 2; ++m) {
        const double u = u0 + m;
        const double g = std::exp(-u * u / (2.0 * s2));
        switch (order) {
          case 0: acc += g; break;
          case 1: acc += -(u / s2) * g; break;
          default: acc += (u * u / (s2 * s2) - 1.0 / s2) * g; break;
        }
      }
      out[c] = acc;
    }
  }
  return out;
}

Eigen::MatrixXd KernelBank::frame(TorusPoint x, int order) const {
  Eigen::MatrixXd out(n_, d_);
  for (int i = 0; i < n_; ++i) out.row(i) = eval(i, x, order).transpose();
  return out;
}

void KernelBank::check_c2() const {
  // periodicity across the wrap point, for the value and both derivatives
  const TorusPoint lo(0.0);
  const TorusPoint hi(std::nextafter(1.0, 0.0));
  for (int i = 0; i < n_; ++i) {
    for (int order = 0; order <= 2; ++order) {
      const Eigen::VectorXd a = eval(i, lo, order);
      const Eigen::VectorXd b = eval(i, hi, order);
      // Scale by the derivative's magnitude over the whole circle, not just
      // at the wrap point: hi sits one ulp short of 1, so even an exactly
      // periodic kernel differs there by ~ sup|f^(order+1)| * ulp.
      double scale = 1.0;
      // golden-ratio samples: no uniform grid, so no aliasing with any
      // integer kernel frequency
      for (int k = 1; k <= 32; ++k)
        scale = std::max(scale,
                         eval(i, TorusPoint(k * 0.6180339887498949), order).cwiseAbs().maxCoeff());
      if (((a - b).cwiseAbs().maxCoeff()) > 1e-12 * scale) {
        throw Error(ErrorCode::FAILS_VALIDATION,
                    "kernel " + std::to_string(i) + " is not periodic at order " +
                        std::to_string(order));
      }
    }
  }
}

DerivativeReport validate_kernel_derivatives(const KernelBank& bank, int samples,
                                             double tol, std::uint64_t seed,
                                             bool throw_on_fail) {
  return validate_kernel_derivatives(
      [&bank](int i, TorusPoint x, int order) { return bank.eval(i, x, order); },
      bank.size(), samples, tol, seed, throw_on_fail);
}

DerivativeReport validate_kernel_derivatives(const KernelEvalFn& eval, int n, int samples,
                                             double tol, std::uint64_t seed,
                                             bool throw_on_fail) {
  if (samples < 2) throw Error(ErrorCode::BAD_CONFIG, "need samples >= 2");
  constexpr double h = 1e-5;
  std::mt19937_64 rng(seed);
  std::vector<TorusPoint> pts(samples);
  for (auto& p : pts) p = TorusPoint(static_cast<double>(rng() >> 11) * 0x1.0p-53);

  DerivativeReport rep;
  rep.tol = tol;
  rep.max_rel_error.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double scale1 = 1.0, scale2 = 1.0;
    for (const auto& p : pts) {
      scale1 = std::max(scale1, eval(i, p, 1).cwiseAbs().maxCoeff());
      scale2 = std::max(scale2, eval(i, p, 2).cwiseAbs().maxCoeff());
    }
    for (const auto& p : pts) {
      const Eigen::VectorXd f0m = eval(i, TorusPoint(p.x - h), 0);
      const Eigen::VectorXd f0p = eval(i, TorusPoint(p.x + h), 0);
      const Eigen::VectorXd f0 = eval(i, p, 0);
      const Eigen::VectorXd fd1 = (f0p - f0m) / (2.0 * h);
      const Eigen::VectorXd fd2 = (f0p - 2.0 * f0 + f0m) / (h * h);
      const double e1 = (eval(i, p, 1) - fd1).cwiseAbs().maxCoeff() / scale1;
      const double e2 = (eval(i, p, 2) - fd2).cwiseAbs().maxCoeff() / scale2;
      rep.max_rel_error[i] = std::max({rep.max_rel_error[i], e1, e2});
    }
    if (rep.max_rel_error[i] > rep.worst_error) {
      rep.worst_error = rep.max_rel_error[i];
      rep.worst_kernel = i;
    }
  }
  rep.pass = rep.worst_error <= tol;
  if (!rep.pass && throw_on_fail) {
    throw Error(ErrorCode::FAILS_VALIDATION,
                "kernel " + std::to_string(rep.worst_kernel) + " derivative error " +
                    std::to_string(rep.worst_error) + " > tol");
  }
  return rep;
}

}  // namespace esrr
