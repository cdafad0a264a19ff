// Functions to minimize. Every target exposes values and gradients in lifted
// (periodic) coordinates and its spectrum in its basis:
//
//   TrigPoly      torus, Fourier coefficients on Z^d
//   KernelMixture torus, h(x) = sum_i alpha_i K(c_i, x) with the Bessel kernel
//   ChebPoly      chebychev, coefficients on N^d; lifted coordinate u, x = cos 2 pi u

#ifndef CERTOPT_TARGET_HPP_
#define CERTOPT_TARGET_HPP_

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "certopt/bessel.hpp"
#include "certopt/model.hpp"
#include "certopt/polynomial.hpp"

namespace certopt {

class KernelMixture {
 public:
  KernelMixture() = default;
  /// centers: one row per center (n x d); scale: kernel parameter per dimension.
  KernelMixture(KernelScale scale, Eigen::MatrixXd centers, Eigen::VectorXd weights)
      : scale_(std::move(scale)), centers_(std::move(centers)), weights_(std::move(weights)) {
    if (centers_.cols() != static_cast<Eigen::Index>(scale_.dim()) || centers_.rows() != weights_.size())
      throw std::invalid_argument("KernelMixture: inconsistent shapes");
  }

  std::size_t dim() const { return scale_.dim(); }
  std::size_t size() const { return static_cast<std::size_t>(weights_.size()); }
  const KernelScale& scale() const { return scale_; }
  const Eigen::MatrixXd& centers() const { return centers_; }
  const Eigen::VectorXd& weights() const { return weights_; }

  double kernel(std::span<const double> a, std::span<const double> b) const {
    double k = 1.0;
    for (std::size_t l = 0; l < dim(); ++l)
      k *= bessel_profile(scale_[l], a[l] - b[l]);
    return k;
  }

  double operator()(std::span<const double> z) const {
    double v = 0.0;
    for (Eigen::Index i = 0; i < centers_.rows(); ++i) {
      double k = 1.0;
      for (std::size_t l = 0; l < dim(); ++l)
        k *= bessel_profile(scale_[l], z[l] - centers_(i, static_cast<Eigen::Index>(l)));
      v += weights_(i) * k;
    }
    return v;
  }

  double value_and_gradient(std::span<const double> z, std::span<double> grad) const {
    std::fill(grad.begin(), grad.end(), 0.0);
    double v = 0.0;
    for (Eigen::Index i = 0; i < centers_.rows(); ++i) {
      double k = 1.0;
      for (std::size_t l = 0; l < dim(); ++l)
        k *= bessel_profile(scale_[l], z[l] - centers_(i, static_cast<Eigen::Index>(l)));
      v += weights_(i) * k;
      for (std::size_t l = 0; l < dim(); ++l) {
        const double t = z[l] - centers_(i, static_cast<Eigen::Index>(l));
        grad[l] -= weights_(i) * k * scale_[l] * kTwoPi * std::sin(kTwoPi * t);
      }
    }
    return v;
  }

  /// hhat_w = sum_i alpha_i prod_l e^{-s_l} I_{|w_l|}(s_l) e^{-2 pi i w_l c_il}.
  Complex coeff(const Frequency& w) const {
    double radial = 1.0;
    for (std::size_t l = 0; l < dim(); ++l)
      radial *= std::exp(-scale_[l]) * bessel_i(std::abs(w[l]), scale_[l]);
    Complex acc{};
    for (Eigen::Index i = 0; i < centers_.rows(); ++i) {
      double phase = 0.0;
      for (std::size_t l = 0; l < dim(); ++l)
        phase -= kTwoPi * w[l] * centers_(i, static_cast<Eigen::Index>(l));
      acc += weights_(i) * std::polar(1.0, phase);
    }
    return radial * acc;
  }

  Eigen::MatrixXd gram() const {
    const auto n = centers_.rows();
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        double k = 1.0;
        for (std::size_t l = 0; l < dim(); ++l) {
          const auto ll = static_cast<Eigen::Index>(l);
          k *= bessel_profile(scale_[l], centers_(i, ll) - centers_(j, ll));
        }
        K(i, j) = k;
      }
    return K;
  }

  /// Norm in the RKHS of the mixture's own kernel: sqrt(alpha^T K alpha).
  double rkhs_norm() const { return std::sqrt(std::max(0.0, weights_.dot(gram() * weights_))); }

 private:
  KernelScale scale_;
  Eigen::MatrixXd centers_;
  Eigen::VectorXd weights_;
};

using Target = std::variant<TrigPoly, ChebPoly, KernelMixture>;

inline Basis basis_of(const Target& t) {
  return std::holds_alternative<ChebPoly>(t) ? Basis::chebychev : Basis::torus;
}

inline std::size_t dim_of(const Target& t) {
  return std::visit([](const auto& f) { return f.dim(); }, t);
}

/// Value at a lifted point (z on the torus, or u with x = cos 2 pi u).
inline double eval_lifted(const Target& t, std::span<const double> u) {
  std::vector<double> scratch(u.size());
  return std::visit(
      [&](const auto& f) -> double {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, ChebPoly>)
          return f.lifted_value_and_gradient(u, scratch);
        else
          return f(u);
      },
      t);
}

inline double eval_lifted_grad(const Target& t, std::span<const double> u, std::span<double> grad) {
  return std::visit(
      [&](const auto& f) -> double {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, ChebPoly>)
          return f.lifted_value_and_gradient(u, grad);
        else
          return f.value_and_gradient(u, grad);
      },
      t);
}

/// Maps a lifted point to the target's own domain (identity on the torus,
/// x = cos 2 pi u for Chebychev targets).
inline std::vector<double> to_domain(const Target& t, std::span<const double> u) {
  std::vector<double> x(u.begin(), u.end());
  if (basis_of(t) == Basis::chebychev)
    for (double& v : x)
      v = std::cos(kTwoPi * v);
  else
    for (double& v : x)
      v -= std::floor(v);
  return x;
}

/// Spectral coefficient in the target's basis.
inline Complex target_coeff(const Target& t, const Frequency& w) {
  return std::visit(
      [&](const auto& f) -> Complex {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, ChebPoly>)
          return Complex(f.coeff(w), 0.0);
        else
          return Complex(f.coeff(w));
      },
      t);
}

}  // namespace certopt

#endif  // CERTOPT_TARGET_HPP_
