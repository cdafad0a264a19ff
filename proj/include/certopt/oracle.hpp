// Brute-force references: grid minimization, quadrature spectra, dense model
// evaluation. Nothing here touches the closed-form coefficient code; these
// routines only evaluate functions pointwise.

#ifndef CERTOPT_ORACLE_HPP_
#define CERTOPT_ORACLE_HPP_

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "certopt/model.hpp"
#include "certopt/parallel.hpp"
#include "certopt/target.hpp"

namespace certopt {

using PointFn = std::function<double(std::span<const double>)>;

namespace detail {

inline std::size_t grid_budget(std::size_t n, std::size_t d, double cap) {
  const double total = std::pow(static_cast<double>(n), static_cast<double>(d));
  if (total > cap)
    throw std::invalid_argument("oracle: grid budget exceeded");
  return static_cast<std::size_t>(total);
}

/// Tensor grid values v[k] with k = sum_l k_l n^{d-1-l}.
inline std::vector<double> tabulate(const PointFn& fn, std::size_t d, std::size_t n,
                                    const std::function<double(std::size_t)>& node, int threads) {
  const std::size_t total = grid_budget(n, d, 1e8);
  std::vector<double> v(total);
  parallel_for(total, threads, [&](std::size_t k) {
    std::vector<double> x(d);
    std::size_t r = k;
    for (std::size_t l = d; l-- > 0;) {
      x[l] = node(r % n);
      r /= n;
    }
    v[k] = fn(x);
  });
  return v;
}

}  // namespace detail

struct GridMinimum {
  std::vector<double> x;  // domain point
  double value = 0.0;
  double slack = 0.0;  // f* >= value - slack
  std::size_t points_per_dim = 0;
};

/// Lipschitz-type slack of a uniform lifted grid of the given spacing: an
/// upper bound on |f(u) - f(u')| for |u - u'|_inf <= spacing / 2.
inline double grid_slack(const Target& f, double spacing) {
  const double half = 0.5 * spacing;
  if (const auto* p = std::get_if<TrigPoly>(&f)) {
    double s = 0.0;
    for (const auto& t : p->terms()) {
      int l1 = 0;
      for (int v : t.freq.indices())
        l1 += std::abs(v);
      s += std::abs(t.coeff) * l1;
    }
    return kTwoPi * s * half;
  }
  if (const auto* h = std::get_if<ChebPoly>(&f)) {
    double s = 0.0;
    for (const auto& t : h->terms()) {
      int l1 = 0;
      for (int v : t.freq.indices())
        l1 += v;
      s += std::abs(t.coeff) * l1;
    }
    return kTwoPi * s * half;
  }
  const auto& m = std::get<KernelMixture>(f);
  double ssum = 0.0;
  for (double v : m.scale().values())
    ssum += v;
  return kTwoPi * m.weights().cwiseAbs().sum() * ssum * half;
}

/// Exhaustive minimization over a uniform grid: z_k = k/n on the torus,
/// u_k = k / (2(n-1)) (x = cos 2 pi u, endpoints included) for Chebychev
/// targets.
inline GridMinimum grid_minimize(const Target& f, std::size_t points_per_dim, int threads = 1) {
  const std::size_t d = dim_of(f);
  const bool cheb = basis_of(f) == Basis::chebychev;
  if (points_per_dim < 2)
    throw std::invalid_argument("grid_minimize: need at least 2 points per dimension");
  const double spacing = cheb ? 0.5 / static_cast<double>(points_per_dim - 1) : 1.0 / static_cast<double>(points_per_dim);
  auto node = [&](std::size_t k) { return spacing * static_cast<double>(k); };
  const auto vals = detail::tabulate([&](std::span<const double> u) { return eval_lifted(f, u); }, d,
                                     points_per_dim, node, threads);
  std::size_t best = 0;
  for (std::size_t k = 1; k < vals.size(); ++k)
    if (vals[k] < vals[best])
      best = k;
  GridMinimum out;
  out.points_per_dim = points_per_dim;
  std::vector<double> u(d);
  std::size_t r = best;
  for (std::size_t l = d; l-- > 0;) {
    u[l] = node(r % points_per_dim);
    r /= points_per_dim;
  }
  out.x = to_domain(f, u);
  out.value = vals[best];
  out.slack = grid_slack(f, spacing);
  return out;
}

/// Trapezoidal Fourier coefficients of a 1-periodic function from its values
/// on the n^d grid z_k = k/n. Coefficients for a whole box are obtained by
/// contracting one dimension at a time.
class FourierQuadrature {
 public:
  FourierQuadrature(const PointFn& fn, std::size_t dim, std::size_t grid_n, int threads = 1)
      : d_(dim), n_(grid_n) {
    values_ = detail::tabulate(fn, dim, grid_n, [&](std::size_t k) { return static_cast<double>(k) / static_cast<double>(grid_n); },
                               threads);
  }

  std::size_t grid() const { return n_; }

  /// All coefficients with |w|_inf <= radius, indexed like for_each_in_box.
  std::vector<Complex> box(int radius) const {
    if (n_ < 4 * static_cast<std::size_t>(1 + radius))
      throw std::invalid_argument("FourierQuadrature: grid too coarse for the requested frequencies");
    const std::size_t m = 2 * static_cast<std::size_t>(radius) + 1;
    // Table of e^{-2 pi i w k / n}.
    std::vector<Complex> tw(m * n_);
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t k = 0; k < n_; ++k) {
        const long w = static_cast<long>(a) - radius;
        const long e = (w * static_cast<long>(k)) % static_cast<long>(n_);
        tw[a * n_ + k] = std::polar(1.0, -kTwoPi * static_cast<double>(e) / static_cast<double>(n_));
      }
    // cur holds an array of shape (m^j, n^{d-j}); contract the first grid axis.
    std::vector<Complex> cur(values_.begin(), values_.end());
    std::size_t outer = 1;
    for (std::size_t j = 0; j < d_; ++j) {
      std::size_t inner = 1;
      for (std::size_t l = j + 1; l < d_; ++l)
        inner *= n_;
      std::vector<Complex> next(outer * m * inner);
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t a = 0; a < m; ++a)
          for (std::size_t k = 0; k < n_; ++k) {
            const Complex t = tw[a * n_ + k];
            const Complex* src = &cur[(o * n_ + k) * inner];
            Complex* dst = &next[(o * m + a) * inner];
            for (std::size_t i = 0; i < inner; ++i)
              dst[i] += t * src[i];
          }
      cur.swap(next);
      outer *= m;
    }
    const double norm = std::pow(static_cast<double>(n_), static_cast<double>(d_));
    for (auto& v : cur)
      v /= norm;
    return cur;
  }

  Complex coeff(const Frequency& w) const {
    Complex acc{};
    const std::size_t total = values_.size();
    for (std::size_t idx = 0; idx < total; ++idx) {
      std::size_t r = idx;
      double phase = 0.0;
      for (std::size_t l = d_; l-- > 0;) {
        phase += static_cast<double>((static_cast<long>(w[l]) * static_cast<long>(r % n_)) % static_cast<long>(n_));
        r /= n_;
      }
      acc += values_[idx] * std::polar(1.0, -kTwoPi * phase / static_cast<double>(n_));
    }
    return acc / static_cast<double>(total);
  }

 private:
  std::size_t d_;
  std::size_t n_;
  std::vector<double> values_;
};

inline Complex quadrature_fourier_coeff(const PointFn& fn, std::size_t dim, const Frequency& w, std::size_t grid_n) {
  if (grid_n < 4 * static_cast<std::size_t>(1 + w.max_abs()))
    throw std::invalid_argument("quadrature_fourier_coeff: grid too coarse");
  return FourierQuadrature(fn, dim, grid_n).coeff(w);
}

/// Chebychev-Gauss coefficients (2 - 1_{w=0})/pi int h(x) H_w(x) (1-x^2)^{-1/2} dx
/// per dimension, from values at the nodes x_k = cos(pi (k + 1/2) / n).
class ChebQuadrature {
 public:
  ChebQuadrature(const PointFn& fn, std::size_t dim, std::size_t nodes, int threads = 1) : d_(dim), n_(nodes) {
    values_ = detail::tabulate(
        fn, dim, nodes,
        [&](std::size_t k) { return std::cos(std::numbers::pi * (static_cast<double>(k) + 0.5) / static_cast<double>(nodes)); },
        threads);
  }

  /// Coefficients for w in {0..max_order}^d, indexed like for_each_in_box.
  std::vector<double> box(int max_order) const {
    const std::size_t m = static_cast<std::size_t>(max_order) + 1;
    if (n_ < 2 * m)
      throw std::invalid_argument("ChebQuadrature: too few nodes for the requested orders");
    std::vector<double> tw(m * n_);
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t k = 0; k < n_; ++k)
        tw[a * n_ + k] = (a == 0 ? 1.0 : 2.0) / static_cast<double>(n_) *
                         std::cos(std::numbers::pi * static_cast<double>(a) * (static_cast<double>(k) + 0.5) /
                                  static_cast<double>(n_));
    std::vector<double> cur(values_);
    std::size_t outer = 1;
    for (std::size_t j = 0; j < d_; ++j) {
      std::size_t inner = 1;
      for (std::size_t l = j + 1; l < d_; ++l)
        inner *= n_;
      std::vector<double> next(outer * m * inner, 0.0);
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t a = 0; a < m; ++a)
          for (std::size_t k = 0; k < n_; ++k) {
            const double t = tw[a * n_ + k];
            const double* src = &cur[(o * n_ + k) * inner];
            double* dst = &next[(o * m + a) * inner];
            for (std::size_t i = 0; i < inner; ++i)
              dst[i] += t * src[i];
          }
      cur.swap(next);
      outer *= m;
    }
    return cur;
  }

 private:
  std::size_t d_;
  std::size_t n_;
  std::vector<double> values_;
};

inline double quadrature_cheb_coeff(const PointFn& fn, std::size_t dim, const Frequency& w, std::size_t nodes) {
  const ChebQuadrature q(fn, dim, nodes);
  const auto all = q.box(w.max_abs());
  std::size_t idx = 0;
  const std::size_t m = static_cast<std::size_t>(w.max_abs()) + 1;
  for (std::size_t l = 0; l < dim; ++l)
    idx = idx * m + static_cast<std::size_t>(w[l]);
  return all[idx];
}

/// Dense form of a block model: all anchors stacked (d x m) and the
/// block-diagonal PSD matrix G = diag(W_i W_i^T).
struct DenseModel {
  Basis basis;
  KernelScale scale;
  Eigen::MatrixXd anchors;
  Eigen::MatrixXd gram_coeff;

  double kernel_1d(std::size_t l, double a, double b) const {
    const double s = scale[l];
    auto q = [s](double t) { return std::exp(s * (std::cos(kTwoPi * t) - 1.0)); };
    return basis == Basis::torus ? q(a - b) : 0.5 * (q(a + b) + q(a - b));
  }

  /// sum_{ij} G_ij K(u, z_i) K(u, z_j) at a lifted point.
  double eval_lifted(std::span<const double> u) const {
    const Eigen::Index m = anchors.cols();
    Eigen::VectorXd k(m);
    for (Eigen::Index j = 0; j < m; ++j) {
      double v = 1.0;
      for (std::size_t l = 0; l < scale.dim(); ++l)
        v *= kernel_1d(l, u[l], anchors(static_cast<Eigen::Index>(l), j));
      k(j) = v;
    }
    return k.dot(gram_coeff * k);
  }
};

inline DenseModel dense_model(const KSoSModel& g) {
  const auto m = static_cast<Eigen::Index>(g.n_anchors());
  const Eigen::Index s = g.block_size();
  DenseModel out{g.basis(), g.scale(), Eigen::MatrixXd(static_cast<Eigen::Index>(g.dim()), m),
                 Eigen::MatrixXd::Zero(m, m)};
  for (std::size_t b = 0; b < g.n_blocks(); ++b) {
    const auto off = static_cast<Eigen::Index>(b) * s;
    out.anchors.middleCols(off, s) = g.block(b).anchors;
    out.gram_coeff.block(off, off, s, s) = g.whitened(b) * g.whitened(b).transpose();
  }
  return out;
}

}  // namespace certopt

#endif  // CERTOPT_ORACLE_HPP_
