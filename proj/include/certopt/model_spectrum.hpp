// Spectral coefficients and RKHS norm bounds of a KSoSModel.
//
// Torus basis, for one block with Gram G = W W^T:
//
//   ghat_w = sum_{i,j} G_ij prod_l e^{-2 s_l} I_{|w_l|}(2 s_l cos pi(z_il - z_jl))
//                                   e^{-i pi w_l (z_il + z_jl)}
//
// Chebychev basis, with sigma_{+-} = cos pi(u_il +- u_jl):
//
//   g_w = sum_{i,j} G_ij prod_l (1 + 1_{w_l != 0}) e^{-2 s_l}/2
//           [I_{w_l}(2 s_l sigma_-) H_{w_l}(sigma_+) + I_{w_l}(2 s_l sigma_+) H_{w_l}(sigma_-)]
//
// Blocks do not interact. The per-pair Bessel and phase factors only depend
// on |w_l|, so they are tabulated once per model and shared across every
// requested frequency.

#ifndef CERTOPT_MODEL_SPECTRUM_HPP_
#define CERTOPT_MODEL_SPECTRUM_HPP_

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

#include "certopt/bessel.hpp"
#include "certopt/model.hpp"
#include "certopt/parallel.hpp"
#include "certopt/polynomial.hpp"

namespace certopt {

class ModelSpectrum {
 public:
  /// Tables are built for |w_l| <= max_order[l]; larger orders fall back to
  /// direct evaluation.
  ModelSpectrum(const KSoSModel& model, std::vector<int> max_order)
      : model_(&model), max_order_(std::move(max_order)) {
    if (max_order_.size() != model.dim())
      throw std::invalid_argument("ModelSpectrum: order vector dimension mismatch");
    build();
  }

  ModelSpectrum(const KSoSModel& model, int max_order)
      : ModelSpectrum(model, std::vector<int>(model.dim(), max_order)) {}

  const KSoSModel& model() const { return *model_; }

  /// Torus coefficient (imaginary part zero in the chebychev basis).
  Complex coefficient(const Frequency& w) const {
    if (w.dim() != model_->dim())
      throw std::invalid_argument("ModelSpectrum: frequency dimension mismatch");
    if (model_->basis() == Basis::chebychev) {
      if (!w.is_nonnegative())
        throw std::invalid_argument("ModelSpectrum: chebychev frequencies must be nonnegative");
      return Complex(cheb_coefficient(w), 0.0);
    }
    return torus_coefficient(w);
  }

  /// Batch evaluation; results do not depend on the thread count.
  std::vector<Complex> coefficients(std::span<const Frequency> ws, int threads = 1) const {
    std::vector<Complex> out(ws.size());
    parallel_for(ws.size(), threads, [&](std::size_t k) { out[k] = coefficient(ws[k]); });
    return out;
  }

 private:
  struct Pair {
    std::size_t block;
    Eigen::Index i, j;
    double weight;  // G_ij, doubled for i != j
  };

  std::size_t d() const { return model_->dim(); }

  void build() {
    const std::size_t dim = d();
    for (std::size_t b = 0; b < model_->n_blocks(); ++b) {
      const Eigen::MatrixXd& W = model_->whitened(b);
      const Eigen::MatrixXd G = W * W.transpose();
      for (Eigen::Index i = 0; i < G.rows(); ++i)
        for (Eigen::Index j = i; j < G.cols(); ++j)
          pairs_.push_back({b, i, j, (i == j ? 1.0 : 2.0) * G(i, j)});
    }
    stride_.resize(dim);
    std::size_t per_pair = 0;
    for (std::size_t l = 0; l < dim; ++l) {
      stride_[l] = per_pair;
      per_pair += static_cast<std::size_t>(max_order_[l]) + 1;
    }
    per_pair_ = per_pair;
    const bool torus = model_->basis() == Basis::torus;
    radial_.assign(pairs_.size() * per_pair, 0.0);
    if (torus)
      phase_.assign(pairs_.size() * per_pair, Complex{});
    std::vector<double> tab_a, tab_b;
    for (std::size_t p = 0; p < pairs_.size(); ++p) {
      const auto& pr = pairs_[p];
      const auto& Z = model_->block(pr.block).anchors;
      for (std::size_t l = 0; l < dim; ++l) {
        const auto ll = static_cast<Eigen::Index>(l);
        const double s = model_->scale()[l];
        const int n = max_order_[l];
        const double a = Z(ll, pr.i), b = Z(ll, pr.j);
        double* rad = &radial_[p * per_pair + stride_[l]];
        tab_a.resize(static_cast<std::size_t>(n) + 1);
        if (torus) {
          bessel_i_table(n, 2.0 * s * std::cos(std::numbers::pi * (a - b)), tab_a.data());
          Complex* ph = &phase_[p * per_pair + stride_[l]];
          for (int k = 0; k <= n; ++k) {
            rad[k] = std::exp(-2.0 * s) * tab_a[k];
            ph[k] = std::polar(1.0, -std::numbers::pi * k * (a + b));
          }
        } else {
          tab_b.resize(static_cast<std::size_t>(n) + 1);
          const double m_plus = 0.5 * (a + b), m_minus = 0.5 * (a - b);
          const double sig_p = std::cos(kTwoPi * m_plus), sig_m = std::cos(kTwoPi * m_minus);
          bessel_i_table(n, 2.0 * s * sig_m, tab_a.data());
          bessel_i_table(n, 2.0 * s * sig_p, tab_b.data());
          for (int k = 0; k <= n; ++k) {
            // H_k(cos 2 pi m) = cos(2 pi k m)
            const double h_p = std::cos(kTwoPi * k * m_plus), h_m = std::cos(kTwoPi * k * m_minus);
            rad[k] = (k == 0 ? 1.0 : 2.0) * 0.5 * std::exp(-2.0 * s) * (tab_a[k] * h_p + tab_b[k] * h_m);
          }
        }
      }
    }
  }

  double radial_direct(const Pair& pr, std::size_t l, int k) const {
    const auto ll = static_cast<Eigen::Index>(l);
    const auto& Z = model_->block(pr.block).anchors;
    const double s = model_->scale()[l];
    const double a = Z(ll, pr.i), b = Z(ll, pr.j);
    if (model_->basis() == Basis::torus)
      return std::exp(-2.0 * s) * bessel_i(k, 2.0 * s * std::cos(std::numbers::pi * (a - b)));
    const double m_plus = 0.5 * (a + b), m_minus = 0.5 * (a - b);
    return (k == 0 ? 1.0 : 2.0) * 0.5 * std::exp(-2.0 * s) *
           (bessel_i(k, 2.0 * s * std::cos(kTwoPi * m_minus)) * std::cos(kTwoPi * k * m_plus) +
            bessel_i(k, 2.0 * s * std::cos(kTwoPi * m_plus)) * std::cos(kTwoPi * k * m_minus));
  }

  Complex torus_coefficient(const Frequency& w) const {
    Complex acc{};
    for (std::size_t p = 0; p < pairs_.size(); ++p) {
      const auto& pr = pairs_[p];
      Complex term(pr.weight, 0.0);
      for (std::size_t l = 0; l < d(); ++l) {
        const int k = std::abs(w[l]);
        Complex ph;
        double rad;
        if (k <= max_order_[l]) {
          rad = radial_[p * per_pair_ + stride_[l] + k];
          ph = phase_[p * per_pair_ + stride_[l] + k];
        } else {
          rad = radial_direct(pr, l, k);
          const auto ll = static_cast<Eigen::Index>(l);
          const auto& Z = model_->block(pr.block).anchors;
          ph = std::polar(1.0, -std::numbers::pi * k * (Z(ll, pr.i) + Z(ll, pr.j)));
        }
        if (w[l] < 0)
          ph = std::conj(ph);
        term *= rad * ph;
      }
      acc += term;
    }
    return acc;
  }

  double cheb_coefficient(const Frequency& w) const {
    double acc = 0.0;
    for (std::size_t p = 0; p < pairs_.size(); ++p) {
      const auto& pr = pairs_[p];
      double term = pr.weight;
      for (std::size_t l = 0; l < d(); ++l) {
        const int k = w[l];
        term *= k <= max_order_[l] ? radial_[p * per_pair_ + stride_[l] + k] : radial_direct(pr, l, k);
      }
      acc += term;
    }
    return acc;
  }

  const KSoSModel* model_;
  std::vector<int> max_order_;
  std::vector<Pair> pairs_;
  std::vector<std::size_t> stride_;
  std::size_t per_pair_ = 0;
  std::vector<double> radial_;
  std::vector<Complex> phase_;
};

/// Single torus coefficient (Fourier) of the model.
inline Complex model_fourier_coeff(const KSoSModel& g, const Frequency& w) {
  if (g.basis() != Basis::torus)
    throw std::invalid_argument("model_fourier_coeff: torus model required");
  return ModelSpectrum(g, 0).coefficient(w);
}

/// Single Chebychev coefficient of the model.
inline double model_cheb_coeff(const KSoSModel& g, const Frequency& w) {
  if (g.basis() != Basis::chebychev)
    throw std::invalid_argument("model_cheb_coeff: chebychev model required");
  return ModelSpectrum(g, 0).coefficient(w).real();
}

/// Frequencies of the hyperbolic cross {n in Z^d : prod_l max(1,|n_l|) <= order}.
inline std::vector<Frequency> hyperbolic_cross(std::size_t dim, int order) {
  if (order < 1)
    throw std::invalid_argument("hyperbolic_cross: order must be >= 1");
  std::vector<Frequency> out;
  Frequency n(dim);
  auto rec = [&](auto&& self, std::size_t l, long budget) -> void {
    if (l == dim) {
      out.push_back(n);
      return;
    }
    for (long v = -budget; v <= budget; ++v) {
      n[l] = static_cast<int>(v);
      self(self, l + 1, budget / std::max(1L, std::labs(v)));
    }
  };
  rec(rec, 0, order);
  return out;
}

/// Fourier coefficient of a torus model as an inner product of embeddings
///
///   ghat_w = sum_k sum_n A_k(n) B_k(n),
///   A_k(n) = sum_i W_ik prod_l sqrt(q_{w_l,n_l}) e^{ i pi (n_l - w_l) z_il},
///   B_k(n) = sum_j W_jk prod_l sqrt(q_{w_l,n_l}) e^{-i pi (n_l + w_l) z_jl},
///
/// with the sum over n restricted to the hyperbolic cross of the given order.
/// Linear in the number of anchors per n; approximate.
inline Complex model_fourier_coeff_linear(const KSoSModel& g, const Frequency& w, int hc_order) {
  if (g.basis() != Basis::torus)
    throw std::invalid_argument("model_fourier_coeff_linear: torus model required");
  const std::size_t dim = g.dim();
  const auto cross = hyperbolic_cross(dim, hc_order);
  // sqrt(q) per dimension, cached by n.
  std::vector<std::vector<double>> sq(dim);
  for (std::size_t l = 0; l < dim; ++l) {
    sq[l].resize(2 * static_cast<std::size_t>(hc_order) + 1);
    for (int n = -hc_order; n <= hc_order; ++n)
      sq[l][n + hc_order] = std::sqrt(bessel_cos_fourier_coeff(std::abs(w[l]), n, g.scale()[l]));
  }
  Complex acc{};
  for (std::size_t b = 0; b < g.n_blocks(); ++b) {
    const auto& Z = g.block(b).anchors;
    const Eigen::MatrixXd& W = g.whitened(b);
    Eigen::VectorXcd ea(Z.cols()), eb(Z.cols());
    for (const auto& n : cross) {
      double amp = 1.0;
      for (std::size_t l = 0; l < dim; ++l)
        amp *= sq[l][n[l] + hc_order];
      if (amp == 0.0)
        continue;
      for (Eigen::Index i = 0; i < Z.cols(); ++i) {
        double ta = 0.0, tb = 0.0;
        for (std::size_t l = 0; l < dim; ++l) {
          const double z = Z(static_cast<Eigen::Index>(l), i);
          ta += (n[l] - w[l]) * z;
          tb -= (n[l] + w[l]) * z;
        }
        ea(i) = std::polar(1.0, std::numbers::pi * ta);
        eb(i) = std::polar(1.0, std::numbers::pi * tb);
      }
      const Eigen::VectorXcd A = W.transpose().cast<Complex>() * ea;
      const Eigen::VectorXcd B = W.transpose().cast<Complex>() * eb;
      acc += amp * amp * (A.array() * B.array()).sum();
    }
  }
  return acc;
}

/// Hilbert-Schmidt bound on the RKHS norm of g in the space of the squared
/// kernel: sqrt( sum_{j,k} || W_j^T Q_jk W_k ||_F^2 ).
inline double hs_norm_bound(const KSoSModel& g) {
  double total = 0.0;
  for (std::size_t j = 0; j < g.n_blocks(); ++j)
    for (std::size_t k = j; k < g.n_blocks(); ++k) {
      const Eigen::MatrixXd M = g.whitened(j).transpose() * g.cross_gram(j, k) * g.whitened(k);
      total += (j == k ? 1.0 : 2.0) * M.squaredNorm();
    }
  return std::sqrt(total);
}

/// Training regularizer: the Hilbert-Schmidt bound with every kernel matrix
/// replaced by the identity, sum_{j,k} || R_j R_k^T ||_F^2 (R_j is r x s here),
/// which equals || sum_j R_j^T R_j ||_F^2.
inline double hs_reg_proxy(const KSoSModel& g) {
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(g.block_size(), g.block_size());
  for (const auto& b : g.blocks())
    S.noalias() += b.factor.transpose() * b.factor;
  return S.squaredNorm();
}

/// g written out as an explicit polynomial, keeping |w|_inf <= box.
inline TrigPoly synthesize_torus(const KSoSModel& g, int box, int threads = 1) {
  if (g.basis() != Basis::torus)
    throw std::invalid_argument("synthesize_torus: torus model required");
  // Half spectrum only, so the result is Hermitian by construction.
  std::vector<Frequency> ws;
  for_each_in_box(g.dim(), box, false, [&](const Frequency& w) {
    if (w.is_zero() || -w < w)
      ws.push_back(w);
  });
  const auto cs = ModelSpectrum(g, box).coefficients(ws, threads);
  std::vector<TrigPoly::Term> terms;
  for (std::size_t k = 0; k < ws.size(); ++k)
    terms.push_back({ws[k], ws[k].is_zero() ? Complex(cs[k].real(), 0.0) : cs[k]});
  return TrigPoly::from_half_spectrum(g.dim(), terms);
}

inline ChebPoly synthesize_cheb(const KSoSModel& g, int box, int threads = 1) {
  if (g.basis() != Basis::chebychev)
    throw std::invalid_argument("synthesize_cheb: chebychev model required");
  std::vector<Frequency> ws;
  for_each_in_box(g.dim(), box, true, [&](const Frequency& w) { ws.push_back(w); });
  const auto cs = ModelSpectrum(g, box).coefficients(ws, threads);
  std::vector<ChebPoly::Term> terms;
  for (std::size_t k = 0; k < ws.size(); ++k)
    terms.push_back({ws[k], cs[k].real()});
  return ChebPoly(g.dim(), terms);
}

}  // namespace certopt

#endif  // CERTOPT_MODEL_SPECTRUM_HPP_
