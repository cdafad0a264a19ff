// Extended kernel sum-of-squares model with block-diagonal structure
//
//   g(x) = sum_i || W_i^T K_{Z_i}(x) ||^2,   W_i = T_i^{-1} R_i^T,
//
// where T_i is the upper Cholesky factor of the anchor Gram matrix of block i
// (T_i^T T_i = K_{Z_i}) and R_i is the r x s factor of the block. The kernel
// is the tensor Bessel kernel q_s(t) = exp(s (cos 2 pi t - 1)).
//
// Torus anchors are stored unwrapped; the kernel is 1-periodic so wrapping is
// implicit. Chebychev anchors are stored as angles u with x = cos 2 pi u; the
// Chebychev kernel in these coordinates,
//
//   K(u, v) = prod_l (q(u_l + v_l) + q(u_l - v_l)) / 2,
//
// is even and 1-periodic in every u_l and v_l, so any real u is a valid
// parameter.

#ifndef CERTOPT_MODEL_HPP_
#define CERTOPT_MODEL_HPP_

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "certopt/spectrum.hpp"

namespace certopt {

/// Per-dimension Bessel kernel parameter, all entries positive.
class KernelScale {
 public:
  KernelScale() = default;
  explicit KernelScale(std::vector<double> s) : s_(std::move(s)) {
    if (s_.empty())
      throw std::invalid_argument("KernelScale: empty");
    for (double v : s_)
      if (!(v > 0.0) || !std::isfinite(v))
        throw std::invalid_argument("KernelScale: entries must be positive");
  }
  static KernelScale uniform(std::size_t dim, double s) { return KernelScale(std::vector<double>(dim, s)); }

  std::size_t dim() const { return s_.size(); }
  double operator[](std::size_t l) const { return s_[l]; }
  const std::vector<double>& values() const { return s_; }
  std::vector<double> doubled() const {
    std::vector<double> r = s_;
    for (double& v : r)
      v *= 2.0;
    return r;
  }

 private:
  std::vector<double> s_;
};

struct ModelBlock {
  Eigen::MatrixXd anchors;  // d x s
  Eigen::MatrixXd factor;   // r x s
};

struct ModelShape {
  int rank = 1;
  int block_size = 1;
  int n_blocks = 1;
};

/// q_s(t) = exp(s (cos 2 pi t - 1)).
inline double bessel_profile(double s, double t) {
  return std::exp(s * (std::cos(2.0 * std::numbers::pi * t) - 1.0));
}

class KSoSModel {
 public:
  KSoSModel(Basis basis, KernelScale scale, std::vector<ModelBlock> blocks)
      : basis_(basis), scale_(std::move(scale)), blocks_(std::move(blocks)) {
    if (blocks_.empty())
      throw std::invalid_argument("KSoSModel: at least one block required");
    const auto d = static_cast<Eigen::Index>(scale_.dim());
    const auto s = blocks_.front().anchors.cols();
    const auto r = blocks_.front().factor.rows();
    for (const auto& b : blocks_) {
      if (b.anchors.rows() != d || b.anchors.cols() != s || b.factor.rows() != r ||
          b.factor.cols() != s)
        throw std::invalid_argument("KSoSModel: inconsistent block shapes");
      if (!b.anchors.allFinite() || !b.factor.allFinite())
        throw std::invalid_argument("KSoSModel: non-finite parameters");
    }
    refresh();
  }

  Basis basis() const { return basis_; }
  const KernelScale& scale() const { return scale_; }
  std::size_t dim() const { return scale_.dim(); }
  std::size_t n_blocks() const { return blocks_.size(); }
  Eigen::Index block_size() const { return blocks_.front().anchors.cols(); }
  Eigen::Index rank() const { return blocks_.front().factor.rows(); }
  std::size_t n_anchors() const { return n_blocks() * static_cast<std::size_t>(block_size()); }
  std::size_t n_parameters() const {
    return static_cast<std::size_t>(rank() + static_cast<Eigen::Index>(dim())) * n_anchors();
  }
  ModelShape shape() const {
    return {static_cast<int>(rank()), static_cast<int>(block_size()), static_cast<int>(n_blocks())};
  }

  const std::vector<ModelBlock>& blocks() const { return blocks_; }
  const ModelBlock& block(std::size_t i) const { return blocks_[i]; }
  /// Upper Cholesky factor T_i of the (jittered) block Gram matrix.
  const Eigen::MatrixXd& cholesky(std::size_t i) const { return chol_[i]; }
  /// W_i = T_i^{-1} R_i^T, an s x r matrix; the block Gram G_i = W_i W_i^T.
  const Eigen::MatrixXd& whitened(std::size_t i) const { return whitened_[i]; }

  /// Kernel between two points in lifted coordinates (torus z or angle u).
  double kernel(std::span<const double> a, std::span<const double> b) const {
    double k = 1.0;
    for (std::size_t l = 0; l < dim(); ++l)
      k *= kernel_1d(l, a[l], b[l]);
    return k;
  }

  double kernel_1d(std::size_t l, double a, double b) const {
    if (basis_ == Basis::torus)
      return bessel_profile(scale_[l], a - b);
    return 0.5 * (bessel_profile(scale_[l], a + b) + bessel_profile(scale_[l], a - b));
  }

  /// Kernel vector of block i at a lifted point.
  Eigen::VectorXd kernel_vector(std::size_t i, std::span<const double> u) const {
    const auto& Z = blocks_[i].anchors;
    Eigen::VectorXd k(Z.cols());
    for (Eigen::Index j = 0; j < Z.cols(); ++j) {
      double v = 1.0;
      for (std::size_t l = 0; l < dim(); ++l)
        v *= kernel_1d(l, u[l], Z(static_cast<Eigen::Index>(l), j));
      k(j) = v;
    }
    return k;
  }

  /// Gram matrix between the anchors of blocks i and j.
  Eigen::MatrixXd cross_gram(std::size_t i, std::size_t j) const {
    const auto& A = blocks_[i].anchors;
    const auto& B = blocks_[j].anchors;
    Eigen::MatrixXd Q(A.cols(), B.cols());
    for (Eigen::Index a = 0; a < A.cols(); ++a)
      for (Eigen::Index b = 0; b < B.cols(); ++b) {
        double v = 1.0;
        for (std::size_t l = 0; l < dim(); ++l) {
          const auto ll = static_cast<Eigen::Index>(l);
          v *= kernel_1d(l, A(ll, a), B(ll, b));
        }
        Q(a, b) = v;
      }
    return Q;
  }

  /// g at a lifted point: torus z, or angle u with x = cos 2 pi u.
  double eval_lifted(std::span<const double> u) const {
    if (u.size() != dim())
      throw std::invalid_argument("KSoSModel: point dimension mismatch");
    double g = 0.0;
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      g += (whitened_[i].transpose() * kernel_vector(i, u)).squaredNorm();
    return g;
  }

  /// g at a domain point: z in T^d (torus) or x in [-1,1]^d (chebychev).
  double operator()(std::span<const double> x) const {
    if (basis_ == Basis::torus)
      return eval_lifted(x);
    std::vector<double> u(x.size());
    for (std::size_t l = 0; l < x.size(); ++l) {
      if (!(x[l] >= -1.0 && x[l] <= 1.0))
        throw std::domain_error("KSoSModel: point outside [-1,1]^d");
      u[l] = std::acos(x[l]) / (2.0 * std::numbers::pi);
    }
    return eval_lifted(u);
  }

  /// Copy with new parameters; caches are recomputed.
  KSoSModel with_blocks(std::vector<ModelBlock> blocks) const {
    return KSoSModel(basis_, scale_, std::move(blocks));
  }

 private:
  void refresh() {
    chol_.clear();
    whitened_.clear();
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      const Eigen::MatrixXd K = cross_gram(i, i);
      const Eigen::Index s = K.rows();
      double jitter = 1e-10 * K.trace() / static_cast<double>(s);
      Eigen::MatrixXd T;
      bool ok = false;
      for (int attempt = 0; attempt < 4 && !ok; ++attempt, jitter *= 10.0) {
        Eigen::LLT<Eigen::MatrixXd> llt(K + jitter * Eigen::MatrixXd::Identity(s, s));
        if (llt.info() == Eigen::Success) {
          T = llt.matrixU();
          ok = T.diagonal().minCoeff() > 0.0;
        }
      }
      if (!ok)
        throw std::runtime_error("KSoSModel: block Gram matrix is not positive definite");
      Eigen::MatrixXd W = T.triangularView<Eigen::Upper>().solve(blocks_[i].factor.transpose());
      chol_.push_back(std::move(T));
      whitened_.push_back(std::move(W));
    }
  }

  Basis basis_;
  KernelScale scale_;
  std::vector<ModelBlock> blocks_;
  std::vector<Eigen::MatrixXd> chol_;
  std::vector<Eigen::MatrixXd> whitened_;
};

}  // namespace certopt

#endif  // CERTOPT_MODEL_HPP_
