// Candidate search and model fitting.
//
// find_candidate: multi-start gradient descent on f in lifted coordinates.
// train_model: fits g to f - c by minimizing
//
//   L = tau log sum_i exp(a_i / tau) + reg * sum_{j,k} ||R_j R_k^T||_F^2,
//   a_i = sqrt(r_i^2 + eps^2),  r_i = f(x_i) - c - g(x_i),
//
// over anchors and factors with momentum SGD and cosine learning-rate decay.
// The Cholesky factors T_i are held fixed inside a step and refreshed after
// every update, unless whitening_gradient asks for the exact gradient.

#ifndef CERTOPT_TRAINER_HPP_
#define CERTOPT_TRAINER_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "certopt/model.hpp"
#include "certopt/model_spectrum.hpp"
#include "certopt/parallel.hpp"
#include "certopt/target.hpp"

namespace certopt {

// ---------------------------------------------------------------- candidate

struct CandidateResult {
  std::vector<double> x;  // point in the target's domain
  std::vector<double> u;  // lifted coordinates
  double c = 0.0;
  int n_starts = 0;
  std::vector<double> final_values;
};

/// Upper end of the lifted box that covers the domain once.
inline double lifted_extent(Basis b) { return b == Basis::torus ? 1.0 : 0.5; }

inline double eval_domain(const Target& f, std::span<const double> x) {
  return std::visit([&](const auto& p) -> double { return p(x); }, f);
}

inline CandidateResult find_candidate(const Target& f, int n_starts, int max_iters, std::uint64_t seed) {
  if (n_starts < 1)
    throw std::invalid_argument("find_candidate: need at least one start");
  const std::size_t d = dim_of(f);
  const double extent = lifted_extent(basis_of(f));
  std::mt19937_64 rng(seed);
  CandidateResult best;
  best.n_starts = n_starts;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<double> u(d), grad(d), trial(d), tgrad(d);
  for (int start = 0; start < n_starts; ++start) {
    for (auto& v : u)
      v = extent * uniform01(rng);
    double val = eval_lifted_grad(f, u, grad);
    for (int it = 0; it < max_iters; ++it) {
      double gn = 0.0;
      for (double g : grad)
        gn += g * g;
      if (std::sqrt(gn) < 1e-10)
        break;
      double step = 0.1;
      bool moved = false;
      for (int halving = 0; halving < 60; ++halving, step *= 0.5) {
        for (std::size_t l = 0; l < d; ++l)
          trial[l] = u[l] - step * grad[l];
        const double tv = eval_lifted_grad(f, trial, tgrad);
        if (tv < val) {
          u = trial;
          grad = tgrad;
          val = tv;
          moved = true;
          break;
        }
      }
      if (!moved)
        break;
    }
    best.final_values.push_back(val);
    if (val < best_val) {
      best_val = val;
      best.u = u;
    }
  }
  best.x = to_domain(f, best.u);
  best.c = eval_domain(f, best.x);
  return best;
}

// ---------------------------------------------------------------- loss

struct TrainConfig {
  int epochs = 2000;
  int batch_size = 1024;
  double lr = 0.1;
  double lr_final = 1e-3;
  // Off: T is a constant inside each step. On: exact gradient through the
  // Cholesky factors at fixed R.
  bool whitening_gradient = false;
  double momentum = 0.9;
  double tau = 0.05;
  double eps_abs = 1e-8;
  double reg = 1e-6;
  double factor_init = 0.1;
  int validation_size = 4096;
  int validation_every = 10;
  bool learn_c = false;
  ModelShape shape{};
  double scale = 1.0;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct BlockGrad {
  Eigen::MatrixXd anchors;  // d x s
  Eigen::MatrixXd factor;   // r x s
};

struct LossResult {
  double loss = 0.0;
  double lse = 0.0;
  double reg = 0.0;
  double max_residual = 0.0;
  double grad_c = 0.0;
  std::vector<BlockGrad> grads;
};

namespace detail {

/// d/dv of the 1-D kernel between a point coordinate x and an anchor
/// coordinate v, together with the kernel value.
inline double kernel_1d_with_derivative(Basis basis, double s, double x, double v, double& dv) {
  auto q = [s](double t) { return bessel_profile(s, t); };
  auto dq = [s](double t) { return -bessel_profile(s, t) * s * kTwoPi * std::sin(kTwoPi * t); };
  if (basis == Basis::torus) {
    dv = -dq(x - v);
    return q(x - v);
  }
  dv = 0.5 * (dq(x + v) - dq(x - v));
  return 0.5 * (q(x + v) + q(x - v));
}

/// Anchor gradient carried by the whitening T(Z) at fixed R. With
/// yk = sum_i dL/dg_i 2 y_i k_i^T the loss sees T through
/// Tbar = -triu((W yk T^{-1})^T); the Cholesky adjoint maps this to
/// Kbar = T^{-1} Phi(T Tbar^T) T^{-T} (Phi: lower triangle, halved diagonal),
/// and then to the anchors through the Gram entries.
inline Eigen::MatrixXd whitening_anchor_grad(Basis basis, const KernelScale& scale, const Eigen::MatrixXd& Z,
                                             const Eigen::MatrixXd& T, const Eigen::MatrixXd& W,
                                             const Eigen::MatrixXd& yk) {
  const Eigen::Index s = Z.cols();
  const auto d = static_cast<std::size_t>(Z.rows());
  const auto Tu = T.triangularView<Eigen::Upper>();
  // M = W yk T^{-1}  <=>  M^T = T^{-T} (W yk)^T.
  const Eigen::MatrixXd WY = W * yk;
  const Eigen::MatrixXd M = T.transpose().triangularView<Eigen::Lower>().solve(WY.transpose()).transpose();
  const Eigen::MatrixXd Tbar = -Eigen::MatrixXd(M.transpose().triangularView<Eigen::Upper>());
  Eigen::MatrixXd P = Eigen::MatrixXd((T * Tbar.transpose()).triangularView<Eigen::Lower>());
  P.diagonal() *= 0.5;
  // Kbar = T^{-1} P T^{-T}
  const Eigen::MatrixXd X = Tu.solve(P);
  Eigen::MatrixXd Kbar = Tu.solve(X.transpose()).transpose();
  Kbar = 0.5 * (Kbar + Kbar.transpose()).eval();

  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(Z.rows(), s);
  std::vector<double> kv(d), dk(d);
  for (Eigen::Index a = 0; a < s; ++a)
    for (Eigen::Index b = 0; b < s; ++b) {
      for (std::size_t l = 0; l < d; ++l) {
        const auto ll = static_cast<Eigen::Index>(l);
        kv[l] = kernel_1d_with_derivative(basis, scale[l], Z(ll, b), Z(ll, a), dk[l]);
      }
      for (std::size_t l = 0; l < d; ++l) {
        double others = 1.0;
        for (std::size_t m = 0; m < d; ++m)
          if (m != l)
            others *= kv[m];
        grad(static_cast<Eigen::Index>(l), a) += 2.0 * Kbar(a, b) * others * dk[l];
      }
    }
  return grad;
}

}  // namespace detail

/// Objective and gradients at the model's parameters, with whitening taken
/// from `chol` (one upper factor per block) rather than recomputed.
inline LossResult lse_objective(const Target& f, double c, Basis basis, const KernelScale& scale,
                                const std::vector<ModelBlock>& blocks, const std::vector<Eigen::MatrixXd>& chol,
                                const std::vector<std::vector<double>>& batch, const TrainConfig& cfg) {
  if (batch.empty())
    throw std::invalid_argument("lse_loss: empty batch");
  const std::size_t d = scale.dim();
  const std::size_t nb = blocks.size();
  const std::size_t n = batch.size();

  std::vector<Eigen::MatrixXd> W(nb);
  for (std::size_t b = 0; b < nb; ++b)
    W[b] = chol[b].triangularView<Eigen::Upper>().solve(blocks[b].factor.transpose());

  // Pass 1: residuals.
  std::vector<double> resid(n);
  parallel_for(n, cfg.threads, [&](std::size_t i) {
    const auto& x = batch[i];
    double g = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
      const auto& Z = blocks[b].anchors;
      Eigen::VectorXd k(Z.cols());
      for (Eigen::Index j = 0; j < Z.cols(); ++j) {
        double v = 1.0, dv;
        for (std::size_t l = 0; l < d; ++l)
          v *= detail::kernel_1d_with_derivative(basis, scale[l], x[l], Z(static_cast<Eigen::Index>(l), j), dv);
        k(j) = v;
      }
      g += (W[b].transpose() * k).squaredNorm();
    }
    resid[i] = eval_lifted(f, x) - c - g;
  });

  LossResult out;
  std::vector<double> a(n);
  double amax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = std::sqrt(resid[i] * resid[i] + cfg.eps_abs * cfg.eps_abs);
    amax = std::max(amax, a[i]);
    out.max_residual = std::max(out.max_residual, std::abs(resid[i]));
  }
  std::vector<double> e(n);
  for (std::size_t i = 0; i < n; ++i)
    e[i] = std::exp((a[i] - amax) / cfg.tau);
  const double z = pairwise_sum(e.data(), n);
  out.lse = amax + cfg.tau * std::log(z);

  // dL/dg(x_i) = -p_i r_i / a_i.
  std::vector<double> coef(n);
  for (std::size_t i = 0; i < n; ++i)
    coef[i] = -(e[i] / z) * resid[i] / a[i];
  {
    std::vector<double> cc(coef);
    out.grad_c = pairwise_sum(cc.data(), n);
  }

  // Pass 2: gradients, accumulated in fixed chunks so that the result does not
  // depend on the thread count.
  constexpr std::size_t kChunk = 64;
  const std::size_t n_chunks = (n + kChunk - 1) / kChunk;
  std::vector<std::vector<BlockGrad>> partial(n_chunks);
  parallel_for(n_chunks, cfg.threads, [&](std::size_t ch) {
    auto& acc = partial[ch];
    acc.resize(nb);
    for (std::size_t b = 0; b < nb; ++b) {
      acc[b].anchors = Eigen::MatrixXd::Zero(blocks[b].anchors.rows(), blocks[b].anchors.cols());
      acc[b].factor = Eigen::MatrixXd::Zero(blocks[b].factor.rows(), blocks[b].factor.cols());  // holds sum coef 2 y k^T
    }
    std::vector<double> kv(d), dk(d);
    for (std::size_t i = ch * kChunk; i < std::min(n, (ch + 1) * kChunk); ++i) {
      if (coef[i] == 0.0)
        continue;
      const auto& x = batch[i];
      for (std::size_t b = 0; b < nb; ++b) {
        const auto& Z = blocks[b].anchors;
        const Eigen::Index s = Z.cols();
        Eigen::VectorXd k(s);
        Eigen::MatrixXd dkdz(d, s);
        for (Eigen::Index j = 0; j < s; ++j) {
          double v = 1.0;
          for (std::size_t l = 0; l < d; ++l) {
            kv[l] = detail::kernel_1d_with_derivative(basis, scale[l], x[l], Z(static_cast<Eigen::Index>(l), j), dk[l]);
            v *= kv[l];
          }
          k(j) = v;
          for (std::size_t l = 0; l < d; ++l) {
            double others = 1.0;
            for (std::size_t m = 0; m < d; ++m)
              if (m != l)
                others *= kv[m];
            dkdz(static_cast<Eigen::Index>(l), j) = others * dk[l];
          }
        }
        const Eigen::VectorXd y = W[b].transpose() * k;
        const Eigen::VectorXd gk = 2.0 * (W[b] * y);  // dg/dk
        acc[b].factor.noalias() += (2.0 * coef[i]) * y * k.transpose();
        for (Eigen::Index j = 0; j < s; ++j)
          acc[b].anchors.col(j) += (coef[i] * gk(j)) * dkdz.col(j);
      }
    }
  });

  out.grads.resize(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    out.grads[b].anchors = Eigen::MatrixXd::Zero(blocks[b].anchors.rows(), blocks[b].anchors.cols());
    Eigen::MatrixXd yk = Eigen::MatrixXd::Zero(blocks[b].factor.rows(), blocks[b].factor.cols());
    // Fixed-order tree over chunks.
    std::vector<Eigen::MatrixXd> za(n_chunks), zf(n_chunks);
    for (std::size_t ch = 0; ch < n_chunks; ++ch) {
      za[ch] = partial[ch][b].anchors;
      zf[ch] = partial[ch][b].factor;
    }
    out.grads[b].anchors = pairwise_sum(za.data(), n_chunks);
    yk = pairwise_sum(zf.data(), n_chunks);
    // dg/dR = 2 y a^T with a = T^{-T} k, so sum 2 y k^T T^{-1}.
    out.grads[b].factor =
        chol[b].transpose().triangularView<Eigen::Lower>().solve(yk.transpose()).transpose();
    if (cfg.whitening_gradient)
      out.grads[b].anchors += detail::whitening_anchor_grad(basis, scale, blocks[b].anchors, chol[b], W[b], yk);
  }

  // Regularizer reg ||S||_F^2 with S = sum_j R_j^T R_j; gradient 4 reg R_j S.
  if (cfg.reg != 0.0) {
    const Eigen::Index s = blocks.front().factor.cols();
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(s, s);
    for (const auto& b : blocks)
      S.noalias() += b.factor.transpose() * b.factor;
    out.reg = cfg.reg * S.squaredNorm();
    for (std::size_t b = 0; b < nb; ++b)
      out.grads[b].factor.noalias() += (4.0 * cfg.reg) * blocks[b].factor * S;
  }
  out.loss = out.lse + out.reg;
  return out;
}

inline LossResult lse_loss(const Target& f, double c, const KSoSModel& g,
                           const std::vector<std::vector<double>>& batch, const TrainConfig& cfg) {
  std::vector<Eigen::MatrixXd> chol;
  for (std::size_t b = 0; b < g.n_blocks(); ++b)
    chol.push_back(g.cholesky(b));
  return lse_objective(f, c, g.basis(), g.scale(), g.blocks(), chol, batch, cfg);
}

// ---------------------------------------------------------------- training

inline std::vector<std::vector<double>> uniform_batch(std::size_t n, std::size_t d, Basis basis,
                                                      std::mt19937_64& rng) {
  const double extent = lifted_extent(basis);
  std::vector<std::vector<double>> pts(n, std::vector<double>(d));
  for (auto& p : pts)
    for (auto& v : p)
      v = extent * uniform01(rng);
  return pts;
}

inline KSoSModel initial_model(Basis basis, const KernelScale& scale, const ModelShape& shape,
                               double factor_init, std::mt19937_64& rng) {
  if (shape.rank < 1 || shape.block_size < 1 || shape.n_blocks < 1)
    throw std::invalid_argument("model shape entries must be positive");
  const double extent = lifted_extent(basis);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<ModelBlock> blocks(static_cast<std::size_t>(shape.n_blocks));
  for (auto& b : blocks) {
    b.anchors.resize(static_cast<Eigen::Index>(scale.dim()), shape.block_size);
    for (Eigen::Index j = 0; j < b.anchors.cols(); ++j)
      for (Eigen::Index l = 0; l < b.anchors.rows(); ++l)
        b.anchors(l, j) = extent * uniform01(rng);
    b.factor.resize(shape.rank, shape.block_size);
    for (Eigen::Index j = 0; j < b.factor.cols(); ++j)
      for (Eigen::Index r = 0; r < b.factor.rows(); ++r)
        b.factor(r, j) = factor_init * normal(rng);
  }
  return KSoSModel(basis, scale, std::move(blocks));
}

/// Largest |f - c - g| over a fixed point set.
inline double max_residual(const Target& f, double c, const KSoSModel& g,
                           const std::vector<std::vector<double>>& pts, int threads = 1) {
  std::vector<double> r(pts.size());
  parallel_for(pts.size(), threads,
               [&](std::size_t i) { r[i] = std::abs(eval_lifted(f, pts[i]) - c - g.eval_lifted(pts[i])); });
  double m = 0.0;
  for (double v : r)
    m = std::isfinite(v) ? std::max(m, v) : std::numeric_limits<double>::infinity();
  return m;
}

struct TrainRecord {
  int epoch = 0;
  double loss = 0.0;
  double lr = 0.0;
  double validation = 0.0;  // NaN when not evaluated this epoch
};

struct TrainResult {
  KSoSModel final_model;
  KSoSModel best_model;
  double c = 0.0;       // final offset (moves only with learn_c)
  double best_c = 0.0;  // offset belonging to best_model
  double best_validation = 0.0;
  double initial_validation = 0.0;
  int best_epoch = 0;
  int lr_halvings = 0;
  std::vector<TrainRecord> history;
};

inline double cosine_lr(const TrainConfig& cfg, int epoch) {
  if (cfg.epochs <= 1)
    return cfg.lr;
  const double t = static_cast<double>(epoch) / static_cast<double>(cfg.epochs - 1);
  return cfg.lr_final + 0.5 * (cfg.lr - cfg.lr_final) * (1.0 + std::cos(std::numbers::pi * t));
}

/// Trains from `init` (or a fresh random model when init is null).
inline TrainResult train_model(const Target& f, double c, const TrainConfig& cfg, const KSoSModel* init = nullptr) {
  if (!(cfg.tau > 0.0) || cfg.batch_size < 1 || cfg.epochs < 0 || !(cfg.lr > 0.0) || cfg.lr_final < 0.0 ||
      cfg.momentum < 0.0 || cfg.momentum >= 1.0)
    throw std::invalid_argument("train_model: invalid configuration");
  const Basis basis = basis_of(f);
  const std::size_t d = dim_of(f);
  std::mt19937_64 rng(cfg.seed);
  std::mt19937_64 val_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  const auto validation = uniform_batch(static_cast<std::size_t>(cfg.validation_size), d, basis, val_rng);

  KSoSModel model = init ? *init : initial_model(basis, KernelScale::uniform(d, cfg.scale), cfg.shape, cfg.factor_init, rng);
  if (model.dim() != d || model.basis() != basis)
    throw std::invalid_argument("train_model: initial model does not match the target");

  TrainResult res{model, model, c, c, 0.0, 0.0, 0, 0, {}};
  res.initial_validation = res.best_validation = max_residual(f, c, model, validation, cfg.threads);

  std::vector<ModelBlock> blocks = model.blocks();
  std::vector<BlockGrad> vel(blocks.size());
  for (std::size_t b = 0; b < blocks.size(); ++b)
    vel[b] = {Eigen::MatrixXd::Zero(blocks[b].anchors.rows(), blocks[b].anchors.cols()),
              Eigen::MatrixXd::Zero(blocks[b].factor.rows(), blocks[b].factor.cols())};
  double vel_c = 0.0;
  double cur_c = c;
  double lr_scale = 1.0;
  int failures = 0;
  KSoSModel last_good = model;
  double last_good_c = c;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cosine_lr(cfg, epoch) * lr_scale;
    const auto batch = uniform_batch(static_cast<std::size_t>(cfg.batch_size), d, basis, rng);
    LossResult lr_res;
    bool ok = true;
    try {
      lr_res = lse_loss(f, cur_c, model, batch, cfg);
      ok = std::isfinite(lr_res.loss);
    } catch (const std::runtime_error&) {
      ok = false;
    }
    if (ok) {
      for (std::size_t b = 0; b < blocks.size(); ++b) {
        vel[b].anchors = cfg.momentum * vel[b].anchors - lr * lr_res.grads[b].anchors;
        vel[b].factor = cfg.momentum * vel[b].factor - lr * lr_res.grads[b].factor;
        blocks[b].anchors += vel[b].anchors;
        blocks[b].factor += vel[b].factor;
      }
      if (cfg.learn_c) {
        vel_c = cfg.momentum * vel_c - lr * lr_res.grad_c;
        cur_c += vel_c;
      }
      try {
        model = model.with_blocks(blocks);
      } catch (const std::exception&) {
        ok = false;
      }
    }
    if (!ok) {
      if (++failures >= 10)
        throw std::runtime_error("train_model: loss not finite after 10 learning-rate halvings");
      lr_scale *= 0.5;
      ++res.lr_halvings;
      model = last_good;
      cur_c = last_good_c;
      blocks = model.blocks();
      for (auto& v : vel) {
        v.anchors.setZero();
        v.factor.setZero();
      }
      vel_c = 0.0;
      continue;
    }
    failures = 0;
    last_good = model;
    last_good_c = cur_c;

    TrainRecord rec{epoch, lr_res.loss, lr, std::numeric_limits<double>::quiet_NaN()};
    if ((epoch + 1) % std::max(1, cfg.validation_every) == 0 || epoch + 1 == cfg.epochs) {
      rec.validation = max_residual(f, cur_c, model, validation, cfg.threads);
      if (rec.validation < res.best_validation) {
        res.best_validation = rec.validation;
        res.best_model = model;
        res.best_c = cur_c;
        res.best_epoch = epoch + 1;
      }
    }
    res.history.push_back(rec);
  }
  res.final_model = model;
  res.c = cur_c;
  return res;
}

}  // namespace certopt

#endif  // CERTOPT_TRAINER_HPP_
