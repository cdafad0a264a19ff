#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "certopt/model_spectrum.hpp"
#include "certopt/oracle.hpp"
#include "support/reference.hpp"

using namespace certopt;

namespace {

KSoSModel single_anchor(Basis basis, double s, double anchor = 0.0) {
  ModelBlock b{Eigen::MatrixXd::Constant(1, 1, anchor), Eigen::MatrixXd::Ones(1, 1)};
  return KSoSModel(basis, KernelScale::uniform(1, s), {b});
}

double sup_abs(const std::vector<Complex>& v) {
  double m = 0.0;
  for (auto c : v)
    m = std::max(m, std::abs(c));
  return m;
}

}  // namespace

TEST(Model, SingleAnchor) {
  const double s = 1.5;
  const auto g = single_anchor(Basis::torus, s);
  for (double x : {0.0, 0.2, 0.5, 0.9}) {
    const double p[] = {x};
    // Relative 1e-9 covers the Cholesky jitter.
    const double want = std::exp(2 * s * (std::cos(2 * M_PI * x) - 1));
    EXPECT_NEAR(g(p), want, 1e-9 * want);
  }
  const double zero[] = {0.0};
  EXPECT_NEAR(g(zero), 1.0, 1e-9);
  EXPECT_EQ(g.n_parameters(), 2u);
}

TEST(Model, ZeroFactor) {
  std::mt19937_64 rng(1);
  auto g = ref::random_model(rng, Basis::torus, 2, 2, 4, 2, 2.0);
  auto blocks = g.blocks();
  for (auto& b : blocks)
    b.factor.setZero();
  const auto z = g.with_blocks(blocks);
  const double p[] = {0.3, 0.4};
  EXPECT_EQ(z(p), 0.0);
  EXPECT_EQ(std::abs(model_fourier_coeff(z, Frequency{1, -2})), 0.0);
  EXPECT_EQ(hs_norm_bound(z), 0.0);
  EXPECT_EQ(hs_reg_proxy(z), 0.0);
  EXPECT_EQ(std::abs(model_fourier_coeff_linear(z, Frequency{1, 0}, 8)), 0.0);
}

TEST(Model, RejectsBadShapes) {
  ModelBlock a{Eigen::MatrixXd::Zero(2, 3), Eigen::MatrixXd::Ones(1, 3)};
  ModelBlock b{Eigen::MatrixXd::Zero(2, 4), Eigen::MatrixXd::Ones(1, 4)};
  EXPECT_THROW(KSoSModel(Basis::torus, KernelScale::uniform(2, 1.0), {a, b}), std::invalid_argument);
  EXPECT_THROW(KernelScale({1.0, -1.0}), std::invalid_argument);
}

TEST(Model, MatchesDefinitionAndDenseForm) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Basis basis : {Basis::torus, Basis::chebychev})
    for (int trial = 0; trial < 5; ++trial) {
      const auto g = ref::random_model(rng, basis, 2, 2, 6, 3, 2.0);
      const auto dense = dense_model(g);
      for (int k = 0; k < 100; ++k) {
        std::vector<double> p{u(rng), u(rng)};
        const double v = g.eval_lifted(p);
        EXPECT_NEAR(v, dense.eval_lifted(p), 1e-10 * (1.0 + v));
        EXPECT_NEAR(v, ref::model_eval(g, p), 1e-8 * (1.0 + v));
      }
    }
}

TEST(Model, Nonnegative) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto g = ref::random_model(rng, Basis::torus, 3, 3, 8, 2, 1.0);
  for (int k = 0; k < 10000; ++k) {
    std::vector<double> p{u(rng), u(rng), u(rng)};
    EXPECT_GE(g.eval_lifted(p), 0.0);
  }
}

TEST(Model, ChebychevDomain) {
  const auto g = single_anchor(Basis::chebychev, 1.0, 0.1);
  const double bad[] = {1.2};
  EXPECT_THROW(g(bad), std::domain_error);
  // Evenness and periodicity of the lifted kernel in the anchor.
  const auto h = single_anchor(Basis::chebychev, 1.0, -0.1);
  const auto k = single_anchor(Basis::chebychev, 1.0, 1.1);
  for (double x : {-0.9, 0.0, 0.4}) {
    const double p[] = {x};
    EXPECT_NEAR(g(p), h(p), 1e-12);
    EXPECT_NEAR(g(p), k(p), 1e-12);
  }
}

TEST(Spectrum, SingleAnchorClosedForm) {
  const double s = 2.0;
  const auto g = single_anchor(Basis::torus, s);
  for (int w = -6; w <= 6; ++w) {
    const auto c = model_fourier_coeff(g, Frequency{w});
    const double want = static_cast<double>(std::exp(-2.0L * s) * ref::bessel_i(std::abs(w), 2.0L * s));
    EXPECT_NEAR(c.real(), want, 1e-10);
    EXPECT_NEAR(c.imag(), 0.0, 1e-12);
  }
  const auto h = single_anchor(Basis::chebychev, s);
  for (int w = 0; w <= 6; ++w) {
    const double want = (w == 0 ? 1.0 : 2.0) * static_cast<double>(std::exp(-2.0L * s) * ref::bessel_i(w, 2.0L * s));
    EXPECT_NEAR(model_cheb_coeff(h, Frequency{w}), want, 1e-10);
  }
}

TEST(Spectrum, TorusMatchesQuadrature) {
  std::mt19937_64 rng(4);
  for (std::size_t d : {1u, 2u})
    for (int trial = 0; trial < 3; ++trial) {
      const auto g = ref::random_model(rng, Basis::torus, d, 2, 5, 3, 2.0);
      const std::size_t n = d == 1 ? 4096 : 256;
      const FourierQuadrature q([&](std::span<const double> z) { return g.eval_lifted(z); }, d, n);
      const auto want = q.box(8);
      std::vector<Frequency> ws;
      for_each_in_box(d, 8, false, [&](const Frequency& w) { ws.push_back(w); });
      const auto got = ModelSpectrum(g, 8).coefficients(ws);
      const double scale = sup_abs(want);
      for (std::size_t k = 0; k < ws.size(); ++k)
        EXPECT_LE(std::abs(got[k] - want[k]), 1e-9 * scale) << ws[k].to_string();
    }
}

TEST(Spectrum, ChebychevMatchesQuadrature) {
  std::mt19937_64 rng(5);
  for (std::size_t d : {1u, 2u})
    for (int trial = 0; trial < 3; ++trial) {
      const auto g = ref::random_model(rng, Basis::chebychev, d, 2, 5, 3, 2.0);
      const std::size_t n = d == 1 ? 4096 : 256;
      const ChebQuadrature q([&](std::span<const double> x) { return g(x); }, d, n);
      const auto want = q.box(8);
      double scale = 0.0;
      for (double v : want)
        scale = std::max(scale, std::abs(v));
      std::size_t k = 0;
      for_each_in_box(d, 8, true, [&](const Frequency& w) {
        EXPECT_LE(std::abs(model_cheb_coeff(g, w) - want[k]), 1e-9 * scale) << w.to_string();
        ++k;
      });
    }
}

TEST(Spectrum, HermitianExactly) {
  std::mt19937_64 rng(6);
  const auto g = ref::random_model(rng, Basis::torus, 3, 2, 4, 2, 1.0);
  const ModelSpectrum spec(g, 6);
  for_each_in_box(3, 8, false, [&](const Frequency& w) {
    const Complex a = spec.coefficient(w), b = spec.coefficient(-w);
    EXPECT_EQ(a.real(), b.real());
    EXPECT_EQ(a.imag(), -b.imag());
  });
}

TEST(Spectrum, TableAndDirectAgree) {
  std::mt19937_64 rng(7);
  const auto g = ref::random_model(rng, Basis::torus, 2, 1, 5, 2, 1.0);
  const ModelSpectrum wide(g, 12), narrow(g, 0);
  for_each_in_box(2, 10, false, [&](const Frequency& w) {
    EXPECT_NEAR(std::abs(wide.coefficient(w) - narrow.coefficient(w)), 0.0, 1e-15);
  });
}

TEST(Spectrum, SynthesisConverges) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Basis basis : {Basis::torus, Basis::chebychev}) {
    const auto g = ref::random_model(rng, basis, 2, 1, 4, 2, 2.0);
    const ModelSpectrum spec(g, 20);
    const bool cheb = basis == Basis::chebychev;
    std::vector<Frequency> ws;
    for_each_in_box(2, 20, cheb, [&](const Frequency& w) { ws.push_back(w); });
    const auto c = spec.coefficients(ws);
    for (int k = 0; k < 20; ++k) {
      std::vector<double> p{u(rng), u(rng)};
      double acc = 0.0;
      for (std::size_t i = 0; i < ws.size(); ++i) {
        if (cheb)
          acc += c[i].real() * std::cos(2 * M_PI * ws[i][0] * p[0]) * std::cos(2 * M_PI * ws[i][1] * p[1]);
        else
          acc += (c[i] * std::polar(1.0, 2 * M_PI * (ws[i][0] * p[0] + ws[i][1] * p[1]))).real();
      }
      EXPECT_NEAR(acc, g.eval_lifted(p), 1e-8);
    }
  }
}

TEST(Spectrum, BlockLinearity) {
  // A two-block model's spectrum is the sum of its blocks' spectra.
  std::mt19937_64 rng(9);
  const auto g = ref::random_model(rng, Basis::torus, 2, 2, 4, 2, 1.0);
  const KSoSModel a(Basis::torus, g.scale(), {g.block(0)}), b(Basis::torus, g.scale(), {g.block(1)});
  for_each_in_box(2, 5, false, [&](const Frequency& w) {
    EXPECT_NEAR(std::abs(model_fourier_coeff(g, w) - model_fourier_coeff(a, w) - model_fourier_coeff(b, w)), 0.0,
                1e-14);
  });
}

namespace {

double truncated_hilbert_norm(const KSoSModel& g, int box) {
  const bool cheb = g.basis() == Basis::chebychev;
  const ModelSpectrum spec(g, box);
  double acc = 0.0;
  for_each_in_box(g.dim(), box, cheb, [&](const Frequency& w) {
    // Independent weight: prod_l (2 - 1_{w=0} if folded) e^{-2s} I_w(2s).
    ref::LD l = 1.0L;
    for (std::size_t k = 0; k < g.dim(); ++k) {
      const ref::LD s2 = 2.0L * g.scale()[k];
      l *= std::exp(-s2) * ref::bessel_i(std::abs(w[k]), s2) * (cheb && w[k] != 0 ? 2.0L : 1.0L);
    }
    acc += std::norm(spec.coefficient(w)) / static_cast<double>(l);
  });
  return std::sqrt(acc);
}

}  // namespace

TEST(NormBound, Trivial) {
  EXPECT_NEAR(hs_norm_bound(single_anchor(Basis::torus, 2.0)), 1.0, 1e-9);
}

TEST(NormBound, DominatesTruncatedNorm) {
  std::mt19937_64 rng(10);
  for (Basis basis : {Basis::torus, Basis::chebychev})
    for (int trial = 0; trial < 10; ++trial) {
      const auto g = ref::random_model(rng, basis, 2, 2, 4, 2, 2.0);
      EXPECT_LE(truncated_hilbert_norm(g, 20), hs_norm_bound(g) + 1e-8);
    }
}

TEST(RegProxy, Examples) {
  ModelBlock b{Eigen::MatrixXd::Zero(1, 2), Eigen::MatrixXd::Identity(2, 2)};
  b.anchors(0, 1) = 0.5;
  const KSoSModel g(Basis::torus, KernelScale::uniform(1, 1.0), {b});
  EXPECT_NEAR(hs_reg_proxy(g), 2.0, 1e-14);

  // Both blocks share three far-apart anchors at large scale, so every
  // Gram and cross-Gram matrix is the identity up to e^{-300}.
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;
  std::vector<ModelBlock> blocks(2);
  for (int i = 0; i < 2; ++i) {
    blocks[i].anchors.resize(1, 3);
    for (int j = 0; j < 3; ++j)
      blocks[i].anchors(0, j) = j / 3.0;
    blocks[i].factor = Eigen::MatrixXd::NullaryExpr(2, 3, [&](Eigen::Index, Eigen::Index) { return normal(rng); });
  }
  const KSoSModel far(Basis::torus, KernelScale::uniform(1, 200.0), blocks);
  EXPECT_NEAR(hs_reg_proxy(far), std::pow(hs_norm_bound(far), 2), 1e-6 * hs_reg_proxy(far));

  // Direct sum of ||R_j R_k^T||_F^2.
  double direct = 0.0;
  for (const auto& bj : blocks)
    for (const auto& bk : blocks)
      direct += (bj.factor * bk.factor.transpose()).squaredNorm();
  EXPECT_NEAR(hs_reg_proxy(far), direct, 1e-10 * direct);
}

TEST(HyperbolicCross, Membership) {
  const auto hc = hyperbolic_cross(2, 4);
  for (const auto& n : hc)
    EXPECT_LE(std::max(1, std::abs(n[0])) * std::max(1, std::abs(n[1])), 4);
  std::size_t count = 0;
  for_each_in_box(2, 4, false, [&](const Frequency& n) {
    count += std::max(1, std::abs(n[0])) * std::max(1, std::abs(n[1])) <= 4;
  });
  EXPECT_EQ(hc.size(), count);
}

TEST(LinearCoefficients, SingleAnchorConverges) {
  const auto g = single_anchor(Basis::torus, 2.0, 0.3);
  for (int w = 0; w <= 4; ++w)
    EXPECT_NEAR(std::abs(model_fourier_coeff_linear(g, Frequency{w}, 64) - model_fourier_coeff(g, Frequency{w})), 0.0,
                1e-6);
}

TEST(LinearCoefficients, RandomModelsConverge) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 3; ++trial) {
    const auto g = ref::random_model(rng, Basis::torus, 2, 1, 4, 2, 2.0);
    double scale = 0.0;
    for_each_in_box(2, 4, false, [&](const Frequency& w) { scale = std::max(scale, std::abs(model_fourier_coeff(g, w))); });
    double err_lo = 0.0, err_hi = 0.0;
    for_each_in_box(2, 4, false, [&](const Frequency& w) {
      const Complex exact = model_fourier_coeff(g, w);
      err_lo = std::max(err_lo, std::abs(model_fourier_coeff_linear(g, w, 4) - exact));
      err_hi = std::max(err_hi, std::abs(model_fourier_coeff_linear(g, w, 64) - exact));
    });
    EXPECT_LT(err_hi, err_lo);
    EXPECT_LE(err_hi, 1e-4 * scale);
  }
}
