#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "certopt/certifier.hpp"
#include "certopt/oracle.hpp"
#include "support/reference.hpp"

using namespace certopt;

namespace {

KSoSModel zero_model(Basis basis, std::size_t d, double s = 1.0) {
  ModelBlock b{Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(d), 1, 0.1), Eigen::MatrixXd::Zero(1, 1)};
  return KSoSModel(basis, KernelScale::uniform(d, s), {b});
}

KSoSModel unit_model(std::size_t d, double s = 1.0) {
  ModelBlock b{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), 1), Eigen::MatrixXd::Ones(1, 1)};
  return KSoSModel(Basis::torus, KernelScale::uniform(d, s), {b});
}

TrigPoly cosine() { return TrigPoly(1, {{Frequency{1}, 0.5}, {Frequency{-1}, 0.5}}); }

/// sum_{|w|_inf <= W} |u_w|^2 / lambda_w with lambda from the long-double series.
double truncated_residual_norm2(const Target& f, double c, const KSoSModel& g, int box) {
  const bool cheb = g.basis() == Basis::chebychev;
  const ModelSpectrum spec(g, box);
  double acc = 0.0;
  for_each_in_box(g.dim(), box, cheb, [&](const Frequency& w) {
    ref::LD lam = 1.0L;
    for (std::size_t l = 0; l < g.dim(); ++l) {
      const ref::LD s2 = 2.0L * g.scale()[l];
      lam *= std::exp(-s2) * ref::bessel_i(std::abs(w[l]), s2) * (cheb && w[l] != 0 ? 2.0L : 1.0L);
    }
    Complex u = target_coeff(f, w) - spec.coefficient(w);
    if (w.is_zero())
      u -= c;
    acc += std::norm(u) / static_cast<double>(lam);
  });
  return acc;
}

}  // namespace

TEST(Residual, ConstantTarget) {
  const auto g = zero_model(Basis::torus, 1);
  const Target f = TrigPoly(1, {{Frequency{0}, 5.0}});
  const auto dist = certificate_distribution(g);
  const auto s = residual_samples(f, 0.0, g, dist, 1000, 1);
  const double lam0 = dist.weight(Frequency{0});
  for (const auto& e : s.unique) {
    if (e.freq.is_zero())
      EXPECT_DOUBLE_EQ(e.ratio, 5.0 / lam0);
    else
      EXPECT_EQ(e.ratio, 0.0);
  }
  const auto z = residual_samples(TrigPoly(1, {}), 0.0, g, dist, 1000, 1);
  for (const auto& e : z.unique)
    EXPECT_EQ(e.ratio, 0.0);
}

TEST(Estimators, Mean) {
  ResidualSamples s;
  s.unique = {{Frequency{0}, 1, 1, 1, 1}, {Frequency{1}, 1, 2, 2, 1}, {Frequency{2}, 1, 3, 3, 1}};
  s.draws = {0, 1, 2};
  EXPECT_DOUBLE_EQ(mean_estimate(s), 2.0);

  std::mt19937_64 rng(4);
  const Target f = ref::random_trig(rng, 1, 3, 4);
  const auto g = ref::random_model(rng, Basis::torus, 1, 1, 3, 1, 1.0);
  const auto r = residual_samples(f, 0.2, g, certificate_distribution(g), 5000, 9);
  const auto raw = raw_ratios(r);
  double direct = 0.0;
  for (double v : raw)
    direct += v;
  EXPECT_NEAR(mean_estimate(r), direct / raw.size(), 1e-12 * std::abs(direct / raw.size()));
}

TEST(Estimators, MedianOfMeans) {
  const std::vector<double> v{1, 2, 3, 4, 5, 6};
  EXPECT_DOUBLE_EQ(mom_estimate(v, 3), 3.5);
  const std::vector<double> same(100, 0.7);
  EXPECT_DOUBLE_EQ(mom_estimate(same, 7), 0.7);
  EXPECT_EQ(mom_blocks(std::exp(-4.0)), 32u);
  // Even K: mean of the two middle block means; the remainder is dropped.
  const std::vector<double> w{4, 1, 3, 2, 100};
  EXPECT_DOUBLE_EQ(mom_estimate(w, 4), 2.5);
  EXPECT_THROW(mom_estimate(v, 7), std::invalid_argument);
  try {
    mom_estimate_delta(v, std::exp(-4.0));
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "insufficient samples for requested confidence");
  }
}

TEST(NormBound, Trivial) {
  const auto g0 = zero_model(Basis::torus, 1);
  const auto dist0 = certificate_distribution(g0);
  EXPECT_NEAR(residual_hilbert_norm_bound(TrigPoly(1, {{Frequency{0}, 2.5}}), 2.5, g0, dist0).value, 0.0, 1e-15);
  const auto g1 = unit_model(1);
  EXPECT_NEAR(residual_hilbert_norm_bound(TrigPoly(1, {}), 0.0, g1, certificate_distribution(g1)).value, 1.0, 1e-9);
}

TEST(NormBound, OutOfReach) {
  const auto g = unit_model(1);
  const Target f = TrigPoly(1, {{Frequency{40}, 0.5}, {Frequency{-40}, 0.5}});
  try {
    residual_hilbert_norm_bound(f, 0.0, g, certificate_distribution(g));
    FAIL();
  } catch (const SpectrumOutOfReach& e) {
    EXPECT_STREQ(e.what(), "target spectrum outside kernel reach; increase s");
  }
}

TEST(NormBound, DominatesTruncatedNorm) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 1 + trial % 2;
    const auto g = ref::random_model(rng, Basis::torus, d, 1, 3, 2, 1.0, 0.3);
    const Target f = ref::random_trig(rng, d, 3, 5);
    const double c = 0.3;
    const auto b = residual_hilbert_norm_bound(f, c, g, certificate_distribution(g));
    EXPECT_GE(b.value * b.value * (1 + 1e-9), truncated_residual_norm2(f, c, g, 20));
  }
  for (int trial = 0; trial < 10; ++trial) {
    const auto g = ref::random_model(rng, Basis::chebychev, 2, 1, 3, 2, 1.0, 0.3);
    std::vector<ChebPoly::Term> terms;
    std::uniform_int_distribution<int> deg(0, 3);
    std::normal_distribution<double> normal;
    for (int t = 0; t < 5; ++t)
      terms.push_back({Frequency{deg(rng), deg(rng)}, normal(rng)});
    const Target f = ChebPoly(2, terms);
    const auto b = residual_hilbert_norm_bound(f, -0.4, g, certificate_distribution(g));
    EXPECT_GE(b.value * b.value * (1 + 1e-9), truncated_residual_norm2(f, -0.4, g, 20));
  }
}

TEST(NormBound, KernelMixture) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> normal;
  for (double mix_scale : {2.0, 1.0}) {  // reproducing and general case at model s = 1
    for (int trial = 0; trial < 5; ++trial) {
      Eigen::MatrixXd X(3, 2);
      Eigen::VectorXd a(3);
      for (int i = 0; i < 3; ++i) {
        X(i, 0) = u(rng);
        X(i, 1) = u(rng);
        a(i) = normal(rng);
      }
      const Target f = KernelMixture(KernelScale::uniform(2, mix_scale), X, a);
      const auto g = ref::random_model(rng, Basis::torus, 2, 1, 3, 2, 1.0, 0.3);
      const auto b = residual_hilbert_norm_bound(f, 0.1, g, certificate_distribution(g));
      EXPECT_GE(b.value * b.value * (1 + 1e-9), truncated_residual_norm2(f, 0.1, g, 20));
      if (mix_scale == 2.0) {
        EXPECT_TRUE(b.exact);
      }
    }
  }
  const Target wide = KernelMixture(KernelScale::uniform(1, 3.0), Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Ones(1));
  const auto g = unit_model(1);
  EXPECT_THROW(residual_hilbert_norm_bound(wide, 0.0, g, certificate_distribution(g)), SpectrumOutOfReach);
}

TEST(Certify, ConstantTargetGivesZero) {
  const auto g = zero_model(Basis::torus, 2);
  const Target f = TrigPoly(2, {{Frequency{0, 0}, 1.25}});
  for (auto est : {Estimator::mom, Estimator::chebyshev, Estimator::both}) {
    CertifyOptions o;
    o.estimator = est;
    o.n_samples = 10000;
    const auto cert = certify(f, 1.25, g, o);
    EXPECT_EQ(cert.epsilon, 0.0);
    EXPECT_EQ(cert.lower_bound(), 1.25);
  }
}

TEST(Certify, DeterministicAndOrdered) {
  std::mt19937_64 rng(7);
  const auto g = ref::random_model(rng, Basis::torus, 2, 2, 4, 2, 1.0, 0.2);
  const Target f = ref::random_trig(rng, 2, 3, 6);
  const auto a = certify_mom(f, -1.0, g, 20000, std::exp(-4.0), 17);
  const auto b = certify_mom(f, -1.0, g, 20000, std::exp(-4.0), 17);
  EXPECT_EQ(a.epsilon, b.epsilon);
  EXPECT_EQ(a.estimate, b.estimate);
  EXPECT_GE(a.epsilon, 0.0);
  EXPECT_LE(a.lower_bound(), a.c);
  CertifyOptions o;
  o.n_samples = 20000;
  o.seed = 17;
  o.threads = 3;
  EXPECT_EQ(certify(f, -1.0, g, o).epsilon, a.epsilon);
}

TEST(Certify, DeviationScalesAsInverseRoot) {
  std::mt19937_64 rng(8);
  const auto g = ref::random_model(rng, Basis::torus, 1, 1, 4, 2, 1.0, 0.2);
  const Target f = ref::random_trig(rng, 1, 3, 4);
  const auto a = certify_mom(f, 0.0, g, 10000, std::exp(-4.0), 3);
  const auto b = certify_mom(f, 0.0, g, 20000, std::exp(-4.0), 3);
  EXPECT_NEAR(a.deviation / b.deviation, std::sqrt(2.0), 1e-12);
  const auto c = certify_chebyshev(f, 0.0, g, 10000, 0.05, 3);
  const auto d = certify_chebyshev(f, 0.0, g, 40000, 0.05, 3);
  EXPECT_NEAR(c.deviation / d.deviation, 2.0, 1e-12);
}

TEST(Certify, UnionBoundAndModelNormVariant) {
  std::mt19937_64 rng(9);
  const auto g = ref::random_model(rng, Basis::torus, 1, 1, 4, 2, 1.0, 0.2);
  const Target f = ref::random_trig(rng, 1, 3, 4);
  CertifyOptions o;
  o.n_samples = 50000;
  o.estimator = Estimator::both;
  const auto plain = certify(f, 0.0, g, o);
  o.union_bound = true;
  const auto split = certify(f, 0.0, g, o);
  EXPECT_GE(split.epsilon, plain.epsilon);
  EXPECT_EQ(split.delta, o.delta);
  o.union_bound = false;
  o.model_norm_only = true;
  EXPECT_NEAR(certify(f, 0.0, g, o).norm_bound, hs_norm_bound(g), 1e-15);
}

TEST(Certify, MeanIsUnbiased) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 5; ++trial) {
    const auto g = ref::random_model(rng, Basis::torus, 1, 1, 3, 2, 1.0, 0.3);
    const Target f = ref::random_trig(rng, 1, 3, 3);
    const double truth = f_norm_truncated(f, 0.2, g, 20);
    const auto s = residual_samples(f, 0.2, g, certificate_distribution(g), 200000, 100 + trial);
    const double b = residual_hilbert_norm_bound(f, 0.2, g, certificate_distribution(g)).value;
    EXPECT_NEAR(mean_estimate(s), truth, 3.0 * b / std::sqrt(200000.0) + 1e-12);
    // Empirical variance stays below B^2.
    const auto raw = raw_ratios(s);
    const double m = mean_estimate(s);
    double var = 0.0;
    for (double v : raw)
      var += (v - m) * (v - m);
    var /= raw.size() - 1;
    EXPECT_LE(var, b * b);
  }
}

TEST(FNorm, Examples) {
  const auto g0 = zero_model(Basis::torus, 1);
  EXPECT_EQ(f_norm_truncated(TrigPoly(1, {}), 0.0, g0, 10), 0.0);
  EXPECT_NEAR(f_norm_truncated(cosine(), 0.0, g0, 1), 1.0, 1e-15);
  EXPECT_THROW(f_norm_truncated(cosine(), 0.0, zero_model(Basis::torus, 4), 60), std::invalid_argument);
}

TEST(FNorm, BoundsSupNorm) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const auto g = ref::random_model(rng, Basis::torus, 2, 1, 3, 2, 1.0, 0.3);
    const Target f = ref::random_trig(rng, 2, 2, 5);
    const double fn = f_norm_truncated(f, 0.5, g, 20);
    double sup = 0.0;
    for (int i = 0; i < 100; ++i)
      for (int j = 0; j < 100; ++j) {
        const double p[] = {i / 100.0, j / 100.0};
        sup = std::max(sup, std::abs(eval_lifted(f, p) - 0.5 - g.eval_lifted(p)));
      }
    EXPECT_GE(fn, sup);
  }
}
