#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "certopt/bessel.hpp"
#include "certopt/polynomial.hpp"
#include "certopt/spectrum.hpp"
#include "support/reference.hpp"

using namespace certopt;

TEST(Bessel, Trivial) {
  EXPECT_EQ(bessel_i(0, 0.0), 1.0);
  EXPECT_EQ(bessel_i(3, 0.0), 0.0);
}

TEST(Bessel, MatchesLongSeries) {
  // I_0(2) = 2.2795853023360673
  EXPECT_NEAR(bessel_i(0, 2.0), static_cast<double>(ref::bessel_i(0, 2.0L)), 1e-14);
  EXPECT_NEAR(bessel_i(0, 2.0), 2.2795853023360673, 1e-14);
  for (int n = 0; n <= 20; ++n)
    for (double x : {0.1, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 25.0}) {
      const double want = static_cast<double>(ref::bessel_i(n, x));
      if (want < 1e-290)
        continue;
      EXPECT_NEAR(bessel_i(n, x) / want, 1.0, 1e-12) << "n=" << n << " x=" << x;
    }
}

TEST(Bessel, NegativeArgumentParity) {
  EXPECT_DOUBLE_EQ(bessel_i(2, -1.5), bessel_i(2, 1.5));
  EXPECT_DOUBLE_EQ(bessel_i(3, -1.5), -bessel_i(3, 1.5));
  EXPECT_THROW(bessel_i(-1, 1.0), std::invalid_argument);
  EXPECT_THROW(bessel_i(0, NAN), std::invalid_argument);
}

TEST(Bessel, MonotoneInArgument) {
  for (int n = 0; n < 6; ++n) {
    double prev = bessel_i(n, 0.0);
    for (double x = 0.25; x < 20.0; x += 0.25) {
      const double v = bessel_i(n, x);
      EXPECT_GE(v, prev);
      prev = v;
    }
  }
}

TEST(Bessel, KernelNormalization) {
  for (double s : {0.25, 1.0, 2.0, 4.0, 8.0}) {
    const int omega = bessel_truncation_order(s / 2.0);  // table for argument s
    double sum = bessel_i(0, s);
    for (int w = 1; w <= omega; ++w)
      sum += 2.0 * bessel_i(w, s);
    EXPECT_NEAR(std::exp(-s) * sum, 1.0, 1e-10) << s;
  }
}

TEST(BesselCos, ParityAndSymmetry) {
  EXPECT_EQ(bessel_cos_fourier_coeff(1, 0, 2.0), 0.0);
  EXPECT_EQ(bessel_cos_fourier_coeff(2, 3, 2.0), 0.0);
  EXPECT_EQ(bessel_cos_fourier_coeff(2, 4, 2.0), bessel_cos_fourier_coeff(2, -4, 2.0));
}

TEST(BesselCos, ZeroZeroSeries) {
  // q_{0,0} = e^{-2s} sum_p (s/2)^{2p} binom(2p,p) / (p!)^2 at s = 2.
  ref::LD sum = 0.0L;
  for (int p = 0; p < 60; ++p) {
    const ref::LD f = std::tgamma(ref::LD(p + 1));
    sum += std::tgamma(ref::LD(2 * p + 1)) / (f * f) / (f * f);
  }
  EXPECT_NEAR(bessel_cos_fourier_coeff(0, 0, 2.0), static_cast<double>(std::exp(-4.0L) * sum), 1e-15);
}

TEST(BesselCos, Synthesis) {
  const double s = 2.0;
  for (int w = 0; w <= 4; ++w)
    for (double z : {0.0, 0.1, 0.3, 0.77}) {
      double acc = 0.0;
      for (int n = -40; n <= 40; ++n)
        acc += bessel_cos_fourier_coeff(w, n, s) * std::cos(2.0 * M_PI * n * z);
      const double want = static_cast<double>(std::exp(-2.0L * s) * ref::bessel_i(w, 2.0L * s * std::cos(2.0L * ref::kPi * z)));
      EXPECT_NEAR(acc, want, 1e-12) << "w=" << w << " z=" << z;
    }
}

TEST(TrigPoly, Cosine) {
  const TrigPoly f(1, {{Frequency{1}, 0.5}, {Frequency{-1}, 0.5}});
  const double z0[] = {0.0}, z1[] = {0.5};
  EXPECT_DOUBLE_EQ(f(z0), 1.0);
  EXPECT_NEAR(f(z1), -1.0, 1e-15);
}

TEST(TrigPoly, RejectsNonHermitian) {
  EXPECT_THROW(TrigPoly(1, {{Frequency{1}, 1.0}}), std::invalid_argument);
  EXPECT_THROW(TrigPoly::from_half_spectrum(1, {{Frequency{1}, 1.0}, {Frequency{-1}, 1.0}}),
               std::invalid_argument);
}

TEST(TrigPoly, MatchesExtendedPrecision) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = ref::random_trig(rng, 2, 4, 5);
    for (int k = 0; k < 10; ++k) {
      std::vector<double> z{u(rng), u(rng)};
      EXPECT_NEAR(f(z), static_cast<double>(ref::trig_eval(f, z)), 1e-12);
    }
  }
}

TEST(TrigPoly, GradientMatchesDifferences) {
  std::mt19937_64 rng(8);
  const auto f = ref::random_trig(rng, 2, 3, 6);
  std::vector<double> z{0.3, 0.6}, g(2);
  f.value_and_gradient(z, g);
  for (std::size_t l = 0; l < 2; ++l) {
    auto zp = z, zm = z;
    zp[l] += 1e-6;
    zm[l] -= 1e-6;
    EXPECT_NEAR(g[l], (f(zp) - f(zm)) / 2e-6, 1e-6 * (1.0 + std::abs(g[l])));
  }
}

TEST(ChebPoly, Trivial) {
  const ChebPoly c(1, {{Frequency{0}, 3.5}});
  const ChebPoly h2(1, {{Frequency{2}, 1.0}});
  for (double x : {-1.0, -0.3, 0.0, 0.9}) {
    const double p[] = {x};
    EXPECT_DOUBLE_EQ(c(p), 3.5);
  }
  const double zero[] = {0.0};
  EXPECT_DOUBLE_EQ(h2(zero), -1.0);
  const double out[] = {1.5};
  EXPECT_THROW(h2(out), std::domain_error);
  EXPECT_THROW(ChebPoly(1, {{Frequency{-1}, 1.0}}), std::invalid_argument);
}

TEST(Lift, Examples) {
  const auto f = lift_cheb_to_trig(ChebPoly(1, {{Frequency{1}, 1.0}}));
  EXPECT_EQ(f.size(), 2u);
  EXPECT_DOUBLE_EQ(f.coeff(Frequency{1}).real(), 0.5);
  EXPECT_DOUBLE_EQ(f.coeff(Frequency{-1}).real(), 0.5);
  const auto c = lift_cheb_to_trig(ChebPoly(2, {{Frequency{0, 0}, 2.0}}));
  EXPECT_EQ(c.size(), 1u);
  EXPECT_DOUBLE_EQ(c.coeff(Frequency{0, 0}).real(), 2.0);
  const auto p = lift_cheb_to_trig(ChebPoly(2, {{Frequency{1, 1}, 1.0}}));
  EXPECT_EQ(p.size(), 4u);
  for (int a : {-1, 1})
    for (int b : {-1, 1})
      EXPECT_DOUBLE_EQ(p.coeff(Frequency{a, b}).real(), 0.25);
}

TEST(Lift, AgreesWithRecurrence) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> deg(0, 6);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ChebPoly::Term> terms;
    for (int t = 0; t < 8; ++t)
      terms.push_back({Frequency{deg(rng), deg(rng), deg(rng)}, normal(rng)});
    const ChebPoly h(3, terms);
    const TrigPoly f = lift_cheb_to_trig(h);
    for (int k = 0; k < 10; ++k) {
      std::vector<double> z{u(rng), u(rng), u(rng)}, x(3), g(3);
      for (int l = 0; l < 3; ++l)
        x[l] = std::cos(2.0 * M_PI * z[l]);
      EXPECT_NEAR(f(z), h(x), 1e-10);
      EXPECT_NEAR(h.lifted_value_and_gradient(z, g), h(x), 1e-10);
    }
  }
}

TEST(Spectrum, TablesNormalized) {
  for (Basis b : {Basis::torus, Basis::chebychev}) {
    const BesselSpectrumDistribution dist({0.5, 1.0, 2.0, 3.0}, b);
    for (std::size_t l = 0; l < dist.dim(); ++l)
      EXPECT_NEAR(dist.dim_total(l), 1.0, 1e-12);
  }
}

TEST(Spectrum, TruncationBelowPrecision) {
  for (double s : {0.5, 1.0, 2.0, 5.0}) {
    const int omega = bessel_truncation_order(s);
    EXPECT_GE(bessel_i(omega, 2 * s), 0x1.0p-53 * bessel_i(0, 2 * s));
    EXPECT_LT(bessel_i(omega + 1, 2 * s), 0x1.0p-53 * bessel_i(0, 2 * s));
  }
}

TEST(Spectrum, SingleDraw) {
  const BesselSpectrumDistribution dist({2.0, 2.0}, Basis::torus);
  const auto s = dist.sample(1, 3);
  ASSERT_EQ(s.unique.size(), 1u);
  EXPECT_EQ(s.multiplicity[0], 1u);
  EXPECT_THROW(dist.sample(0, 3), std::invalid_argument);
}

TEST(Spectrum, Deterministic) {
  const BesselSpectrumDistribution dist({1.0, 2.0, 0.5}, Basis::torus);
  const auto a = dist.sample(20000, 42), b = dist.sample(20000, 42);
  EXPECT_EQ(a.unique, b.unique);
  EXPECT_EQ(a.multiplicity, b.multiplicity);
  EXPECT_EQ(a.draws, b.draws);
  std::uint64_t total = 0;
  for (auto m : a.multiplicity)
    total += m;
  EXPECT_EQ(total, 20000u);
}

TEST(Spectrum, ZeroFrequencyRate) {
  const BesselSpectrumDistribution dist({2.0}, Basis::torus);
  const std::size_t n = 1000000;
  const auto s = dist.sample(n, 11);
  // Renormalized exact weight of w = 0.
  const int omega = bessel_truncation_order(2.0);
  ref::LD total = ref::bessel_i(0, 4.0L);
  for (int w = 1; w <= omega; ++w)
    total += 2.0L * ref::bessel_i(w, 4.0L);
  const double p0 = static_cast<double>(ref::bessel_i(0, 4.0L) / total);
  double hits = 0.0;
  for (std::size_t k = 0; k < s.unique.size(); ++k)
    if (s.unique[k].is_zero())
      hits = static_cast<double>(s.multiplicity[k]);
  const double se = std::sqrt(p0 * (1.0 - p0) / n);
  EXPECT_NEAR(hits / n, p0, 3.0 * se);
}

TEST(Spectrum, ChiSquareGoodnessOfFit) {
  for (Basis b : {Basis::torus, Basis::chebychev}) {
    const BesselSpectrumDistribution dist({0.75}, b);
    const std::size_t n = 1000000;
    const auto s = dist.sample(n, 5);
    std::map<int, double> counts;
    for (std::size_t k = 0; k < s.unique.size(); ++k)
      counts[s.unique[k][0]] = static_cast<double>(s.multiplicity[k]);
    // Pool cells with expected count below 5 into one tail cell.
    double chi2 = 0.0, tail_exp = 0.0, tail_obs = 0.0;
    int cells = 0;
    const int omega = dist.truncation(0);
    for (int w = (b == Basis::torus ? -omega : 0); w <= omega; ++w) {
      const double e = n * dist.weight(Frequency{w});
      const double o = counts.count(w) ? counts[w] : 0.0;
      if (e < 5.0) {
        tail_exp += e;
        tail_obs += o;
        continue;
      }
      chi2 += (o - e) * (o - e) / e;
      ++cells;
    }
    if (tail_exp > 0.0) {
      chi2 += (tail_obs - tail_exp) * (tail_obs - tail_exp) / std::max(tail_exp, 1e-300);
      ++cells;
    }
    // Upper 1e-3 quantile of chi-square with k = cells - 1 degrees of freedom,
    // Wilson-Hilferty approximation.
    const double k = cells - 1;
    const double zq = 3.090232;
    const double crit = k * std::pow(1.0 - 2.0 / (9.0 * k) + zq * std::sqrt(2.0 / (9.0 * k)), 3);
    EXPECT_LT(chi2, crit) << to_string(b) << " cells=" << cells;
  }
}

TEST(Spectrum, FoldedUniqueCount) {
  // Folded distribution on N^5 at s = 2: a million draws hit ~10^4 distinct frequencies.
  const BesselSpectrumDistribution dist(std::vector<double>(5, 2.0), Basis::chebychev);
  const auto s = dist.sample(1000000, 1);
  EXPECT_GT(s.unique.size(), 3162u);
  EXPECT_LT(s.unique.size(), 31623u);
  for (const auto& w : s.unique)
    EXPECT_TRUE(w.is_nonnegative());
}
