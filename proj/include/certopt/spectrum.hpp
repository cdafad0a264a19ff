// Truncated Bessel spectrum distribution
//
//   lambda_w = prod_l e^{-2 s_l} I_{|w_l|}(2 s_l)
//
// on Z^d, i.e. the Fourier spectrum of the squared Bessel kernel q_{2s}, and
// its folded counterpart on N^d used for Chebychev spectra, where each
// nonzero component carries both signs: prod_l (2 - 1_{w_l=0}) e^{-2s_l} I_{w_l}(2s_l).

#ifndef CERTOPT_SPECTRUM_HPP_
#define CERTOPT_SPECTRUM_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "certopt/bessel.hpp"
#include "certopt/frequency.hpp"

namespace certopt {

enum class Basis { torus, chebychev };

inline const char* to_string(Basis b) { return b == Basis::torus ? "torus" : "chebychev"; }

/// Deduplicated sample of frequencies. draws[i] is the index into unique of
/// the i-th raw draw, kept for estimators that need draw order.
struct FrequencySample {
  std::vector<Frequency> unique;
  std::vector<std::uint64_t> multiplicity;
  std::vector<std::uint32_t> draws;

  std::size_t n_draws() const { return draws.size(); }
};

/// Uniform double in [0,1) from the top 53 bits of a 64-bit generator.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Per-dimension truncation order: largest w kept, with every dropped
/// weight below 2^-53 of the peak e^{-2s} I_0(2s).
inline int bessel_truncation_order(double s) {
  const double peak = bessel_i(0, 2.0 * s);
  int w = 1;
  while (bessel_i(w, 2.0 * s) >= 0x1.0p-53 * peak)
    ++w;
  return w - 1;
}

class BesselSpectrumDistribution {
 public:
  BesselSpectrumDistribution(std::vector<double> scale, Basis basis)
      : scale_(std::move(scale)), basis_(basis) {
    if (scale_.empty())
      throw std::invalid_argument("BesselSpectrumDistribution: empty scale");
    const std::size_t d = scale_.size();
    order_.resize(d);
    prob_.resize(d);
    cdf_.resize(d);
    for (std::size_t l = 0; l < d; ++l) {
      const double s = scale_[l];
      if (!(s > 0.0) || !std::isfinite(s))
        throw std::invalid_argument("BesselSpectrumDistribution: scale must be positive");
      const int omega = bessel_truncation_order(s);
      order_[l] = omega;
      // prob_[l][k] is the probability of one signed value with |w| = k
      // (torus) or of k itself (chebychev).
      std::vector<double> w(static_cast<std::size_t>(omega) + 1);
      double total = 0.0;
      for (int k = 0; k <= omega; ++k) {
        w[k] = std::exp(-2.0 * s) * bessel_i(k, 2.0 * s);
        total += (k == 0 ? 1.0 : 2.0) * w[k];
      }
      for (int k = 0; k <= omega; ++k) {
        w[k] /= total;
        if (basis_ == Basis::chebychev && k > 0)
          w[k] *= 2.0;
      }
      prob_[l] = w;
      // Cumulative table over the values in sampling order:
      // torus -omega..omega, chebychev 0..omega.
      std::vector<double>& c = cdf_[l];
      double run = 0.0;
      if (basis_ == Basis::torus) {
        for (int k = -omega; k <= omega; ++k) {
          run += w[std::abs(k)];
          c.push_back(run);
        }
      } else {
        for (int k = 0; k <= omega; ++k) {
          run += w[k];
          c.push_back(run);
        }
      }
      for (double& v : c)
        v /= run;
      c.back() = 1.0;
    }
  }

  std::size_t dim() const { return scale_.size(); }
  Basis basis() const { return basis_; }
  const std::vector<double>& scale() const { return scale_; }
  int truncation(std::size_t l) const { return order_[l]; }

  /// Renormalized per-dimension probability of value w in dimension l.
  double dim_weight(std::size_t l, int w) const {
    if (basis_ == Basis::chebychev && w < 0)
      return 0.0;
    const int a = std::abs(w);
    if (a > order_[l])
      return 0.0;
    return prob_[l][static_cast<std::size_t>(a)];
  }

  /// Sum of the per-dimension table (1 up to rounding).
  double dim_total(std::size_t l) const {
    double t = 0.0;
    if (basis_ == Basis::torus) {
      for (int k = -order_[l]; k <= order_[l]; ++k)
        t += dim_weight(l, k);
    } else {
      for (int k = 0; k <= order_[l]; ++k)
        t += dim_weight(l, k);
    }
    return t;
  }

  /// lambda_w; zero outside the truncated support.
  double weight(const Frequency& w) const {
    if (w.dim() != dim())
      throw std::invalid_argument("BesselSpectrumDistribution: dimension mismatch");
    double p = 1.0;
    for (std::size_t l = 0; l < dim(); ++l)
      p *= dim_weight(l, w[l]);
    return p;
  }

  bool in_support(const Frequency& w) const { return weight(w) > 0.0; }

  /// N i.i.d. draws, deduplicated. Deterministic for a fixed seed.
  FrequencySample sample(std::size_t count, std::uint64_t seed) const {
    if (count == 0)
      throw std::invalid_argument("sample: count must be positive");
    if (count > std::numeric_limits<std::uint32_t>::max())
      throw std::invalid_argument("sample: count too large");
    std::mt19937_64 rng(seed);
    FrequencySample out;
    out.draws.reserve(count);
    std::unordered_map<Frequency, std::uint32_t, FrequencyHash> seen;
    Frequency w(dim());
    for (std::size_t i = 0; i < count; ++i) {
      for (std::size_t l = 0; l < dim(); ++l) {
        const double u = uniform01(rng);
        const auto& c = cdf_[l];
        const auto k = static_cast<int>(std::upper_bound(c.begin(), c.end(), u) - c.begin());
        const int idx = std::min(k, static_cast<int>(c.size()) - 1);
        w[l] = basis_ == Basis::torus ? idx - order_[l] : idx;
      }
      auto [it, inserted] = seen.try_emplace(w, static_cast<std::uint32_t>(out.unique.size()));
      if (inserted) {
        out.unique.push_back(w);
        out.multiplicity.push_back(0);
      }
      ++out.multiplicity[it->second];
      out.draws.push_back(it->second);
    }
    return out;
  }

 private:
  std::vector<double> scale_;
  Basis basis_;
  std::vector<int> order_;
  std::vector<std::vector<double>> prob_;
  std::vector<std::vector<double>> cdf_;
};

}  // namespace certopt

#endif  // CERTOPT_SPECTRUM_HPP_
