// Stochastic F-norm certificates for f* >= c - eps.
//
// With u = f - c - g and lambda_w = prod e^{-2s} I_w(2s) (s the model scale),
// the ratios |u_w| / lambda_w at w ~ lambda are unbiased for the F-norm of u,
// with variance at most ||u||^2_lambda = sum |u_w|^2 / lambda_w.
// Two ways to turn a sample into a bound:
//
//   chebyshev  eps = mean + B / sqrt(N delta)
//   mom        eps = median-of-means + 4 sqrt(2) B sqrt(log(1/delta) / N)
//
// where B >= ||u||_lambda. In the Chebychev basis everything runs on N^d with
// the folded distribution; the folded norm equals the norm of the lifted
// torus function, so the same bounds apply.

#ifndef CERTOPT_CERTIFIER_HPP_
#define CERTOPT_CERTIFIER_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "certopt/model_spectrum.hpp"
#include "certopt/parallel.hpp"
#include "certopt/spectrum.hpp"
#include "certopt/target.hpp"

namespace certopt {

/// Thrown when the target has spectral mass where lambda vanishes, so the
/// residual has no finite Hilbert norm and no certificate exists.
struct SpectrumOutOfReach : std::runtime_error {
  SpectrumOutOfReach() : std::runtime_error("target spectrum outside kernel reach; increase s") {}
};

struct ResidualSpectrumSample {
  Frequency freq;
  double weight = 0.0;     // lambda_w
  double magnitude = 0.0;  // |u_w|
  double ratio = 0.0;      // magnitude / weight
  std::uint64_t multiplicity = 0;
};

struct ResidualSamples {
  std::vector<ResidualSpectrumSample> unique;
  std::vector<std::uint32_t> draws;  // index into unique, in draw order

  std::size_t n_draws() const { return draws.size(); }
};

enum class Estimator { mom, chebyshev, both };

inline const char* to_string(Estimator e) {
  switch (e) {
    case Estimator::mom: return "mom";
    case Estimator::chebyshev: return "cheby";
    case Estimator::both: return "both";
  }
  return "?";
}

struct Certificate {
  double c = 0.0;
  double epsilon = 0.0;
  double delta = 0.0;
  std::size_t n_samples = 0;
  std::size_t n_unique = 0;
  std::string estimator;
  double estimate = 0.0;
  double deviation = 0.0;
  double norm_bound = 0.0;
  bool norm_exact = true;  // false when the triangle-inequality form was used
  std::uint64_t seed = 0;

  double lower_bound() const { return c - epsilon; }
};

/// The certificate distribution belonging to a model: the spectrum of the
/// squared kernel, e^{-2s} I(2s), in the model's basis.
inline BesselSpectrumDistribution certificate_distribution(const KSoSModel& g) {
  return BesselSpectrumDistribution(g.scale().values(), g.basis());
}

namespace detail {

inline void check_compatible(const Target& f, const KSoSModel& g, const BesselSpectrumDistribution& dist) {
  if (dim_of(f) != g.dim() || dist.dim() != g.dim())
    throw std::invalid_argument("certifier: dimension mismatch between target, model and distribution");
  if (basis_of(f) != g.basis() || dist.basis() != g.basis())
    throw std::invalid_argument("certifier: basis mismatch between target, model and distribution");
}

inline std::vector<int> truncation_orders(const BesselSpectrumDistribution& dist) {
  std::vector<int> o(dist.dim());
  for (std::size_t l = 0; l < dist.dim(); ++l)
    o[l] = dist.truncation(l);
  return o;
}

}  // namespace detail

/// Residual coefficient f_w - c 1_{w=0} - g_w at every unique sampled frequency.
inline ResidualSamples residual_samples(const Target& f, double c, const KSoSModel& g,
                                        const BesselSpectrumDistribution& dist, std::size_t n,
                                        std::uint64_t seed, int threads = 1) {
  detail::check_compatible(f, g, dist);
  FrequencySample fs = dist.sample(n, seed);
  const ModelSpectrum spec(g, detail::truncation_orders(dist));
  ResidualSamples out;
  out.unique.resize(fs.unique.size());
  parallel_for(fs.unique.size(), threads, [&](std::size_t k) {
    const Frequency& w = fs.unique[k];
    const double lam = dist.weight(w);
    if (!(lam > 0.0))
      throw std::logic_error("residual_samples: sampled frequency outside support");
    Complex u = target_coeff(f, w) - spec.coefficient(w);
    if (w.is_zero())
      u -= c;
    auto& s = out.unique[k];
    s.freq = w;
    s.weight = lam;
    s.magnitude = std::abs(u);
    s.ratio = s.magnitude / lam;
    s.multiplicity = fs.multiplicity[k];
  });
  out.draws = std::move(fs.draws);
  return out;
}

/// Multiplicity-weighted mean of the ratios.
inline double mean_estimate(const ResidualSamples& s) {
  if (s.n_draws() == 0)
    throw std::invalid_argument("mean_estimate: empty sample");
  std::vector<double> terms(s.unique.size());
  for (std::size_t k = 0; k < s.unique.size(); ++k)
    terms[k] = s.unique[k].ratio * static_cast<double>(s.unique[k].multiplicity);
  return pairwise_sum(terms.data(), terms.size()) / static_cast<double>(s.n_draws());
}

/// Number of MoM blocks for confidence delta: ceil(8 log(1/delta)).
inline std::size_t mom_blocks(double delta) {
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("delta must lie in (0,1)");
  // The small tolerance keeps delta = e^{-K/8} from rounding up to K+1.
  return static_cast<std::size_t>(std::ceil(8.0 * std::log(1.0 / delta) - 1e-9));
}

/// Median of K contiguous block means; the last N mod K draws are dropped.
inline double mom_estimate(std::span<const double> values, std::size_t k_blocks) {
  if (k_blocks == 0)
    throw std::invalid_argument("mom_estimate: need at least one block");
  if (values.size() < k_blocks)
    throw std::invalid_argument("insufficient samples for requested confidence");
  const std::size_t b = values.size() / k_blocks;
  std::vector<double> means(k_blocks);
  for (std::size_t k = 0; k < k_blocks; ++k)
    means[k] = pairwise_sum(values.data() + k * b, b) / static_cast<double>(b);
  std::sort(means.begin(), means.end());
  if (k_blocks % 2 == 1)
    return means[k_blocks / 2];
  return 0.5 * (means[k_blocks / 2 - 1] + means[k_blocks / 2]);
}

inline double mom_estimate_delta(std::span<const double> values, double delta) {
  return mom_estimate(values, mom_blocks(delta));
}

inline std::vector<double> raw_ratios(const ResidualSamples& s) {
  std::vector<double> r(s.n_draws());
  for (std::size_t i = 0; i < r.size(); ++i)
    r[i] = s.unique[s.draws[i]].ratio;
  return r;
}

struct NormBound {
  double value = 0.0;
  bool exact = true;
};

namespace detail {

/// ||f - c||^2_lambda and <f - c, g>_lambda for finitely supported targets.
template <class Poly>
void finite_target_products(const Poly& f, double c, const ModelSpectrum& spec,
                            const BesselSpectrumDistribution& dist, double& norm2, double& cross) {
  norm2 = 0.0;
  cross = 0.0;
  bool saw_zero = false;
  auto visit = [&](const Frequency& w, Complex fw) {
    if (w.is_zero()) {
      fw -= c;
      saw_zero = true;
    }
    if (fw == Complex{})
      return;
    const double lam = dist.weight(w);
    if (!(lam > 0.0))
      throw SpectrumOutOfReach();
    norm2 += std::norm(fw) / lam;
    cross += (std::conj(fw) * spec.coefficient(w)).real() / lam;
  };
  for (const auto& t : f.terms())
    visit(t.freq, Complex(t.coeff));
  if (!saw_zero)
    visit(Frequency(f.dim()), Complex{});
}

/// sum_w e^{-2a} I_w(a)^2 / (e^{-2b} I_w(2b)) e^{2 pi i w t}, the 1-D kernel
/// giving <K_a(x,.), K_a(y,.)>_lambda. Truncated when terms vanish.
inline double mixture_cross_kernel_1d(double a, double b, double t) {
  double acc = 0.0;
  for (int w = 0; w < 400; ++w) {
    const double num = std::exp(-2.0 * a) * std::pow(bessel_i(w, a), 2);
    const double den = std::exp(-2.0 * b) * bessel_i(w, 2.0 * b);
    if (num == 0.0)
      break;
    if (!(den > 0.0))
      throw SpectrumOutOfReach();
    const double term = num / den * (w == 0 ? 1.0 : 2.0 * std::cos(kTwoPi * w * t));
    acc += term;
    if (w > 4 && std::abs(term) < 1e-18 * std::abs(acc))
      break;
  }
  return acc;
}

}  // namespace detail

/// B >= ||f - c - g||_lambda. Uses the expansion
///   ||f - c||^2 - 2 <f - c, g> + hs(g)^2
/// when it is available and nonnegative, else ||f - c|| + hs(g).
inline NormBound residual_hilbert_norm_bound(const Target& f, double c, const KSoSModel& g,
                                             const BesselSpectrumDistribution& dist) {
  detail::check_compatible(f, g, dist);
  const double hs = hs_norm_bound(g);
  double norm2 = 0.0, cross = 0.0;
  bool have_cross = true;
  if (const auto* mix = std::get_if<KernelMixture>(&f)) {
    // lambda_0 and the target's zero coefficient, for the constant shift.
    const double lam0 = dist.weight(Frequency(g.dim()));
    const double f0 = target_coeff(f, Frequency(g.dim())).real();
    const auto& X = mix->centers();
    const auto& a = mix->weights();
    const auto n = X.rows();
    bool reproducing = true;
    for (std::size_t l = 0; l < g.dim(); ++l) {
      if (mix->scale()[l] > 2.0 * g.scale()[l] * (1.0 + 1e-12))
        throw SpectrumOutOfReach();
      reproducing = reproducing && std::abs(mix->scale()[l] - 2.0 * g.scale()[l]) <= 1e-12 * mix->scale()[l];
    }
    double ff = 0.0;
    if (reproducing) {
      ff = a.dot(mix->gram() * a);
      // <f, g> = sum_i alpha_i g(x_i) by the reproducing property.
      cross = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        std::vector<double> xi(g.dim());
        for (std::size_t l = 0; l < g.dim(); ++l)
          xi[l] = X(i, static_cast<Eigen::Index>(l));
        cross += a(i) * g.eval_lifted(xi);
      }
    } else {
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
          double k = 1.0;
          for (std::size_t l = 0; l < g.dim(); ++l) {
            const auto ll = static_cast<Eigen::Index>(l);
            k *= detail::mixture_cross_kernel_1d(mix->scale()[l], g.scale()[l], X(i, ll) - X(j, ll));
          }
          ff += a(i) * a(j) * k;
        }
      have_cross = false;
    }
    norm2 = ff - 2.0 * c * f0 / lam0 + c * c / lam0;
    if (have_cross) {
      const ModelSpectrum spec(g, 0);
      cross -= c * spec.coefficient(Frequency(g.dim())).real() / lam0;
    }
  } else {
    const ModelSpectrum spec(g, detail::truncation_orders(dist));
    if (const auto* p = std::get_if<TrigPoly>(&f))
      detail::finite_target_products(*p, c, spec, dist, norm2, cross);
    else
      detail::finite_target_products(std::get<ChebPoly>(f), c, spec, dist, norm2, cross);
  }
  norm2 = std::max(0.0, norm2);
  if (have_cross) {
    const double radicand = norm2 - 2.0 * cross + hs * hs;
    if (radicand >= 0.0)
      return {std::sqrt(radicand), true};
  }
  return {std::sqrt(norm2) + hs, false};
}

struct CertifyOptions {
  double delta = std::exp(-4.0);
  std::size_t n_samples = 1000000;
  std::uint64_t seed = 0;
  Estimator estimator = Estimator::mom;
  /// With Estimator::both, run each estimator at delta/2 so the reported
  /// minimum holds at 1 - delta.
  bool union_bound = false;
  /// Deviation scale hs(g) alone instead of a bound on ||f - c - g||.
  /// Not sound in general; kept for comparison runs.
  bool model_norm_only = false;
  int threads = 1;
};

namespace detail {

inline Certificate assemble(const ResidualSamples& s, double c, double delta, Estimator which, double bound,
                            bool exact, const CertifyOptions& opt) {
  Certificate cert;
  cert.c = c;
  cert.delta = delta;
  cert.n_samples = s.n_draws();
  cert.n_unique = s.unique.size();
  cert.norm_bound = bound;
  cert.norm_exact = exact;
  cert.seed = opt.seed;
  const double n = static_cast<double>(s.n_draws());
  if (which == Estimator::chebyshev) {
    cert.estimator = "cheby";
    cert.estimate = mean_estimate(s);
    cert.deviation = bound / std::sqrt(n * delta);
  } else {
    cert.estimator = "mom";
    const auto r = raw_ratios(s);
    cert.estimate = mom_estimate_delta(r, delta);
    cert.deviation = 4.0 * std::sqrt(2.0) * bound * std::sqrt(std::log(1.0 / delta) / n);
  }
  cert.epsilon = cert.estimate + cert.deviation;
  return cert;
}

}  // namespace detail

/// Certificate for f* >= c - eps from one frequency sample.
inline Certificate certify(const Target& f, double c, const KSoSModel& g, const CertifyOptions& opt) {
  const auto dist = certificate_distribution(g);
  NormBound nb;
  if (opt.model_norm_only)
    nb = {hs_norm_bound(g), false};
  else
    nb = residual_hilbert_norm_bound(f, c, g, dist);
  if (opt.estimator == Estimator::mom && opt.n_samples < mom_blocks(opt.delta))
    throw std::invalid_argument("insufficient samples for requested confidence");
  const auto s = residual_samples(f, c, g, dist, opt.n_samples, opt.seed, opt.threads);
  if (opt.estimator != Estimator::both)
    return detail::assemble(s, c, opt.delta, opt.estimator, nb.value, nb.exact, opt);
  const double d = opt.union_bound ? opt.delta / 2.0 : opt.delta;
  const Certificate a = detail::assemble(s, c, d, Estimator::chebyshev, nb.value, nb.exact, opt);
  Certificate b = detail::assemble(s, c, d, Estimator::mom, nb.value, nb.exact, opt);
  Certificate best = a.epsilon < b.epsilon ? a : b;
  best.delta = opt.union_bound ? opt.delta : d;
  best.estimator = std::string("both:") + best.estimator;
  return best;
}

inline Certificate certify_chebyshev(const Target& f, double c, const KSoSModel& g, std::size_t n,
                                     double delta, std::uint64_t seed, int threads = 1) {
  CertifyOptions o;
  o.delta = delta;
  o.n_samples = n;
  o.seed = seed;
  o.estimator = Estimator::chebyshev;
  o.threads = threads;
  return certify(f, c, g, o);
}

inline Certificate certify_mom(const Target& f, double c, const KSoSModel& g, std::size_t n, double delta,
                               std::uint64_t seed, int threads = 1) {
  CertifyOptions o;
  o.delta = delta;
  o.n_samples = n;
  o.seed = seed;
  o.estimator = Estimator::mom;
  o.threads = threads;
  return certify(f, c, g, o);
}

/// sum over |w|_inf <= W of |f_w - c 1_{w=0} - g_w| (nonnegative box in the
/// Chebychev basis), by enumeration.
inline double f_norm_truncated(const Target& f, double c, const KSoSModel& g, int box, int threads = 1) {
  if (box < 0)
    throw std::invalid_argument("f_norm_truncated: negative box");
  const bool cheb = g.basis() == Basis::chebychev;
  const double side = cheb ? box + 1.0 : 2.0 * box + 1.0;
  if (std::pow(side, static_cast<double>(g.dim())) > 2e7)
    throw std::invalid_argument("f_norm_truncated: enumeration budget exceeded");
  std::vector<Frequency> ws;
  for_each_in_box(g.dim(), box, cheb, [&](const Frequency& w) { ws.push_back(w); });
  const ModelSpectrum spec(g, box);
  std::vector<double> mag(ws.size());
  parallel_for(ws.size(), threads, [&](std::size_t k) {
    Complex u = target_coeff(f, ws[k]) - spec.coefficient(ws[k]);
    if (ws[k].is_zero())
      u -= c;
    mag[k] = std::abs(u);
  });
  return pairwise_sum(mag.data(), mag.size());
}

}  // namespace certopt

#endif  // CERTOPT_CERTIFIER_HPP_
