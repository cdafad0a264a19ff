// Sparse trigonometric polynomials on the torus T^d = [0,1)^d and sparse
// polynomials in the tensor Chebychev basis on [-1,1]^d.

#ifndef CERTOPT_POLYNOMIAL_HPP_
#define CERTOPT_POLYNOMIAL_HPP_

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include "certopt/frequency.hpp"

namespace certopt {

using Complex = std::complex<double>;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Per-dimension table of e^{2 pi i k x_l} for k in [-deg_l, deg_l].
class PhaseTable {
 public:
  PhaseTable(std::span<const double> z, const std::vector<int>& degree) : degree_(degree) {
    offset_.resize(z.size());
    std::size_t total = 0;
    for (std::size_t l = 0; l < z.size(); ++l) {
      offset_[l] = total + static_cast<std::size_t>(degree[l]);
      total += 2 * static_cast<std::size_t>(degree[l]) + 1;
    }
    table_.resize(total);
    for (std::size_t l = 0; l < z.size(); ++l)
      for (int k = -degree[l]; k <= degree[l]; ++k)
        table_[offset_[l] + k] = std::polar(1.0, kTwoPi * k * z[l]);
  }
  const Complex& operator()(std::size_t l, int k) const { return table_[offset_[l] + k]; }

 private:
  std::vector<int> degree_;
  std::vector<std::size_t> offset_;
  std::vector<Complex> table_;
};

/// Real-valued trigonometric polynomial f(z) = sum_w fhat_w e^{2 pi i w.z}.
/// Terms are kept sorted by frequency; Hermitian symmetry
/// fhat_{-w} = conj(fhat_w) is checked at construction.
class TrigPoly {
 public:
  struct Term {
    Frequency freq;
    Complex coeff;
  };

  TrigPoly() = default;

  /// Takes a full (Hermitian-symmetric) spectrum. Duplicate frequencies add up.
  TrigPoly(std::size_t dim, const std::vector<Term>& terms) : dim_(dim) {
    std::unordered_map<Frequency, Complex, FrequencyHash> acc;
    for (const auto& t : terms) {
      if (t.freq.dim() != dim)
        throw std::invalid_argument("TrigPoly: frequency dimension mismatch");
      acc[t.freq] += t.coeff;
    }
    build(acc);
    check_hermitian();
  }

  /// Completes a half spectrum: for each stored w, adds conj(c) at -w.
  /// The zero frequency must carry a real coefficient.
  static TrigPoly from_half_spectrum(std::size_t dim, const std::vector<Term>& half) {
    std::unordered_map<Frequency, Complex, FrequencyHash> acc;
    for (const auto& t : half) {
      if (t.freq.dim() != dim)
        throw std::invalid_argument("TrigPoly: frequency dimension mismatch");
      if (t.freq.is_zero()) {
        if (t.coeff.imag() != 0.0)
          throw std::invalid_argument("TrigPoly: zero frequency needs a real coefficient");
        acc[t.freq] += t.coeff;
      } else {
        if (acc.contains(-t.freq) || acc.contains(t.freq))
          throw std::invalid_argument("TrigPoly: frequency " + t.freq.to_string() +
                                      " given twice in half spectrum");
        acc[t.freq] += t.coeff;
        acc[-t.freq] += std::conj(t.coeff);
      }
    }
    TrigPoly p;
    p.dim_ = dim;
    p.build(acc);
    return p;
  }

  std::size_t dim() const { return dim_; }
  const std::vector<Term>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  const std::vector<int>& degree() const { return degree_; }

  Complex coeff(const Frequency& w) const {
    auto it = index_.find(w);
    return it == index_.end() ? Complex{} : terms_[it->second].coeff;
  }

  /// Sum of |fhat_w|.
  double f_norm() const {
    double s = 0.0;
    for (const auto& t : terms_)
      s += std::abs(t.coeff);
    return s;
  }

  /// Exact value; throws if the complex accumulation is not real, which
  /// means the Hermitian invariant is broken.
  double operator()(std::span<const double> z) const {
    check_point(z);
    const PhaseTable ph(z, degree_);
    Complex acc{};
    for (const auto& t : terms_) {
      Complex e = t.coeff;
      for (std::size_t l = 0; l < dim_; ++l)
        e *= ph(l, t.freq[l]);
      acc += e;
    }
    if (std::abs(acc.imag()) > 1e-10 * std::max(1.0, f_norm()))
      throw std::logic_error("TrigPoly: non-real evaluation, Hermitian symmetry broken");
    return acc.real();
  }

  /// Value and gradient with respect to z.
  double value_and_gradient(std::span<const double> z, std::span<double> grad) const {
    check_point(z);
    const PhaseTable ph(z, degree_);
    double val = 0.0;
    std::fill(grad.begin(), grad.end(), 0.0);
    for (const auto& t : terms_) {
      Complex e = t.coeff;
      for (std::size_t l = 0; l < dim_; ++l)
        e *= ph(l, t.freq[l]);
      val += e.real();
      // d/dz_l Re(c e^{i theta}) = -2 pi w_l Im(c e^{i theta})
      for (std::size_t l = 0; l < dim_; ++l)
        grad[l] -= kTwoPi * t.freq[l] * e.imag();
    }
    return val;
  }

 private:
  void build(const std::unordered_map<Frequency, Complex, FrequencyHash>& acc) {
    terms_.clear();
    for (const auto& [w, c] : acc)
      if (c != Complex{})
        terms_.push_back({w, c});
    std::sort(terms_.begin(), terms_.end(),
              [](const Term& a, const Term& b) { return a.freq < b.freq; });
    index_.clear();
    degree_.assign(dim_, 0);
    for (std::size_t i = 0; i < terms_.size(); ++i) {
      index_.emplace(terms_[i].freq, i);
      for (std::size_t l = 0; l < dim_; ++l)
        degree_[l] = std::max(degree_[l], std::abs(terms_[i].freq[l]));
    }
  }

  void check_hermitian() const {
    const double tol = 1e-12 * std::max(1.0, f_norm());
    for (const auto& t : terms_)
      if (std::abs(coeff(-t.freq) - std::conj(t.coeff)) > tol)
        throw std::invalid_argument("TrigPoly: spectrum is not Hermitian at " + t.freq.to_string());
  }

  void check_point(std::span<const double> z) const {
    if (z.size() != dim_)
      throw std::invalid_argument("TrigPoly: point dimension mismatch");
  }

  std::size_t dim_ = 0;
  std::vector<Term> terms_;
  std::unordered_map<Frequency, std::size_t, FrequencyHash> index_;
  std::vector<int> degree_;
};

/// Chebychev polynomial of the first kind H_n(x), by the three-term
/// recurrence. Fills out[0..n].
inline void chebyshev_table(int n, double x, double* out) {
  out[0] = 1.0;
  if (n >= 1)
    out[1] = x;
  for (int k = 1; k < n; ++k)
    out[k + 1] = 2.0 * x * out[k] - out[k - 1];
}

inline double chebyshev_h(int n, double x) {
  std::vector<double> t(static_cast<std::size_t>(n) + 1);
  chebyshev_table(n, x, t.data());
  return t[static_cast<std::size_t>(n)];
}

/// h(x) = sum_w h_w prod_l H_{w_l}(x_l) on [-1,1]^d.
class ChebPoly {
 public:
  struct Term {
    Frequency freq;
    double coeff;
  };

  ChebPoly() = default;
  ChebPoly(std::size_t dim, const std::vector<Term>& terms) : dim_(dim) {
    std::unordered_map<Frequency, double, FrequencyHash> acc;
    for (const auto& t : terms) {
      if (t.freq.dim() != dim)
        throw std::invalid_argument("ChebPoly: frequency dimension mismatch");
      if (!t.freq.is_nonnegative())
        throw std::invalid_argument("ChebPoly: negative frequency " + t.freq.to_string());
      acc[t.freq] += t.coeff;
    }
    for (const auto& [w, c] : acc)
      if (c != 0.0)
        terms_.push_back({w, c});
    std::sort(terms_.begin(), terms_.end(),
              [](const Term& a, const Term& b) { return a.freq < b.freq; });
    degree_.assign(dim_, 0);
    for (std::size_t i = 0; i < terms_.size(); ++i) {
      index_.emplace(terms_[i].freq, i);
      for (std::size_t l = 0; l < dim_; ++l)
        degree_[l] = std::max(degree_[l], terms_[i].freq[l]);
    }
  }

  std::size_t dim() const { return dim_; }
  const std::vector<Term>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  const std::vector<int>& degree() const { return degree_; }

  double coeff(const Frequency& w) const {
    auto it = index_.find(w);
    return it == index_.end() ? 0.0 : terms_[it->second].coeff;
  }

  double f_norm() const {
    double s = 0.0;
    for (const auto& t : terms_)
      s += std::abs(t.coeff);
    return s;
  }

  /// Evaluation on [-1,1]^d by the three-term recurrence.
  double operator()(std::span<const double> x) const {
    if (x.size() != dim_)
      throw std::invalid_argument("ChebPoly: point dimension mismatch");
    for (double v : x)
      if (!(v >= -1.0 && v <= 1.0))
        throw std::domain_error("ChebPoly: point outside [-1,1]^d");
    std::vector<std::vector<double>> h(dim_);
    for (std::size_t l = 0; l < dim_; ++l) {
      h[l].resize(static_cast<std::size_t>(degree_[l]) + 1);
      chebyshev_table(degree_[l], x[l], h[l].data());
    }
    double acc = 0.0;
    for (const auto& t : terms_) {
      double e = t.coeff;
      for (std::size_t l = 0; l < dim_; ++l)
        e *= h[l][static_cast<std::size_t>(t.freq[l])];
      acc += e;
    }
    return acc;
  }

  /// Value of the lifted function u -> h(cos 2 pi u) and its gradient in u.
  double lifted_value_and_gradient(std::span<const double> u, std::span<double> grad) const {
    if (u.size() != dim_)
      throw std::invalid_argument("ChebPoly: point dimension mismatch");
    // H_k(cos 2 pi u) = cos(2 pi k u).
    std::vector<std::vector<double>> c(dim_), s(dim_);
    for (std::size_t l = 0; l < dim_; ++l) {
      c[l].resize(static_cast<std::size_t>(degree_[l]) + 1);
      s[l].resize(static_cast<std::size_t>(degree_[l]) + 1);
      for (int k = 0; k <= degree_[l]; ++k) {
        c[l][k] = std::cos(kTwoPi * k * u[l]);
        s[l][k] = std::sin(kTwoPi * k * u[l]);
      }
    }
    double val = 0.0;
    std::fill(grad.begin(), grad.end(), 0.0);
    std::vector<double> f(dim_);
    for (const auto& t : terms_) {
      double prod = t.coeff;
      for (std::size_t l = 0; l < dim_; ++l) {
        f[l] = c[l][t.freq[l]];
        prod *= f[l];
      }
      val += prod;
      for (std::size_t l = 0; l < dim_; ++l) {
        double others = t.coeff;
        for (std::size_t k = 0; k < dim_; ++k)
          if (k != l)
            others *= f[k];
        grad[l] -= others * kTwoPi * t.freq[l] * s[l][t.freq[l]];
      }
    }
    return val;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<Term> terms_;
  std::unordered_map<Frequency, std::size_t, FrequencyHash> index_;
  std::vector<int> degree_;
};

/// f(z) = h(cos 2 pi z): every Chebychev term becomes a product of cosines,
/// expanded into the 2^k sign patterns of its k nonzero components, each with
/// weight h_w 2^{-k}.
inline TrigPoly lift_cheb_to_trig(const ChebPoly& h) {
  std::vector<TrigPoly::Term> out;
  const std::size_t d = h.dim();
  for (const auto& t : h.terms()) {
    std::vector<std::size_t> nz;
    for (std::size_t l = 0; l < d; ++l)
      if (t.freq[l] != 0)
        nz.push_back(l);
    const std::size_t patterns = std::size_t{1} << nz.size();
    const double c = std::ldexp(t.coeff, -static_cast<int>(nz.size()));
    for (std::size_t mask = 0; mask < patterns; ++mask) {
      Frequency w = t.freq;
      for (std::size_t b = 0; b < nz.size(); ++b)
        if (mask & (std::size_t{1} << b))
          w[nz[b]] = -w[nz[b]];
      out.push_back({w, Complex(c, 0.0)});
    }
  }
  return TrigPoly(d, out);
}

}  // namespace certopt

#endif  // CERTOPT_POLYNOMIAL_HPP_
