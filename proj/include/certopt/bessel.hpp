// Modified Bessel functions of the first kind, integer order, evaluated by
// their defining power series
//
//   I_n(x) = sum_{p >= 0} (x/2)^(2p+n) / (p! (p+n)!)
//
// The series is all-positive for x >= 0, so summation is stable. Arguments
// used by the Bessel kernel stay below ~30, where the series needs at most a
// few dozen terms. Negative arguments follow the parity I_n(-x) = (-1)^n I_n(x).

#ifndef CERTOPT_BESSEL_HPP_
#define CERTOPT_BESSEL_HPP_

#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <vector>

namespace certopt {

namespace detail {

// Series for x >= 0.
inline double bessel_i_series(int order, double x) {
  if (x == 0.0)
    return order == 0 ? 1.0 : 0.0;
  const double half = 0.5 * x;
  double term = 1.0;
  for (int k = 1; k <= order; ++k)
    term *= half / k;
  if (term == 0.0)
    return 0.0;
  const double q = half * half;
  double sum = term;
  for (int p = 1; p < 500; ++p) {
    term *= q / (double(p) * double(p + order));
    sum += term;
    if (term <= sum * 1e-17)
      break;
  }
  return sum;
}

}  // namespace detail

/// I_order(x) for order >= 0 and finite x.
inline double bessel_i(int order, double x) {
  if (order < 0)
    throw std::invalid_argument("bessel_i: negative order");
  if (!std::isfinite(x))
    throw std::invalid_argument("bessel_i: non-finite argument");
  if (x >= 0.0)
    return detail::bessel_i_series(order, x);
  const double v = detail::bessel_i_series(order, -x);
  return (order % 2 == 0) ? v : -v;
}

/// Fills out[k] = I_k(x) for k = 0..max_order.
inline void bessel_i_table(int max_order, double x, double* out) {
  for (int k = 0; k <= max_order; ++k)
    out[k] = bessel_i(k, x);
}

/// Fourier coefficient q_{order,n} of z -> e^{-2s} I_order(2s cos 2 pi z):
///
///   e^{-2s} I_order(2s cos 2 pi z) = sum_n q_{order,n} e^{2 pi i n z}.
///
/// Zero when n and order have different parity; even in n.
inline double bessel_cos_fourier_coeff(int order, int n, double s) {
  if (order < 0)
    throw std::invalid_argument("bessel_cos_fourier_coeff: negative order");
  if (!(s > 0.0))
    throw std::invalid_argument("bessel_cos_fourier_coeff: scale must be positive");
  n = std::abs(n);
  if ((n - order) % 2 != 0)
    return 0.0;
  // Term p: (s/2)^(2p+w) / (p! (p+w)!) * C(2p+w, p - (n-w)/2).
  // Rewritten as (2p+w)! / (p! (p+w)! a! b!) with a = p - (n-w)/2,
  // b = p + (n+w)/2, summed in log space.
  const int shift = (n - order) / 2;
  const double log_half_s = std::log(0.5 * s);
  double sum = 0.0;
  const int p0 = shift > 0 ? shift : 0;
  for (int p = p0; p < p0 + 400; ++p) {
    const int a = p - shift;
    const int b = p + (n + order) / 2;
    const double log_term = (2 * p + order) * log_half_s + std::lgamma(2.0 * p + order + 1) -
                            std::lgamma(p + 1.0) - std::lgamma(p + order + 1.0) -
                            std::lgamma(a + 1.0) - std::lgamma(b + 1.0);
    const double term = std::exp(log_term - 2.0 * s);
    sum += term;
    if (p > p0 + 2 && term <= sum * 1e-17)
      break;
  }
  return sum;
}

}  // namespace certopt

#endif  // CERTOPT_BESSEL_HPP_
