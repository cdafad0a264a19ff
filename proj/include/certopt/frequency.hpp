#ifndef CERTOPT_FREQUENCY_HPP_
#define CERTOPT_FREQUENCY_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <initializer_list>
#include <string>
#include <vector>

namespace certopt {

/// Multi-index in Z^d (torus spectra) or N^d (Chebychev spectra).
class Frequency {
 public:
  Frequency() = default;
  explicit Frequency(std::size_t dim) : idx_(dim, 0) {}
  explicit Frequency(std::vector<int> idx) : idx_(std::move(idx)) {}
  Frequency(std::initializer_list<int> idx) : idx_(idx) {}

  std::size_t dim() const { return idx_.size(); }
  int operator[](std::size_t l) const { return idx_[l]; }
  int& operator[](std::size_t l) { return idx_[l]; }
  const std::vector<int>& indices() const { return idx_; }

  bool is_zero() const {
    return std::all_of(idx_.begin(), idx_.end(), [](int v) { return v == 0; });
  }
  bool is_nonnegative() const {
    return std::all_of(idx_.begin(), idx_.end(), [](int v) { return v >= 0; });
  }
  int max_abs() const {
    int m = 0;
    for (int v : idx_)
      m = std::max(m, std::abs(v));
    return m;
  }
  Frequency operator-() const {
    Frequency r(*this);
    for (int& v : r.idx_)
      v = -v;
    return r;
  }

  friend bool operator==(const Frequency&, const Frequency&) = default;
  friend auto operator<=>(const Frequency&, const Frequency&) = default;

  std::string to_string() const {
    std::string s = "(";
    for (std::size_t l = 0; l < idx_.size(); ++l) {
      if (l)
        s += ",";
      s += std::to_string(idx_[l]);
    }
    return s + ")";
  }

 private:
  std::vector<int> idx_;
};

struct FrequencyHash {
  std::size_t operator()(const Frequency& f) const noexcept {
    // FNV-1a over the raw indices.
    std::uint64_t h = 1469598103934665603ull;
    for (int v : f.indices()) {
      auto u = static_cast<std::uint32_t>(v);
      for (int b = 0; b < 4; ++b) {
        h ^= (u >> (8 * b)) & 0xffu;
        h *= 1099511628211ull;
      }
    }
    return static_cast<std::size_t>(h);
  }
};

/// Calls fn(freq) for every frequency of the box {|w|_inf <= radius} in Z^d
/// (or {0..radius}^d when nonnegative is set), in lexicographic order.
template <class Fn>
void for_each_in_box(std::size_t dim, int radius, bool nonnegative, Fn&& fn) {
  const int lo = nonnegative ? 0 : -radius;
  Frequency w(std::vector<int>(dim, lo));
  if (dim == 0) {
    fn(w);
    return;
  }
  while (true) {
    fn(w);
    std::size_t l = dim;
    while (l > 0) {
      --l;
      if (w[l] < radius) {
        ++w[l];
        break;
      }
      w[l] = lo;
      if (l == 0)
        return;
    }
  }
}

}  // namespace certopt

#endif  // CERTOPT_FREQUENCY_HPP_
