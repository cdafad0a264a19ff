// Problem files, reports and the random problem generator.
//
// Problem files are JSON. Every floating-point value is stored as a C99
// hex-float string ("0x1.8p+0") so that a save/load round trip is exact; a
// parallel "decimal" field is written for humans and ignored on load.
//
//   {"format": "certopt-problem", "version": 1, "kind": "trig_poly", "dim": 2,
//    "terms": [{"freq": [1, -2], "coeff": ["0x1p-1", "0x0p+0"], "decimal": [0.5, 0]}, ...],
//    "metadata": {...}}
//
// trig_poly stores one of each +-w pair (Hermitian completion on load);
// cheb_poly stores real coefficients on N^d; kernel_mixture stores "scale",
// "centers" (one row per center) and "weights".

#ifndef CERTOPT_IO_HPP_
#define CERTOPT_IO_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "certopt/certifier.hpp"
#include "certopt/spectrum.hpp"
#include "certopt/target.hpp"

namespace certopt::io {

using nlohmann::json;

/// Malformed or unreadable problem/report file.
struct InvalidFile : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

/// Accepts a hex-float (or decimal) string, or a plain JSON number.
inline double parse_number(const json& j) {
  if (j.is_number())
    return j.get<double>();
  if (!j.is_string())
    throw InvalidFile("expected a number or hex-float string, got " + j.dump());
  const std::string s = j.get<std::string>();
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw InvalidFile("malformed number '" + s + "'");
  return v;
}

inline json hex_array(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v)
    a.push_back(hex(x));
  return a;
}

inline std::vector<double> number_array(const json& j) {
  if (!j.is_array())
    throw InvalidFile("expected an array, got " + j.dump());
  std::vector<double> out;
  for (const auto& e : j)
    out.push_back(parse_number(e));
  return out;
}

inline const char* kind_name(const Target& t) {
  if (std::holds_alternative<TrigPoly>(t))
    return "trig_poly";
  if (std::holds_alternative<ChebPoly>(t))
    return "cheb_poly";
  return "kernel_mixture";
}

namespace detail {

inline Frequency parse_freq(const json& j, std::size_t dim) {
  if (!j.is_array() || j.size() != dim)
    throw InvalidFile("frequency must be an integer array of length " + std::to_string(dim));
  std::vector<int> idx;
  for (const auto& e : j) {
    if (!e.is_number_integer())
      throw InvalidFile("frequency entries must be integers");
    idx.push_back(e.get<int>());
  }
  return Frequency(std::move(idx));
}

/// One representative of each +-w pair: the zero frequency, or w with -w < w.
inline bool is_half_representative(const Frequency& w) { return w.is_zero() || -w < w; }

}  // namespace detail

inline json target_to_json(const Target& t) {
  json j;
  j["format"] = "certopt-problem";
  j["version"] = 1;
  j["kind"] = kind_name(t);
  j["dim"] = dim_of(t);
  if (const auto* p = std::get_if<TrigPoly>(&t)) {
    json terms = json::array();
    for (const auto& term : p->terms()) {
      if (!detail::is_half_representative(term.freq))
        continue;
      terms.push_back({{"freq", term.freq.indices()},
                       {"coeff", {hex(term.coeff.real()), hex(term.coeff.imag())}},
                       {"decimal", {term.coeff.real(), term.coeff.imag()}}});
    }
    j["terms"] = terms;
  } else if (const auto* h = std::get_if<ChebPoly>(&t)) {
    json terms = json::array();
    for (const auto& term : h->terms())
      terms.push_back({{"freq", term.freq.indices()}, {"coeff", hex(term.coeff)}, {"decimal", term.coeff}});
    j["terms"] = terms;
  } else {
    const auto& m = std::get<KernelMixture>(t);
    j["scale"] = hex_array(m.scale().values());
    json centers = json::array();
    for (Eigen::Index i = 0; i < m.centers().rows(); ++i) {
      std::vector<double> row(m.dim());
      for (std::size_t l = 0; l < m.dim(); ++l)
        row[l] = m.centers()(i, static_cast<Eigen::Index>(l));
      centers.push_back(hex_array(row));
    }
    j["centers"] = centers;
    j["weights"] = hex_array(std::vector<double>(m.weights().data(), m.weights().data() + m.weights().size()));
  }
  return j;
}

inline Target target_from_json(const json& j) {
  try {
    if (!j.is_object())
      throw InvalidFile("problem must be a JSON object");
    if (!j.contains("kind") || !j.contains("dim"))
      throw InvalidFile("problem needs 'kind' and 'dim'");
    const std::string kind = j.at("kind").get<std::string>();
    const auto& dj = j.at("dim");
    if (!dj.is_number_integer() || dj.get<long>() < 1)
      throw InvalidFile("'dim' must be a positive integer");
    const auto dim = static_cast<std::size_t>(dj.get<long>());
    if (kind == "trig_poly") {
      std::vector<TrigPoly::Term> half;
      for (const auto& tj : j.at("terms")) {
        const Frequency w = detail::parse_freq(tj.at("freq"), dim);
        const auto c = number_array(tj.at("coeff"));
        if (c.size() != 2)
          throw InvalidFile("trig_poly coefficient must be [re, im]");
        half.push_back({w, {c[0], c[1]}});
      }
      return TrigPoly::from_half_spectrum(dim, half);
    }
    if (kind == "cheb_poly") {
      std::vector<ChebPoly::Term> terms;
      for (const auto& tj : j.at("terms"))
        terms.push_back({detail::parse_freq(tj.at("freq"), dim), parse_number(tj.at("coeff"))});
      return ChebPoly(dim, terms);
    }
    if (kind == "kernel_mixture") {
      const auto scale = number_array(j.at("scale"));
      const auto weights = number_array(j.at("weights"));
      const auto& cj = j.at("centers");
      if (scale.size() != dim || !cj.is_array() || cj.size() != weights.size())
        throw InvalidFile("kernel_mixture: inconsistent scale/centers/weights");
      Eigen::MatrixXd centers(static_cast<Eigen::Index>(weights.size()), static_cast<Eigen::Index>(dim));
      for (std::size_t i = 0; i < weights.size(); ++i) {
        const auto row = number_array(cj[i]);
        if (row.size() != dim)
          throw InvalidFile("kernel_mixture: center of wrong dimension");
        for (std::size_t l = 0; l < dim; ++l)
          centers(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) = row[l];
      }
      return KernelMixture(KernelScale(scale), centers,
                           Eigen::Map<const Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size())));
    }
    throw InvalidFile("unknown problem kind '" + kind + "'");
  } catch (const InvalidFile&) {
    throw;
  } catch (const std::exception& e) {
    // json type/key errors and constructor invariant violations
    throw InvalidFile(e.what());
  }
}

/// 64-bit FNV-1a over the canonical (hex-float) serialization of the target.
inline std::string digest(const Target& t) {
  const std::string s = target_to_json(t).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw InvalidFile("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidFile("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

struct Problem {
  Target target;
  json metadata = json::object();
};

inline Problem load_problem(const std::string& path) {
  const json j = read_json_file(path);
  Problem p{target_from_json(j), j.value("metadata", json::object())};
  return p;
}

inline std::string problem_text(const Problem& p) {
  json j = target_to_json(p.target);
  j["metadata"] = p.metadata;
  j["digest"] = digest(p.target);
  return j.dump(2) + "\n";
}

inline void save_problem(const std::string& path, const Problem& p) { write_text_file(path, problem_text(p)); }

// ---------------------------------------------------------------- generator

/// ||f||^2 in the space whose spectrum is lambda (e^{-2} I(2) per dimension
/// for the reference space H_{2.1}): sum |f_w|^2 / lambda_w.
inline double rkhs_norm(const Target& t, double kernel_scale = 2.0) {
  if (const auto* m = std::get_if<KernelMixture>(&t))
    return m->rkhs_norm();
  // BesselSpectrumDistribution(s) has weights e^{-2s} I(2s), so s = scale/2.
  const BesselSpectrumDistribution lam(std::vector<double>(dim_of(t), 0.5 * kernel_scale), basis_of(t));
  double acc = 0.0;
  auto add = [&](const Frequency& w, double mag2) {
    const double l = lam.weight(w);
    if (!(l > 0.0))
      throw SpectrumOutOfReach();
    acc += mag2 / l;
  };
  if (const auto* p = std::get_if<TrigPoly>(&t))
    for (const auto& term : p->terms())
      add(term.freq, std::norm(term.coeff));
  else
    for (const auto& term : std::get<ChebPoly>(t).terms())
      add(term.freq, term.coeff * term.coeff);
  return std::sqrt(acc);
}

struct GenerateOptions {
  std::string kind = "trig_poly";
  std::size_t dim = 2;
  int degree = 3;          // |w|_inf <= degree
  double rho = 1.0;        // target norm
  std::size_t n_terms = 0; // 0: every frequency of the box
  std::size_t mixture_size = 8;
  double mixture_scale = 2.0;
  std::uint64_t seed = 0;
};

/// Random problem with norm exactly rho (up to rounding): gaussian
/// coefficients on the box, rescaled. For polynomials the norm is that of
/// H_{2.1}; mixtures use the Gram form of their own kernel.
inline Problem generate(const GenerateOptions& o) {
  if (!(o.rho > 0.0))
    throw std::invalid_argument("generate: rho must be positive");
  if (o.dim < 1 || o.degree < 0)
    throw std::invalid_argument("generate: need dim >= 1 and degree >= 0");
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  json meta{{"generator", o.kind}, {"seed", o.seed}, {"degree", o.degree}, {"rho", o.rho},
            {"norm_space", o.kind == "kernel_mixture" ? "mixture kernel" : "H_{2.1}"}};

  auto pick = [&](std::vector<Frequency> ws) {
    if (o.n_terms == 0 || o.n_terms >= ws.size())
      return ws;
    std::shuffle(ws.begin(), ws.end(), rng);
    ws.resize(o.n_terms);
    std::sort(ws.begin(), ws.end());
    return ws;
  };

  if (o.kind == "trig_poly") {
    std::vector<Frequency> ws;
    for_each_in_box(o.dim, o.degree, false, [&](const Frequency& w) {
      if (detail::is_half_representative(w))
        ws.push_back(w);
    });
    ws = pick(std::move(ws));
    std::vector<TrigPoly::Term> half;
    for (const auto& w : ws) {
      const double re = normal(rng);
      const double im = w.is_zero() ? 0.0 : normal(rng);
      half.push_back({w, {re, im}});
    }
    const double n0 = rkhs_norm(TrigPoly::from_half_spectrum(o.dim, half));
    for (auto& t : half)
      t.coeff *= o.rho / n0;
    TrigPoly p = TrigPoly::from_half_spectrum(o.dim, half);
    meta["stored_terms"] = half.size();
    meta["support"] = "half of {|w|_inf <= p}, one of each +-w pair";
    meta["rkhs_norm"] = rkhs_norm(p);
    return {p, meta};
  }
  if (o.kind == "cheb_poly") {
    std::vector<Frequency> ws;
    for_each_in_box(o.dim, o.degree, true, [&](const Frequency& w) { ws.push_back(w); });
    ws = pick(std::move(ws));
    std::vector<ChebPoly::Term> terms;
    for (const auto& w : ws)
      terms.push_back({w, normal(rng)});
    const double n0 = rkhs_norm(ChebPoly(o.dim, terms));
    for (auto& t : terms)
      t.coeff *= o.rho / n0;
    ChebPoly h(o.dim, terms);
    meta["stored_terms"] = terms.size();
    meta["support"] = "{0..p}^d";
    meta["rkhs_norm"] = rkhs_norm(h);
    return {h, meta};
  }
  if (o.kind == "kernel_mixture") {
    const auto m = static_cast<Eigen::Index>(o.mixture_size);
    if (m < 1)
      throw std::invalid_argument("generate: mixture size must be positive");
    Eigen::MatrixXd centers(m, static_cast<Eigen::Index>(o.dim));
    for (Eigen::Index i = 0; i < centers.size(); ++i)
      centers.data()[i] = uniform01(rng);
    Eigen::VectorXd w(m);
    for (Eigen::Index i = 0; i < m; ++i)
      w(i) = normal(rng);
    const KernelScale scale = KernelScale::uniform(o.dim, o.mixture_scale);
    const double n0 = KernelMixture(scale, centers, w).rkhs_norm();
    w *= o.rho / n0;
    KernelMixture h(scale, centers, w);
    meta.erase("degree");
    meta["mixture_size"] = o.mixture_size;
    meta["mixture_scale"] = o.mixture_scale;
    meta["rkhs_norm"] = h.rkhs_norm();
    return {h, meta};
  }
  throw std::invalid_argument("generate: unknown kind '" + o.kind + "'");
}

// ---------------------------------------------------------------- reports

inline json certificate_to_json(const Certificate& c) {
  return {{"c", hex(c.c)},
          {"epsilon", hex(c.epsilon)},
          {"lower_bound", hex(c.lower_bound())},
          {"delta", hex(c.delta)},
          {"n_samples", c.n_samples},
          {"n_unique", c.n_unique},
          {"estimator", c.estimator},
          {"estimate", hex(c.estimate)},
          {"deviation", hex(c.deviation)},
          {"norm_bound", hex(c.norm_bound)},
          {"norm_bound_exact_expansion", c.norm_exact},
          {"seed", c.seed},
          {"decimal",
           {{"c", c.c},
            {"epsilon", c.epsilon},
            {"lower_bound", c.lower_bound()},
            {"delta", c.delta},
            {"estimate", c.estimate},
            {"deviation", c.deviation},
            {"norm_bound", c.norm_bound}}}};
}

inline Certificate certificate_from_json(const json& j) {
  try {
    Certificate c;
    c.c = parse_number(j.at("c"));
    c.epsilon = parse_number(j.at("epsilon"));
    c.delta = parse_number(j.at("delta"));
    c.n_samples = j.at("n_samples").get<std::size_t>();
    c.n_unique = j.at("n_unique").get<std::size_t>();
    c.estimator = j.at("estimator").get<std::string>();
    c.estimate = parse_number(j.at("estimate"));
    c.deviation = parse_number(j.at("deviation"));
    c.norm_bound = parse_number(j.at("norm_bound"));
    c.norm_exact = j.at("norm_bound_exact_expansion").get<bool>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
  } catch (const InvalidFile&) {
    throw;
  } catch (const std::exception& e) {
    throw InvalidFile(std::string("certificate: ") + e.what());
  }
}

/// Fixed sweep schema; one row per configuration.
inline const char* kSweepCsvHeader =
    "problem_digest,rank,block_size,n_blocks,n_parameters,seed,N,delta,estimator,c,epsilon,estimate,deviation,"
    "bound,status,wall_ms_candidate,wall_ms_train,wall_ms_certify";

inline std::string csv_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace certopt::io

#endif  // CERTOPT_IO_HPP_
