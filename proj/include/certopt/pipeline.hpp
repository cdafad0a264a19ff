// End-to-end run: candidate search, model training, certificate.

#ifndef CERTOPT_PIPELINE_HPP_
#define CERTOPT_PIPELINE_HPP_

#include <chrono>
#include <cstdint>
#include <optional>
#include <random>
#include <variant>

#include "certopt/certifier.hpp"
#include "certopt/target.hpp"
#include "certopt/trainer.hpp"

namespace certopt {

struct PipelineConfig {
  int n_starts = 64;
  int candidate_iters = 2000;
  TrainConfig train{};
  CertifyOptions certify{};
  std::uint64_t seed = 0;
};

/// Independent streams for each phase, derived from one seed.
struct PhaseSeeds {
  std::uint64_t candidate = 0;
  std::uint64_t train = 0;
  std::uint64_t certify = 0;
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline PhaseSeeds phase_seeds(std::uint64_t seed) {
  std::uint64_t st = seed;
  PhaseSeeds s;
  s.candidate = splitmix64(st);
  s.train = splitmix64(st);
  s.certify = splitmix64(st);
  return s;
}

struct PipelineTimings {
  double candidate_ms = 0.0;
  double train_ms = 0.0;
  double certify_ms = 0.0;
};

struct PipelineResult {
  CandidateResult candidate;
  KSoSModel model;
  std::optional<TrainResult> training;  // empty for constant targets
  Certificate certificate;
  PhaseSeeds seeds;
  PipelineTimings timings;
};

/// True when the target has no non-constant part.
inline bool is_constant(const Target& f) {
  if (const auto* p = std::get_if<TrigPoly>(&f)) {
    for (const auto& t : p->terms())
      if (!t.freq.is_zero() && t.coeff != Complex(0.0, 0.0))
        return false;
    return true;
  }
  if (const auto* h = std::get_if<ChebPoly>(&f)) {
    for (const auto& t : h->terms())
      if (!t.freq.is_zero() && t.coeff != 0.0)
        return false;
    return true;
  }
  return std::get<KernelMixture>(f).weights().isZero(0.0);
}

/// A model of the requested shape that is identically zero.
inline KSoSModel zero_model(Basis basis, std::size_t dim, const TrainConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  KSoSModel g = initial_model(basis, KernelScale::uniform(dim, cfg.scale), cfg.shape, 0.0, rng);
  return g;
}

namespace detail {

template <class Fn>
double time_ms(Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Train on `f` with a candidate already in hand, then certify.
inline PipelineResult certify_from_candidate(const Target& f, const CandidateResult& cand, const PipelineConfig& cfg,
                                             const KSoSModel* init = nullptr) {
  const PhaseSeeds seeds = phase_seeds(cfg.seed);
  PipelineTimings timings;
  TrainConfig tc = cfg.train;
  tc.seed = seeds.train;
  std::optional<TrainResult> training;
  double c = cand.c;
  if (!is_constant(f)) {
    timings.train_ms = detail::time_ms([&] { training = train_model(f, cand.c, tc, init); });
    c = training->best_c;
  }
  KSoSModel model = training ? training->best_model : zero_model(basis_of(f), dim_of(f), tc);
  CertifyOptions co = cfg.certify;
  co.seed = seeds.certify;
  Certificate cert;
  timings.certify_ms = detail::time_ms([&] { cert = certify(f, c, model, co); });
  return PipelineResult{cand, std::move(model), std::move(training), cert, seeds, timings};
}

inline PipelineResult run_pipeline(const Target& f, const PipelineConfig& cfg) {
  const PhaseSeeds seeds = phase_seeds(cfg.seed);
  CandidateResult cand;
  const double ms = detail::time_ms([&] { cand = find_candidate(f, cfg.n_starts, cfg.candidate_iters, seeds.candidate); });
  PipelineResult out = certify_from_candidate(f, cand, cfg);
  out.timings.candidate_ms = ms;
  return out;
}

}  // namespace certopt

#endif  // CERTOPT_PIPELINE_HPP_
