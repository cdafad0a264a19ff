// Command-line front end. Kept in a header so tests can drive it in-process.
//
//   certopt generate --kind trig_poly --dim 3 --degree 5 --rho 1 -o f.json
//   certopt certify f.json --shape 4:32:8 --samples 1000000 -o report.json
//   certopt oracle f.json --grid 256
//   certopt sweep f.json --shapes 1:8:1,2:16:2 --samples 1000,10000 --seeds 3 -o sweep.csv
//
// Exit codes: 0 ok, 2 unreadable/invalid problem file, 3 spectrum out of
// reach of the model kernel, 1 anything else.

#ifndef CERTOPT_CLI_HPP_
#define CERTOPT_CLI_HPP_

#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "certopt/io.hpp"
#include "certopt/oracle.hpp"
#include "certopt/pipeline.hpp"

namespace certopt::cli {

inline constexpr const char* kVersion = "certopt 0.1.0";

enum ExitCode { kOk = 0, kFailure = 1, kInvalidFile = 2, kOutOfReach = 3 };

using io::json;

/// "r:s:b" -> shape.
inline ModelShape parse_shape(const std::string& s) {
  ModelShape m;
  char c1 = 0, c2 = 0;
  std::istringstream in(s);
  if (!(in >> m.rank >> c1 >> m.block_size >> c2 >> m.n_blocks) || c1 != ':' || c2 != ':' || !in.eof() ||
      m.rank < 1 || m.block_size < 1 || m.n_blocks < 1)
    throw CLI::ValidationError("shape", "expected rank:block_size:n_blocks with positive entries, got '" + s + "'");
  return m;
}

inline std::string shape_string(const ModelShape& m) {
  return std::to_string(m.rank) + ":" + std::to_string(m.block_size) + ":" + std::to_string(m.n_blocks);
}

inline Estimator parse_estimator(const std::string& s) {
  if (s == "mom")
    return Estimator::mom;
  if (s == "cheby")
    return Estimator::chebyshev;
  return Estimator::both;
}

struct Options {
  // shared
  std::string problem;
  std::string output;
  std::uint64_t seed = 0;
  int threads = 1;
  // generate
  io::GenerateOptions gen;
  // certify / sweep
  std::string shape = "4:32:8";
  int n_starts = 64;
  int candidate_iters = 2000;
  TrainConfig train;
  double delta = std::exp(-4.0);
  double samples = 1e6;
  std::string estimator = "mom";
  bool union_bound = false;
  // oracle
  std::size_t grid = 0;
  bool force = false;
  // sweep
  std::vector<std::string> shapes;
  std::vector<double> sweep_samples;
  int n_seeds = 1;
};

inline void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-")
    out << text;
  else
    io::write_text_file(path, text);
}

inline std::size_t sample_count(double v) {
  if (!(v >= 1.0) || v > 1e12 || v != std::floor(v))
    throw CLI::ValidationError("--samples", "sample counts must be positive integers");
  return static_cast<std::size_t>(v);
}

inline PipelineConfig pipeline_config(const Options& o, const ModelShape& shape, std::uint64_t seed, std::size_t n) {
  PipelineConfig pc;
  pc.n_starts = o.n_starts;
  pc.candidate_iters = o.candidate_iters;
  pc.train = o.train;
  pc.train.shape = shape;
  pc.train.threads = o.threads;
  pc.certify.delta = o.delta;
  pc.certify.n_samples = n;
  pc.certify.estimator = parse_estimator(o.estimator);
  pc.certify.union_bound = o.union_bound;
  pc.certify.threads = o.threads;
  pc.seed = seed;
  return pc;
}

inline json config_json(const PipelineConfig& pc) {
  const TrainConfig& t = pc.train;
  return {{"n_starts", pc.n_starts},
          {"candidate_iters", pc.candidate_iters},
          {"shape", shape_string(t.shape)},
          {"kernel_scale", io::hex(t.scale)},
          {"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"lr", io::hex(t.lr)},
          {"lr_final", io::hex(t.lr_final)},
          {"momentum", io::hex(t.momentum)},
          {"tau", io::hex(t.tau)},
          {"reg", io::hex(t.reg)},
          {"learn_c", t.learn_c},
          {"threads", t.threads},
          {"delta", io::hex(pc.certify.delta)},
          {"samples", pc.certify.n_samples},
          {"estimator", to_string(pc.certify.estimator)},
          {"union_bound", pc.certify.union_bound}};
}

inline json report_json(const std::string& digest, const PipelineConfig& pc, const PipelineResult& r) {
  json cand{{"x", io::hex_array(r.candidate.x)},
            {"c", io::hex(r.candidate.c)},
            {"decimal", {{"x", r.candidate.x}, {"c", r.candidate.c}}}};
  json training = nullptr;
  if (r.training)
    training = {{"best_validation_max_residual", r.training->best_validation},
                {"initial_validation_max_residual", r.training->initial_validation},
                {"best_epoch", r.training->best_epoch},
                {"lr_halvings", r.training->lr_halvings}};
  return {{"format", "certopt-report"},
          {"version", kVersion},
          {"problem_digest", digest},
          {"candidate", cand},
          {"model", {{"shape", shape_string(r.model.shape())}, {"n_parameters", r.model.n_parameters()}}},
          {"training", training},
          {"certificate", io::certificate_to_json(r.certificate)},
          {"seeds",
           {{"seed", pc.seed},
            {"candidate", r.seeds.candidate},
            {"train", r.seeds.train},
            {"certify", r.seeds.certify}}},
          {"config", config_json(pc)},
          {"timings_ms",
           {{"candidate", r.timings.candidate_ms}, {"train", r.timings.train_ms}, {"certify", r.timings.certify_ms}}}};
}

inline int cmd_generate(const Options& o, std::ostream& out) {
  io::GenerateOptions g = o.gen;
  g.seed = o.seed;
  emit(o.output, io::problem_text(io::generate(g)), out);
  return kOk;
}

inline int cmd_certify(const Options& o, std::ostream& out) {
  const io::Problem p = io::load_problem(o.problem);
  const PipelineConfig pc = pipeline_config(o, parse_shape(o.shape), o.seed, sample_count(o.samples));
  const PipelineResult r = run_pipeline(p.target, pc);
  emit(o.output, report_json(io::digest(p.target), pc, r).dump(2) + "\n", out);
  return kOk;
}

inline int cmd_oracle(const Options& o, std::ostream& out) {
  const io::Problem p = io::load_problem(o.problem);
  const std::size_t d = dim_of(p.target);
  if (d > 3 && !o.force)
    throw std::invalid_argument("oracle: refusing a dense grid in dimension " + std::to_string(d) +
                                " (pass --force to override)");
  std::size_t n = o.grid;
  if (n == 0)
    n = d == 1 ? 65536 : d == 2 ? 1024 : 128;
  const GridMinimum m = grid_minimize(p.target, n, o.threads);
  const json j{{"format", "certopt-oracle"},
               {"version", kVersion},
               {"problem_digest", io::digest(p.target)},
               {"points_per_dim", m.points_per_dim},
               {"x", io::hex_array(m.x)},
               {"value", io::hex(m.value)},
               {"slack", io::hex(m.slack)},
               {"lower_bound", io::hex(m.value - m.slack)},
               {"decimal", {{"x", m.x}, {"value", m.value}, {"slack", m.slack}}}};
  emit(o.output, j.dump(2) + "\n", out);
  return kOk;
}

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos)
    return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"')
      q += '"';
    q += ch == '\n' ? ' ' : ch;
  }
  return q + "\"";
}

/// One row per (shape, seed, N). Training is shared by every N of a
/// (shape, seed) pair and the candidate by every shape of a seed. Failures
/// are written as rows with status "error: ..." and the sweep goes on.
inline int cmd_sweep(const Options& o, std::ostream& out) {
  const io::Problem p = io::load_problem(o.problem);
  const std::string dig = io::digest(p.target);
  std::vector<ModelShape> shapes;
  for (const auto& s : o.shapes.empty() ? std::vector<std::string>{o.shape} : o.shapes)
    shapes.push_back(parse_shape(s));
  std::vector<std::size_t> ns;
  for (double v : o.sweep_samples.empty() ? std::vector<double>{o.samples} : o.sweep_samples)
    ns.push_back(sample_count(v));

  std::ostringstream csv;
  csv << io::kSweepCsvHeader << "\n";
  auto row = [&](const ModelShape& sh, std::uint64_t seed, std::size_t n, const Certificate* cert,
                 const PipelineTimings& t, const std::string& status) {
    const std::size_t params =
        static_cast<std::size_t>(sh.rank + static_cast<int>(dim_of(p.target))) * sh.block_size * sh.n_blocks;
    csv << dig << ',' << sh.rank << ',' << sh.block_size << ',' << sh.n_blocks << ',' << params << ',' << seed << ','
        << n << ',' << io::csv_number(o.delta) << ',' << o.estimator << ',';
    if (cert)
      csv << io::csv_number(cert->c) << ',' << io::csv_number(cert->epsilon) << ',' << io::csv_number(cert->estimate)
          << ',' << io::csv_number(cert->deviation) << ',' << io::csv_number(cert->norm_bound) << ',';
    else
      csv << ",,,,,";
    csv << csv_quote(status) << ',' << io::csv_number(t.candidate_ms) << ',' << io::csv_number(t.train_ms) << ','
        << io::csv_number(t.certify_ms) << "\n";
  };

  int failures = 0;
  for (int k = 0; k < o.n_seeds; ++k) {
    const std::uint64_t seed = o.seed + static_cast<std::uint64_t>(k);
    const PhaseSeeds ps = phase_seeds(seed);
    CandidateResult cand;
    const PipelineConfig base = pipeline_config(o, shapes.front(), seed, ns.front());
    const double cand_ms =
        detail::time_ms([&] { cand = find_candidate(p.target, base.n_starts, base.candidate_iters, ps.candidate); });
    for (const auto& sh : shapes) {
      std::optional<PipelineResult> trained;
      PipelineTimings tt;
      tt.candidate_ms = cand_ms;
      std::string train_error;
      for (std::size_t n : ns) {
        const PipelineConfig pc = pipeline_config(o, sh, seed, n);
        try {
          if (!trained && train_error.empty()) {
            trained = certify_from_candidate(p.target, cand, pc);
            tt.train_ms = trained->timings.train_ms;
            tt.certify_ms = trained->timings.certify_ms;
            row(sh, seed, n, &trained->certificate, tt, "ok");
            continue;
          }
          if (!train_error.empty())
            throw std::runtime_error(train_error);
          CertifyOptions co = pc.certify;
          co.seed = ps.certify;
          Certificate cert;
          tt.certify_ms = detail::time_ms([&] { cert = certify(p.target, trained->certificate.c, trained->model, co); });
          row(sh, seed, n, &cert, tt, "ok");
        } catch (const std::exception& e) {
          ++failures;
          if (!trained)
            train_error = e.what();
          row(sh, seed, n, nullptr, tt, std::string("error: ") + e.what());
        }
      }
    }
  }
  emit(o.output, csv.str(), out);
  return failures == 0 ? kOk : kFailure;
}

inline void add_certify_flags(CLI::App* sub, Options& o) {
  sub->add_option("problem", o.problem, "problem file (JSON)")->required();
  sub->add_option("--shape", o.shape, "model shape rank:block_size:n_blocks")->capture_default_str();
  sub->add_option("--kernel-scale", o.train.scale, "kernel parameter s of the model")->capture_default_str();
  sub->add_option("--starts", o.n_starts, "candidate search restarts")->capture_default_str();
  sub->add_option("--candidate-iters", o.candidate_iters, "iterations per restart")->capture_default_str();
  sub->add_option("--epochs", o.train.epochs)->capture_default_str();
  sub->add_option("--batch", o.train.batch_size)->capture_default_str();
  sub->add_option("--lr", o.train.lr)->capture_default_str();
  sub->add_option("--lr-final", o.train.lr_final)->capture_default_str();
  sub->add_option("--momentum", o.train.momentum)->capture_default_str();
  sub->add_option("--tau", o.train.tau, "log-sum-exp temperature")->capture_default_str();
  sub->add_option("--reg", o.train.reg)->capture_default_str();
  sub->add_flag("--learn-c", o.train.learn_c, "train the offset c together with the model");
  sub->add_option("--delta", o.delta, "failure probability (default e^-4)");
  sub->add_option("--estimator", o.estimator)
      ->check(CLI::IsMember({"mom", "cheby", "both"}))
      ->capture_default_str();
  sub->add_flag("--union-bound", o.union_bound, "with --estimator both, run each at delta/2");
}

/// Runs the CLI; argv[0] is the program name.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  Options o;
  CLI::App app{"Certified lower bounds for smooth periodic and box-constrained functions", "certopt"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "master seed")->envname("CERTOPT_SEED")->capture_default_str();
    sub->add_option("--threads", o.threads)->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("-o,--output", o.output, "output file (default stdout)");
  };

  auto* gen = app.add_subcommand("generate", "write a random problem of prescribed norm");
  add_common(gen);
  gen->add_option("--kind", o.gen.kind)
      ->check(CLI::IsMember({"trig_poly", "cheb_poly", "kernel_mixture"}))
      ->capture_default_str();
  gen->add_option("--dim", o.gen.dim)->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--degree", o.gen.degree, "max |w|_inf")->check(CLI::NonNegativeNumber)->capture_default_str();
  gen->add_option("--rho", o.gen.rho, "target norm")->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--terms", o.gen.n_terms, "random subset of the box (0: all)")->capture_default_str();
  gen->add_option("--mixture-size", o.gen.mixture_size)->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--mixture-scale", o.gen.mixture_scale)->check(CLI::PositiveNumber)->capture_default_str();

  auto* cert = app.add_subcommand("certify", "candidate, training and certificate; writes a JSON report");
  add_common(cert);
  add_certify_flags(cert, o);
  cert->add_option("--samples", o.samples, "number of sampled frequencies N")->capture_default_str();

  auto* orc = app.add_subcommand("oracle", "dense grid minimum with rigorous slack");
  add_common(orc);
  orc->add_option("problem", o.problem)->required();
  orc->add_option("--grid", o.grid, "points per dimension (default depends on d)");
  orc->add_flag("--force", o.force, "allow d > 3");

  auto* sw = app.add_subcommand("sweep", "certify over shapes, N values and seeds; writes CSV");
  add_common(sw);
  add_certify_flags(sw, o);
  sw->add_option("--shapes", o.shapes, "list of rank:block_size:n_blocks")->delimiter(',');
  sw->add_option("--samples", o.sweep_samples, "list of N values")->delimiter(',');
  sw->add_option("--seeds", o.n_seeds, "seeds seed .. seed+k-1")->check(CLI::PositiveNumber)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }
  if (!(o.delta > 0.0 && o.delta < 1.0)) {
    err << "error: --delta must lie in (0, 1)\n";
    return kFailure;
  }
  o.train.threads = o.threads;

  try {
    if (*gen)
      return cmd_generate(o, out);
    if (*cert)
      return cmd_certify(o, out);
    if (*orc)
      return cmd_oracle(o, out);
    return cmd_sweep(o, out);
  } catch (const io::InvalidFile& e) {
    err << "error: invalid problem file: " << e.what() << "\n";
    return kInvalidFile;
  } catch (const SpectrumOutOfReach& e) {
    err << "error: " << e.what() << "\n";
    return kOutOfReach;
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace certopt::cli

#endif  // CERTOPT_CLI_HPP_
