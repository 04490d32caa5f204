// sbe — stochastic Burgers equation simulator.
//
// Subcommands:
//   simulate     one trajectory, optional field snapshots at requested times
//   convergence  Monte Carlo strong-error study over a ladder of step sizes
//   noise-check  sampled stochastic-convolution statistics against the
//                closed-form variance oracle, optional raw noise dump
//   gallery      endpoint snapshots across Hurst parameters with a
//                roughness proxy (discrete H1 seminorm)
//
// Configuration comes from an optional `key = value` file (--config) with
// explicit flags overriding file values.  Every run with --out writes a
// manifest of the fully resolved configuration; re-running from that
// manifest reproduces all CSV outputs bit-identically.
//
// Exit codes: 0 success, 1 configuration/validation error, 2 numerical error.

#include "CLI11.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sbe/config.hpp"
#include "sbe/errors.hpp"
#include "sbe/experiments.hpp"
#include "sbe/fgn.hpp"
#include "sbe/io.hpp"
#include "sbe/manifest.hpp"
#include "sbe/scheme.hpp"
#include "sbe/spectral.hpp"
#include "sbe/stochconv.hpp"
#include "sbe/version.hpp"

namespace {

struct FlagSet {
  std::string config, h, n_modes, m_steps, taus, tau_ref, paths, rho, theta, refine, seed,
      out, mode, samples;
  bool full_scale = false;
  bool dump_fgn = false;
  std::map<std::string, CLI::Option*> opts;

  bool given(const std::string& flag) const {
    const auto it = opts.find(flag);
    return it != opts.end() && it->second->count() > 0;
  }
};

void add_common_flags(CLI::App* cmd, FlagSet& f) {
  // The Hurst flag is literally --h, so help must not claim -h.
  cmd->set_help_flag("--help", "print this help message and exit");
  f.opts["--config"] = cmd->add_option("--config", f.config, "read `key = value` config file");
  f.opts["--h"] = cmd->add_option("--h", f.h, "Hurst parameter(s) in (1/2, 1)");
  f.opts["--n-modes"] = cmd->add_option("--n-modes", f.n_modes, "Galerkin modes N");
  f.opts["--m-steps"] = cmd->add_option("--m-steps", f.m_steps, "time steps M");
  f.opts["--rho"] = cmd->add_option("--rho", f.rho, "taming norm exponent");
  f.opts["--theta"] = cmd->add_option("--theta", f.theta, "taming step exponent");
  f.opts["--refine"] = cmd->add_option("--refine", f.refine, "noise substeps per step");
  f.opts["--seed"] = cmd->add_option("--seed", f.seed, "master seed");
  f.opts["--out"] = cmd->add_option("--out", f.out, "output directory");
}

// Resolution order: built-in defaults, then the --full-scale preset, then the
// config file, then explicit flags.  Unknown file keys are rejected so typos
// cannot silently fall back to defaults.
sbe::Config resolve_config(const std::string& command,
                           const std::vector<std::pair<std::string, std::string>>& defaults,
                           const std::vector<std::pair<std::string, std::string>>& preset,
                           const FlagSet& f) {
  sbe::Config cfg;
  cfg.set("command", command);
  std::set<std::string> allowed;
  for (const auto& [key, value] : defaults) {
    cfg.set(key, value);
    allowed.insert(key);
  }
  if (f.full_scale)
    for (const auto& [key, value] : preset) cfg.set(key, value);
  if (!f.config.empty()) {
    const sbe::Config file = sbe::parse_config_file(f.config);
    for (const sbe::ConfigEntry& e : file.entries()) {
      if (e.key == "command") {
        if (e.value != command)
          throw sbe::ConfigError("config file was written for subcommand `" + e.value +
                                 "`, re-run it with that subcommand, not `" + command + "`");
        continue;
      }
      if (!allowed.contains(e.key) && e.key != "h")
        throw sbe::ConfigError("unknown config key: " + e.key);
      cfg.set(e.key, e.value);
    }
  }
  const std::vector<std::pair<std::string, std::string>> flag_keys = {
      {"--h", "h"},           {"--n-modes", "n_modes"}, {"--m-steps", "m_steps"},
      {"--taus", "taus"},     {"--tau-ref", "tau_ref"}, {"--paths", "paths"},
      {"--rho", "rho"},       {"--theta", "theta"},     {"--refine", "refine"},
      {"--seed", "seed"},     {"--out", "out"},         {"--mode", "mode"},
      {"--samples", "samples"}};
  const std::map<std::string, const std::string*> values = {
      {"--h", &f.h},           {"--n-modes", &f.n_modes}, {"--m-steps", &f.m_steps},
      {"--taus", &f.taus},     {"--tau-ref", &f.tau_ref}, {"--paths", &f.paths},
      {"--rho", &f.rho},       {"--theta", &f.theta},     {"--refine", &f.refine},
      {"--seed", &f.seed},     {"--out", &f.out},         {"--mode", &f.mode},
      {"--samples", &f.samples}};
  for (const auto& [flag, key] : flag_keys)
    if (f.given(flag)) cfg.set(key, *values.at(flag));
  if (f.given("--dump-fgn")) cfg.set("dump_fgn", "1");
  return cfg;
}

double require_single_h(const sbe::Config& cfg) {
  if (!cfg.has("h"))
    throw sbe::ConfigError(
        "H is required: pass --h <value> with 1/2 < H < 1, or set `h = <value>` in the "
        "config file");
  const std::vector<double> hs = sbe::get_number_list(cfg, "h", {});
  if (hs.size() != 1)
    throw sbe::ConfigError("this subcommand takes exactly one H, got " +
                           std::to_string(hs.size()));
  sbe::HurstParameter check{hs[0]};
  return hs[0];
}

std::string join_numbers(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += sbe::format_g17(values[i]);
  }
  return out;
}

struct OutputTracker {
  std::filesystem::path root;
  sbe::ManifestExtra extra;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  bool enabled() const { return !root.empty(); }

  void record(const std::filesystem::path& file) {
    extra.checksums.emplace_back(
        std::filesystem::relative(file, root).generic_string(), sbe::checksum_file(file));
  }

  void finish(const sbe::Config& resolved) {
    if (!enabled()) return;
    extra.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    sbe::write_manifest(root / "manifest.txt", resolved, extra);
    std::printf("wrote %s\n", (root / "manifest.txt").string().c_str());
  }
};

// ---------------------------------------------------------------- simulate

void run_simulate(const FlagSet& f) {
  sbe::Config cfg = resolve_config(
      "simulate",
      {{"n_modes", "128"},
       {"m_steps", "256"},
       {"T", "1"},
       {"rho", "0.375"},
       {"theta", "0.0625"},
       {"refine", "4"},
       {"seed", "1"},
       {"snapshot_times", ""},
       {"snapshot_points", "256"},
       {"out", ""}},
      {}, f);

  const double hurst = require_single_h(cfg);
  const auto modes = static_cast<Eigen::Index>(sbe::get_integer(cfg, "n_modes", 128));
  const auto steps = static_cast<Eigen::Index>(sbe::get_integer(cfg, "m_steps", 256));
  const double horizon = sbe::get_number(cfg, "T", 1.0);
  const double rho = sbe::get_number(cfg, "rho", 0.375);
  const double theta = sbe::get_number(cfg, "theta", 0.0625);
  const auto refine = static_cast<Eigen::Index>(sbe::get_integer(cfg, "refine", 4));
  const std::uint64_t seed = sbe::get_seed(cfg, "seed", 1);
  const auto snapshot_points =
      static_cast<Eigen::Index>(sbe::get_integer(cfg, "snapshot_points", 256));
  std::vector<double> snap_times;
  if (!sbe::get_string(cfg, "snapshot_times", "").empty())
    snap_times = sbe::get_number_list(cfg, "snapshot_times", {});
  else
    snap_times = {horizon};
  const std::string out = sbe::get_string(cfg, "out", "");

  const sbe::SchemeConfig<double> scheme(modes, steps, horizon, rho, theta, refine, seed,
                                         true);
  if (snapshot_points < modes)
    throw sbe::ConfigError("snapshot_points must satisfy snapshot_points >= n_modes");
  const double tau = scheme.tau();
  const double delta = tau / static_cast<double>(refine);
  for (const double t : snap_times) {
    if (!(t >= 0.0 && t <= horizon + 1e-9 * horizon))
      throw sbe::ConfigError("snapshot times must satisfy 0 <= t <= T");
    const double q = t / delta;
    if (std::abs(q - std::llround(q)) > 1e-9 * std::max(q, 1.0))
      throw sbe::ConfigError("snapshot times must lie on the fine noise grid (step " +
                             sbe::format_g17(delta) + ")");
  }

  OutputTracker tracker;
  tracker.root = out;

  const sbe::HurstParameter h{hurst};
  const sbe::FgnGrid<double> noise =
      sbe::sample_fgn<double>(modes, steps * refine, delta, h, seed, 0);
  const sbe::SpectralField<double> u0 = sbe::default_initial_condition();

  std::vector<sbe::SchemeState<double>> states;
  states.reserve(static_cast<std::size_t>(steps) + 1);
  const sbe::SchemeState<double> final_state = sbe::run<double>(
      scheme, u0, noise, [&](const sbe::SchemeState<double>& s) { states.push_back(s); });

  std::printf("simulate: H=%g N=%ld M=%ld T=%g seed=%llu\n", hurst, long(modes), long(steps),
              horizon, static_cast<unsigned long long>(seed));
  std::printf("  final ||u||_L2 = %.6g, final taming factor = %.6g\n",
              sbe::lp_norm(final_state.v, 2.0), final_state.taming);

  if (tracker.enabled()) {
    std::string csv = "t,x,u\n";
    const Eigen::VectorXd xs = sbe::collocation_points<double>(snapshot_points);
    for (const double t : snap_times) {
      const auto m = static_cast<Eigen::Index>(std::floor(t / tau + 1e-12));
      const Eigen::Index base = std::min(m, steps);
      sbe::SpectralField<double> field;
      const double dt = t - static_cast<double>(base) * tau;
      if (std::abs(dt) <= 1e-9 * tau)
        field = states[static_cast<std::size_t>(base)].v;
      else
        field = sbe::interpolate(states[static_cast<std::size_t>(base)], scheme, noise, t);
      const sbe::CollocationField<double> g = sbe::collocate(field, snapshot_points);
      csv += sbe::format_g17(t) + ",0,0\n";
      for (Eigen::Index i = 0; i < snapshot_points; ++i)
        csv += sbe::format_g17(t) + "," + sbe::format_g17(xs[i]) + "," +
               sbe::format_g17(g.values[i]) + "\n";
      csv += sbe::format_g17(t) + ",1,0\n";
    }
    const std::filesystem::path file = tracker.root / "snapshots" / "trajectory.csv";
    sbe::write_file(file, csv);
    tracker.record(file);
    std::printf("wrote %s\n", file.string().c_str());
  }

  sbe::Config resolved;
  resolved.set("command", "simulate");
  resolved.set("h", sbe::format_g17(hurst));
  resolved.set("n_modes", std::to_string(modes));
  resolved.set("m_steps", std::to_string(steps));
  resolved.set("T", sbe::format_g17(horizon));
  resolved.set("rho", sbe::format_g17(rho));
  resolved.set("theta", sbe::format_g17(theta));
  resolved.set("refine", std::to_string(refine));
  resolved.set("seed", std::to_string(seed));
  resolved.set("snapshot_times", join_numbers(snap_times));
  resolved.set("snapshot_points", std::to_string(snapshot_points));
  resolved.set("out", out);
  tracker.finish(resolved);
}

// -------------------------------------------------------------- convergence

void run_convergence(const FlagSet& f) {
  sbe::Config cfg = resolve_config(
      "convergence",
      {{"h", "0.6,0.7,0.9"},
       {"taus", "1/4,1/8,1/16,1/32"},
       {"tau_ref", "1/512"},
       {"n_modes", "128"},
       {"paths", "200"},
       {"T", "1"},
       {"rho", "0.375"},
       {"theta", "0.0625"},
       {"refine", "4"},
       {"seed", "1"},
       {"threads", "0"},
       {"out", ""}},
      {{"tau_ref", "1/1024"}, {"n_modes", "1000"}, {"paths", "1000"}}, f);

  sbe::StudyConfig study;
  study.hursts = sbe::get_number_list(cfg, "h", study.hursts);
  study.taus = sbe::get_number_list(cfg, "taus", study.taus);
  study.tau_ref = sbe::get_number(cfg, "tau_ref", study.tau_ref);
  study.modes = static_cast<Eigen::Index>(sbe::get_integer(cfg, "n_modes", study.modes));
  study.paths = static_cast<Eigen::Index>(sbe::get_integer(cfg, "paths", study.paths));
  study.horizon = sbe::get_number(cfg, "T", study.horizon);
  study.rho = sbe::get_number(cfg, "rho", study.rho);
  study.theta = sbe::get_number(cfg, "theta", study.theta);
  study.noise_refine = static_cast<int>(sbe::get_integer(cfg, "refine", study.noise_refine));
  study.seed = sbe::get_seed(cfg, "seed", study.seed);
  study.threads = static_cast<int>(sbe::get_integer(cfg, "threads", 0));
  study.out = sbe::get_string(cfg, "out", "");
  study.validate();

  OutputTracker tracker;
  tracker.root = study.out;

  const sbe::ErrorTable table = sbe::convergence_study(study);

  std::printf("%8s %12s %14s %10s %14s\n", "H", "tau", "error", "rate", "mc_stderr");
  for (const sbe::ErrorRow& row : table.rows) {
    if (std::isnan(row.rate))
      std::printf("%8.3g %12.6g %14.6e %10s %14.3e\n", row.hurst, row.tau, row.error, "-",
                  row.mc_stderr);
    else
      std::printf("%8.3g %12.6g %14.6e %10.3f %14.3e\n", row.hurst, row.tau, row.error,
                  row.rate, row.mc_stderr);
  }

  if (tracker.enabled()) {
    tracker.record(tracker.root / "errors.csv");
    std::printf("wrote %s\n", (tracker.root / "errors.csv").string().c_str());
  }

  sbe::Config resolved;
  resolved.set("command", "convergence");
  resolved.set("h", join_numbers(study.hursts));
  resolved.set("taus", join_numbers(study.taus));
  resolved.set("tau_ref", sbe::format_g17(study.tau_ref));
  resolved.set("n_modes", std::to_string(study.modes));
  resolved.set("paths", std::to_string(study.paths));
  resolved.set("T", sbe::format_g17(study.horizon));
  resolved.set("rho", sbe::format_g17(study.rho));
  resolved.set("theta", sbe::format_g17(study.theta));
  resolved.set("refine", std::to_string(study.noise_refine));
  resolved.set("seed", std::to_string(study.seed));
  resolved.set("threads", std::to_string(study.threads));
  resolved.set("out", study.out);
  tracker.finish(resolved);
}

// -------------------------------------------------------------- noise-check

void run_noise_check(const FlagSet& f) {
  sbe::Config cfg = resolve_config("noise-check",
                                   {{"mode", "1"},
                                    {"samples", "1000"},
                                    {"m_steps", "8"},
                                    {"T", "1"},
                                    {"refine", "64"},
                                    {"seed", "1"},
                                    {"dump_fgn", "0"},
                                    {"out", ""}},
                                   {}, f);

  const double hurst = require_single_h(cfg);
  const auto mode = static_cast<Eigen::Index>(sbe::get_integer(cfg, "mode", 1));
  const auto samples = static_cast<Eigen::Index>(sbe::get_integer(cfg, "samples", 1000));
  const auto steps = static_cast<Eigen::Index>(sbe::get_integer(cfg, "m_steps", 8));
  const double horizon = sbe::get_number(cfg, "T", 1.0);
  const auto refine = static_cast<Eigen::Index>(sbe::get_integer(cfg, "refine", 64));
  const std::uint64_t seed = sbe::get_seed(cfg, "seed", 1);
  const bool dump = sbe::get_integer(cfg, "dump_fgn", 0) != 0;
  const std::string out = sbe::get_string(cfg, "out", "");

  if (mode < 1) throw sbe::ConfigError("mode must satisfy mode >= 1");
  if (samples < 2) throw sbe::ConfigError("samples must satisfy samples >= 2");
  if (steps < 1) throw sbe::ConfigError("m_steps must satisfy m_steps >= 1");
  if (!(horizon > 0)) throw sbe::ConfigError("T must satisfy T > 0");
  if (refine < 1) throw sbe::ConfigError("refine must satisfy refine >= 1");

  OutputTracker tracker;
  tracker.root = out;

  const sbe::HurstParameter h{hurst};
  const double tau = horizon / static_cast<double>(steps);
  const double delta = tau / static_cast<double>(refine);
  const Eigen::Index count = steps * refine;
  const sbe::CirculantEmbedding<double> emb = sbe::prepare_circulant<double>(count, delta, h);
  const Eigen::VectorXd lambdas = sbe::laplacian_eigenvalues<double>(mode);
  const sbe::ConvolutionWeights<double> weights =
      sbe::make_convolution_weights<double>(lambdas, tau, refine);

  std::vector<long double> sum(static_cast<std::size_t>(steps), 0.0L);
  std::vector<long double> sumsq(static_cast<std::size_t>(steps), 0.0L);
  for (Eigen::Index s = 0; s < samples; ++s) {
    const sbe::FgnGrid<double> grid =
        sbe::sample_fgn(emb, mode, seed, static_cast<std::uint64_t>(s));
    sbe::ConvolutionState<double> state = sbe::zero_convolution<double>(mode);
    for (Eigen::Index j = 0; j < steps; ++j) {
      state = sbe::step_convolution(state, grid.increments.block(0, j * refine, mode, refine),
                                    weights);
      const long double x = state.values[mode - 1];
      sum[static_cast<std::size_t>(j)] += x;
      sumsq[static_cast<std::size_t>(j)] += x * x;
    }
  }

  std::string csv = "mode,t,empirical_var,oracle_var,ratio\n";
  std::printf("%6s %10s %16s %16s %10s\n", "mode", "t", "empirical_var", "oracle_var",
              "ratio");
  double worst = 0.0;
  const double lambda = lambdas[mode - 1];
  for (Eigen::Index j = 0; j < steps; ++j) {
    const double t = static_cast<double>(j + 1) * tau;
    const auto n = static_cast<long double>(samples);
    const long double mean = sum[static_cast<std::size_t>(j)] / n;
    const double emp = static_cast<double>(
        (sumsq[static_cast<std::size_t>(j)] - n * mean * mean) / (n - 1.0L));
    const double oracle = sbe::convolution_variance_oracle(lambda, t, h);
    const double ratio = emp / oracle;
    worst = std::max(worst, std::abs(ratio - 1.0));
    csv += std::to_string(mode) + "," + sbe::format_g17(t) + "," + sbe::format_g17(emp) +
           "," + sbe::format_g17(oracle) + "," + sbe::format_g17(ratio) + "\n";
    std::printf("%6ld %10.6g %16.8e %16.8e %10.4f\n", long(mode), t, emp, oracle, ratio);
  }
  std::printf("max |ratio - 1| = %.4f over %ld times (%ld samples)\n", worst, long(steps),
              long(samples));

  if (tracker.enabled()) {
    const std::filesystem::path stats = tracker.root / "noise_stats.csv";
    sbe::write_file(stats, csv);
    tracker.record(stats);
    std::printf("wrote %s\n", stats.string().c_str());
    if (dump) {
      const sbe::FgnGrid<double> grid = sbe::sample_fgn(emb, mode, seed, 0);
      std::string dump_csv = "mode,substep,value\n";
      for (Eigen::Index k = 0; k < grid.modes(); ++k)
        for (Eigen::Index j = 0; j < grid.count(); ++j)
          dump_csv += std::to_string(k + 1) + "," + std::to_string(j) + "," +
                      sbe::format_g17(grid.increments(k, j)) + "\n";
      const std::filesystem::path dump_path = tracker.root / "fgn.csv";
      sbe::write_file(dump_path, dump_csv);
      tracker.record(dump_path);
      std::printf("wrote %s\n", dump_path.string().c_str());
    }
  }

  sbe::Config resolved;
  resolved.set("command", "noise-check");
  resolved.set("h", sbe::format_g17(hurst));
  resolved.set("mode", std::to_string(mode));
  resolved.set("samples", std::to_string(samples));
  resolved.set("m_steps", std::to_string(steps));
  resolved.set("T", sbe::format_g17(horizon));
  resolved.set("refine", std::to_string(refine));
  resolved.set("seed", std::to_string(seed));
  resolved.set("dump_fgn", dump ? "1" : "0");
  resolved.set("out", out);
  tracker.finish(resolved);
}

// ------------------------------------------------------------------ gallery

void run_gallery(const FlagSet& f) {
  sbe::Config cfg = resolve_config("gallery",
                                   {{"h", "0.95,0.7,0.55"},
                                    {"n_modes", "128"},
                                    {"m_steps", "256"},
                                    {"T", "1"},
                                    {"rho", "0.375"},
                                    {"theta", "0.0625"},
                                    {"refine", "4"},
                                    {"paths", "20"},
                                    {"seed", "1"},
                                    {"threads", "0"},
                                    {"snapshot_points", "256"},
                                    {"out", ""}},
                                   {}, f);

  sbe::GalleryConfig gal;
  gal.hursts = sbe::get_number_list(cfg, "h", gal.hursts);
  for (const double hurst : gal.hursts) sbe::HurstParameter check{hurst};
  gal.modes = static_cast<Eigen::Index>(sbe::get_integer(cfg, "n_modes", gal.modes));
  gal.steps = static_cast<Eigen::Index>(sbe::get_integer(cfg, "m_steps", gal.steps));
  gal.horizon = sbe::get_number(cfg, "T", gal.horizon);
  gal.rho = sbe::get_number(cfg, "rho", gal.rho);
  gal.theta = sbe::get_number(cfg, "theta", gal.theta);
  gal.noise_refine = static_cast<int>(sbe::get_integer(cfg, "refine", gal.noise_refine));
  gal.paths = static_cast<Eigen::Index>(sbe::get_integer(cfg, "paths", gal.paths));
  gal.seed = sbe::get_seed(cfg, "seed", gal.seed);
  gal.threads = static_cast<int>(sbe::get_integer(cfg, "threads", 0));
  gal.snapshot_points =
      static_cast<Eigen::Index>(sbe::get_integer(cfg, "snapshot_points", gal.snapshot_points));
  gal.out = sbe::get_string(cfg, "out", "");

  OutputTracker tracker;
  tracker.root = gal.out;

  const sbe::GalleryResult result = sbe::trajectory_gallery(gal);

  std::printf("%8s %18s\n", "H", "median H1 seminorm");
  std::string csv = "H,median_h1,paths,seed\n";
  for (const sbe::GalleryRow& row : result.rows) {
    std::printf("%8.3g %18.6g\n", row.hurst, row.median_h1);
    csv += sbe::format_g17(row.hurst) + "," + sbe::format_g17(row.median_h1) + "," +
           std::to_string(gal.paths) + "," + std::to_string(gal.seed) + "\n";
  }

  if (tracker.enabled()) {
    const std::filesystem::path summary = tracker.root / "gallery.csv";
    sbe::write_file(summary, csv);
    tracker.record(summary);
    for (const sbe::GalleryRow& row : result.rows)
      if (!row.snapshot_file.empty()) tracker.record(row.snapshot_file);
    std::printf("wrote %s\n", summary.string().c_str());
  }

  sbe::Config resolved;
  resolved.set("command", "gallery");
  resolved.set("h", join_numbers(gal.hursts));
  resolved.set("n_modes", std::to_string(gal.modes));
  resolved.set("m_steps", std::to_string(gal.steps));
  resolved.set("T", sbe::format_g17(gal.horizon));
  resolved.set("rho", sbe::format_g17(gal.rho));
  resolved.set("theta", sbe::format_g17(gal.theta));
  resolved.set("refine", std::to_string(gal.noise_refine));
  resolved.set("paths", std::to_string(gal.paths));
  resolved.set("seed", std::to_string(gal.seed));
  resolved.set("threads", std::to_string(gal.threads));
  resolved.set("snapshot_points", std::to_string(gal.snapshot_points));
  resolved.set("out", gal.out);
  tracker.finish(resolved);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sbe — stochastic Burgers equation with fractional noise"};
  app.set_help_flag("--help", "print this help message and exit");
  app.set_version_flag("--version", std::string(sbe::version));
  app.require_subcommand(1);

  FlagSet sim_flags, conv_flags, noise_flags, gal_flags;

  CLI::App* sim = app.add_subcommand("simulate", "run one trajectory, export snapshots");
  add_common_flags(sim, sim_flags);

  CLI::App* conv = app.add_subcommand("convergence", "strong-error study over step sizes");
  add_common_flags(conv, conv_flags);
  conv_flags.opts["--taus"] =
      conv->add_option("--taus", conv_flags.taus, "step sizes, e.g. 1/4,1/8");
  conv_flags.opts["--tau-ref"] =
      conv->add_option("--tau-ref", conv_flags.tau_ref, "reference step size");
  conv_flags.opts["--paths"] =
      conv->add_option("--paths", conv_flags.paths, "Monte Carlo sample paths");
  conv_flags.opts["--full-scale"] = conv->add_flag(
      "--full-scale", conv_flags.full_scale,
      "published configuration: N=1000, 1000 paths, tau_ref=1/1024 (hours of compute)");

  CLI::App* noise =
      app.add_subcommand("noise-check", "convolution statistics against the variance oracle");
  add_common_flags(noise, noise_flags);
  noise_flags.opts["--mode"] =
      noise->add_option("--mode", noise_flags.mode, "eigenmode index to check");
  noise_flags.opts["--samples"] =
      noise->add_option("--samples", noise_flags.samples, "Monte Carlo samples");
  noise_flags.opts["--dump-fgn"] = noise->add_flag(
      "--dump-fgn", noise_flags.dump_fgn, "also dump one raw noise grid as CSV");

  CLI::App* gal = app.add_subcommand("gallery", "endpoint snapshots across Hurst parameters");
  add_common_flags(gal, gal_flags);
  gal_flags.opts["--paths"] =
      gal->add_option("--paths", gal_flags.paths, "paths per H for the median");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (app.got_subcommand(sim)) run_simulate(sim_flags);
    if (app.got_subcommand(conv)) run_convergence(conv_flags);
    if (app.got_subcommand(noise)) run_noise_check(noise_flags);
    if (app.got_subcommand(gal)) run_gallery(gal_flags);
  } catch (const sbe::NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 2;
  } catch (const sbe::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
