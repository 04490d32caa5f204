#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <mutex>
#include <numbers>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "sbe/errors.hpp"
#include "sbe/fgn.hpp"
#include "sbe/io.hpp"
#include "sbe/scheme.hpp"
#include "sbe/spectral.hpp"

namespace sbe {

/* Monte Carlo strong-error harness.
 *
 * Each sample path owns one fine-grid noise bundle (step tau_ref /
 * noise_refine); the reference run (step tau_ref) and every coarse run
 * consume the same bundle, so the mean-square endpoint difference measures
 * the pathwise (strong) error of the coarse step against the reference.
 * Errors are reported with their Monte Carlo standard errors; observed rates
 * between consecutive step sizes carry a delta-method standard error that
 * accounts for the per-path correlation between the two error columns.
 *
 * Paths fan out over a small worker pool with deterministic per-path seeds;
 * each worker writes only its own slots and the reduction runs sequentially
 * afterwards, so results do not depend on the schedule or the thread count.
 */

inline int resolve_threads(int requested) {
  int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("SBE_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1 && cap < n) n = cap;
  }
  return n;
}

template <class Body>
void parallel_for_index(Eigen::Index count, int threads, Body&& body) {
  threads = std::min<Eigen::Index>(std::max(threads, 1), std::max<Eigen::Index>(count, 1));
  if (threads <= 1) {
    for (Eigen::Index i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<Eigen::Index> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  pool.reserve(threads);
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const Eigen::Index i = next.fetch_add(1);
        if (i >= count || failed.load()) return;
        try {
          body(i);
        } catch (...) {
          std::scoped_lock lock(error_mutex);
          if (!failed.exchange(true)) error = std::current_exception();
          return;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (failed.load()) std::rethrow_exception(error);
}

struct StudyConfig {
  std::vector<double> hursts{0.6, 0.7, 0.9};
  std::vector<double> taus{1.0 / 4, 1.0 / 8, 1.0 / 16, 1.0 / 32};
  double tau_ref = 1.0 / 512;
  Eigen::Index modes = 128;
  Eigen::Index paths = 200;
  double horizon = 1.0;
  double rho = 0.375;
  double theta = 0.0625;
  int noise_refine = 4;  // fine noise step = tau_ref / noise_refine
  std::uint64_t seed = 1;
  int threads = 0;  // 0: hardware (capped by SBE_THREADS)
  std::string out;  // when set, errors.csv is written here

  double fine_step() const { return tau_ref / noise_refine; }

  void validate() const {
    if (hursts.empty()) throw ConfigError("study needs at least one H");
    for (const double h : hursts) HurstParameter{h};
    if (taus.empty()) throw ConfigError("study needs at least one tau");
    if (!(tau_ref > 0)) throw ConfigError("tau_ref must satisfy tau_ref > 0");
    if (!(horizon > 0)) throw ConfigError("T must satisfy T > 0");
    if (paths < 1) throw ConfigError("paths must satisfy paths >= 1");
    if (modes < 1) throw ConfigError("n_modes must satisfy n_modes >= 1");
    if (noise_refine < 1) throw ConfigError("refine must satisfy refine >= 1");
    double prev = std::numeric_limits<double>::infinity();
    for (const double tau : taus) {
      if (!(tau > 0)) throw ConfigError("every tau must satisfy tau > 0");
      if (!(tau < prev)) throw ConfigError("taus must be strictly decreasing");
      prev = tau;
      const double mult = tau / tau_ref;
      if (std::abs(mult - std::llround(mult)) > 1e-9 * std::max(mult, 1.0))
        throw ConfigError("every tau must be an integer multiple of tau_ref (got tau=" +
                          format_g17(tau) + ", tau_ref=" + format_g17(tau_ref) + ")");
      const double steps = horizon / tau;
      if (std::abs(steps - std::llround(steps)) > 1e-9 * std::max(steps, 1.0))
        throw ConfigError("every tau must divide T");
    }
    const double ref_steps = horizon / tau_ref;
    if (std::abs(ref_steps - std::llround(ref_steps)) > 1e-9 * std::max(ref_steps, 1.0))
      throw ConfigError("tau_ref must divide T");
    // Constraint set shared with the stepper.
    SchemeConfig<double>(modes, 1, horizon, rho, theta, noise_refine, seed, true);
  }
};

inline StudyConfig desk_scale_study() { return StudyConfig{}; }

// The published experiment: N=1000, 1000 paths, reference step 1/1024.
inline StudyConfig full_scale_study() {
  StudyConfig cfg;
  cfg.hursts = {0.6, 0.7, 0.9};
  cfg.taus = {1.0 / 4, 1.0 / 8, 1.0 / 16, 1.0 / 32};
  cfg.tau_ref = 1.0 / 1024;
  cfg.modes = 1000;
  cfg.paths = 1000;
  return cfg;
}

struct ErrorRow {
  double hurst = 0;
  double tau = 0;
  double error = 0;
  double rate = std::numeric_limits<double>::quiet_NaN();  // NaN on first row per H
  double mc_stderr = 0;
  double rate_stderr = std::numeric_limits<double>::quiet_NaN();
  double diff_stderr = std::numeric_limits<double>::quiet_NaN();  // SE of error - prev error
  Eigen::Index paths = 0;
  std::uint64_t seed = 0;
};

struct ErrorTable {
  std::vector<ErrorRow> rows;
};

inline SpectralField<double> default_initial_condition() {
  // u0(x) = sin(pi x) = (1/sqrt 2) phi_1.
  SpectralField<double> u0;
  u0.coefficients = Eigen::VectorXd::Constant(1, 1.0 / std::numbers::sqrt2);
  return u0;
}

namespace detail {

// Per-path squared endpoint differences against the coupled reference run:
// matrix of shape (paths, taus).
inline Eigen::MatrixXd study_squared_errors(double hurst, const StudyConfig& cfg) {
  const HurstParameter h{hurst};
  const double delta = cfg.fine_step();
  const Eigen::Index count = std::llround(cfg.horizon / delta);
  const Eigen::Index ref_steps = std::llround(cfg.horizon / cfg.tau_ref);
  const CirculantEmbedding<double> emb = prepare_circulant<double>(count, delta, h);
  const SpectralField<double> u0 = default_initial_condition();

  const SchemeConfig<double> ref_cfg(cfg.modes, ref_steps, cfg.horizon, cfg.rho, cfg.theta,
                                     cfg.noise_refine, cfg.seed, true);
  std::vector<SchemeConfig<double>> coarse_cfgs;
  coarse_cfgs.reserve(cfg.taus.size());
  for (const double tau : cfg.taus) {
    const Eigen::Index steps = std::llround(cfg.horizon / tau);
    const Eigen::Index refine = std::llround(tau / delta);
    coarse_cfgs.emplace_back(cfg.modes, steps, cfg.horizon, cfg.rho, cfg.theta, refine,
                             cfg.seed, true);
  }

  Eigen::MatrixXd sq(cfg.paths, static_cast<Eigen::Index>(cfg.taus.size()));
  parallel_for_index(cfg.paths, resolve_threads(cfg.threads), [&](Eigen::Index path) {
    const FgnGrid<double> noise =
        sample_fgn(emb, cfg.modes, cfg.seed, static_cast<std::uint64_t>(path));
    const Eigen::VectorXd ref = run(ref_cfg, u0, noise).v.coefficients;
    for (std::size_t i = 0; i < coarse_cfgs.size(); ++i) {
      const Eigen::VectorXd v = run(coarse_cfgs[i], u0, noise).v.coefficients;
      sq(path, static_cast<Eigen::Index>(i)) = (v - ref).squaredNorm();
    }
  });
  return sq;
}

inline double column_mean(const Eigen::MatrixXd& m, Eigen::Index c) {
  return m.col(c).mean();
}

inline double column_var_of_mean(const Eigen::MatrixXd& m, Eigen::Index c) {
  const Eigen::Index n = m.rows();
  if (n < 2) return 0.0;
  const double mean = m.col(c).mean();
  const double ss = (m.col(c).array() - mean).square().sum();
  return ss / static_cast<double>(n - 1) / static_cast<double>(n);
}

inline double column_cov_of_means(const Eigen::MatrixXd& m, Eigen::Index a, Eigen::Index b) {
  const Eigen::Index n = m.rows();
  if (n < 2) return 0.0;
  const double ma = m.col(a).mean(), mb = m.col(b).mean();
  const double ss = ((m.col(a).array() - ma) * (m.col(b).array() - mb)).sum();
  return ss / static_cast<double>(n - 1) / static_cast<double>(n);
}

}  // namespace detail

inline void write_error_csv(const ErrorTable& table, const std::filesystem::path& path) {
  std::string out = "H,tau,error,rate,mc_stderr,paths,seed\n";
  for (const ErrorRow& row : table.rows) {
    out += format_g17(row.hurst) + "," + format_g17(row.tau) + "," + format_g17(row.error) +
           ",";
    if (!std::isnan(row.rate)) out += format_g17(row.rate);
    out += "," + format_g17(row.mc_stderr) + "," + std::to_string(row.paths) + "," +
           std::to_string(row.seed) + "\n";
  }
  write_file(path, out);
}

// Root-mean-square endpoint error of step tau against the coupled reference.
inline double strong_error(double hurst, double tau, const StudyConfig& base) {
  StudyConfig cfg = base;
  cfg.taus = {tau};
  cfg.validate();
  const Eigen::MatrixXd sq = detail::study_squared_errors(hurst, cfg);
  return std::sqrt(sq.col(0).mean());
}

inline ErrorTable convergence_study(const StudyConfig& cfg) {
  cfg.validate();
  ErrorTable table;
  for (const double hurst : cfg.hursts) {
    const Eigen::MatrixXd sq = detail::study_squared_errors(hurst, cfg);
    double prev_mean = 0, prev_var = 0, prev_tau = 0;
    for (Eigen::Index i = 0; i < sq.cols(); ++i) {
      ErrorRow row;
      row.hurst = hurst;
      row.tau = cfg.taus[static_cast<std::size_t>(i)];
      row.paths = cfg.paths;
      row.seed = cfg.seed;
      const double mean = detail::column_mean(sq, i);
      const double var = detail::column_var_of_mean(sq, i);
      row.error = std::sqrt(mean);
      row.mc_stderr = mean > 0 ? std::sqrt(var) / (2.0 * row.error) : 0.0;
      if (i > 0 && mean > 0 && prev_mean > 0) {
        const double cov = detail::column_cov_of_means(sq, i - 1, i);
        const double log_ratio = std::log(prev_tau / row.tau);
        row.rate = std::log(prev_mean / mean) / (2.0 * log_ratio);
        const double var_log = prev_var / (prev_mean * prev_mean) + var / (mean * mean) -
                               2.0 * cov / (prev_mean * mean);
        row.rate_stderr = std::sqrt(std::max(var_log, 0.0)) / (2.0 * log_ratio);
        const double var_diff = var / (4.0 * mean) + prev_var / (4.0 * prev_mean) -
                                2.0 * cov / (4.0 * row.error * std::sqrt(prev_mean));
        row.diff_stderr = std::sqrt(std::max(var_diff, 0.0));
      }
      prev_mean = mean;
      prev_var = var;
      prev_tau = row.tau;
      table.rows.push_back(row);
    }
  }
  if (!cfg.out.empty())
    write_error_csv(table, std::filesystem::path(cfg.out) / "errors.csv");
  return table;
}

// Discrete H^1 seminorm of interior grid values with Dirichlet boundaries.
inline double h1_seminorm(const Eigen::VectorXd& interior) {
  const Eigen::Index p = interior.size();
  const double h = 1.0 / static_cast<double>(p + 1);
  double acc = interior[0] * interior[0] + interior[p - 1] * interior[p - 1];
  for (Eigen::Index i = 0; i + 1 < p; ++i) {
    const double d = interior[i + 1] - interior[i];
    acc += d * d;
  }
  return std::sqrt(acc / h);
}

inline std::vector<std::pair<double, double>> snapshot_rows(const SpectralField<double>& u,
                                                            Eigen::Index points) {
  const CollocationField<double> g = collocate(u, points);
  const Eigen::VectorXd x = collocation_points<double>(points);
  std::vector<std::pair<double, double>> rows;
  rows.reserve(points + 2);
  rows.emplace_back(0.0, 0.0);
  for (Eigen::Index i = 0; i < points; ++i) rows.emplace_back(x[i], g.values[i]);
  rows.emplace_back(1.0, 0.0);
  return rows;
}

struct GalleryConfig {
  std::vector<double> hursts{0.95, 0.7, 0.55};
  Eigen::Index modes = 128;
  Eigen::Index steps = 256;  // endpoint run step = horizon / steps
  int noise_refine = 4;
  double horizon = 1.0;
  double rho = 0.375;
  double theta = 0.0625;
  Eigen::Index paths = 20;
  std::uint64_t seed = 1;
  int threads = 0;
  Eigen::Index snapshot_points = 256;
  bool noise_enabled = true;
  std::string out;  // when set, snapshots/*.csv are written here
};

struct GalleryRow {
  double hurst = 0;
  double median_h1 = 0;
  std::vector<double> seminorms;  // per path
  std::string snapshot_file;
};

struct GalleryResult {
  std::vector<GalleryRow> rows;
};

inline GalleryResult trajectory_gallery(const GalleryConfig& cfg) {
  if (cfg.paths < 1) throw ConfigError("paths must satisfy paths >= 1");
  if (cfg.snapshot_points < cfg.modes)
    throw ConfigError("snapshot grid must resolve the modes");
  const double tau = cfg.horizon / static_cast<double>(cfg.steps);
  const double delta = tau / cfg.noise_refine;
  const Eigen::Index count = cfg.steps * cfg.noise_refine;
  const SchemeConfig<double> run_cfg(cfg.modes, cfg.steps, cfg.horizon, cfg.rho, cfg.theta,
                                     cfg.noise_refine, cfg.seed, true);
  const SpectralField<double> u0 = default_initial_condition();

  GalleryResult result;
  for (const double hurst : cfg.hursts) {
    const HurstParameter h{hurst};
    CirculantEmbedding<double> emb;
    if (cfg.noise_enabled) emb = prepare_circulant<double>(count, delta, h);

    std::vector<double> seminorms(static_cast<std::size_t>(cfg.paths));
    std::vector<Eigen::VectorXd> endpoints(static_cast<std::size_t>(cfg.paths));
    parallel_for_index(cfg.paths, resolve_threads(cfg.threads), [&](Eigen::Index path) {
      FgnGrid<double> noise;
      if (cfg.noise_enabled) {
        noise = sample_fgn(emb, cfg.modes, cfg.seed, static_cast<std::uint64_t>(path));
      } else {
        noise.step = delta;
        noise.increments = Eigen::MatrixXd::Zero(cfg.modes, count);
      }
      const SchemeState<double> final_state = run(run_cfg, u0, noise);
      const CollocationField<double> g = collocate(final_state.v, cfg.snapshot_points);
      seminorms[static_cast<std::size_t>(path)] = h1_seminorm(g.values);
      endpoints[static_cast<std::size_t>(path)] = final_state.v.coefficients;
    });

    GalleryRow row;
    row.hurst = hurst;
    row.seminorms = seminorms;
    std::vector<double> sorted = seminorms;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    row.median_h1 =
        n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    if (!cfg.out.empty()) {
      SpectralField<double> first;
      first.coefficients = endpoints[0];
      char name[64];
      std::snprintf(name, sizeof(name), "snapshot_h%.4g.csv", hurst);
      const std::filesystem::path file =
          std::filesystem::path(cfg.out) / "snapshots" / name;
      write_xy_csv(file, snapshot_rows(first, cfg.snapshot_points));
      row.snapshot_file = file.string();
    }
    result.rows.push_back(std::move(row));
  }
  return result;
}

}  // namespace sbe
