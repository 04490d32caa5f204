// End-to-end acceptance checks for the solver, one numbered criterion per
// run stage.  Usage: acceptance <path-to-sbe-cli>.  Prints one [PASS]/[FAIL]
// line per criterion and exits nonzero if any criterion fails.

#include <Eigen/Core>

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "sbe/errors.hpp"
#include "sbe/experiments.hpp"
#include "sbe/fgn.hpp"
#include "sbe/io.hpp"
#include "sbe/rng.hpp"
#include "sbe/scheme.hpp"
#include "sbe/spectral.hpp"
#include "sbe/stochconv.hpp"

namespace {

constexpr double pi = std::numbers::pi;

struct CriterionResult {
  bool ok = true;
  std::vector<std::string> notes;
};

void expect(CriterionResult& r, bool cond, const std::string& msg) {
  if (cond) return;
  r.ok = false;
  if (r.notes.size() < 10) r.notes.push_back(msg);
}

std::string fmt(const char* pattern, ...) {
  char buf[512];
  va_list args;
  va_start(args, pattern);
  std::vsnprintf(buf, sizeof(buf), pattern, args);
  va_end(args);
  return buf;
}

struct Stats {
  double mean = 0;
  double se = 0;
};

Stats stats_of(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0;
  for (const double x : xs) mean += x;
  mean /= n;
  double var = 0;
  for (const double x : xs) var += (x - mean) * (x - mean);
  var /= (n - 1.0);
  return {mean, std::sqrt(var / n)};
}

// --- criterion 1: fGn sampler reproduces the exact autocovariance ---------

CriterionResult check_fgn_autocovariance() {
  CriterionResult r;
  const Eigen::Index count = 8192;
  const int reps = 500;
  const double step = 1.0 / static_cast<double>(count);
  for (const double hv : {0.6, 0.75, 0.9}) {
    const sbe::HurstParameter h{hv};
    const auto emb = sbe::prepare_circulant<double>(count, step, h);
    std::vector<std::vector<double>> per_lag(4);
    for (int rep = 0; rep < reps; ++rep) {
      const auto grid = sbe::sample_fgn(emb, 1, 101, static_cast<std::uint64_t>(rep));
      const auto& row = grid.increments;
      for (int lag = 0; lag < 4; ++lag) {
        double acc = 0;
        for (Eigen::Index i = 0; i + lag < count; ++i) acc += row(0, i) * row(0, i + lag);
        per_lag[static_cast<std::size_t>(lag)].push_back(acc /
                                                         static_cast<double>(count - lag));
      }
    }
    for (int lag = 0; lag < 4; ++lag) {
      const Stats s = stats_of(per_lag[static_cast<std::size_t>(lag)]);
      const double exact = sbe::fgn_autocovariance(lag, step, h);
      expect(r, std::abs(s.mean - exact) < 4.0 * s.se,
             fmt("H=%.2f lag %d: empirical %.6e vs exact %.6e (se %.2e)", hv, lag, s.mean,
                 exact, s.se));
    }
  }
  return r;
}

// --- criterion 2: convolution variance against the quadrature oracle ------

CriterionResult check_convolution_variance() {
  CriterionResult r;
  const double lambdas[] = {pi * pi, 4.0 * pi * pi, 16.0 * pi * pi};
  const Eigen::Index coarse_steps = 256;
  const Eigen::Index refine = 64;
  const Eigen::Index samples = 10000;
  int combo = 0;
  for (const double t : {0.25, 1.0}) {
    for (const double hv : {0.6, 0.9}) {
      const sbe::HurstParameter h{hv};
      const Eigen::Index count = coarse_steps * refine;
      const double delta = t / static_cast<double>(count);
      const double tau = t / static_cast<double>(coarse_steps);
      const auto emb = sbe::prepare_circulant<double>(count, delta, h);
      // One fine fGn row per sample feeds all three decay rates.
      std::vector<std::vector<double>> sq(3);
      for (auto& v : sq) v.reserve(samples);
      for (Eigen::Index sample = 0; sample < samples; ++sample) {
        const auto grid = sbe::sample_fgn(emb, 1, 9000 + static_cast<std::uint64_t>(combo),
                                          static_cast<std::uint64_t>(sample));
        for (int li = 0; li < 3; ++li) {
          double o = 0.0;
          for (Eigen::Index m = 0; m < coarse_steps; ++m)
            o = sbe::step_convolution_mode(
                o, grid.increments.row(0).segment(m * refine, refine), tau, lambdas[li]);
          sq[static_cast<std::size_t>(li)].push_back(o * o);
        }
      }
      for (int li = 0; li < 3; ++li) {
        const Stats s = stats_of(sq[static_cast<std::size_t>(li)]);
        const double oracle = sbe::convolution_variance_oracle(lambdas[li], t, h);
        const double brute = sbe::convolution_variance_riemann(lambdas[li], t, h);
        expect(r, std::abs(s.mean - oracle) < 0.05 * oracle,
               fmt("lambda=%.4g t=%.2f H=%.2f: MC var %.6e vs oracle %.6e (%.2f%%)",
                   lambdas[li], t, hv, s.mean, oracle,
                   100.0 * std::abs(s.mean / oracle - 1.0)));
        expect(r, std::abs(oracle - brute) < 0.005 * brute,
               fmt("lambda=%.4g t=%.2f H=%.2f: oracle %.6e vs Riemann %.6e", lambdas[li],
                   t, hv, oracle, brute));
      }
      ++combo;
    }
  }
  return r;
}

// --- criterion 3: nonlinearity against direct quadrature ------------------

CriterionResult check_nonlinearity_oracle() {
  CriterionResult r;
  sbe::RngStream stream(424242);
  const Eigen::Index quad = 4096;
  const long double h = 1.0L / static_cast<long double>(quad + 1);
  const long double pil = std::numbers::pi_v<long double>;
  const long double rt2 = std::numbers::sqrt2_v<long double>;

  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(stream.next_uniform() * 31);
    sbe::SpectralField<double> u;
    u.coefficients.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) u.coefficients[k] = stream.next_gaussian();

    std::vector<long double> uu(static_cast<std::size_t>(quad)),
        du(static_cast<std::size_t>(quad));
    for (Eigen::Index i = 1; i <= quad; ++i) {
      const long double x = static_cast<long double>(i) * h;
      long double su = 0, sd = 0;
      for (Eigen::Index k = 1; k <= n; ++k) {
        const long double a = static_cast<long double>(u.coefficients[k - 1]);
        const long double kpil = pil * static_cast<long double>(k);
        su += a * rt2 * std::sin(kpil * x);
        sd += a * rt2 * kpil * std::cos(kpil * x);
      }
      uu[static_cast<std::size_t>(i - 1)] = su;
      du[static_cast<std::size_t>(i - 1)] = sd;
    }

    const auto f = sbe::burgers_nonlinearity(u);
    for (Eigen::Index k = 1; k <= n; ++k) {
      long double acc = 0;
      for (Eigen::Index i = 1; i <= quad; ++i) {
        const long double x = static_cast<long double>(i) * h;
        acc += uu[static_cast<std::size_t>(i - 1)] * du[static_cast<std::size_t>(i - 1)] *
               rt2 * std::sin(pil * static_cast<long double>(k) * x);
      }
      const double oracle = static_cast<double>(acc * h);
      expect(r,
             std::abs(f.coefficients[k - 1] - oracle) <
                 1e-10 * (1.0 + std::abs(oracle)),
             fmt("trial %d mode %lld: %.17g vs quadrature %.17g", trial,
                 static_cast<long long>(k), f.coefficients[k - 1], oracle));
    }
    expect(r, std::abs(u.coefficients.dot(f.coefficients)) < 1e-8,
           fmt("trial %d: <u, f(u)> = %.3e", trial,
               u.coefficients.dot(f.coefficients)));
  }
  return r;
}

// --- criterion 4: exact integration of the linear problem -----------------

CriterionResult check_linear_exactness() {
  CriterionResult r;
  for (const Eigen::Index steps : {1L, 3L, 10L, 100L, 1000L}) {
    sbe::SchemeConfig<double> cfg(8, steps, 1.0, 0.375, 0.0625, 1, 1, false);
    sbe::FgnGrid<double> noise;
    noise.step = 1.0 / static_cast<double>(steps);
    noise.increments = Eigen::MatrixXd::Zero(8, steps);
    sbe::SpectralField<double> u0;
    u0.coefficients = Eigen::VectorXd::Zero(8);
    u0.coefficients[0] = 1.0;
    const auto final_state = sbe::run(cfg, u0, noise);
    Eigen::VectorXd exact = Eigen::VectorXd::Zero(8);
    exact[0] = std::exp(-pi * pi);
    const double err = (final_state.v.coefficients - exact).norm();
    expect(r, err < 1e-12, fmt("M=%lld: deviation %.3e", static_cast<long long>(steps), err));
  }
  return r;
}

// --- criterion 5: spectral projection error bound --------------------------

CriterionResult check_projection_inequality() {
  CriterionResult r;
  // psi(x) = x(1-x): a_k = 4 sqrt(2)/(k pi)^3 for odd k.
  const long long kmax = 200001;
  std::vector<long double> a(static_cast<std::size_t>(kmax) + 1, 0.0L);
  const long double pil = std::numbers::pi_v<long double>;
  for (long long k = 1; k <= kmax; k += 2) {
    const long double kpi = static_cast<long double>(k) * pil;
    a[static_cast<std::size_t>(k)] = 4.0L * std::numbers::sqrt2_v<long double> / (kpi * kpi * kpi);
  }
  for (const double alpha : {0.5, 1.0}) {
    long double norm_sq = 0;
    for (long long k = 1; k <= kmax; ++k)
      norm_sq += std::pow(static_cast<long double>(sbe::eigenvalue(k)),
                          static_cast<long double>(alpha)) *
                 a[static_cast<std::size_t>(k)] * a[static_cast<std::size_t>(k)];
    const double sobolev = static_cast<double>(std::sqrt(norm_sq));
    for (const long long n : {4LL, 8LL, 16LL, 32LL}) {
      long double tail_sq = 0;
      for (long long k = n + 1; k <= kmax; ++k)
        tail_sq += a[static_cast<std::size_t>(k)] * a[static_cast<std::size_t>(k)];
      const double lhs = static_cast<double>(std::sqrt(tail_sq));
      const double rhs = std::pow(sbe::eigenvalue(n + 1), -alpha / 2.0) * sobolev;
      expect(r, lhs <= rhs,
             fmt("alpha=%.1f N=%lld: tail %.6e exceeds bound %.6e", alpha, n, lhs, rhs));
    }
  }
  return r;
}

// --- criterion 6: strong convergence study at desk scale -------------------

CriterionResult check_convergence_rates(sbe::ErrorTable& table_out) {
  CriterionResult r;
  const sbe::StudyConfig cfg = sbe::desk_scale_study();
  const sbe::ErrorTable table = sbe::convergence_study(cfg);
  table_out = table;

  const struct {
    double hurst, target;
  } targets[] = {{0.6, 0.56}, {0.7, 0.67}, {0.9, 0.86}};
  std::vector<double> final_rate(3, 0.0), final_rate_se(3, 0.0);

  for (std::size_t ti = 0; ti < 3; ++ti) {
    const double hurst = targets[ti].hurst;
    std::vector<sbe::ErrorRow> rows;
    for (const auto& row : table.rows)
      if (row.hurst == hurst) rows.push_back(row);
    expect(r, rows.size() == cfg.taus.size(),
           fmt("H=%.1f: expected %zu rows, got %zu", hurst, cfg.taus.size(), rows.size()));
    if (rows.size() != cfg.taus.size()) continue;

    for (std::size_t i = 1; i < rows.size(); ++i) {
      const double slack = 2.0 * rows[i].diff_stderr;
      expect(r, rows[i].error < rows[i - 1].error + slack,
             fmt("H=%.1f: error %.4e at tau=%.4g not below %.4e at tau=%.4g (2 se = %.1e)",
                 hurst, rows[i].error, rows[i].tau, rows[i - 1].error, rows[i - 1].tau,
                 slack));
    }
    const auto& last = rows.back();
    expect(r, std::abs(last.rate - targets[ti].target) <= 0.25,
           fmt("H=%.1f: final rate %.3f not within 0.25 of %.2f", hurst, last.rate,
               targets[ti].target));
    final_rate[ti] = last.rate;
    final_rate_se[ti] = last.rate_stderr;
  }

  // Ordering across H, with one combined standard error of slack.
  const double se_97 = std::sqrt(final_rate_se[2] * final_rate_se[2] +
                                 final_rate_se[1] * final_rate_se[1]);
  const double se_76 = std::sqrt(final_rate_se[1] * final_rate_se[1] +
                                 final_rate_se[0] * final_rate_se[0]);
  expect(r, final_rate[2] > final_rate[1] - se_97,
         fmt("rate(H=0.9)=%.3f not above rate(H=0.7)=%.3f within %.3f", final_rate[2],
             final_rate[1], se_97));
  expect(r, final_rate[1] > final_rate[0] - se_76,
         fmt("rate(H=0.7)=%.3f not above rate(H=0.6)=%.3f within %.3f", final_rate[1],
             final_rate[0], se_76));
  return r;
}

// --- criterion 7: roughness ordering of endpoint snapshots -----------------

CriterionResult check_roughness_ordering() {
  CriterionResult r;
  const sbe::GalleryConfig cfg;  // H in {0.95, 0.7, 0.55}, 20 paths
  const auto result = sbe::trajectory_gallery(cfg);
  expect(r, result.rows.size() == 3, "gallery did not produce three rows");
  if (result.rows.size() == 3) {
    for (std::size_t i = 1; i < 3; ++i)
      expect(r, result.rows[i].median_h1 > result.rows[i - 1].median_h1,
             fmt("median H1 %.4f at H=%.2f not above %.4f at H=%.2f",
                 result.rows[i].median_h1, result.rows[i].hurst,
                 result.rows[i - 1].median_h1, result.rows[i - 1].hurst));
  }
  return r;
}

// --- criterion 8: pathwise stability of the tamed stepper ------------------

CriterionResult check_pathwise_stability() {
  CriterionResult r;
  const Eigen::Index n = 64, steps = 64;
  sbe::SchemeConfig<double> cfg(n, steps, 1.0, 0.375, 0.0625, 4, 17);
  const sbe::HurstParameter h{0.6};
  const auto emb = sbe::prepare_circulant<double>(steps * 4, cfg.tau() / 4.0, h);
  sbe::SpectralField<double> u0;
  u0.coefficients = Eigen::VectorXd::Constant(1, 1.0 / std::numbers::sqrt2);

  for (int path = 0; path < 100; ++path) {
    const auto noise = sbe::sample_fgn(emb, n, cfg.seed, static_cast<std::uint64_t>(path));
    double worst_bar = 0.0;
    bool taming_ok = true;
    try {
      sbe::run<double>(cfg, u0, noise, [&](const sbe::SchemeState<double>& s) {
        if (!(s.taming > 0.0 && s.taming <= 1.0)) taming_ok = false;
        worst_bar = std::max(worst_bar,
                             (s.v.coefficients - s.conv.values).squaredNorm());
      });
    } catch (const sbe::BlowUpError& e) {
      expect(r, false, fmt("path %d blew up: %s", path, e.what()));
      continue;
    }
    expect(r, taming_ok, fmt("path %d: taming factor left (0, 1]", path));
    expect(r, worst_bar < 1e6, fmt("path %d: ||v - O||^2 reached %.3e", path, worst_bar));
  }
  return r;
}

// --- criterion 9: CLI determinism via the manifest --------------------------

int run_cli(const std::string& command) {
  const int status = std::system((command + " > /dev/null 2>&1").c_str());
  return status < 0 ? status : WEXITSTATUS(status);
}

CriterionResult check_cli_determinism(const std::string& cli) {
  CriterionResult r;
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "sbe_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string q = "\"" + cli + "\"";

  {  // convergence: flags -> manifest -> replay
    const fs::path d1 = root / "conv1", d2 = root / "conv2";
    const std::string base =
        q + " convergence --h 0.7 --taus 1/4,1/8 --tau-ref 1/32 --n-modes 8 --paths 4"
            " --refine 2 --seed 3 --out ";
    int code = run_cli(base + "\"" + d1.string() + "\"");
    expect(r, code == 0, fmt("convergence run exited with %d", code));
    code = run_cli(q + " convergence --config \"" + (d1 / "manifest.txt").string() +
                   "\" --out \"" + d2.string() + "\"");
    expect(r, code == 0, fmt("manifest replay exited with %d", code));
    if (r.ok) {
      const std::string a = sbe::read_file(d1 / "errors.csv");
      const std::string b = sbe::read_file(d2 / "errors.csv");
      expect(r, a == b, "errors.csv differs between a run and its manifest replay");
    }
  }

  if (r.ok) {  // simulate: flags -> manifest -> replay
    const fs::path d1 = root / "sim1", d2 = root / "sim2";
    const std::string base =
        q + " simulate --h 0.8 --n-modes 16 --m-steps 16 --refine 2 --seed 5 --out ";
    int code = run_cli(base + "\"" + d1.string() + "\"");
    expect(r, code == 0, fmt("simulate run exited with %d", code));
    code = run_cli(q + " simulate --config \"" + (d1 / "manifest.txt").string() +
                   "\" --out \"" + d2.string() + "\"");
    expect(r, code == 0, fmt("simulate replay exited with %d", code));
    if (r.ok) {
      const std::string a = sbe::read_file(d1 / "snapshots" / "trajectory.csv");
      const std::string b = sbe::read_file(d2 / "snapshots" / "trajectory.csv");
      expect(r, a == b, "trajectory.csv differs between a run and its manifest replay");
    }
  }

  fs::remove_all(root);
  return r;
}

void report(int criterion, const char* headline, const CriterionResult& r, double seconds,
            int& failures) {
  std::printf("[%s] criterion %d: %s (%.1f s)\n", r.ok ? "PASS" : "FAIL", criterion,
              headline, seconds);
  for (const auto& note : r.notes) std::printf("    - %s\n", note.c_str());
  if (!r.ok) ++failures;
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: acceptance <path-to-sbe-cli>\n");
    return 2;
  }
  const std::string cli = argv[1];
  int failures = 0;
  using clock = std::chrono::steady_clock;
  const auto timed = [](auto&& fn) {
    const auto start = clock::now();
    CriterionResult r = fn();
    const double seconds =
        std::chrono::duration<double>(clock::now() - start).count();
    return std::make_pair(r, seconds);
  };

  {
    auto [r, s] = timed(check_fgn_autocovariance);
    report(1, "fGn autocovariance at lags 0..3 within 4 standard errors", r, s, failures);
  }
  {
    auto [r, s] = timed(check_convolution_variance);
    report(2, "sampled convolution variance within 5% of the quadrature oracle", r, s,
           failures);
  }
  {
    auto [r, s] = timed(check_nonlinearity_oracle);
    report(3, "nonlinearity matches direct quadrature to 1e-10 with <u,f(u)> = 0", r, s,
           failures);
  }
  {
    auto [r, s] = timed(check_linear_exactness);
    report(4, "linear problem integrated exactly for any step count", r, s, failures);
  }
  {
    auto [r, s] = timed(check_projection_inequality);
    report(5, "projection tail bounded by the spectral gap for x(1-x)", r, s, failures);
  }
  {
    sbe::ErrorTable table;
    const auto start = clock::now();
    CriterionResult r = check_convergence_rates(table);
    const double s = std::chrono::duration<double>(clock::now() - start).count();
    report(6, "strong-error study: decay, final rates, and ordering across H", r, s,
           failures);
    for (const auto& row : table.rows)
      if (!std::isnan(row.rate))
        std::printf("      H=%.1f tau=%-7.4g error=%.5e rate=%.3f (se %.3f)\n", row.hurst,
                    row.tau, row.error, row.rate, row.rate_stderr);
  }
  {
    auto [r, s] = timed(check_roughness_ordering);
    report(7, "median H1 seminorm increases as H decreases", r, s, failures);
  }
  {
    auto [r, s] = timed(check_pathwise_stability);
    report(8, "100 rough-noise paths stay tamed, finite, and bounded", r, s, failures);
  }
  {
    auto [r, s] = timed([&] { return check_cli_determinism(cli); });
    report(9, "manifest replay reproduces CSV outputs byte for byte", r, s, failures);
  }

  std::printf("acceptance: %d/9 criteria passed\n", 9 - failures);
  return failures == 0 ? 0 : 1;
}
