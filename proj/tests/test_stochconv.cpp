#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "sbe/stochconv.hpp"

#include "doctest.h"

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <vector>

#include "sbe/fgn.hpp"

namespace {

constexpr double pi = std::numbers::pi;

struct RepStats {
  double mean = 0;
  double stderr_of_mean = 0;
};

RepStats rep_stats(const std::vector<double>& xs) {
  const auto n = static_cast<double>(xs.size());
  double mean = 0;
  for (const double x : xs) mean += x;
  mean /= n;
  double var = 0;
  for (const double x : xs) var += (x - mean) * (x - mean);
  var /= (n - 1.0);
  return {mean, std::sqrt(var / n)};
}

// Exact variance of the left-point discretization with n substeps over
// (0, t]: sum_{i,j} e^{-lambda(t - s_i)} e^{-lambda(t - s_j)} gamma(|i-j|),
// evaluated by diagonal bands in long double.
double discrete_variance(double lambda, double t, sbe::HurstParameter h, long n) {
  const double delta = t / static_cast<double>(n);
  std::vector<double> w(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i)
    w[static_cast<std::size_t>(i)] = std::exp(-lambda * (t - static_cast<double>(i) * delta));
  long double acc = 0;
  for (long d = 0; d < n; ++d) {
    long double band = 0;
    for (long i = 0; i + d < n; ++i)
      band += static_cast<long double>(w[static_cast<std::size_t>(i)]) *
              w[static_cast<std::size_t>(i + d)];
    const long double gam = sbe::fgn_autocovariance(d, delta, h);
    acc += (d == 0 ? band : 2.0L * band) * gam;
  }
  return static_cast<double>(acc);
}

}  // namespace

TEST_CASE("lambda=0 mode degenerates to the plain fBm increment") {
  const sbe::HurstParameter h{0.8};
  const double tau = 0.5;
  const Eigen::Index r = 64;
  const auto emb = sbe::prepare_circulant<double>(r, tau / r, h);

  std::vector<double> sq;
  for (int rep = 0; rep < 500; ++rep) {
    const auto grid = sbe::sample_fgn(emb, 1, 11, static_cast<std::uint64_t>(rep));
    const double o = sbe::step_convolution_mode(0.0, grid.increments.row(0), tau, 0.0);
    // Weights collapse to 1, so the update is the plain increment sum.
    CHECK(o == doctest::Approx(grid.increments.row(0).sum()).epsilon(1e-12));
    sq.push_back(o * o);
  }
  const RepStats s = rep_stats(sq);
  const double expected = std::pow(tau, 1.6);  // Var(w_H(tau)) = tau^{2H}
  CHECK(std::abs(s.mean - expected) < 4.0 * s.stderr_of_mean);
}

TEST_CASE("zero noise gives pure semigroup decay") {
  const Eigen::Index modes = 5;
  sbe::ConvolutionState<double> state = sbe::zero_convolution<double>(modes);
  state.values << 1.0, -2.0, 0.5, 3.0, -0.25;
  state.time = 1.5;
  const double tau = 0.125;
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(modes, 8);
  const auto next = sbe::step_convolution(state, zero, tau);
  for (Eigen::Index k = 1; k <= modes; ++k)
    CHECK(next.values[k - 1] ==
          doctest::Approx(state.values[k - 1] * std::exp(-sbe::eigenvalue(k) * tau))
              .epsilon(1e-14));
  CHECK(next.time == doctest::Approx(1.625).epsilon(1e-15));
}

TEST_CASE("weights table matches its definition and validates input") {
  const Eigen::VectorXd lambdas = sbe::laplacian_eigenvalues<double>(3);
  const double tau = 0.25;
  const Eigen::Index r = 4;
  const auto w = sbe::make_convolution_weights<double>(lambdas, tau, r);
  REQUIRE(w.weights.rows() == 3);
  REQUIRE(w.weights.cols() == 4);
  const double delta = tau / static_cast<double>(r);
  for (Eigen::Index k = 0; k < 3; ++k) {
    CHECK(w.decay[k] == doctest::Approx(std::exp(-lambdas[k] * tau)).epsilon(1e-15));
    for (Eigen::Index j = 0; j < r; ++j)
      CHECK(w.weights(k, j) ==
            doctest::Approx(std::exp(-lambdas[k] * (tau - static_cast<double>(j) * delta)))
                .epsilon(1e-15));
  }
  CHECK_THROWS_AS(sbe::make_convolution_weights<double>(lambdas, 0.0, 4),
                  std::invalid_argument);
  CHECK_THROWS_AS(sbe::make_convolution_weights<double>(lambdas, 1.0, 0),
                  std::invalid_argument);

  sbe::ConvolutionState<double> state = sbe::zero_convolution<double>(3);
  CHECK_THROWS_AS(sbe::step_convolution(state, Eigen::MatrixXd::Zero(2, 4), w),
                  std::invalid_argument);
  CHECK_THROWS_AS(sbe::step_convolution(state, Eigen::MatrixXd::Zero(3, 5), w),
                  std::invalid_argument);
}

TEST_CASE("steps compose under the semigroup across step sizes") {
  // One tau-step over 8 fine increments equals two tau/2-steps over the same
  // increments: the identity that couples coarse and reference runs.
  const Eigen::Index modes = 6;
  const double tau = 0.25;
  const auto grid = sbe::sample_fgn<double>(modes, 8, tau / 8, sbe::HurstParameter{0.7}, 3);

  const auto full = sbe::step_convolution(sbe::zero_convolution<double>(modes),
                                          grid.increments, tau);
  auto halves = sbe::step_convolution(sbe::zero_convolution<double>(modes),
                                      grid.increments.leftCols(4), tau / 2);
  halves = sbe::step_convolution(halves, grid.increments.rightCols(4), tau / 2);
  for (Eigen::Index k = 0; k < modes; ++k)
    CHECK(full.values[k] == doctest::Approx(halves.values[k]).epsilon(1e-13));
}

TEST_CASE("variance oracle closed forms and preconditions") {
  // lambda = 0: the double integral is the fBm variance t^{2H} exactly.
  for (const double hv : {0.6, 0.75, 0.9})
    for (const double t : {0.25, 1.0, 2.0}) {
      const double oracle =
          sbe::convolution_variance_oracle(0.0, t, sbe::HurstParameter{hv});
      CHECK(oracle == doctest::Approx(std::pow(t, 2.0 * hv)).epsilon(1e-12));
    }

  const sbe::HurstParameter h{0.75};
  CHECK_THROWS_AS(sbe::convolution_variance_oracle(-1.0, 1.0, h), std::invalid_argument);
  CHECK_THROWS_AS(sbe::convolution_variance_oracle(1.0, 0.0, h), std::invalid_argument);
  CHECK_THROWS_AS(sbe::convolution_variance_oracle(1.0, 1.0, h, 32), std::invalid_argument);
  CHECK_THROWS_AS(
      sbe::convolution_variance_oracle(1.0, 1.0, sbe::HurstParameter(0.5, true)),
      std::invalid_argument);
}

TEST_CASE("variance oracle agrees with the brute-force Riemann cross-check") {
  const struct {
    double lambda, t, h;
  } combos[] = {{pi * pi, 1.0, 0.75},
                {4.0 * pi * pi, 0.25, 0.6},
                {16.0 * pi * pi, 1.0, 0.9},
                {pi * pi, 0.25, 0.9}};
  for (const auto& c : combos) {
    const sbe::HurstParameter h{c.h};
    const double oracle = sbe::convolution_variance_oracle(c.lambda, c.t, h);
    const double brute = sbe::convolution_variance_riemann(c.lambda, c.t, h);
    INFO("lambda ", c.lambda, " t ", c.t, " H ", c.h, ": oracle ", oracle, " brute ", brute);
    CHECK(std::abs(oracle - brute) < 0.005 * std::abs(brute));
  }
}

TEST_CASE("variance oracle decreases in lambda") {
  const sbe::HurstParameter h{0.7};
  double prev = sbe::convolution_variance_oracle(0.0, 1.0, h);
  for (const double lambda : {pi * pi, 4.0 * pi * pi, 16.0 * pi * pi}) {
    const double v = sbe::convolution_variance_oracle(lambda, 1.0, h);
    CHECK(v < prev);
    CHECK(v > 0.0);
    prev = v;
  }
}

TEST_CASE("sampled convolution variance matches the exact discrete value") {
  // The Monte Carlo second moment against the Toeplitz quadratic form: a pure
  // sampler test with no quadrature bias in the target.
  const sbe::HurstParameter h{0.7};
  const double lambda = pi * pi;
  const double t = 1.0;
  const long n = 512;
  const auto emb = sbe::prepare_circulant<double>(n, t / n, h);
  const Eigen::VectorXd lambdas = Eigen::VectorXd::Constant(1, lambda);
  const auto w = sbe::make_convolution_weights<double>(lambdas, t, n);

  std::vector<double> sq;
  for (int rep = 0; rep < 2000; ++rep) {
    const auto grid = sbe::sample_fgn(emb, 1, 2718, static_cast<std::uint64_t>(rep));
    const auto o =
        sbe::step_convolution(sbe::zero_convolution<double>(1), grid.increments, w);
    sq.push_back(o.values[0] * o.values[0]);
  }
  const RepStats s = rep_stats(sq);
  const double exact = discrete_variance(lambda, t, h, n);
  INFO("empirical ", s.mean, " exact ", exact, " se ", s.stderr_of_mean);
  CHECK(std::abs(s.mean - exact) < 4.0 * s.stderr_of_mean);

  // And the discretization itself converges to the continuous oracle.
  const double oracle = sbe::convolution_variance_oracle(lambda, t, h);
  const double fine = discrete_variance(lambda, t, h, 4096);
  CHECK(std::abs(fine - oracle) < 0.005 * oracle);
}

TEST_CASE("window variance bound: ratio to (t-s)^{2H} stays in (0, 1]") {
  for (const double hv : {0.6, 0.75, 0.9}) {
    const sbe::HurstParameter h{hv};
    for (const double lambda : {pi * pi, 4.0 * pi * pi, 9.0 * pi * pi}) {
      for (const double window : {0.25, 0.125, 0.0625}) {
        const double v = sbe::convolution_variance_oracle(lambda, window, h);
        const double ratio = v / std::pow(window, 2.0 * hv);
        INFO("H ", hv, " lambda ", lambda, " window ", window, " ratio ", ratio);
        CHECK(ratio > 0.0);
        CHECK(ratio <= 1.0);
      }
    }
  }
}

TEST_CASE("refinement consistency of the discretized variance") {
  // Doubling the substep count changes the exact discretized variance by
  // less than 2% once r is large enough for the decay rate: r = 32 suffices
  // for lambda = pi^2 at tau = 1/16; the stiffest mode checked here
  // (lambda = 16 pi^2) needs r = 512 at the same tau, since the relative
  // discretization error scales like lambda * delta.
  const double tau = 1.0 / 16.0;
  for (const double hv : {0.6, 0.9}) {
    const sbe::HurstParameter h{hv};
    const double a32 = discrete_variance(pi * pi, tau, h, 32);
    const double a64 = discrete_variance(pi * pi, tau, h, 64);
    INFO("H ", hv, " lambda pi^2: r32 ", a32, " r64 ", a64);
    CHECK(std::abs(a64 / a32 - 1.0) < 0.02);

    const double b512 = discrete_variance(16.0 * pi * pi, tau, h, 512);
    const double b1024 = discrete_variance(16.0 * pi * pi, tau, h, 1024);
    INFO("H ", hv, " lambda 16pi^2: r512 ", b512, " r1024 ", b1024);
    CHECK(std::abs(b1024 / b512 - 1.0) < 0.02);
  }
}

TEST_CASE("H=1/2 degenerates to the Ornstein-Uhlenbeck variance") {
  const sbe::HurstParameter half(0.5, true);
  const double lambda = pi * pi;
  const double t = 1.0;
  const long n = 2048;
  const double exact_discrete = discrete_variance(lambda, t, half, n);
  const double ou = -std::expm1(-2.0 * lambda * t) / (2.0 * lambda);
  // The left-point rule converges to the classical value.
  CHECK(std::abs(exact_discrete - ou) < 0.01 * ou);

  // Monte Carlo through the full sampler agrees with the discrete value.
  const auto emb = sbe::prepare_circulant<double>(n, t / n, half);
  const Eigen::VectorXd lambdas = Eigen::VectorXd::Constant(1, lambda);
  const auto w = sbe::make_convolution_weights<double>(lambdas, t, n);
  std::vector<double> sq;
  for (int rep = 0; rep < 1500; ++rep) {
    const auto grid = sbe::sample_fgn(emb, 1, 1414, static_cast<std::uint64_t>(rep));
    const auto o =
        sbe::step_convolution(sbe::zero_convolution<double>(1), grid.increments, w);
    sq.push_back(o.values[0] * o.values[0]);
  }
  const RepStats s = rep_stats(sq);
  CHECK(std::abs(s.mean - exact_discrete) < 3.0 * s.stderr_of_mean);
}

TEST_CASE("modes stay uncorrelated through the convolution") {
  const sbe::HurstParameter h{0.75};
  const long n = 256;
  const auto emb = sbe::prepare_circulant<double>(n, 1.0 / n, h);
  const Eigen::VectorXd lambdas = sbe::laplacian_eigenvalues<double>(3);
  const auto w = sbe::make_convolution_weights<double>(lambdas, 1.0, n);
  std::vector<double> prod;
  for (int rep = 0; rep < 400; ++rep) {
    const auto grid = sbe::sample_fgn(emb, 3, 606, static_cast<std::uint64_t>(rep));
    const auto o =
        sbe::step_convolution(sbe::zero_convolution<double>(3), grid.increments, w);
    prod.push_back(o.values[0] * o.values[2]);
  }
  const RepStats s = rep_stats(prod);
  CHECK(std::abs(s.mean) < 4.0 * s.stderr_of_mean);
}

TEST_CASE("moment bound report: finiteness, series, and single-mode reduction") {
  // Wide field: empirical sup-norm moment finite, bound series summable.
  const auto report =
      sbe::convolution_moment_bound_check(32, 0.0, sbe::HurstParameter{0.9}, 2, 1000);
  CHECK(report.moment_finite);
  CHECK(report.series_summable);
  CHECK(report.empirical_moment > 0.0);
  CHECK(report.series_partial_sum > 0.0);
  CHECK(report.series_tail_estimate < 0.01 * report.series_partial_sum);

  // Single mode: ||O^1||_sup = sqrt(2)|O_1| on the odd evaluation grid, so
  // the squared moment is about twice the variance oracle, up to the
  // left-point discretization bias and Monte Carlo error.
  const sbe::HurstParameter h{0.75};
  const auto single = sbe::convolution_moment_bound_check(1, 0.0, h, 2, 4000);
  const double oracle = sbe::convolution_variance_oracle(pi * pi, 1.0, h);
  const double ratio = single.empirical_moment * single.empirical_moment / oracle;
  INFO("squared moment ", single.empirical_moment * single.empirical_moment, " oracle ",
       oracle, " ratio ", ratio);
  CHECK(ratio > 1.8);
  CHECK(ratio < 2.2);

  // Rougher noise carries more energy: the moment grows as H drops.
  const auto rough =
      sbe::convolution_moment_bound_check(16, 0.0, sbe::HurstParameter{0.6}, 2, 2000);
  const auto smooth =
      sbe::convolution_moment_bound_check(16, 0.0, sbe::HurstParameter{0.9}, 2, 2000);
  CHECK(rough.empirical_moment > smooth.empirical_moment);

  CHECK_THROWS_AS(sbe::convolution_moment_bound_check(0, 0.0, h, 2, 1000),
                  std::invalid_argument);
  CHECK_THROWS_AS(sbe::convolution_moment_bound_check(4, 0.0, h, 3, 1000),
                  std::invalid_argument);
  CHECK_THROWS_AS(sbe::convolution_moment_bound_check(4, 0.0, h, 2, 10),
                  std::invalid_argument);
}
