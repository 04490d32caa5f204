#pragma once

#include <Eigen/Core>

#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include "sbe/errors.hpp"
#include "sbe/fgn.hpp"
#include "sbe/spectral.hpp"
#include "sbe/stochconv.hpp"

namespace sbe {

/* Tamed accelerated exponential Euler stepper.
 *
 * One step of size tau updates the Galerkin coefficients by
 *
 *   v_{m+1} = S_N(tau) v_m + Phi(tau) G_m P_N f(v_m) + Delta O_m,
 *
 * with the per-mode drift factor Phi_k(tau) = (1 - e^(-lambda_k tau))/lambda_k
 * (the exact integral of the semigroup over the step, evaluated through
 * expm1 so small lambda_k*tau loses no digits), the taming factor
 *
 *   G_m = 1 / (1 + tau^theta ||v_m||^2_{H^rho} + tau^theta ||O^N_m||^2_{H^rho}),
 *
 * and the convolution increment Delta O_m delegated to step_convolution on
 * the refined noise grid.  The continuous-time interpolant freezes G and
 * f(v) at the left grid point and uses semigroup weights at t - t_m, so the
 * step and the interpolant at t = t_{m+1} are the same arithmetic.
 */

template <std::floating_point Scalar>
struct SchemeConfig {
  SchemeConfig(Eigen::Index modes, Eigen::Index steps, Scalar horizon,
               Scalar rho = Scalar(0.375), Scalar theta = Scalar(0.0625),
               Eigen::Index refinement = 4, std::uint64_t seed = 1,
               bool nonlinearity_enabled = true)
      : modes(modes),
        steps(steps),
        horizon(horizon),
        rho(rho),
        theta(theta),
        refinement(refinement),
        seed(seed),
        nonlinearity_enabled(nonlinearity_enabled) {
    validate();
  }

  Eigen::Index modes;        // N
  Eigen::Index steps;        // M
  Scalar horizon;            // T
  Scalar rho;                // norm exponent in G
  Scalar theta;              // step-size exponent in G
  Eigen::Index refinement;   // noise substeps per coarse step
  std::uint64_t seed;
  bool nonlinearity_enabled;

  Scalar tau() const { return horizon / static_cast<Scalar>(steps); }

  void validate() const {
    if (modes < 1) throw ConfigError("n_modes must satisfy n_modes >= 1");
    if (steps < 1) throw ConfigError("m_steps must satisfy m_steps >= 1");
    if (!(horizon > Scalar(0))) throw ConfigError("T must satisfy T > 0");
    if (refinement < 1) throw ConfigError("refine must satisfy refine >= 1");
    if (!(rho >= Scalar(0.25) && rho <= Scalar(0.375)))
      throw ConfigError("rho must satisfy 1/4 <= rho <= 3/8");
    if (!(theta >= Scalar(0))) throw ConfigError("theta must satisfy theta >= 0");
    if (!(theta < Scalar(0.125))) throw ConfigError("theta must satisfy theta < 1/8");
    if (!(rho - Scalar(2) * theta >= Scalar(0.25)))
      throw ConfigError("rho - 2*theta must satisfy rho - 2*theta >= 1/4");
  }
};

template <std::floating_point Scalar>
struct SchemeState {
  SpectralField<Scalar> v;           // v_{t_m}
  ConvolutionState<Scalar> conv;     // O^N_{t_m}
  Eigen::Index step_index = 0;       // m
  Scalar tau = Scalar(0);
  Scalar taming = Scalar(1);         // G used to produce this state (1 at m=0)
};

// (1 - e^(-lambda tau)) / lambda without cancellation; tends to tau as
// lambda -> 0.
template <std::floating_point Scalar>
Scalar drift_factor(Scalar lambda, Scalar tau) {
  if (lambda == Scalar(0)) return tau;
  return -std::expm1(-lambda * tau) / lambda;
}

namespace detail {

template <std::floating_point Scalar>
Scalar taming_from(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& v,
                   const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& o,
                   const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& lambda_pow_rho,
                   Scalar tau, Scalar theta) {
  const Scalar tau_theta = std::pow(tau, theta);
  const Scalar denom = Scalar(1) +
                       tau_theta * lambda_pow_rho.dot(v.cwiseProduct(v)) +
                       tau_theta * lambda_pow_rho.dot(o.cwiseProduct(o));
  return Scalar(1) / denom;
}

}  // namespace detail

// Per-run constants: eigenvalues, their rho-th powers, drift factors, and
// the convolution weights of one coarse step.
template <std::floating_point Scalar>
struct SchemeWorkspace {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> lambdas;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> lambda_pow_rho;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> phi;   // drift factors at tau
  ConvolutionWeights<Scalar> conv_weights;        // weights at tau, r substeps
};

template <std::floating_point Scalar>
SchemeWorkspace<Scalar> make_scheme_workspace(const SchemeConfig<Scalar>& cfg,
                                              Eigen::Index substeps) {
  SchemeWorkspace<Scalar> ws;
  ws.lambdas = laplacian_eigenvalues<Scalar>(cfg.modes);
  ws.lambda_pow_rho =
      ws.lambdas.array().pow(static_cast<Scalar>(cfg.rho)).matrix();
  const Scalar tau = cfg.tau();
  ws.phi.resize(cfg.modes);
  for (Eigen::Index k = 0; k < cfg.modes; ++k) ws.phi[k] = drift_factor(ws.lambdas[k], tau);
  ws.conv_weights = make_convolution_weights<Scalar>(ws.lambdas, tau, substeps);
  return ws;
}

template <std::floating_point Scalar>
Scalar taming_factor(const SchemeState<Scalar>& state, Scalar rho, Scalar theta, Scalar tau) {
  if (!(tau > Scalar(0))) throw std::invalid_argument("taming_factor needs tau > 0");
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> lam_rho =
      laplacian_eigenvalues<Scalar>(state.v.modes())
          .array()
          .pow(static_cast<Scalar>(rho))
          .matrix();
  return detail::taming_from<Scalar>(state.v.coefficients, state.conv.values, lam_rho, tau,
                                     theta);
}

namespace detail {

// Shared core of step() and interpolate(): advance from t_m by dt in (0, tau],
// consuming the given fine increments (columns covering [t_m, t_m + dt)).
// G and f are frozen at the left grid point; dt = tau reproduces the full
// step bit-for-bit.
template <std::floating_point Scalar, class Derived>
SchemeState<Scalar> advance(const SchemeState<Scalar>& state,
                            const Eigen::MatrixBase<Derived>& increments,
                            const SchemeConfig<Scalar>& cfg,
                            const SchemeWorkspace<Scalar>& ws,
                            const ConvolutionWeights<Scalar>& weights, Scalar dt) {
  const Scalar g = taming_from<Scalar>(state.v.coefficients, state.conv.values,
                                       ws.lambda_pow_rho, state.tau, cfg.theta);

  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> drift =
      Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(cfg.modes);
  if (cfg.nonlinearity_enabled) {
    SpectralField<Scalar> f = burgers_nonlinearity(state.v);
    if (dt == state.tau) {
      drift = ws.phi.cwiseProduct(f.coefficients) * g;
    } else {
      for (Eigen::Index k = 0; k < cfg.modes; ++k)
        drift[k] = drift_factor(ws.lambdas[k], dt) * g * f.coefficients[k];
    }
  }

  SchemeState<Scalar> next;
  next.tau = state.tau;
  next.taming = g;
  next.conv = step_convolution(state.conv, increments, weights);
  // v - O evolves by the deterministic part alone; adding the advanced
  // convolution back reconstitutes v.
  next.v.coefficients = (state.v.coefficients - state.conv.values).cwiseProduct(
                            weights.decay) +
                        drift + next.conv.values;
  return next;
}

}  // namespace detail

// One full step of size cfg.tau(); the noise slice holds the r fine
// increments of this step, one row per mode.
template <std::floating_point Scalar, class Derived>
SchemeState<Scalar> step(const SchemeState<Scalar>& state,
                         const Eigen::MatrixBase<Derived>& increments,
                         const SchemeConfig<Scalar>& cfg,
                         const SchemeWorkspace<Scalar>& ws) {
  if (increments.rows() != cfg.modes)
    throw std::invalid_argument("step: noise slice has " +
                                std::to_string(increments.rows()) + " modes, config wants " +
                                std::to_string(cfg.modes));
  SchemeState<Scalar> next =
      detail::advance(state, increments, cfg, ws, ws.conv_weights, state.tau);
  next.step_index = state.step_index + 1;
  if (!next.v.coefficients.allFinite())
    throw BlowUpError("solution blew up at step " + std::to_string(next.step_index),
                      static_cast<long>(next.step_index));
  return next;
}

template <std::floating_point Scalar, class Derived>
SchemeState<Scalar> step(const SchemeState<Scalar>& state,
                         const Eigen::MatrixBase<Derived>& increments,
                         const SchemeConfig<Scalar>& cfg) {
  const SchemeWorkspace<Scalar> ws = make_scheme_workspace(cfg, increments.cols());
  return step(state, increments, cfg, ws);
}

// Continuous-time interpolant on [t_m, t_m + tau].  t must lie on the fine
// noise grid: the increments exist only there.
template <std::floating_point Scalar>
SpectralField<Scalar> interpolate(const SchemeState<Scalar>& state,
                                  const SchemeConfig<Scalar>& cfg,
                                  const FgnGrid<Scalar>& noise, Scalar t) {
  const Scalar tau = state.tau;
  const Scalar t_m = static_cast<Scalar>(state.step_index) * tau;
  const Scalar tol = Scalar(1e-9) * tau;
  if (t < t_m - tol || t > t_m + tau + tol)
    throw std::invalid_argument("interpolate: t outside [t_m, t_m + tau]");
  const Scalar dt = t - t_m;
  if (dt <= tol) return state.v;

  const Scalar delta = noise.step;
  const Scalar q_real = dt / delta;
  const Eigen::Index q = static_cast<Eigen::Index>(std::llround(static_cast<double>(q_real)));
  if (std::abs(q_real - static_cast<Scalar>(q)) > Scalar(1e-9) * std::max<Scalar>(q_real, Scalar(1)))
    throw std::invalid_argument("interpolate: t does not lie on the fine noise grid");
  const Eigen::Index offset =
      static_cast<Eigen::Index>(std::llround(static_cast<double>(t_m / delta)));
  if (noise.count() < offset + q)
    throw std::invalid_argument("interpolate: noise bundle too short for t");
  if (noise.modes() < cfg.modes)
    throw std::invalid_argument("interpolate: noise bundle has too few modes");

  const SchemeWorkspace<Scalar> ws = make_scheme_workspace(cfg, q);
  const ConvolutionWeights<Scalar> weights =
      make_convolution_weights<Scalar>(ws.lambdas, dt, q);
  return detail::advance(state, noise.increments.block(0, offset, cfg.modes, q), cfg, ws,
                         weights, dt)
      .v;
}

// Run M steps from u0, consuming a fine-grid noise bundle whose step must
// divide tau.  The observer, when given, sees the initial state and every
// post-step state.
template <std::floating_point Scalar>
SchemeState<Scalar> run(
    const SchemeConfig<Scalar>& cfg, const SpectralField<Scalar>& u0,
    const FgnGrid<Scalar>& noise,
    const std::function<void(const SchemeState<Scalar>&)>& observer = {}) {
  cfg.validate();
  if (u0.modes() > cfg.modes)
    throw std::invalid_argument("run: u0 has " + std::to_string(u0.modes()) +
                                " modes, config allows " + std::to_string(cfg.modes));
  const Scalar tau = cfg.tau();
  if (!(noise.step > Scalar(0))) throw std::invalid_argument("run: noise step must be > 0");
  const Scalar ratio = tau / noise.step;
  const Eigen::Index r = static_cast<Eigen::Index>(std::llround(static_cast<double>(ratio)));
  if (r < 1 || std::abs(ratio - static_cast<Scalar>(r)) > Scalar(1e-9) * ratio)
    throw std::invalid_argument("run: noise resolution does not divide tau");
  if (noise.modes() < cfg.modes)
    throw std::invalid_argument("run: noise bundle has " + std::to_string(noise.modes()) +
                                " modes, config needs " + std::to_string(cfg.modes));
  if (noise.count() < cfg.steps * r)
    throw std::invalid_argument("run: noise bundle too short for M steps");

  SchemeState<Scalar> state;
  state.v.coefficients = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(cfg.modes);
  state.v.coefficients.head(u0.modes()) = u0.coefficients;
  state.conv = zero_convolution<Scalar>(cfg.modes);
  state.tau = tau;
  const SchemeWorkspace<Scalar> ws = make_scheme_workspace(cfg, r);
  if (observer) observer(state);
  for (Eigen::Index m = 0; m < cfg.steps; ++m) {
    state = step(state, noise.increments.block(0, m * r, cfg.modes, r), cfg, ws);
    if (observer) observer(state);
  }
  return state;
}

}  // namespace sbe
