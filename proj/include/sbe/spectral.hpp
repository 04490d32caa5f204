#pragma once

#include <Eigen/Core>

#include <cmath>
#include <complex>
#include <concepts>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "sbe/fft.hpp"

namespace sbe {

/* Sine-eigenbasis field algebra on (0,1) with Dirichlet boundaries.
 *
 * Fields are represented by coefficients a_k of the orthonormal eigenbasis
 * phi_k(x) = sqrt(2) sin(k pi x) of the Laplacian, with eigenvalues
 * lambda_k = k^2 pi^2.  Collocation grids are the interior points
 * x_i = i/(P+1), on which the type-I discrete sine transform is exactly
 * orthogonal, so band-limited fields project without error.  Transforms run
 * through an FFT of the odd (sine) or even (cosine) extension for larger
 * grids; the direct O(P^2) summation is kept as the correctness oracle and
 * for small grids.
 */

template <std::floating_point Scalar>
struct SpectralField {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> coefficients;  // a_k, k = 1..modes
  Eigen::Index modes() const { return coefficients.size(); }
};

template <std::floating_point Scalar>
struct CollocationField {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> values;  // u(x_i), x_i = i/(P+1), i = 1..P
  Eigen::Index points() const { return values.size(); }
};

inline double eigenvalue(Eigen::Index k) {
  const double kk = static_cast<double>(k);
  return kk * kk * std::numbers::pi * std::numbers::pi;
}

template <std::floating_point Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> collocation_points(Eigen::Index points) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x(points);
  for (Eigen::Index i = 0; i < points; ++i)
    x[i] = static_cast<Scalar>(i + 1) / static_cast<Scalar>(points + 1);
  return x;
}

namespace detail {

inline constexpr Eigen::Index direct_transform_cutoff = 32;

// S_k = sum_{i=1}^P v_i sin(pi k i / (P+1)), k = 1..P.  DST-I is symmetric,
// so the same kernel serves analysis and synthesis.
template <std::floating_point Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dst_i_direct(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& v) {
  const Eigen::Index p = v.size();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> s(p);
  const long double w = std::numbers::pi_v<long double> / static_cast<long double>(p + 1);
  for (Eigen::Index k = 1; k <= p; ++k) {
    long double acc = 0;
    for (Eigen::Index i = 1; i <= p; ++i)
      acc += static_cast<long double>(v[i - 1]) *
             std::sin(w * static_cast<long double>(k) * static_cast<long double>(i));
    s[k - 1] = static_cast<Scalar>(acc);
  }
  return s;
}

template <std::floating_point Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dst_i_fft(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& v) {
  const Eigen::Index p = v.size();
  const Eigen::Index len = 2 * (p + 1);
  Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> y =
      Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>::Zero(len);
  for (Eigen::Index i = 1; i <= p; ++i) {
    y[i] = std::complex<Scalar>(v[i - 1], 0);
    y[len - i] = std::complex<Scalar>(-v[i - 1], 0);
  }
  Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> spec(len);
  fft_engine<Scalar>().fwd(spec, y);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> s(p);
  for (Eigen::Index k = 1; k <= p; ++k) s[k - 1] = -spec[k].imag() / Scalar(2);
  return s;
}

template <std::floating_point Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dst_i(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& v) {
  return v.size() < direct_transform_cutoff ? dst_i_direct<Scalar>(v) : dst_i_fft<Scalar>(v);
}

// C_k = sum_{i=1}^P w_i cos(pi k i / (P+1)), k = 1..kmax, for grid functions
// vanishing at both boundaries (the square of a Dirichlet field).
template <std::floating_point Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> cosine_sum_direct(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& w, Eigen::Index kmax) {
  const Eigen::Index p = w.size();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> c(kmax);
  const long double step = std::numbers::pi_v<long double> / static_cast<long double>(p + 1);
  for (Eigen::Index k = 1; k <= kmax; ++k) {
    long double acc = 0;
    for (Eigen::Index i = 1; i <= p; ++i)
      acc += static_cast<long double>(w[i - 1]) *
             std::cos(step * static_cast<long double>(k) * static_cast<long double>(i));
    c[k - 1] = static_cast<Scalar>(acc);
  }
  return c;
}

template <std::floating_point Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> cosine_sum_fft(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& w, Eigen::Index kmax) {
  const Eigen::Index p = w.size();
  const Eigen::Index len = 2 * (p + 1);
  Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> y =
      Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>::Zero(len);
  for (Eigen::Index i = 1; i <= p; ++i) {
    y[i] = std::complex<Scalar>(w[i - 1], 0);
    y[len - i] = std::complex<Scalar>(w[i - 1], 0);
  }
  Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> spec(len);
  fft_engine<Scalar>().fwd(spec, y);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> c(kmax);
  for (Eigen::Index k = 1; k <= kmax; ++k) c[k - 1] = spec[k].real() / Scalar(2);
  return c;
}

template <std::floating_point Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> cosine_sum(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& w, Eigen::Index kmax) {
  return w.size() < direct_transform_cutoff ? cosine_sum_direct<Scalar>(w, kmax)
                                            : cosine_sum_fft<Scalar>(w, kmax);
}

}  // namespace detail

// Evaluate a spectral field on the interior collocation grid of P points.
template <std::floating_point Scalar>
CollocationField<Scalar> collocate(const SpectralField<Scalar>& u, Eigen::Index points) {
  if (points < u.modes())
    throw std::invalid_argument("collocate: grid of " + std::to_string(points) +
                                " points cannot resolve " + std::to_string(u.modes()) +
                                " modes");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> b =
      Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(points);
  b.head(u.modes()) = u.coefficients * static_cast<Scalar>(std::numbers::sqrt2);
  CollocationField<Scalar> field;
  field.values = detail::dst_i<Scalar>(b);
  return field;
}

// P_N applied to a grid function: first N coefficients of the orthonormally
// scaled type-I DST.
template <std::floating_point Scalar>
SpectralField<Scalar> project(const CollocationField<Scalar>& samples, Eigen::Index modes) {
  if (modes < 1) throw std::invalid_argument("project needs modes >= 1");
  if (modes > samples.points())
    throw std::invalid_argument("project: " + std::to_string(modes) +
                                " modes exceed " + std::to_string(samples.points()) +
                                " grid points");
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> s = detail::dst_i<Scalar>(samples.values);
  SpectralField<Scalar> u;
  u.coefficients = s.head(modes) * static_cast<Scalar>(std::numbers::sqrt2) /
                   static_cast<Scalar>(samples.points() + 1);
  return u;
}

template <std::floating_point Scalar>
Scalar sobolev_norm(const SpectralField<Scalar>& u, double gamma) {
  long double acc = 0;
  for (Eigen::Index k = 1; k <= u.modes(); ++k) {
    const long double a = static_cast<long double>(u.coefficients[k - 1]);
    acc += static_cast<long double>(std::pow(eigenvalue(k), gamma)) * a * a;
  }
  return static_cast<Scalar>(std::sqrt(acc));
}

// p in {2, 4, inf}.  L2 is exact on coefficients; L4 uses composite
// quadrature on the collocation grid (exact for band-limited u when
// quad_points >= 4*modes); Linf is the grid max (default grid 8*modes).
template <std::floating_point Scalar>
Scalar lp_norm(const SpectralField<Scalar>& u, double p, Eigen::Index quad_points = 0) {
  if (quad_points == 0) quad_points = 8 * std::max<Eigen::Index>(u.modes(), 1);
  if (quad_points < 4 * u.modes())
    throw std::invalid_argument("lp_norm needs quad_points >= 4*modes");
  if (p == 2.0) return u.coefficients.norm();
  if (p == 4.0) {
    const CollocationField<Scalar> g = collocate(u, quad_points);
    const long double h = 1.0L / static_cast<long double>(quad_points + 1);
    long double acc = 0;
    for (Eigen::Index i = 0; i < quad_points; ++i) {
      const long double v = static_cast<long double>(g.values[i]);
      acc += v * v * v * v;
    }
    return static_cast<Scalar>(std::pow(acc * h, 0.25L));
  }
  if (p == std::numeric_limits<double>::infinity()) {
    const CollocationField<Scalar> g = collocate(u, quad_points);
    return g.values.cwiseAbs().maxCoeff();
  }
  throw std::invalid_argument("lp_norm supports p in {2, 4, inf}");
}

/* P_N f(u) for f(u) = u u_x, computed pseudospectrally as (1/2) d/dx (u^2).
 *
 * u^2 of an N-mode sine series is a cosine series with modes 0..2N; on the
 * dealiasing grid of exactly 2N+1 interior points its cosine sums are exact,
 * so the returned field is the exact projection P_N f(u) up to rounding.
 * With u = sum a_k phi_k and u^2 = sum c_m cos(m pi x), differentiating gives
 * f(u) = sum_m (-m pi c_m / 2) sin(m pi x), i.e. b_k = -k pi c_k / (2 sqrt 2).
 */
template <std::floating_point Scalar>
SpectralField<Scalar> burgers_nonlinearity(const SpectralField<Scalar>& u) {
  const Eigen::Index n = u.modes();
  SpectralField<Scalar> f;
  f.coefficients = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(n);
  if (n == 0) return f;
  const Eigen::Index p = 2 * n + 1;
  const CollocationField<Scalar> g = collocate(u, p);
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> w = g.values.array().square();
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> sums = detail::cosine_sum<Scalar>(w, n);
  const Scalar pi = std::numbers::pi_v<Scalar>;
  const Scalar root8 = Scalar(2) * static_cast<Scalar>(std::numbers::sqrt2);
  for (Eigen::Index k = 1; k <= n; ++k) {
    const Scalar c_k = Scalar(2) * sums[k - 1] / static_cast<Scalar>(p + 1);
    f.coefficients[k - 1] = -static_cast<Scalar>(k) * pi * c_k / root8;
  }
  return f;
}

template <std::floating_point Scalar>
SpectralField<Scalar> semigroup_apply(const SpectralField<Scalar>& u, Scalar t) {
  if (t < Scalar(0)) throw std::invalid_argument("semigroup_apply needs t >= 0");
  SpectralField<Scalar> out;
  out.coefficients.resize(u.modes());
  for (Eigen::Index k = 1; k <= u.modes(); ++k)
    out.coefficients[k - 1] =
        u.coefficients[k - 1] * std::exp(-static_cast<Scalar>(eigenvalue(k)) * t);
  return out;
}

}  // namespace sbe
