#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <complex>
#include <concepts>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "sbe/errors.hpp"
#include "sbe/fft.hpp"
#include "sbe/rng.hpp"

namespace sbe {

/* Fractional Gaussian noise with exact covariance.
 *
 * Increments of fractional Brownian motion with Hurst parameter H on a
 * uniform grid of spacing `step` form a stationary Gaussian sequence whose
 * autocovariance at integer lag l is
 *
 *   gamma(l) = 0.5 * step^(2H) * (|l+1|^(2H) - 2|l|^(2H) + |l-1|^(2H)).
 *
 * Sampling embeds that sequence in a circulant ring of twice the length and
 * diagonalizes it with an FFT; the embedding is nonnegative definite for all
 * H in (0,1), so eigenvalues below zero are floating-point dust (clamped
 * within a tight tolerance, a hard error beyond it).  A dense Cholesky
 * factorization of the covariance matrix is kept as a slow exact oracle.
 */

struct HurstParameter {
  // Rough regime H in (1/2, 1) by default; `permissive` widens the domain to
  // (0, 1) for degeneration checks against classical white-noise results.
  explicit HurstParameter(double h, bool permissive = false) : value(h) {
    if (!(h > 0.0 && h < 1.0))
      throw std::invalid_argument("Hurst parameter must lie in (0, 1), got " +
                                  std::to_string(h));
    if (!permissive && !(h > 0.5))
      throw std::invalid_argument(
          "Hurst parameter must lie in (1/2, 1) unless permissive, got " +
          std::to_string(h));
  }
  double value;
};

// Covariance of fractional Brownian motion: E[B_H(t) B_H(s)].
inline double fbm_covariance(double t, double s, HurstParameter h) {
  if (t < 0.0 || s < 0.0) throw std::invalid_argument("fbm_covariance needs t, s >= 0");
  const double twoH = 2.0 * h.value;
  return 0.5 * (std::pow(t, twoH) + std::pow(s, twoH) - std::pow(std::abs(t - s), twoH));
}

// Autocovariance of the increment sequence at integer lag.
inline double fgn_autocovariance(std::int64_t lag, double step, HurstParameter h) {
  if (!(step > 0.0)) throw std::invalid_argument("fgn_autocovariance needs step > 0");
  const double twoH = 2.0 * h.value;
  const double l = static_cast<double>(lag < 0 ? -lag : lag);
  return 0.5 * std::pow(step, twoH) *
         (std::pow(l + 1.0, twoH) - 2.0 * std::pow(l, twoH) +
          std::pow(std::abs(l - 1.0), twoH));
}

template <std::floating_point Scalar>
struct FgnGrid {
  Scalar step = Scalar(0);
  // One row per mode, one column per substep.
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> increments;

  Eigen::Index modes() const { return increments.rows(); }
  Eigen::Index count() const { return increments.cols(); }
};

// A noise bundle is the per-path fGn payload shared by every step size that
// resolves one sample path: same data, role-specific name.
template <std::floating_point Scalar>
using NoiseBundle = FgnGrid<Scalar>;

template <std::floating_point Scalar>
struct CirculantEmbedding {
  Eigen::Index count = 0;
  Scalar step = Scalar(0);
  double hurst = 0.0;
  // sqrt of the circulant eigenvalues, length 2 * count.
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> sqrt_eigenvalues;
};

template <std::floating_point Scalar>
CirculantEmbedding<Scalar> prepare_circulant(Eigen::Index count, Scalar step,
                                             HurstParameter h) {
  if (count < 1) throw std::invalid_argument("prepare_circulant needs count >= 1");
  if (!(step > Scalar(0))) throw std::invalid_argument("prepare_circulant needs step > 0");
  const Eigen::Index m = 2 * count;

  Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> ring(m);
  for (Eigen::Index j = 0; j <= count; ++j)
    ring[j] = std::complex<Scalar>(
        static_cast<Scalar>(fgn_autocovariance(j, static_cast<double>(step), h)), 0);
  for (Eigen::Index j = 1; j < count; ++j) ring[m - j] = ring[j];

  Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> spectrum(m);
  detail::fft_engine<Scalar>().fwd(spectrum, ring);

  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> eigs = spectrum.real();
  const Scalar max_eig = eigs.maxCoeff();
  if (!(max_eig > Scalar(0)))
    throw EmbeddingError("circulant embedding produced no positive eigenvalue");
  const Scalar tol = Scalar(1e-10) * max_eig;
  for (Eigen::Index j = 0; j < m; ++j) {
    if (eigs[j] < -tol)
      throw EmbeddingError("circulant embedding eigenvalue " + std::to_string(j) +
                           " is " + std::to_string(static_cast<double>(eigs[j])) +
                           ", below tolerance " +
                           std::to_string(static_cast<double>(-tol)));
    if (eigs[j] < Scalar(0)) eigs[j] = Scalar(0);
  }

  CirculantEmbedding<Scalar> emb;
  emb.count = count;
  emb.step = step;
  emb.hurst = h.value;
  emb.sqrt_eigenvalues = eigs.cwiseSqrt();
  return emb;
}

namespace detail {

// Produce one mode row from its own counter-based stream.  Draw order per
// row: one Gaussian for frequency 0, a pair per frequency 1..count-1, one
// for the Nyquist frequency.
template <std::floating_point Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> sample_fgn_row(const CirculantEmbedding<Scalar>& emb,
                                                        RngStream stream) {
  const Eigen::Index n = emb.count;
  const Eigen::Index m = 2 * n;
  const Scalar half = std::sqrt(Scalar(0.5));

  Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> v(m);
  v[0] = emb.sqrt_eigenvalues[0] * static_cast<Scalar>(stream.next_gaussian());
  for (Eigen::Index j = 1; j < n; ++j) {
    const Scalar a = static_cast<Scalar>(stream.next_gaussian());
    const Scalar b = static_cast<Scalar>(stream.next_gaussian());
    v[j] = emb.sqrt_eigenvalues[j] * half * std::complex<Scalar>(a, b);
    v[m - j] = std::conj(v[j]);
  }
  v[n] = emb.sqrt_eigenvalues[n] * static_cast<Scalar>(stream.next_gaussian());

  Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> y(m);
  fft_engine<Scalar>().fwd(y, v);
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(m));
  return y.head(n).real() * scale;
}

}  // namespace detail

// Sample `modes` independent fGn rows of length emb.count.  Bit-reproducible:
// row k depends only on (seed, path, k) and the embedding parameters.
template <std::floating_point Scalar>
FgnGrid<Scalar> sample_fgn(const CirculantEmbedding<Scalar>& emb, Eigen::Index modes,
                           std::uint64_t seed, std::uint64_t path = 0) {
  if (modes < 1) throw std::invalid_argument("sample_fgn needs modes >= 1");
  FgnGrid<Scalar> grid;
  grid.step = emb.step;
  grid.increments.resize(modes, emb.count);
  for (Eigen::Index k = 0; k < modes; ++k)
    grid.increments.row(k) =
        detail::sample_fgn_row<Scalar>(emb, RngStream(seed, path, static_cast<std::uint64_t>(k)))
            .transpose();
  return grid;
}

template <std::floating_point Scalar>
FgnGrid<Scalar> sample_fgn(Eigen::Index modes, Eigen::Index count, Scalar step,
                           HurstParameter h, std::uint64_t seed, std::uint64_t path = 0) {
  return sample_fgn(prepare_circulant(count, step, h), modes, seed, path);
}

template <std::floating_point Scalar>
struct FgnCholesky {
  Scalar step = Scalar(0);
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> lower;
};

// Exact-covariance oracle; O(count^2) per sample after an O(count^3) setup,
// capped so nobody reaches for it at production sizes.
template <std::floating_point Scalar>
FgnCholesky<Scalar> prepare_cholesky(Eigen::Index count, Scalar step, HurstParameter h) {
  if (count < 1 || count > 2048)
    throw std::invalid_argument("prepare_cholesky supports 1 <= count <= 2048");
  if (!(step > Scalar(0))) throw std::invalid_argument("prepare_cholesky needs step > 0");
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> cov(count, count);
  for (Eigen::Index i = 0; i < count; ++i)
    for (Eigen::Index j = 0; j < count; ++j)
      cov(i, j) = static_cast<Scalar>(
          fgn_autocovariance(i - j, static_cast<double>(step), h));
  Eigen::LLT<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> llt(cov);
  if (llt.info() != Eigen::Success)
    throw EmbeddingError("fGn covariance matrix is not positive definite");
  FgnCholesky<Scalar> f;
  f.step = step;
  f.lower = llt.matrixL();
  return f;
}

template <std::floating_point Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> sample_fgn_cholesky(const FgnCholesky<Scalar>& f,
                                                             RngStream& stream) {
  const Eigen::Index n = f.lower.rows();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = static_cast<Scalar>(stream.next_gaussian());
  return f.lower * z;
}

template <std::floating_point Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> sample_fgn_cholesky(Eigen::Index count, Scalar step,
                                                             HurstParameter h,
                                                             RngStream& stream) {
  const FgnCholesky<Scalar> f = prepare_cholesky(count, step, h);
  return sample_fgn_cholesky(f, stream);
}

}  // namespace sbe
