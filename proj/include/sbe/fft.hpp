#pragma once

#include <unsupported/Eigen/FFT>

#include <concepts>

namespace sbe::detail {

// One FFT engine per thread and scalar type; the engine caches kissfft plans
// by transform size, so repeated transforms of the same length reuse a plan.
template <std::floating_point Scalar>
Eigen::FFT<Scalar>& fft_engine() {
  thread_local Eigen::FFT<Scalar> engine;
  return engine;
}

}  // namespace sbe::detail
