#ifndef FLOWNULL_FFT_HPP
#define FLOWNULL_FFT_HPP

#include "flownull/tensor.hpp"

namespace flownull {

/// Unitary 2-D DFT of a (H,W) complex image; H and W must be powers of two.
/// Unitary convention: forward and inverse both carry 1/sqrt(HW), so
/// ||fft2(x)|| == ||x|| and ifft2(fft2(x)) == x.
Tensor fft2(const Tensor& image);
Tensor ifft2(const Tensor& image);

bool is_power_of_two(int n);

} // namespace flownull

#endif
