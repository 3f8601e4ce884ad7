#pragma once

#include <complex>
#include <vector>

#include "mriq/errors.hpp"

namespace mriq::kspace {

/// Real-valued image grid, row-major, values nominally in [0, 1].
struct RealGrid {
  int h = 0, w = 0;
  std::vector<double> v;

  RealGrid() = default;
  RealGrid(int h_, int w_) : h(h_), w(w_), v(static_cast<size_t>(h_) * w_) {}

  double& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
  double at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
};

/// Complex frequency-domain grid, same layout.
struct ComplexGrid {
  int h = 0, w = 0;
  std::vector<std::complex<double>> v;

  ComplexGrid() = default;
  ComplexGrid(int h_, int w_)
      : h(h_), w(w_), v(static_cast<size_t>(h_) * w_) {}

  std::complex<double>& at(int y, int x) {
    return v[static_cast<size_t>(y) * w + x];
  }
  const std::complex<double>& at(int y, int x) const {
    return v[static_cast<size_t>(y) * w + x];
  }
};

bool is_pow2(int n);

/// Radix-2 2-D FFT with unitary normalization: each direction carries
/// 1/sqrt(h*w), so ifft2(fft2(x)) == x and energy is preserved (Parseval).
/// Both dimensions must be powers of two.
ComplexGrid fft2(const ComplexGrid& grid);
ComplexGrid fft2(const RealGrid& grid);
ComplexGrid ifft2(const ComplexGrid& grid);

}  // namespace mriq::kspace
