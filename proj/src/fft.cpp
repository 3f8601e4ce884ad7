#include "mriq/fft.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace mriq::kspace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

namespace {

// In-place iterative Cooley-Tukey, no normalization. dir = -1 forward,
// +1 inverse (sign of the twiddle exponent).
void fft_pow2(std::complex<double>* a, int n, int dir) {
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (int len = 2; len <= n; len <<= 1) {
    double ang = dir * 2.0 * std::numbers::pi / len;
    std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (int i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (int j = 0; j < len / 2; ++j) {
        std::complex<double> u = a[i + j];
        std::complex<double> t = a[i + j + len / 2] * w;
        a[i + j] = u + t;
        a[i + j + len / 2] = u - t;
        w *= wlen;
      }
    }
  }
}

ComplexGrid transform2(ComplexGrid grid, int dir) {
  if (!is_pow2(grid.h) || !is_pow2(grid.w))
    throw Error("fft2: dimensions must be powers of two, got " +
                std::to_string(grid.h) + "x" + std::to_string(grid.w));
  for (int y = 0; y < grid.h; ++y) fft_pow2(&grid.at(y, 0), grid.w, dir);

  std::vector<std::complex<double>> column(grid.h);
  for (int x = 0; x < grid.w; ++x) {
    for (int y = 0; y < grid.h; ++y) column[y] = grid.at(y, x);
    fft_pow2(column.data(), grid.h, dir);
    for (int y = 0; y < grid.h; ++y) grid.at(y, x) = column[y];
  }

  double scale = 1.0 / std::sqrt(static_cast<double>(grid.h) * grid.w);
  for (auto& z : grid.v) z *= scale;
  return grid;
}

}  // namespace

ComplexGrid fft2(const ComplexGrid& grid) { return transform2(grid, -1); }

ComplexGrid fft2(const RealGrid& grid) {
  ComplexGrid c(grid.h, grid.w);
  for (size_t i = 0; i < grid.v.size(); ++i) c.v[i] = grid.v[i];
  return transform2(std::move(c), -1);
}

ComplexGrid ifft2(const ComplexGrid& grid) { return transform2(grid, +1); }

}  // namespace mriq::kspace
