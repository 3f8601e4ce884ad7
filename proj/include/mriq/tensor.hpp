#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mriq/errors.hpp"

namespace mriq {

/// Dense 4-axis array in (batch, channel, height, width) order, row-major,
/// batch outermost. Value type is float for the training path and double
/// for finite-difference checks.
template <typename T>
struct Tensor4 {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_) : n(n_), c(c_), h(h_), w(w_) {
    if (n < 0 || c < 0 || h < 0 || w < 0)
      throw ShapeError("Tensor4: negative dimension in " + shape_str());
    data.assign(static_cast<size_t>(n) * c * h * w, T(0));
  }

  size_t size() const { return data.size(); }

  size_t offset(int b, int ch, int y, int x) const {
    return ((static_cast<size_t>(b) * c + ch) * h + y) * w + x;
  }

  T& at(int b, int ch, int y, int x) { return data[offset(b, ch, y, x)]; }
  const T& at(int b, int ch, int y, int x) const { return data[offset(b, ch, y, x)]; }

  /// Pointer to the start of one (batch, channel, row) line of length w.
  T* row(int b, int ch, int y) { return data.data() + offset(b, ch, y, 0); }
  const T* row(int b, int ch, int y) const { return data.data() + offset(b, ch, y, 0); }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  bool same_shape(const Tensor4& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  std::string shape_str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + ")";
  }
};

template <typename T>
bool all_finite(const Tensor4<T>& t) {
  for (T v : t.data)
    if (!std::isfinite(static_cast<double>(v))) return false;
  return true;
}

using Tensor4f = Tensor4<float>;
using Tensor4d = Tensor4<double>;

}  // namespace mriq
