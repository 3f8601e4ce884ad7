#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "mriq/fft.hpp"

namespace mriq::kspace {

/// Per-row in-plane displacement during acquisition: rows[ky] is the (dx, dy)
/// position of the subject while phase-encode row ky was sampled.
struct MotionTrace {
  struct Disp {
    double dx = 0, dy = 0;
  };
  std::vector<Disp> rows;

  /// Largest row displacement magnitude, the scalar motion severity.
  double severity() const;
};

/// Applies motion to an image through its k-space: row ky of the spectrum is
/// multiplied by exp(-2*pi*i*(kx*dx/W + ky*dy/H)) with signed (centered)
/// frequency indices, i.e. row ky is taken from the Fourier transform of the
/// image translated by trace.rows[ky]. The result is the magnitude of the
/// inverse transform, clamped to [0, 1]. A constant trace therefore produces
/// an exact circular shift and a zero trace reproduces the input.
RealGrid simulate_motion(const RealGrid& image, const MotionTrace& trace);

/// Piecewise-constant random trace with 1 to 4 motion events at distinct row
/// boundaries; the subject starts at rest and jumps to a new position at
/// each event. Displacement magnitudes are scaled so the trace severity
/// equals the requested value exactly (zero request -> zero trace).
MotionTrace random_trace(uint64_t seed, int height, double severity);

/// Maps motion severity to a quality grade: 2 (no artifact) for s <= t1,
/// 1 (mild) for t1 < s <= t2, 0 (significant) for s > t2.
int severity_to_class(double severity, double t1 = 1.0, double t2 = 4.0);

/// Synthetic anatomy: an elliptical body with randomly placed interior
/// ellipses, a mild intensity gradient and pixel noise, clamped to [0, 1].
struct PhantomSpec {
  int size = 64;  // square, power of two, >= 32
  uint64_t seed = 0;
  int min_blobs = 4, max_blobs = 9;
  double intensity_lo = 0.25, intensity_hi = 0.9;
  double background = 0.05;
};

RealGrid generate_phantom(const PhantomSpec& spec);

}  // namespace mriq::kspace
