#include "mriq/kspace.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mriq/rng.hpp"

namespace mriq::kspace {

double MotionTrace::severity() const {
  double worst = 0;
  for (const Disp& d : rows)
    worst = std::max(worst, std::sqrt(d.dx * d.dx + d.dy * d.dy));
  return worst;
}

RealGrid simulate_motion(const RealGrid& image, const MotionTrace& trace) {
  if (image.h != image.w)
    throw Error("simulate_motion: image must be square, got " +
                std::to_string(image.h) + "x" + std::to_string(image.w));
  if (!is_pow2(image.h))
    throw Error("simulate_motion: image size must be a power of two, got " +
                std::to_string(image.h));
  if (static_cast<int>(trace.rows.size()) != image.h)
    throw Error("simulate_motion: trace has " +
                std::to_string(trace.rows.size()) + " rows for a " +
                std::to_string(image.h) + "-row image");

  const int n = image.h;
  ComplexGrid freq = fft2(image);
  for (int ky = 0; ky < n; ++ky) {
    const auto& d = trace.rows[ky];
    if (d.dx == 0.0 && d.dy == 0.0) continue;
    int ky_s = ky < n / 2 ? ky : ky - n;  // signed (centered) frequency
    for (int kx = 0; kx < n; ++kx) {
      int kx_s = kx < n / 2 ? kx : kx - n;
      double phase = -2.0 * std::numbers::pi *
                     (kx_s * d.dx / n + ky_s * d.dy / n);
      freq.at(ky, kx) *= std::complex<double>(std::cos(phase),
                                              std::sin(phase));
    }
  }

  ComplexGrid spatial = ifft2(freq);
  RealGrid out(n, n);
  for (size_t i = 0; i < out.v.size(); ++i)
    out.v[i] = std::clamp(std::abs(spatial.v[i]), 0.0, 1.0);
  return out;
}

MotionTrace random_trace(uint64_t seed, int height, double severity) {
  if (height < 2)
    throw Error("random_trace: height must be >= 2, got " +
                std::to_string(height));
  if (severity < 0)
    throw Error("random_trace: severity must be non-negative");

  rng::Engine eng(seed);
  MotionTrace trace;
  trace.rows.assign(height, {});

  int events = eng.uniform_int(1, 4);
  // Distinct boundaries in [1, height-1]: the leading rows stay at rest.
  std::vector<int> boundaries;
  while (static_cast<int>(boundaries.size()) < events) {
    int b = eng.uniform_int(1, height - 1);
    if (std::find(boundaries.begin(), boundaries.end(), b) ==
        boundaries.end())
      boundaries.push_back(b);
  }
  std::sort(boundaries.begin(), boundaries.end());

  struct Event {
    double angle, mag;
  };
  std::vector<Event> ev(events);
  double max_mag = 0;
  for (Event& e : ev) {
    e.angle = eng.uniform(0.0, 2.0 * std::numbers::pi);
    e.mag = eng.uniform(0.5, 1.0);
    max_mag = std::max(max_mag, e.mag);
  }
  // Scale so the largest event magnitude equals the requested severity.
  double scale = severity == 0.0 ? 0.0 : severity / max_mag;
  for (int j = 0; j < events; ++j) {
    int lo = boundaries[j];
    int hi = j + 1 < events ? boundaries[j + 1] : height;
    double dx = ev[j].mag * scale * std::cos(ev[j].angle);
    double dy = ev[j].mag * scale * std::sin(ev[j].angle);
    for (int row = lo; row < hi; ++row) trace.rows[row] = {dx, dy};
  }
  // Guard against the last-ulp overshoot of hypot against the bound.
  for (int guard = 0; guard < 4 && trace.severity() > severity; ++guard)
    for (auto& d : trace.rows) {
      d.dx *= 1.0 - 0x1.0p-50;
      d.dy *= 1.0 - 0x1.0p-50;
    }
  return trace;
}

int severity_to_class(double severity, double t1, double t2) {
  if (severity < 0)
    throw Error("severity_to_class: severity must be non-negative");
  if (!(t1 >= 0) || !(t1 < t2))
    throw Error("severity_to_class: thresholds must satisfy 0 <= t1 < t2");
  if (severity <= t1) return 2;
  if (severity <= t2) return 1;
  return 0;
}

namespace {

struct Ellipse {
  double cx, cy, a, b, cos_t, sin_t;

  bool contains(double x, double y) const {
    double u = (x - cx) * cos_t + (y - cy) * sin_t;
    double v = -(x - cx) * sin_t + (y - cy) * cos_t;
    return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
  }
};

Ellipse draw_ellipse(rng::Engine& eng, double cx, double cy, double a,
                     double b) {
  double theta = eng.uniform(0.0, std::numbers::pi);
  return {cx, cy, a, b, std::cos(theta), std::sin(theta)};
}

}  // namespace

RealGrid generate_phantom(const PhantomSpec& spec) {
  if (spec.size < 32 || !is_pow2(spec.size))
    throw Error("generate_phantom: size must be a power of two >= 32, got " +
                std::to_string(spec.size));
  if (spec.min_blobs < 0 || spec.max_blobs < spec.min_blobs)
    throw Error("generate_phantom: invalid blob count range");
  if (!(spec.intensity_lo <= spec.intensity_hi) || spec.intensity_lo < 0 ||
      spec.intensity_hi > 1)
    throw Error("generate_phantom: intensity range must be within [0, 1]");

  rng::Engine eng(spec.seed);
  const int n = spec.size;
  RealGrid img(n, n);
  for (double& v : img.v) v = spec.background;

  Ellipse body = draw_ellipse(
      eng, n * eng.uniform(0.47, 0.53), n * eng.uniform(0.47, 0.53),
      n * eng.uniform(0.32, 0.42), n * eng.uniform(0.30, 0.40));
  double body_level = eng.uniform(0.35, 0.55);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      if (body.contains(x, y)) img.at(y, x) += body_level;

  int blobs = eng.uniform_int(spec.min_blobs, spec.max_blobs);
  for (int i = 0; i < blobs; ++i) {
    Ellipse e = draw_ellipse(
        eng, body.cx + n * eng.uniform(-0.22, 0.22),
        body.cy + n * eng.uniform(-0.22, 0.22), n * eng.uniform(0.03, 0.16),
        n * eng.uniform(0.03, 0.16));
    double level = eng.uniform(spec.intensity_lo, spec.intensity_hi);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x)
        if (e.contains(x, y) && body.contains(x, y))
          img.at(y, x) = 0.45 * img.at(y, x) + 0.55 * level;
  }

  // Mild illumination gradient plus pixel noise gives every phantom a
  // distinct texture without hiding motion ghosts.
  double phi = eng.uniform(0.0, 2.0 * std::numbers::pi);
  double gx = std::cos(phi), gy = std::sin(phi);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      double u = (static_cast<double>(x) / n - 0.5) * gx +
                 (static_cast<double>(y) / n - 0.5) * gy;
      img.at(y, x) += 0.06 * u + 0.01 * eng.normal();
    }

  for (double& v : img.v) v = std::clamp(v, 0.0, 1.0);
  return img;
}

}  // namespace mriq::kspace
