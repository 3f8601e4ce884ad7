#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <set>
#include <utility>

#include "doctest.h"
#include "mriq/kspace.hpp"
#include "oracles.hpp"

namespace ks = mriq::kspace;

namespace {

double max_abs_diff(const ks::RealGrid& a, const ks::RealGrid& b) {
  double worst = 0;
  for (size_t i = 0; i < a.v.size(); ++i)
    worst = std::max(worst, std::abs(a.v[i] - b.v[i]));
  return worst;
}

ks::MotionTrace constant_trace(int height, double dx, double dy) {
  ks::MotionTrace t;
  t.rows.assign(height, {dx, dy});
  return t;
}

}  // namespace

TEST_CASE("a zero trace reproduces the image") {
  ks::RealGrid img = ks::generate_phantom({.size = 64, .seed = 101});
  SUBCASE("explicit all-zero rows") {
    ks::MotionTrace t;
    t.rows.assign(64, {0.0, 0.0});
    CHECK(max_abs_diff(ks::simulate_motion(img, t), img) < 1e-6);
  }
  SUBCASE("zero-severity random trace") {
    ks::MotionTrace t = ks::random_trace(9, 64, 0.0);
    for (const auto& d : t.rows) {
      CHECK(d.dx == 0.0);
      CHECK(d.dy == 0.0);
    }
    CHECK(max_abs_diff(ks::simulate_motion(img, t), img) < 1e-6);
  }
}

TEST_CASE("a constant trace is an exact circular shift") {
  ks::RealGrid img = ks::generate_phantom({.size = 64, .seed = 77});
  for (int dx : {0, 1, 3, 7})
    for (int dy : {0, 2, 5, 7}) {
      ks::RealGrid moved = ks::simulate_motion(img, constant_trace(64, dx, dy));
      ks::RealGrid want = oracle::circular_shift(img, dx, dy);
      CAPTURE(dx);
      CAPTURE(dy);
      CHECK(max_abs_diff(moved, want) < 1e-6);
    }
}

TEST_CASE("a mixed trace actually corrupts the image") {
  ks::RealGrid img = ks::generate_phantom({.size = 64, .seed = 5});
  ks::MotionTrace t = ks::random_trace(31, 64, 6.0);
  ks::RealGrid out = ks::simulate_motion(img, t);
  CHECK(max_abs_diff(out, img) > 1e-3);
  for (double v : out.v) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("simulate_motion validates its geometry") {
  ks::RealGrid img = ks::generate_phantom({.size = 32, .seed = 1});
  CHECK_THROWS_AS(ks::simulate_motion(img, constant_trace(31, 1, 0)),
                  mriq::Error);
  ks::RealGrid rect(32, 64);
  CHECK_THROWS_AS(ks::simulate_motion(rect, constant_trace(32, 1, 0)),
                  mriq::Error);
  ks::RealGrid odd(48, 48);
  CHECK_THROWS_AS(ks::simulate_motion(odd, constant_trace(48, 1, 0)),
                  mriq::Error);
}

TEST_CASE("random traces start at rest and hold at most four positions") {
  for (uint64_t seed : {1ull, 2ull, 3ull, 99ull, 1234ull}) {
    ks::MotionTrace t = ks::random_trace(seed, 64, 3.0);
    REQUIRE(t.rows.size() == 64);
    CHECK(t.rows[0].dx == 0.0);
    CHECK(t.rows[0].dy == 0.0);

    std::set<std::pair<double, double>> positions;
    for (const auto& d : t.rows) positions.insert({d.dx, d.dy});
    CHECK(positions.count({0.0, 0.0}) == 1);
    // rest + between one and four event positions
    CHECK(positions.size() >= 2);
    CHECK(positions.size() <= 5);
  }
}

TEST_CASE("random trace severity matches the request") {
  for (double want : {0.5, 1.0, 2.5, 6.0}) {
    ks::MotionTrace t = ks::random_trace(17, 64, want);
    double got = t.severity();
    CAPTURE(want);
    CHECK(got <= want);
    CHECK(got >= want * (1.0 - 1e-12));
  }
  CHECK_THROWS_AS(ks::random_trace(1, 1, 1.0), mriq::Error);
  CHECK_THROWS_AS(ks::random_trace(1, 64, -0.5), mriq::Error);
}

TEST_CASE("severity maps to grades across the thresholds") {
  CHECK(ks::severity_to_class(0.0) == 2);
  CHECK(ks::severity_to_class(1.0) == 2);     // boundary stays in the top grade
  CHECK(ks::severity_to_class(1.0001) == 1);  // just over t1
  CHECK(ks::severity_to_class(4.0) == 1);     // boundary stays mild
  CHECK(ks::severity_to_class(4.0001) == 0);  // just over t2
  CHECK(ks::severity_to_class(100.0) == 0);

  CHECK(ks::severity_to_class(2.0, 2.0, 3.0) == 2);
  CHECK(ks::severity_to_class(2.5, 2.0, 3.0) == 1);
  CHECK(ks::severity_to_class(3.5, 2.0, 3.0) == 0);
  CHECK_THROWS_AS(ks::severity_to_class(-1.0), mriq::Error);
  CHECK_THROWS_AS(ks::severity_to_class(1.0, 3.0, 2.0), mriq::Error);
}

TEST_CASE("phantoms are deterministic, bounded and seed-sensitive") {
  ks::PhantomSpec spec{.size = 64, .seed = 4242};
  ks::RealGrid a = ks::generate_phantom(spec);
  ks::RealGrid b = ks::generate_phantom(spec);
  CHECK(a.v == b.v);

  for (double v : a.v) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  // A phantom has structure: the body is brighter than the background.
  double lo = 1.0, hi = 0.0;
  for (double v : a.v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(hi - lo > 0.2);

  spec.seed = 4243;
  ks::RealGrid c = ks::generate_phantom(spec);
  CHECK(a.v != c.v);
}

TEST_CASE("phantom specs are validated") {
  CHECK_THROWS_AS(ks::generate_phantom({.size = 16}), mriq::Error);
  CHECK_THROWS_AS(ks::generate_phantom({.size = 48}), mriq::Error);
  ks::PhantomSpec bad_blobs{.size = 32, .min_blobs = 5, .max_blobs = 2};
  CHECK_THROWS_AS(ks::generate_phantom(bad_blobs), mriq::Error);
  ks::PhantomSpec bad_level{.size = 32, .intensity_lo = 0.5,
                            .intensity_hi = 1.5};
  CHECK_THROWS_AS(ks::generate_phantom(bad_level), mriq::Error);
}
