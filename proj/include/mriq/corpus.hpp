#pragma once

#include <array>
#include <cstdint>
#include <filesystem>

#include "mriq/dataset.hpp"

namespace mriq::data {

/// Settings for a synthetic motion-graded corpus. Class proportions are
/// weights (normalized internally); counts come from largest-remainder
/// apportionment. rater_a is always severity_to_class(actual severity);
/// rater_b disagrees with probability rater_noise, and only on images whose
/// severity lies within 25% of a class threshold, by stepping one class
/// across that threshold.
struct CorpusConfig {
  std::filesystem::path out_dir;
  int n = 1000;
  uint64_t seed = 1;
  int size = 64;
  std::array<double, 3> proportions{518, 1220, 372};  // class 0, 1, 2
  double t1 = 1.0, t2 = 4.0;                          // severity thresholds
  double rater_noise = 0.15;
  std::array<double, 3> split_ratios{0.7, 0.1, 0.2};
};

/// Writes n phantom PGMs plus manifest.csv into out_dir and returns the
/// manifest (splits already assigned). Deterministic in config.seed.
Manifest synthesize_corpus(const CorpusConfig& config);

}  // namespace mriq::data
