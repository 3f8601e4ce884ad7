#include "mriq/corpus.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

#include "mriq/kspace.hpp"
#include "mriq/rng.hpp"

namespace mriq::data {

namespace {

// Per-image substreams of the corpus stream, so phantom geometry, motion and
// rater noise draw independently.
constexpr uint64_t kPhantomSub = 1;
constexpr uint64_t kTraceSub = 2;
constexpr uint64_t kRaterSub = 3;

// Severity target inside the class band, with a 2% margin off each
// threshold so float round-trips can never move an image across a class
// boundary. Class 0 (worst) draws up to 2*t2.
double draw_severity(int cls, double t1, double t2, rng::Engine& eng) {
  switch (cls) {
    case 2: return eng.uniform(0.02 * t1, 0.98 * t1);
    case 1: return eng.uniform(1.02 * t1, 0.98 * t2);
    default: return eng.uniform(1.02 * t2, 2.0 * t2);
  }
}

// Within 25% of a threshold the graders genuinely disagree; the noisy rater
// steps one class across the nearby boundary.
int perturb_label(int label, double severity, double t1, double t2) {
  if (std::abs(severity - t1) <= 0.25 * t1) {
    if (label == 2) return 1;
    if (label == 1) return 2;
  }
  if (std::abs(severity - t2) <= 0.25 * t2) {
    if (label == 1) return 0;
    if (label == 0) return 1;
  }
  return label;
}

}  // namespace

Manifest synthesize_corpus(const CorpusConfig& config) {
  if (config.n < 10)
    throw Error("synthesize_corpus: need at least 10 images, got " +
                std::to_string(config.n));
  if (config.rater_noise < 0 || config.rater_noise > 1)
    throw Error("synthesize_corpus: rater_noise must be in [0, 1]");
  if (!(config.t1 >= 0) || !(config.t1 < config.t2))
    throw Error("synthesize_corpus: thresholds must satisfy 0 <= t1 < t2");

  std::vector<int> counts = apportion_largest_remainder(
      config.n, {config.proportions[0], config.proportions[1],
                 config.proportions[2]});

  std::filesystem::create_directories(config.out_dir);

  Manifest manifest;
  manifest.dir = config.out_dir;

  const uint64_t corpus_seed = rng::mix(config.seed, rng::kCorpusStream);
  int image_index = 0;
  for (int cls = 0; cls < 3; ++cls) {
    for (int i = 0; i < counts[cls]; ++i, ++image_index) {
      const uint64_t image_seed = rng::mix(corpus_seed, image_index);

      kspace::PhantomSpec spec;
      spec.size = config.size;
      spec.seed = rng::mix(image_seed, kPhantomSub);
      kspace::RealGrid phantom = kspace::generate_phantom(spec);

      rng::Engine trace_eng(rng::mix(image_seed, kTraceSub));
      double severity =
          draw_severity(cls, config.t1, config.t2, trace_eng);
      kspace::MotionTrace trace = kspace::random_trace(
          trace_eng.next_u64(), config.size, severity);
      kspace::RealGrid corrupted = kspace::simulate_motion(phantom, trace);

      char name[32];
      std::snprintf(name, sizeof(name), "img_%05d.pgm", image_index);
      pgm::write_pgm(config.out_dir / name, pgm::quantize(corrupted));

      ManifestRecord rec;
      rec.id = std::string(name, std::strlen(name) - 4);  // img_00042
      rec.path = name;
      rec.severity = trace.severity();
      rec.rater_a = kspace::severity_to_class(*rec.severity, config.t1,
                                              config.t2);
      rng::Engine rater_eng(rng::mix(image_seed, kRaterSub));
      rec.rater_b = rater_eng.uniform() < config.rater_noise
                        ? perturb_label(rec.rater_a, *rec.severity, config.t1,
                                        config.t2)
                        : rec.rater_a;
      manifest.records.push_back(std::move(rec));
    }
  }

  SplitConfig split;
  split.train = config.split_ratios[0];
  split.eval = config.split_ratios[1];
  split.test = config.split_ratios[2];
  split.seed = config.seed;
  split_dataset(manifest, split);

  save_manifest(manifest, config.out_dir / "manifest.csv");
  return manifest;
}

}  // namespace mriq::data
