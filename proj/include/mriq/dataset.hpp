#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mriq/errors.hpp"
#include "mriq/fft.hpp"
#include "mriq/pgm.hpp"

namespace mriq::data {

enum class Split { Train, Eval, Test, Unassigned };

std::string split_name(Split s);
Split split_from_name(const std::string& name);

/// How to turn the two rater columns into one training label.
enum class LabelPolicy { RaterA, RaterB, MeanRound };

LabelPolicy label_policy_from_name(const std::string& name);

/// One graded image. `path` is relative to the manifest's directory;
/// `severity` is known only for synthetic images; `volume` groups slices of
/// one acquisition and may be empty.
struct ManifestRecord {
  std::string id;
  std::string path;
  int rater_a = 0;
  int rater_b = 0;
  std::optional<double> severity;
  Split split = Split::Unassigned;
  std::string volume;
};

struct Manifest {
  std::filesystem::path dir;  // base directory for relative record paths
  std::vector<ManifestRecord> records;

  std::vector<int> indices_of(Split s) const;
  std::filesystem::path image_path(const ManifestRecord& r) const {
    return dir / r.path;
  }
};

/// CSV with the exact header id,path,rater_a,rater_b,severity,split,volume.
/// severity and volume are empty strings when absent.
Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest,
                   const std::filesystem::path& path);

struct SplitConfig {
  double train = 0.7, eval = 0.1, test = 0.2;  // must sum to 1
  uint64_t seed = 0;
  enum class Grouping { PerImage, PerVolume } grouping = Grouping::PerImage;
};

/// Seeded-shuffle split assignment. Per-image mode sizes are exact:
/// floor(n*ratio) for eval and test, remainder to train. Per-volume mode
/// keeps all records of a volume in one split and matches the targets as
/// closely as whole volumes allow.
void split_dataset(Manifest& manifest, const SplitConfig& config);

/// Quality grades to the diagnostic binary task: 0 -> 0 (significant
/// artifact), 1 and 2 -> 1 (diagnostically acceptable).
std::vector<int> binarize_labels(const std::vector<int>& labels);

/// Per-record label under a policy; mean rounds halves up (0.5 -> 1).
std::vector<int> aggregate_raters(const std::vector<int>& rater_a,
                                  const std::vector<int>& rater_b,
                                  LabelPolicy policy);

int task_classes(const std::string& task);  // "binary" -> 2, "three" -> 3

/// Labels for one split of the manifest under a policy and task mapping.
std::vector<int> split_labels(const Manifest& manifest,
                              const std::vector<int>& indices,
                              LabelPolicy policy, int classes);

/// Per-class counts of rater_a labels under the task mapping.
std::vector<long> class_distribution(const Manifest& manifest, int classes);
std::vector<long> count_per_class(const std::vector<int>& labels,
                                  int classes);

/// v / 255 into [0, 1]; exact inverse of quantize up to 1/510.
kspace::RealGrid normalize_image(const pgm::ImageU8& image);

/// Integer apportionment of n over positive weights by largest remainder
/// (ties broken toward the lower index).
std::vector<int> apportion_largest_remainder(int n,
                                             const std::vector<double>& weights);

}  // namespace mriq::data
