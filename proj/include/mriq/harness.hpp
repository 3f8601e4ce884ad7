#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mriq/dataset.hpp"
#include "mriq/metrics.hpp"
#include "mriq/nn.hpp"

namespace mriq::harness {

struct TrainConfig {
  std::string arch = "convnet4";  // convnet4 | resnet10
  int num_classes = 2;
  int input_size = 64;
  std::array<int, 4> channel_plan{8, 16, 32, 64};  // convnet4 stage widths
  int base_channels = 8;                           // resnet10 stage-1 width
  uint64_t seed = 1;
  long steps = 10000;
  int batch_size = 32;
  double lr = 1e-3;
  long eval_interval = 100;
  data::LabelPolicy policy = data::LabelPolicy::RaterA;
  bool progress = false;  // one stderr line per curve point
};

/// One split's images stacked into a batch-major tensor, with labels already
/// mapped through the label policy and task (indices refer to the manifest).
struct SplitTensors {
  std::vector<int> record_indices;
  Tensor4<float> images;  // (n, 1, s, s)
  std::vector<int> labels;
};

SplitTensors load_split(const data::Manifest& manifest, data::Split split,
                        data::LabelPolicy policy, int classes);

struct CurvePoint {
  long step = 0;
  double train_acc = 0, eval_acc = 0, train_loss = 0, eval_loss = 0;
};

struct TrainResult {
  nn::Network<float> net;
  std::vector<CurvePoint> curve;
};

/// Builds the configured architecture and runs `steps` optimizer updates on
/// mini-batches drawn by a seeded shuffle that reshuffles on exhaustion, so
/// every pass covers the train split before any repeat. Curve points are
/// full-split inference-mode evaluations at step 0, every eval_interval
/// steps, and the final step. Deterministic given (config, manifest, image
/// bytes).
TrainResult train(const data::Manifest& manifest, const TrainConfig& config);

/// Inference-mode metrics over one split, in manifest order: accuracy,
/// confusion, and ROC/AUC (binary curve for 2 classes, macro one-vs-rest
/// above that).
metrics::MetricsBundle evaluate(nn::Network<float>& net,
                                const data::Manifest& manifest,
                                data::Split split, data::LabelPolicy policy,
                                int batch_size = 32);

std::string curve_to_csv(const std::vector<CurvePoint>& curve);
void write_curve_csv(const std::vector<CurvePoint>& curve,
                     const std::string& path);

/// Post-ReLU activation tensors for a single image, in network order.
std::vector<Tensor4<float>> capture_activations(nn::Network<float>& net,
                                                const kspace::RealGrid& image);

/// Writes layer<k>.pgm (k starting at 1) for each post-ReLU activation:
/// the channel-mean map, min-max normalized to [0,255]. A constant map
/// writes as all zeros. Returns the written paths.
std::vector<std::string> export_activations(nn::Network<float>& net,
                                            const kspace::RealGrid& image,
                                            const std::string& out_dir);

/// Per-layer 1 - cosine_similarity between the two images' flattened
/// post-ReLU activations; zero-norm vectors score 0. Range [0, 2].
std::vector<double> layer_discriminability(nn::Network<float>& net,
                                           const kspace::RealGrid& clean,
                                           const kspace::RealGrid& corrupted);

struct Suspect {
  std::string id;
  int given = 0;
  int predicted = 0;
  double confidence = 0;
};

/// Samples the model contradicts confidently: argmax != given label and
/// softmax probability >= tau, sorted by descending confidence (ties keep
/// manifest order). tau must lie in (0.5, 1).
std::vector<Suspect> flag_suspect_labels(nn::Network<float>& net,
                                         const data::Manifest& manifest,
                                         data::Split split,
                                         data::LabelPolicy policy, double tau,
                                         int batch_size = 32);

std::string suspects_to_csv(const std::vector<Suspect>& suspects);

}  // namespace mriq::harness
