#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mriq/tensor.hpp"

namespace mriq::nn {

enum class RunMode { Train, Inference };

/// One named parameter tensor plus its gradient accumulator. BatchNorm
/// running statistics live here too with trainable=false so that
/// checkpoints carry them and the optimizer skips them.
template <typename T>
struct Param {
  std::string name;
  std::vector<T> value;
  std::vector<T> grad;
  bool trainable = true;

  Param() = default;
  Param(std::string n, size_t count, bool train = true)
      : name(std::move(n)), value(count, T(0)), grad(count, T(0)), trainable(train) {}

  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

/// Base layer. Train-mode forward caches whatever backward needs; the
/// inference path writes no layer state, so a fully built network can serve
/// concurrent read-only forward passes. `capture`, when non-null, receives a
/// copy of every post-ReLU activation in network order.
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor4<T> forward(const Tensor4<T>& x, RunMode mode,
                             std::vector<Tensor4<T>>* capture) = 0;
  /// Accumulates into Param::grad and returns the gradient w.r.t. the input.
  /// Valid only after a train-mode forward.
  virtual Tensor4<T> backward(const Tensor4<T>& grad_out) = 0;
  virtual void collect_params(std::vector<Param<T>*>& out) {}
  virtual const char* kind() const = 0;
};

/// 2-D cross-correlation with zero padding. Weight layout is
/// (out_ch, in_ch, kh, kw) row-major; output spatial size follows
/// floor((in + 2*pad - k) / stride) + 1.
template <typename T>
class ConvLayer final : public Layer<T> {
 public:
  ConvLayer(std::string name, int in_ch, int out_ch, int kh, int kw,
            int stride, int pad_h, int pad_w);

  static std::pair<int, int> output_hw(int h, int w, int kh, int kw,
                                       int stride, int pad_h, int pad_w);

  /// Pure forward, usable without a training context.
  Tensor4<T> apply(const Tensor4<T>& x) const;

  Tensor4<T> forward(const Tensor4<T>& x, RunMode mode,
                     std::vector<Tensor4<T>>* capture) override;
  Tensor4<T> backward(const Tensor4<T>& grad_out) override;
  void collect_params(std::vector<Param<T>*>& out) override;
  const char* kind() const override { return "conv"; }

  int in_ch_, out_ch_, kh_, kw_, stride_, pad_h_, pad_w_;
  Param<T> weight_;  // out_ch * in_ch * kh * kw
  Param<T> bias_;    // out_ch

 private:
  Tensor4<T> cached_input_;
  bool has_cache_ = false;
};

/// Per-channel batch normalization. Train mode normalizes with batch
/// statistics and blends them into the running estimates
/// (running = (1-momentum)*running + momentum*batch); inference mode uses
/// the running estimates only.
template <typename T>
class BatchNormLayer final : public Layer<T> {
 public:
  explicit BatchNormLayer(std::string name, int channels,
                          double momentum = 0.1, double eps = 1e-5);

  Tensor4<T> forward(const Tensor4<T>& x, RunMode mode,
                     std::vector<Tensor4<T>>* capture) override;
  Tensor4<T> backward(const Tensor4<T>& grad_out) override;
  void collect_params(std::vector<Param<T>*>& out) override;
  const char* kind() const override { return "batchnorm"; }

  int channels_;
  double momentum_, eps_;
  Param<T> gamma_, beta_;
  Param<T> running_mean_, running_var_;  // trainable = false

  /// Per-channel 1/sqrt(var+eps) of the latest train-mode forward; exposes
  /// batch conditioning to the gradient-check driver.
  const std::vector<double>& last_inv_std() const { return cached_inv_std_; }

 private:
  Tensor4<T> cached_xhat_;
  std::vector<double> cached_inv_std_;
  long cached_m_ = 0;
  bool has_cache_ = false;
};

/// Rectified linear unit; subgradient at zero is zero.
template <typename T>
class ReluLayer final : public Layer<T> {
 public:
  explicit ReluLayer(std::string name) : name_(std::move(name)) {}
  Tensor4<T> forward(const Tensor4<T>& x, RunMode mode,
                     std::vector<Tensor4<T>>* capture) override;
  Tensor4<T> backward(const Tensor4<T>& grad_out) override;
  const char* kind() const override { return "relu"; }

 private:
  std::string name_;
  Tensor4<T> cached_output_;
  bool has_cache_ = false;
};

/// Reshape (b,c,h,w) -> (b, c*h*w, 1, 1); data order is unchanged.
template <typename T>
class FlattenLayer final : public Layer<T> {
 public:
  Tensor4<T> forward(const Tensor4<T>& x, RunMode mode,
                     std::vector<Tensor4<T>>* capture) override;
  Tensor4<T> backward(const Tensor4<T>& grad_out) override;
  const char* kind() const override { return "flatten"; }

 private:
  int in_c_ = 0, in_h_ = 0, in_w_ = 0;
};

/// Mean over the spatial axes: (b,c,h,w) -> (b,c,1,1).
template <typename T>
class GlobalAvgPoolLayer final : public Layer<T> {
 public:
  Tensor4<T> forward(const Tensor4<T>& x, RunMode mode,
                     std::vector<Tensor4<T>>* capture) override;
  Tensor4<T> backward(const Tensor4<T>& grad_out) override;
  const char* kind() const override { return "gap"; }

 private:
  int in_h_ = 0, in_w_ = 0;
};

/// Fully connected head over flattened features: logits = W x + b.
template <typename T>
class DenseLayer final : public Layer<T> {
 public:
  DenseLayer(std::string name, int in_features, int num_classes);

  Tensor4<T> apply(const Tensor4<T>& x) const;

  Tensor4<T> forward(const Tensor4<T>& x, RunMode mode,
                     std::vector<Tensor4<T>>* capture) override;
  Tensor4<T> backward(const Tensor4<T>& grad_out) override;
  void collect_params(std::vector<Param<T>*>& out) override;
  const char* kind() const override { return "dense"; }

  int in_features_, num_classes_;
  Param<T> weight_;  // num_classes * in_features
  Param<T> bias_;    // num_classes

 private:
  Tensor4<T> cached_input_;
  bool has_cache_ = false;
};

/// Basic residual block: conv3x3(stride) -> BN -> ReLU -> conv3x3 -> BN,
/// added to the shortcut, ReLU after the add. The shortcut is the identity
/// when stride == 1 and channels match, otherwise a 1x1 projection conv + BN
/// with the block's stride. Both internal ReLU outputs are capture points.
template <typename T>
class ResidualBlock final : public Layer<T> {
 public:
  ResidualBlock(std::string name, int in_ch, int out_ch, int stride);

  Tensor4<T> forward(const Tensor4<T>& x, RunMode mode,
                     std::vector<Tensor4<T>>* capture) override;
  Tensor4<T> backward(const Tensor4<T>& grad_out) override;
  void collect_params(std::vector<Param<T>*>& out) override;
  const char* kind() const override { return "residual"; }

  bool has_projection() const { return proj_conv_ != nullptr; }

  ConvLayer<T> conv1_, conv2_;
  BatchNormLayer<T> bn1_, bn2_;
  std::unique_ptr<ConvLayer<T>> proj_conv_;
  std::unique_ptr<BatchNormLayer<T>> proj_bn_;

 private:
  Tensor4<T> cached_mid_;  // post-ReLU output of the first half
  Tensor4<T> cached_out_;  // post-ReLU block output
  bool has_cache_ = false;
};

/// A built model: an ordered layer list plus the metadata that identifies
/// the architecture in checkpoints.
template <typename T>
class Network {
 public:
  Tensor4<T> forward(const Tensor4<T>& x, RunMode mode,
                     std::vector<Tensor4<T>>* capture = nullptr);

  /// Train-mode forward + softmax cross-entropy backward pass.
  /// Gradients are zeroed first, then accumulated; returns the mean loss.
  double backprop(const Tensor4<T>& batch, const std::vector<int>& labels);

  std::vector<Param<T>*> params();            // checkpoint order
  std::vector<Param<T>*> trainable_params();  // optimizer order
  void zero_grads();
  size_t param_element_count();  // total scalar count across params()

  const std::string& arch() const { return arch_; }
  const std::vector<int>& channels() const { return channels_; }
  int input_size() const { return input_size_; }
  int num_classes() const { return num_classes_; }
  uint64_t seed() const { return seed_; }
  int weighted_layer_count() const { return weighted_layers_; }

  long steps = 0;  // optimizer steps applied, recorded in checkpoints

  std::vector<std::unique_ptr<Layer<T>>> layers_;
  std::string arch_;
  std::vector<int> channels_;
  int input_size_ = 0;
  int num_classes_ = 0;
  uint64_t seed_ = 0;
  int weighted_layers_ = 0;
};

/// Four conv stages (kernels 10,7,3,3, all stride 2, paddings 4,3,1,1, each
/// halving the spatial size), conv -> ReLU -> BN per stage, then flatten and
/// a zero-initialized dense head. Requires input_size divisible by 16.
/// Conv weights are He-initialized from the run seed.
template <typename T>
Network<T> build_convnet4(int num_classes, int input_size,
                          const std::array<int, 4>& channel_plan,
                          uint64_t seed);

/// 7x7 stride-2 stem conv + BN + ReLU, four stages of one basic residual
/// block each (stage 1 stride 1, stages 2-4 stride 2 with projection
/// shortcuts), channels doubling per stage from base_channels, global
/// average pooling, zero-initialized dense head. Ten weighted layers
/// (stem + 8 block convs + dense). Requires input_size divisible by 16.
template <typename T>
Network<T> build_resnet10lite(int num_classes, int input_size,
                              int base_channels, uint64_t seed);

/// Pure functional forms of the stateless ops.
template <typename T>
Tensor4<T> conv2d(const Tensor4<T>& x, const ConvLayer<T>& layer) {
  return layer.apply(x);
}

template <typename T>
Tensor4<T> relu(const Tensor4<T>& x);

template <typename T>
Tensor4<T> dense(const Tensor4<T>& x, const DenseLayer<T>& layer) {
  return layer.apply(x);
}

/// Numerically stable softmax cross-entropy over logits shaped (b, K, 1, 1).
/// Probabilities are computed and returned in double regardless of T; the
/// logit gradient is the gradient of the mean loss, (p - onehot) / batch.
template <typename T>
struct LossResult {
  double loss = 0;
  std::vector<double> probs;  // batch x K, row-major
  Tensor4<T> dlogits;
};

template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor4<T>& logits,
                                    const std::vector<int>& labels);

/// Adam with bias correction. Moments are kept in double and the update is
/// computed in double before being stored back, so float parameters see the
/// textbook update to within one rounding.
template <typename T>
struct AdamState {
  double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long t = 0;
  std::vector<std::vector<double>> m, v;

  void attach(const std::vector<Param<T>*>& trainable);
};

template <typename T>
void adam_step(const std::vector<Param<T>*>& trainable, AdamState<T>& state);

extern template class ConvLayer<float>;
extern template class ConvLayer<double>;
extern template class BatchNormLayer<float>;
extern template class BatchNormLayer<double>;
extern template class ReluLayer<float>;
extern template class ReluLayer<double>;
extern template class FlattenLayer<float>;
extern template class FlattenLayer<double>;
extern template class GlobalAvgPoolLayer<float>;
extern template class GlobalAvgPoolLayer<double>;
extern template class DenseLayer<float>;
extern template class DenseLayer<double>;
extern template class ResidualBlock<float>;
extern template class ResidualBlock<double>;
extern template class Network<float>;
extern template class Network<double>;

extern template Tensor4<float> relu(const Tensor4<float>&);
extern template Tensor4<double> relu(const Tensor4<double>&);
extern template LossResult<float> softmax_cross_entropy(
    const Tensor4<float>&, const std::vector<int>&);
extern template LossResult<double> softmax_cross_entropy(
    const Tensor4<double>&, const std::vector<int>&);
extern template struct AdamState<float>;
extern template struct AdamState<double>;
extern template void adam_step(const std::vector<Param<float>*>&,
                               AdamState<float>&);
extern template void adam_step(const std::vector<Param<double>*>&,
                               AdamState<double>&);
extern template Network<float> build_convnet4(int, int,
                                              const std::array<int, 4>&,
                                              uint64_t);
extern template Network<double> build_convnet4(int, int,
                                               const std::array<int, 4>&,
                                               uint64_t);
extern template Network<float> build_resnet10lite(int, int, int, uint64_t);
extern template Network<double> build_resnet10lite(int, int, int, uint64_t);

}  // namespace mriq::nn
