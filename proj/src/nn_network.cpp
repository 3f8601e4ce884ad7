#include <cmath>

#include "mriq/nn.hpp"
#include "mriq/rng.hpp"

namespace mriq::nn {

template <typename T>
Tensor4<T> Network<T>::forward(const Tensor4<T>& x, RunMode mode,
                               std::vector<Tensor4<T>>* capture) {
  if (x.h != input_size_ || x.w != input_size_ || x.c != 1)
    throw ShapeError("network " + arch_ + ": expects (n,1," +
                     std::to_string(input_size_) + "," +
                     std::to_string(input_size_) + "), got " + x.shape_str());
  Tensor4<T> y = x;
  for (auto& layer : layers_) y = layer->forward(y, mode, capture);
  return y;
}

template <typename T>
double Network<T>::backprop(const Tensor4<T>& batch,
                            const std::vector<int>& labels) {
  zero_grads();
  Tensor4<T> logits = forward(batch, RunMode::Train, nullptr);
  LossResult<T> loss = softmax_cross_entropy(logits, labels);
  Tensor4<T> g = std::move(loss.dlogits);
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
    g = (*it)->backward(g);
  return loss.loss;
}

template <typename T>
std::vector<Param<T>*> Network<T>::params() {
  std::vector<Param<T>*> out;
  for (auto& layer : layers_) layer->collect_params(out);
  return out;
}

template <typename T>
std::vector<Param<T>*> Network<T>::trainable_params() {
  std::vector<Param<T>*> out;
  for (Param<T>* p : params())
    if (p->trainable) out.push_back(p);
  return out;
}

template <typename T>
void Network<T>::zero_grads() {
  for (Param<T>* p : params()) p->zero_grad();
}

template <typename T>
size_t Network<T>::param_element_count() {
  size_t total = 0;
  for (Param<T>* p : params()) total += p->value.size();
  return total;
}

namespace {

// He initialization for conv weights: N(0, sqrt(2 / fan_in)). Biases stay
// zero; together with the zero dense head this pins the initial loss to
// ln(num_classes).
template <typename T>
void he_init(ConvLayer<T>& conv, rng::Engine& eng) {
  double fan_in = static_cast<double>(conv.in_ch_) * conv.kh_ * conv.kw_;
  double std_dev = std::sqrt(2.0 / fan_in);
  for (T& w : conv.weight_.value)
    w = static_cast<T>(eng.normal() * std_dev);
}

template <typename T>
void init_block(ResidualBlock<T>& block, rng::Engine& eng) {
  he_init(block.conv1_, eng);
  he_init(block.conv2_, eng);
  if (block.proj_conv_) he_init(*block.proj_conv_, eng);
}

}  // namespace

template <typename T>
Network<T> build_convnet4(int num_classes, int input_size,
                          const std::array<int, 4>& channel_plan,
                          uint64_t seed) {
  if (num_classes < 2)
    throw Error("build_convnet4: num_classes must be >= 2, got " +
                std::to_string(num_classes));
  if (input_size < 16 || input_size % 16 != 0)
    throw Error("build_convnet4: input_size must be a positive multiple of "
                "16, got " + std::to_string(input_size));
  for (int ch : channel_plan)
    if (ch < 1)
      throw Error("build_convnet4: channel plan entries must be positive");

  Network<T> net;
  net.arch_ = "convnet4";
  net.channels_.assign(channel_plan.begin(), channel_plan.end());
  net.input_size_ = input_size;
  net.num_classes_ = num_classes;
  net.seed_ = seed;
  net.weighted_layers_ = 5;  // 4 convs + dense

  rng::Engine eng(rng::mix(seed, rng::kInitStream));

  // Kernels 10,7,3,3 with paddings 4,3,1,1 at stride 2: each stage halves
  // the spatial size exactly, so input 512 traces 256 -> 128 -> 64 -> 32.
  const int kernels[4] = {10, 7, 3, 3};
  const int pads[4] = {4, 3, 1, 1};
  int ch_in = 1;
  int spatial = input_size;
  for (int i = 0; i < 4; ++i) {
    auto conv = std::make_unique<ConvLayer<T>>(
        "conv" + std::to_string(i + 1), ch_in, channel_plan[i], kernels[i],
        kernels[i], 2, pads[i], pads[i]);
    he_init(*conv, eng);
    net.layers_.push_back(std::move(conv));
    net.layers_.push_back(
        std::make_unique<ReluLayer<T>>("relu" + std::to_string(i + 1)));
    net.layers_.push_back(std::make_unique<BatchNormLayer<T>>(
        "bn" + std::to_string(i + 1), channel_plan[i]));
    ch_in = channel_plan[i];
    spatial /= 2;
  }
  net.layers_.push_back(std::make_unique<FlattenLayer<T>>());
  net.layers_.push_back(std::make_unique<DenseLayer<T>>(
      "dense", channel_plan[3] * spatial * spatial, num_classes));
  return net;
}

template <typename T>
Network<T> build_resnet10lite(int num_classes, int input_size,
                              int base_channels, uint64_t seed) {
  if (num_classes < 2)
    throw Error("build_resnet10lite: num_classes must be >= 2, got " +
                std::to_string(num_classes));
  if (input_size < 16 || input_size % 16 != 0)
    throw Error("build_resnet10lite: input_size must be a positive multiple "
                "of 16, got " + std::to_string(input_size));
  if (base_channels < 1)
    throw Error("build_resnet10lite: base_channels must be positive");

  Network<T> net;
  net.arch_ = "resnet10";
  net.channels_ = {base_channels};
  net.input_size_ = input_size;
  net.num_classes_ = num_classes;
  net.seed_ = seed;
  net.weighted_layers_ = 10;  // stem + 8 block convs + dense

  rng::Engine eng(rng::mix(seed, rng::kInitStream));

  auto stem = std::make_unique<ConvLayer<T>>("stem", 1, base_channels, 7, 7,
                                             2, 3, 3);
  he_init(*stem, eng);
  net.layers_.push_back(std::move(stem));
  net.layers_.push_back(
      std::make_unique<BatchNormLayer<T>>("stem_bn", base_channels));
  net.layers_.push_back(std::make_unique<ReluLayer<T>>("stem_relu"));

  int ch_in = base_channels;
  for (int stage = 1; stage <= 4; ++stage) {
    int ch_out = base_channels << (stage - 1);
    int stride = stage == 1 ? 1 : 2;
    auto block = std::make_unique<ResidualBlock<T>>(
        "stage" + std::to_string(stage), ch_in, ch_out, stride);
    init_block(*block, eng);
    net.layers_.push_back(std::move(block));
    ch_in = ch_out;
  }
  net.layers_.push_back(std::make_unique<GlobalAvgPoolLayer<T>>());
  net.layers_.push_back(
      std::make_unique<DenseLayer<T>>("dense", ch_in, num_classes));
  return net;
}

template class Network<float>;
template class Network<double>;
template Network<float> build_convnet4(int, int, const std::array<int, 4>&,
                                       uint64_t);
template Network<double> build_convnet4(int, int, const std::array<int, 4>&,
                                        uint64_t);
template Network<float> build_resnet10lite(int, int, int, uint64_t);
template Network<double> build_resnet10lite(int, int, int, uint64_t);

}  // namespace mriq::nn
