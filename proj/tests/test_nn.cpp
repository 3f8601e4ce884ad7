#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <array>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "mriq/gradcheck.hpp"
#include "mriq/nn.hpp"
#include "mriq/rng.hpp"
#include "mriq/tensor.hpp"
#include "oracles.hpp"

using mriq::Tensor4;
using mriq::Tensor4d;
namespace nn = mriq::nn;

namespace {

Tensor4d random_tensor(int n, int c, int h, int w, mriq::rng::Engine& eng) {
  Tensor4d t(n, c, h, w);
  for (auto& v : t.data) v = eng.normal();
  return t;
}

}  // namespace

TEST_CASE("conv forward matches the direct quadruple-loop reference") {
  double worst = oracle::conv_vs_reference_max_abs(11, 120);
  CAPTURE(worst);
  CHECK(worst < 1e-6);
}

TEST_CASE("conv output geometry follows the floor formula") {
  auto hw = nn::ConvLayer<double>::output_hw(64, 64, 10, 10, 2, 4, 4);
  CHECK(hw.first == 32);
  CHECK(hw.second == 32);
  hw = nn::ConvLayer<double>::output_hw(7, 5, 3, 2, 2, 1, 0);
  // height: floor((7 + 2 - 3)/2) + 1 = 4, width: floor((5 + 0 - 2)/2) + 1 = 2
  CHECK(hw.first == 4);
  CHECK(hw.second == 2);

  nn::ConvLayer<double> layer("c", 3, 5, 3, 3, 2, 1, 1);
  Tensor4d x(2, 3, 9, 11);
  Tensor4d y = layer.apply(x);
  CHECK(y.n == 2);
  CHECK(y.c == 5);
  CHECK(y.h == 5);
  CHECK(y.w == 6);
}

TEST_CASE("conv rejects mismatched input channels") {
  nn::ConvLayer<double> layer("c", 2, 3, 3, 3, 1, 1, 1);
  Tensor4d x(1, 1, 8, 8);
  CHECK_THROWS_AS(layer.apply(x), mriq::ShapeError);
}

TEST_CASE("relu gates values and gradients on the input sign") {
  nn::ReluLayer<double> relu("r");
  Tensor4d x(1, 1, 2, 3);
  x.data = {-2.0, -0.5, 0.0, 0.25, 3.0, -1e-9};
  Tensor4d y = relu.forward(x, nn::RunMode::Train, nullptr);
  std::vector<double> want = {0.0, 0.0, 0.0, 0.25, 3.0, 0.0};
  for (size_t i = 0; i < want.size(); ++i) CHECK(y.data[i] == want[i]);

  Tensor4d g(1, 1, 2, 3);
  g.fill(1.0);
  Tensor4d dx = relu.backward(g);
  std::vector<double> want_dx = {0.0, 0.0, 0.0, 1.0, 1.0, 0.0};
  for (size_t i = 0; i < want_dx.size(); ++i) CHECK(dx.data[i] == want_dx[i]);
}

TEST_CASE("batchnorm train mode normalizes with batch statistics") {
  nn::BatchNormLayer<double> bn("bn", 2);
  Tensor4d x(4, 2, 1, 1);
  // channel 0: 1,2,3,4  -> mean 2.5, population variance 1.25
  // channel 1: 0,0,6,2  -> mean 2.0, population variance 6.0
  x.at(0, 0, 0, 0) = 1;
  x.at(1, 0, 0, 0) = 2;
  x.at(2, 0, 0, 0) = 3;
  x.at(3, 0, 0, 0) = 4;
  x.at(0, 1, 0, 0) = 0;
  x.at(1, 1, 0, 0) = 0;
  x.at(2, 1, 0, 0) = 6;
  x.at(3, 1, 0, 0) = 2;

  Tensor4d y = bn.forward(x, nn::RunMode::Train, nullptr);
  const double eps = 1e-5;
  for (int b = 0; b < 4; ++b) {
    double x0 = x.at(b, 0, 0, 0), x1 = x.at(b, 1, 0, 0);
    CHECK(y.at(b, 0, 0, 0) ==
          doctest::Approx((x0 - 2.5) / std::sqrt(1.25 + eps)).epsilon(1e-12));
    CHECK(y.at(b, 1, 0, 0) ==
          doctest::Approx((x1 - 2.0) / std::sqrt(6.0 + eps)).epsilon(1e-12));
  }

  // One train pass blends batch statistics into the running estimates:
  // running = 0.9 * initial + 0.1 * batch, from (mean 0, var 1).
  CHECK(bn.running_mean_.value[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(bn.running_var_.value[0] == doctest::Approx(1.025).epsilon(1e-12));
  CHECK(bn.running_mean_.value[1] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(bn.running_var_.value[1] == doctest::Approx(1.5).epsilon(1e-12));

  // Inference uses only the running estimates, with gamma/beta applied.
  bn.gamma_.value = {2.0, 1.0};
  bn.beta_.value = {-1.0, 0.5};
  Tensor4d z = bn.forward(x, nn::RunMode::Inference, nullptr);
  double want00 = 2.0 * (1.0 - 0.25) / std::sqrt(1.025 + eps) - 1.0;
  CHECK(z.at(0, 0, 0, 0) == doctest::Approx(want00).epsilon(1e-12));
  double want21 = 1.0 * (6.0 - 0.2) / std::sqrt(1.5 + eps) + 0.5;
  CHECK(z.at(2, 1, 0, 0) == doctest::Approx(want21).epsilon(1e-12));
}

TEST_CASE("batchnorm train mode needs two elements per channel") {
  nn::BatchNormLayer<double> bn("bn", 3);
  Tensor4d x(1, 3, 1, 1);
  CHECK_THROWS_AS(bn.forward(x, nn::RunMode::Train, nullptr), mriq::Error);
  CHECK_NOTHROW(bn.forward(x, nn::RunMode::Inference, nullptr));
}

TEST_CASE("dense head starts at zero and computes an affine map") {
  nn::DenseLayer<double> dense("d", 4, 3);
  Tensor4d x(2, 4, 1, 1);
  x.data = {1, -2, 3, 0.5, 0, 1, 2, -1};
  Tensor4d y0 = dense.apply(x);
  for (double v : y0.data) CHECK(v == 0.0);

  // weight is (num_classes x in_features) row-major
  dense.weight_.value = {1, 0, 0, 0,   //
                         0, 1, 1, 0,   //
                         -1, 0, 0, 2};
  dense.bias_.value = {0.5, 0, -1};
  Tensor4d y = dense.apply(x);
  for (int b = 0; b < 2; ++b)
    for (int k = 0; k < 3; ++k) {
      double want = dense.bias_.value[k];
      for (int i = 0; i < 4; ++i)
        want += dense.weight_.value[k * 4 + i] * x.at(b, i, 0, 0);
      CHECK(y.at(b, k, 0, 0) == doctest::Approx(want).epsilon(1e-14));
    }

  CHECK_THROWS_AS(nn::DenseLayer<double>("bad", 4, 1), mriq::ShapeError);
}

TEST_CASE("flatten preserves element order") {
  nn::FlattenLayer<double> flat;
  Tensor4d x(2, 2, 2, 2);
  for (size_t i = 0; i < x.size(); ++i) x.data[i] = static_cast<double>(i);
  Tensor4d y = flat.forward(x, nn::RunMode::Train, nullptr);
  CHECK(y.n == 2);
  CHECK(y.c == 8);
  CHECK(y.h == 1);
  CHECK(y.w == 1);
  for (size_t i = 0; i < y.size(); ++i) CHECK(y.data[i] == x.data[i]);
}

TEST_CASE("global average pooling averages each channel map") {
  nn::GlobalAvgPoolLayer<double> gap;
  Tensor4d x(1, 2, 2, 2);
  x.data = {1, 2, 3, 4, 10, 20, 30, 40};
  Tensor4d y = gap.forward(x, nn::RunMode::Train, nullptr);
  CHECK(y.n == 1);
  CHECK(y.c == 2);
  CHECK(y.h == 1);
  CHECK(y.w == 1);
  CHECK(y.at(0, 0, 0, 0) == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(y.at(0, 1, 0, 0) == doctest::Approx(25.0).epsilon(1e-15));

  // Backward spreads the gradient uniformly.
  Tensor4d g(1, 2, 1, 1);
  g.data = {4.0, 8.0};
  Tensor4d dx = gap.backward(g);
  for (int i = 0; i < 4; ++i) {
    CHECK(dx.data[i] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(dx.data[4 + i] == doctest::Approx(2.0).epsilon(1e-15));
  }
}

TEST_CASE("softmax cross-entropy matches the hand formula") {
  Tensor4d logits(2, 3, 1, 1);
  logits.data = {1.0, 2.0, 3.0, 0.0, 0.0, 0.0};
  std::vector<int> labels = {2, 0};
  auto res = nn::softmax_cross_entropy(logits, labels);

  // Row softmax computed independently.
  double e1 = std::exp(1.0), e2 = std::exp(2.0), e3 = std::exp(3.0);
  double z = e1 + e2 + e3;
  std::vector<double> p0 = {e1 / z, e2 / z, e3 / z};
  std::vector<double> p1 = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  double want_loss = 0.5 * (-std::log(p0[2]) - std::log(p1[0]));
  CHECK(res.loss == doctest::Approx(want_loss).epsilon(1e-12));

  REQUIRE(res.probs.size() == 6);
  for (int k = 0; k < 3; ++k) {
    CHECK(res.probs[k] == doctest::Approx(p0[k]).epsilon(1e-12));
    CHECK(res.probs[3 + k] == doctest::Approx(p1[k]).epsilon(1e-12));
  }
  CHECK(res.probs[0] + res.probs[1] + res.probs[2] ==
        doctest::Approx(1.0).epsilon(1e-12));

  // dlogits = (p - onehot) / batch
  for (int k = 0; k < 3; ++k) {
    double want0 = (p0[k] - (k == 2 ? 1.0 : 0.0)) / 2.0;
    double want1 = (p1[k] - (k == 0 ? 1.0 : 0.0)) / 2.0;
    CHECK(res.dlogits.at(0, k, 0, 0) == doctest::Approx(want0).epsilon(1e-12));
    CHECK(res.dlogits.at(1, k, 0, 0) == doctest::Approx(want1).epsilon(1e-12));
  }

  std::vector<int> bad_labels = {2, 3};
  CHECK_THROWS_AS(nn::softmax_cross_entropy(logits, bad_labels), mriq::Error);
}

TEST_CASE("a fresh network with a zero head scores exactly ln K") {
  mriq::rng::Engine eng(mriq::rng::mix(77, 0xAB));
  Tensor4d x = random_tensor(3, 1, 16, 16, eng);

  auto net2 = nn::build_convnet4<double>(2, 16, {2, 2, 2, 2}, 5);
  auto logits2 = net2.forward(x, nn::RunMode::Train, nullptr);
  for (double v : logits2.data) CHECK(v == 0.0);
  auto loss2 = nn::softmax_cross_entropy(logits2, {0, 1, 0});
  CHECK(loss2.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  auto net3 = nn::build_resnet10lite<double>(3, 16, 2, 5);
  auto logits3 = net3.forward(x, nn::RunMode::Train, nullptr);
  auto loss3 = nn::softmax_cross_entropy(logits3, {2, 1, 0});
  CHECK(loss3.loss == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("network gradients agree with central differences") {
  mriq::rng::Engine eng(mriq::rng::mix(123, 0xCD));
  Tensor4d batch = random_tensor(4, 1, 16, 16, eng);
  std::vector<int> labels = {0, 1, 1, 0};

  SUBCASE("convnet4") {
    auto net = nn::build_convnet4<double>(2, 16, {3, 4, 4, 4}, 21);
    auto r = nn::check_network_gradients(net, batch, labels, 1e-3);
    CAPTURE(r.max_rel_err);
    CAPTURE(r.checked);
    CAPTURE(r.skipped);
    CHECK(r.checked > 0);
    CHECK(r.max_rel_err < 1e-4);
    CHECK(r.skipped * 10 < r.checked);
  }
  SUBCASE("resnet10lite") {
    auto net = nn::build_resnet10lite<double>(2, 16, 1, 21);
    auto r = nn::check_network_gradients(net, batch, labels, 1e-3);
    CAPTURE(r.max_rel_err);
    CAPTURE(r.checked);
    CAPTURE(r.skipped);
    CHECK(r.checked > 0);
    CHECK(r.max_rel_err < 1e-4);
    CHECK(r.skipped * 10 < r.checked);
  }
}

TEST_CASE("adam follows the bias-corrected update") {
  nn::Param<double> p("p", 1);
  p.value[0] = 1.0;
  std::vector<nn::Param<double>*> params = {&p};

  nn::AdamState<double> adam;
  adam.lr = 0.1;
  CHECK_THROWS_AS(nn::adam_step(params, adam), mriq::ShapeError);
  adam.attach(params);

  // Step 1, g = 0.5: m = 0.05, v = 0.00025; bias corrections make
  // mhat = 0.5 and vhat = 0.25, so the step is lr * 0.5 / (0.5 + eps).
  p.grad[0] = 0.5;
  nn::adam_step(params, adam);
  double m = 0.05, v = 0.00025;
  double want = 1.0 - 0.1 * (m / 0.1) / (std::sqrt(v / 0.001) + 1e-8);
  CHECK(p.value[0] == doctest::Approx(want).epsilon(1e-14));

  // Step 2, g = 0.25, against the same recurrence evaluated by hand.
  p.grad[0] = 0.25;
  nn::adam_step(params, adam);
  m = 0.9 * m + 0.1 * 0.25;
  v = 0.999 * v + 0.001 * 0.25 * 0.25;
  double bc1 = 1.0 - 0.9 * 0.9;
  double bc2 = 1.0 - 0.999 * 0.999;
  want -= 0.1 * (m / bc1) / (std::sqrt(v / bc2) + 1e-8);
  CHECK(p.value[0] == doctest::Approx(want).epsilon(1e-12));
  CHECK(adam.t == 2);
}

TEST_CASE("initialization is reproducible and seed-sensitive") {
  auto a = nn::build_convnet4<float>(2, 32, {4, 4, 4, 4}, 42);
  auto b = nn::build_convnet4<float>(2, 32, {4, 4, 4, 4}, 42);
  auto c = nn::build_convnet4<float>(2, 32, {4, 4, 4, 4}, 43);

  auto pa = a.params(), pb = b.params(), pc = c.params();
  REQUIRE(pa.size() == pb.size());
  bool identical = true;
  for (size_t i = 0; i < pa.size(); ++i)
    if (pa[i]->value != pb[i]->value) identical = false;
  CHECK(identical);

  bool differs = false;
  for (size_t i = 0; i < pa.size(); ++i)
    if (pa[i]->value != pc[i]->value) differs = true;
  CHECK(differs);
}

TEST_CASE("builders validate their geometry") {
  CHECK_THROWS_AS(nn::build_convnet4<float>(2, 65, {2, 2, 2, 2}, 1),
                  mriq::Error);
  CHECK_THROWS_AS(nn::build_convnet4<float>(1, 64, {2, 2, 2, 2}, 1),
                  mriq::Error);
  CHECK_THROWS_AS(nn::build_convnet4<float>(2, 64, {2, 0, 2, 2}, 1),
                  mriq::Error);
  CHECK_THROWS_AS(nn::build_resnet10lite<float>(2, 24, 4, 1), mriq::Error);
  CHECK_THROWS_AS(nn::build_resnet10lite<float>(2, 32, 0, 1), mriq::Error);

  auto conv = nn::build_convnet4<float>(2, 32, {2, 2, 2, 2}, 1);
  CHECK(conv.arch() == "convnet4");
  CHECK(conv.weighted_layer_count() == 5);
  CHECK(conv.input_size() == 32);
  CHECK(conv.num_classes() == 2);

  auto res = nn::build_resnet10lite<float>(3, 32, 4, 1);
  CHECK(res.arch() == "resnet10");
  CHECK(res.weighted_layer_count() == 10);

  // Feeding the wrong spatial size must fail at the dense head, not
  // silently produce a tensor.
  Tensor4<float> wrong(1, 1, 24, 24);
  CHECK_THROWS_AS(conv.forward(wrong, nn::RunMode::Inference), mriq::Error);
}

TEST_CASE("batchnorm running statistics ride along as non-trainable params") {
  auto net = nn::build_convnet4<float>(2, 32, {2, 2, 2, 2}, 1);
  auto all = net.params();
  auto trainable = net.trainable_params();
  // Four batchnorm stages contribute running mean + running var tensors.
  CHECK(all.size() == trainable.size() + 8);
  size_t running = 0;
  for (auto* p : all)
    if (!p->trainable) {
      ++running;
      CHECK(p->name.find("running") != std::string::npos);
    }
  CHECK(running == 8);
}
