#include "mriq/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mriq/pgm.hpp"
#include "mriq/rng.hpp"
#include "mriq/util.hpp"

namespace fs = std::filesystem;

namespace mriq::harness {

SplitTensors load_split(const data::Manifest& manifest, data::Split split,
                        data::LabelPolicy policy, int classes) {
  SplitTensors out;
  out.record_indices = manifest.indices_of(split);
  if (out.record_indices.empty())
    throw Error("split '" + data::split_name(split) + "' is empty");
  out.labels = data::split_labels(manifest, out.record_indices, policy, classes);

  int size = -1;
  for (size_t i = 0; i < out.record_indices.size(); ++i) {
    const auto& rec = manifest.records[out.record_indices[i]];
    kspace::RealGrid img;
    try {
      img = data::normalize_image(
          pgm::read_pgm(manifest.image_path(rec).string()));
    } catch (const Error& e) {
      throw Error("record '" + rec.id + "': " + e.what());
    }
    if (img.h != img.w)
      throw Error("record '" + rec.id + "': image is " + std::to_string(img.w) +
                  "x" + std::to_string(img.h) + ", expected square");
    if (size < 0) {
      size = img.h;
      out.images = Tensor4<float>(static_cast<int>(out.record_indices.size()),
                                  1, size, size);
    } else if (img.h != size) {
      throw Error("record '" + rec.id + "': image is " + std::to_string(img.h) +
                  "x" + std::to_string(img.h) + " but the split uses " +
                  std::to_string(size) + "x" + std::to_string(size));
    }
    float* dst = &out.images.data[out.images.offset(static_cast<int>(i), 0, 0, 0)];
    for (size_t p = 0; p < img.v.size(); ++p)
      dst[p] = static_cast<float>(img.v[p]);
  }
  return out;
}

namespace {

struct InferenceOutcome {
  std::vector<int> preds;
  std::vector<double> probs;  // n x K row-major
  double mean_loss = 0;
};

/// Inference-mode forward over a whole split in batch_size chunks. Chunking
/// cannot change the numbers: batchnorm uses running statistics and every
/// image is processed independently.
InferenceOutcome infer_split(nn::Network<float>& net,
                             const SplitTensors& split, int batch_size) {
  const int n = split.images.n, s = split.images.h;
  const int k = net.num_classes();
  InferenceOutcome out;
  out.preds.resize(n);
  out.probs.resize(static_cast<size_t>(n) * k);
  double loss_sum = 0;
  for (int start = 0; start < n; start += batch_size) {
    int count = std::min(batch_size, n - start);
    Tensor4<float> batch(count, 1, s, s);
    std::copy_n(&split.images.data[split.images.offset(start, 0, 0, 0)],
                static_cast<size_t>(count) * s * s, batch.data.begin());
    std::vector<int> labels(split.labels.begin() + start,
                            split.labels.begin() + start + count);
    Tensor4<float> logits = net.forward(batch, nn::RunMode::Inference);
    auto loss = nn::softmax_cross_entropy(logits, labels);
    loss_sum += loss.loss * count;
    for (int i = 0; i < count; ++i) {
      int best = 0;
      for (int c = 1; c < k; ++c)
        if (loss.probs[static_cast<size_t>(i) * k + c] >
            loss.probs[static_cast<size_t>(i) * k + best])
          best = c;
      out.preds[start + i] = best;
      for (int c = 0; c < k; ++c)
        out.probs[static_cast<size_t>(start + i) * k + c] =
            loss.probs[static_cast<size_t>(i) * k + c];
    }
  }
  out.mean_loss = loss_sum / n;
  return out;
}

double split_accuracy(const InferenceOutcome& inf,
                      const std::vector<int>& labels) {
  return metrics::accuracy(inf.preds, labels);
}

nn::Network<float> build_from_config(const TrainConfig& config) {
  if (config.arch == "convnet4")
    return nn::build_convnet4<float>(config.num_classes, config.input_size,
                                     config.channel_plan, config.seed);
  if (config.arch == "resnet10")
    return nn::build_resnet10lite<float>(config.num_classes, config.input_size,
                                         config.base_channels, config.seed);
  throw Error("unknown architecture '" + config.arch +
              "' (expected convnet4 or resnet10)");
}

}  // namespace

TrainResult train(const data::Manifest& manifest, const TrainConfig& config) {
  if (config.steps < 1) throw Error("train: steps must be >= 1");
  if (config.batch_size < 1) throw Error("train: batch size must be >= 1");
  if (config.eval_interval < 1) throw Error("train: eval interval must be >= 1");
  if (!(config.lr > 0)) throw Error("train: learning rate must be positive");

  TrainResult result;
  result.net = build_from_config(config);

  SplitTensors train_set = load_split(manifest, data::Split::Train,
                                      config.policy, config.num_classes);
  SplitTensors eval_set = load_split(manifest, data::Split::Eval,
                                     config.policy, config.num_classes);
  if (train_set.images.h != config.input_size)
    throw Error("train: images are " + std::to_string(train_set.images.h) +
                "x" + std::to_string(train_set.images.h) +
                " but the model input size is " +
                std::to_string(config.input_size));

  nn::AdamState<float> adam;
  adam.lr = config.lr;
  auto trainable = result.net.trainable_params();
  adam.attach(trainable);

  const int n = train_set.images.n, s = config.input_size;
  rng::Engine shuffle_eng(rng::mix(config.seed, rng::kShuffleStream));
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  size_t pos = static_cast<size_t>(n);  // forces a shuffle before first use

  auto record = [&](long step) {
    InferenceOutcome tr = infer_split(result.net, train_set, config.batch_size);
    InferenceOutcome ev = infer_split(result.net, eval_set, config.batch_size);
    CurvePoint p;
    p.step = step;
    p.train_acc = split_accuracy(tr, train_set.labels);
    p.eval_acc = split_accuracy(ev, eval_set.labels);
    p.train_loss = tr.mean_loss;
    p.eval_loss = ev.mean_loss;
    result.curve.push_back(p);
    if (config.progress)
      std::fprintf(stderr,
                   "step %ld  train acc %.4f loss %.4f  eval acc %.4f loss %.4f\n",
                   step, p.train_acc, p.train_loss, p.eval_acc, p.eval_loss);
  };

  record(0);
  Tensor4<float> batch(config.batch_size, 1, s, s);
  std::vector<int> batch_labels(config.batch_size);
  for (long step = 1; step <= config.steps; ++step) {
    for (int b = 0; b < config.batch_size; ++b) {
      if (pos == static_cast<size_t>(n)) {
        shuffle_eng.shuffle(order.begin(), order.end());
        pos = 0;
      }
      int src = order[pos++];
      std::copy_n(&train_set.images.data[train_set.images.offset(src, 0, 0, 0)],
                  static_cast<size_t>(s) * s,
                  batch.data.begin() + batch.offset(b, 0, 0, 0));
      batch_labels[b] = train_set.labels[src];
    }
    result.net.backprop(batch, batch_labels);
    nn::adam_step(trainable, adam);
    ++result.net.steps;
    if (step % config.eval_interval == 0 || step == config.steps) record(step);
  }
  return result;
}

metrics::MetricsBundle evaluate(nn::Network<float>& net,
                                const data::Manifest& manifest,
                                data::Split split, data::LabelPolicy policy,
                                int batch_size) {
  const int k = net.num_classes();
  SplitTensors set = load_split(manifest, split, policy, k);
  if (set.images.h != net.input_size())
    throw Error("evaluate: images are " + std::to_string(set.images.h) + "x" +
                std::to_string(set.images.h) +
                " but the model input size is " +
                std::to_string(net.input_size()));
  InferenceOutcome inf = infer_split(net, set, batch_size);

  metrics::MetricsBundle bundle;
  bundle.classes = k;
  bundle.acc = metrics::accuracy(inf.preds, set.labels);
  bundle.conf = metrics::confusion(inf.preds, set.labels, k);
  bundle.class_counts = data::count_per_class(set.labels, k);
  if (k == 2) {
    std::vector<double> scores(set.labels.size());
    for (size_t i = 0; i < scores.size(); ++i)
      scores[i] = inf.probs[i * 2 + 1];
    bundle.roc = metrics::roc_binary(scores, set.labels);
  } else {
    bundle.roc_mc = metrics::roc_multiclass(inf.probs, set.labels, k);
  }
  return bundle;
}

std::string curve_to_csv(const std::vector<CurvePoint>& curve) {
  std::ostringstream os;
  os << "step,train_acc,eval_acc,train_loss,eval_loss\n";
  for (const auto& p : curve)
    os << p.step << "," << fmt_double(p.train_acc) << ","
       << fmt_double(p.eval_acc) << "," << fmt_double(p.train_loss) << ","
       << fmt_double(p.eval_loss) << "\n";
  return os.str();
}

void write_curve_csv(const std::vector<CurvePoint>& curve,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << curve_to_csv(curve);
  if (!out) throw Error("write failed for " + path);
}

std::vector<Tensor4<float>> capture_activations(nn::Network<float>& net,
                                                const kspace::RealGrid& image) {
  if (image.h != net.input_size() || image.w != net.input_size())
    throw Error("activations: image is " + std::to_string(image.w) + "x" +
                std::to_string(image.h) + " but the model input size is " +
                std::to_string(net.input_size()));
  Tensor4<float> x(1, 1, image.h, image.w);
  for (size_t i = 0; i < image.v.size(); ++i)
    x.data[i] = static_cast<float>(image.v[i]);
  std::vector<Tensor4<float>> maps;
  net.forward(x, nn::RunMode::Inference, &maps);
  return maps;
}

std::vector<std::string> export_activations(nn::Network<float>& net,
                                            const kspace::RealGrid& image,
                                            const std::string& out_dir) {
  std::vector<Tensor4<float>> maps = capture_activations(net, image);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create directory " + out_dir + ": " + ec.message());

  std::vector<std::string> paths;
  for (size_t k = 0; k < maps.size(); ++k) {
    const Tensor4<float>& t = maps[k];
    kspace::RealGrid mean(t.h, t.w);
    for (int y = 0; y < t.h; ++y)
      for (int x = 0; x < t.w; ++x) {
        double acc = 0;
        for (int c = 0; c < t.c; ++c) acc += t.at(0, c, y, x);
        mean.at(y, x) = acc / t.c;
      }
    auto [lo_it, hi_it] = std::minmax_element(mean.v.begin(), mean.v.end());
    double lo = *lo_it, hi = *hi_it;
    if (hi > lo)
      for (double& v : mean.v) v = (v - lo) / (hi - lo);
    else
      std::fill(mean.v.begin(), mean.v.end(), 0.0);
    fs::path path = fs::path(out_dir) / ("layer" + std::to_string(k + 1) + ".pgm");
    pgm::write_pgm(path, pgm::quantize(mean));
    paths.push_back(path.string());
  }
  return paths;
}

std::vector<double> layer_discriminability(nn::Network<float>& net,
                                           const kspace::RealGrid& clean,
                                           const kspace::RealGrid& corrupted) {
  std::vector<Tensor4<float>> a = capture_activations(net, clean);
  std::vector<Tensor4<float>> b = capture_activations(net, corrupted);
  std::vector<double> scores;
  for (size_t k = 0; k < a.size(); ++k) {
    double dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a[k].data.size(); ++i) {
      double x = a[k].data[i], y = b[k].data[i];
      dot += x * y;
      na += x * x;
      nb += y * y;
    }
    if (na == 0 || nb == 0) {
      scores.push_back(0.0);
    } else {
      double cosine = dot / std::sqrt(na * nb);
      scores.push_back(1.0 - std::clamp(cosine, -1.0, 1.0));
    }
  }
  return scores;
}

std::vector<Suspect> flag_suspect_labels(nn::Network<float>& net,
                                         const data::Manifest& manifest,
                                         data::Split split,
                                         data::LabelPolicy policy, double tau,
                                         int batch_size) {
  if (!(tau > 0.5 && tau < 1.0))
    throw Error("suspects: tau must lie in (0.5, 1), got " + fmt_double(tau));
  const int k = net.num_classes();
  SplitTensors set = load_split(manifest, split, policy, k);
  InferenceOutcome inf = infer_split(net, set, batch_size);

  std::vector<Suspect> out;
  for (size_t i = 0; i < set.record_indices.size(); ++i) {
    int pred = inf.preds[i];
    double conf = inf.probs[i * k + pred];
    if (pred != set.labels[i] && conf >= tau)
      out.push_back({manifest.records[set.record_indices[i]].id,
                     set.labels[i], pred, conf});
  }
  std::stable_sort(out.begin(), out.end(), [](const Suspect& x, const Suspect& y) {
    return x.confidence > y.confidence;
  });
  return out;
}

std::string suspects_to_csv(const std::vector<Suspect>& suspects) {
  std::ostringstream os;
  os << "id,given,predicted,confidence\n";
  for (const auto& s : suspects)
    os << s.id << "," << s.given << "," << s.predicted << ","
       << fmt_double(s.confidence) << "\n";
  return os.str();
}

}  // namespace mriq::harness
