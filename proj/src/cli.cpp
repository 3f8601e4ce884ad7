#include "mriq/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mriq/checkpoint.hpp"
#include "mriq/corpus.hpp"
#include "mriq/dataset.hpp"
#include "mriq/gradcheck.hpp"
#include "mriq/harness.hpp"
#include "mriq/metrics.hpp"
#include "mriq/util.hpp"

namespace fs = std::filesystem;

namespace mriq::cli {

namespace {

/// Bad flag *values* discovered after CLI parsing; mapped to exit code 2
/// like any other usage problem.
struct UsageError : Error {
  using Error::Error;
};

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << content;
  if (!out) throw Error("write failed for " + path);
}

std::vector<double> parse_triple(const std::string& text, const char* flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      size_t used = 0;
      out.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw UsageError(std::string(flag) + ": '" + part + "' is not a number");
    }
  }
  if (out.size() != 3)
    throw UsageError(std::string(flag) + ": expected three comma-separated " +
                     "values, got '" + text + "'");
  return out;
}

std::array<int, 4> parse_channels(const std::string& text) {
  std::array<int, 4> out{};
  std::stringstream ss(text);
  std::string part;
  size_t i = 0;
  while (std::getline(ss, part, ',')) {
    int v = 0;
    try {
      size_t used = 0;
      v = std::stoi(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw UsageError("--channels: '" + part + "' is not an integer");
    }
    if (i >= 4) throw UsageError("--channels: expected four values");
    out[i++] = v;
  }
  if (i != 4) throw UsageError("--channels: expected four values, got " +
                               std::to_string(i));
  return out;
}

struct SynthArgs {
  std::string out;
  int n = 0;
  uint64_t seed = 0;
  int size = 64;
  std::string proportions = "518,1220,372";
  double rater_noise = 0.15;
  double t1 = 1.0, t2 = 4.0;
};

int cmd_synth(const SynthArgs& a) {
  auto weights = parse_triple(a.proportions, "--proportions");
  data::CorpusConfig config;
  config.out_dir = a.out;
  config.n = a.n;
  config.seed = a.seed;
  config.size = a.size;
  config.proportions = {weights[0], weights[1], weights[2]};
  config.rater_noise = a.rater_noise;
  config.t1 = a.t1;
  config.t2 = a.t2;
  data::Manifest manifest = data::synthesize_corpus(config);
  std::cerr << "wrote " << manifest.records.size() << " images and manifest.csv to "
            << a.out << "\n";
  return 0;
}

struct TrainArgs {
  std::string manifest, arch = "convnet4", task = "binary", out, curve;
  std::string labels = "rater_a", channels = "8,16,32,64";
  uint64_t seed = 1;
  long steps = 10000;
  int batch = 32, size = 64, base_channels = 8;
  long eval_interval = 100;
  double lr = 1e-3;
};

int cmd_train(const TrainArgs& a) {
  harness::TrainConfig config;
  config.arch = a.arch;
  config.num_classes = data::task_classes(a.task);
  config.input_size = a.size;
  config.channel_plan = parse_channels(a.channels);
  config.base_channels = a.base_channels;
  config.seed = a.seed;
  config.steps = a.steps;
  config.batch_size = a.batch;
  config.lr = a.lr;
  config.eval_interval = a.eval_interval;
  config.policy = data::label_policy_from_name(a.labels);
  config.progress = true;

  data::Manifest manifest = data::load_manifest(a.manifest);
  harness::TrainResult result = harness::train(manifest, config);
  ckpt::save_checkpoint(result.net, a.out);
  if (!a.curve.empty()) harness::write_curve_csv(result.curve, a.curve);
  const auto& last = result.curve.back();
  std::cerr << "saved checkpoint to " << a.out << " (final train acc "
            << fmt_double(last.train_acc) << ", eval acc "
            << fmt_double(last.eval_acc) << ")\n";
  return 0;
}

struct EvalArgs {
  std::string manifest, ckpt, split = "test", task = "binary", out, roc;
  std::string labels = "rater_a";
};

int cmd_eval(const EvalArgs& a) {
  nn::Network<float> net = ckpt::load_checkpoint(a.ckpt);
  int classes = data::task_classes(a.task);
  if (classes != net.num_classes())
    throw Error("task '" + a.task + "' expects " + std::to_string(classes) +
                " classes but the checkpoint was trained with " +
                std::to_string(net.num_classes()));
  data::Manifest manifest = data::load_manifest(a.manifest);
  metrics::MetricsBundle bundle =
      harness::evaluate(net, manifest, data::split_from_name(a.split),
                        data::label_policy_from_name(a.labels));
  write_text_file(a.out, metrics::bundle_to_json(bundle) + "\n");
  if (!a.roc.empty()) {
    if (bundle.roc) {
      write_text_file(a.roc, metrics::roc_to_csv(*bundle.roc));
    } else {
      fs::path base(a.roc);
      for (size_t c = 0; c < bundle.roc_mc->per_class.size(); ++c) {
        fs::path p = base.parent_path() /
                     (base.stem().string() + "_class" + std::to_string(c) +
                      base.extension().string());
        write_text_file(p.string(), metrics::roc_to_csv(bundle.roc_mc->per_class[c]));
      }
    }
  }
  std::cerr << "evaluated " << a.split << " split: accuracy "
            << fmt_double(bundle.acc) << "\n";
  return 0;
}

struct AgreementArgs {
  std::string manifest, out;
};

int cmd_agreement(const AgreementArgs& a) {
  data::Manifest manifest = data::load_manifest(a.manifest);
  std::vector<int> ra, rb;
  ra.reserve(manifest.records.size());
  rb.reserve(manifest.records.size());
  for (const auto& r : manifest.records) {
    ra.push_back(r.rater_a);
    rb.push_back(r.rater_b);
  }
  metrics::JaccardMatrix j = metrics::jaccard_matrix(ra, rb, 3);
  std::ostringstream os;
  os << "{\"classes\":3,\"jaccard\":[";
  for (int i = 0; i < 3; ++i) {
    if (i) os << ",";
    os << "[";
    for (int c = 0; c < 3; ++c) {
      if (c) os << ",";
      os << fmt_double(j.at(i, c));
    }
    os << "]";
  }
  os << "]}\n";
  write_text_file(a.out, os.str());
  std::cerr << "wrote rater agreement matrix to " << a.out << "\n";
  return 0;
}

struct ActivationsArgs {
  std::string ckpt, image, out, compare;
};

int cmd_activations(const ActivationsArgs& a) {
  nn::Network<float> net = ckpt::load_checkpoint(a.ckpt);
  kspace::RealGrid img = data::normalize_image(pgm::read_pgm(a.image));
  std::vector<std::string> paths = harness::export_activations(net, img, a.out);
  std::cerr << "wrote " << paths.size() << " activation maps to " << a.out << "\n";
  if (!a.compare.empty()) {
    kspace::RealGrid other = data::normalize_image(pgm::read_pgm(a.compare));
    std::vector<double> scores = harness::layer_discriminability(net, img, other);
    std::cout << "{\"discriminability\":[";
    for (size_t i = 0; i < scores.size(); ++i) {
      if (i) std::cout << ",";
      std::cout << fmt_double(scores[i]);
    }
    std::cout << "]}\n";
  }
  return 0;
}

struct SuspectsArgs {
  std::string manifest, ckpt, out, split = "train", labels = "rater_a";
  double tau = 0.9;
};

int cmd_suspects(const SuspectsArgs& a) {
  nn::Network<float> net = ckpt::load_checkpoint(a.ckpt);
  data::Manifest manifest = data::load_manifest(a.manifest);
  std::vector<harness::Suspect> flagged = harness::flag_suspect_labels(
      net, manifest, data::split_from_name(a.split),
      data::label_policy_from_name(a.labels), a.tau);
  write_text_file(a.out, harness::suspects_to_csv(flagged));
  std::cerr << "flagged " << flagged.size() << " records into " << a.out << "\n";
  return 0;
}

int cmd_gradcheck(uint64_t seed) {
  std::vector<nn::GradCheckReport> reports = nn::run_gradient_checks(seed);
  for (const auto& r : reports) {
    std::cout << r.name << ": max relative error " << fmt_double(r.max_rel_err)
              << " over " << r.draws << " draws (" << r.checked
              << " coordinates";
    if (r.skipped > 0)
      std::cout << ", " << r.skipped << " skipped as numerically uncheckable";
    std::cout << ") -> " << (r.pass ? "pass" : "FAIL") << "\n";
  }
  return nn::all_passed(reports) ? 0 : 1;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Synthetic motion-artifact image quality pipeline"};
  app.require_subcommand(1);

  SynthArgs synth;
  CLI::App* synth_cmd =
      app.add_subcommand("synth", "Generate a graded phantom corpus");
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--n", synth.n, "Number of images")->required();
  synth_cmd->add_option("--seed", synth.seed, "Corpus seed")->required();
  synth_cmd->add_option("--size", synth.size, "Image size (power of two)")->capture_default_str();
  synth_cmd->add_option("--proportions", synth.proportions,
                        "Class weights c0,c1,c2")->capture_default_str();
  synth_cmd->add_option("--rater-noise", synth.rater_noise,
                        "Probability the second rater disagrees near a threshold")->capture_default_str();
  synth_cmd->add_option("--t1", synth.t1, "Severity threshold class 2|1")->capture_default_str();
  synth_cmd->add_option("--t2", synth.t2, "Severity threshold class 1|0")->capture_default_str();

  TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a grading model");
  train_cmd->add_option("--manifest", train.manifest, "Manifest CSV")->required();
  train_cmd->add_option("--arch", train.arch, "Architecture")->capture_default_str()
      ->check(CLI::IsMember({"convnet4", "resnet10"}));
  train_cmd->add_option("--task", train.task, "Label task")->capture_default_str()
      ->check(CLI::IsMember({"binary", "three"}));
  train_cmd->add_option("--seed", train.seed, "Run seed")->capture_default_str();
  train_cmd->add_option("--steps", train.steps, "Optimizer steps")->capture_default_str();
  train_cmd->add_option("--batch", train.batch, "Batch size")->capture_default_str();
  train_cmd->add_option("--lr", train.lr, "Learning rate")->capture_default_str();
  train_cmd->add_option("--size", train.size, "Model input size")->capture_default_str();
  train_cmd->add_option("--out", train.out, "Checkpoint path")->required();
  train_cmd->add_option("--curve", train.curve, "Training-curve CSV path");
  train_cmd->add_option("--eval-interval", train.eval_interval,
                        "Steps between curve points")->capture_default_str();
  train_cmd->add_option("--labels", train.labels, "Label policy")->capture_default_str()
      ->check(CLI::IsMember({"rater_a", "rater_b", "mean"}));
  train_cmd->add_option("--channels", train.channels,
                        "convnet4 stage widths c1,c2,c3,c4")->capture_default_str();
  train_cmd->add_option("--base-channels", train.base_channels,
                        "resnet10 stage-1 width")->capture_default_str();

  EvalArgs eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--manifest", eval.manifest, "Manifest CSV")->required();
  eval_cmd->add_option("--ckpt", eval.ckpt, "Checkpoint path")->required();
  eval_cmd->add_option("--split", eval.split, "Split to evaluate")->capture_default_str()
      ->check(CLI::IsMember({"test", "eval"}));
  eval_cmd->add_option("--task", eval.task, "Label task")->capture_default_str()
      ->check(CLI::IsMember({"binary", "three"}));
  eval_cmd->add_option("--out", eval.out, "Metrics JSON path")->required();
  eval_cmd->add_option("--roc", eval.roc,
                       "ROC CSV path (per-class suffix for three-class)");
  eval_cmd->add_option("--labels", eval.labels, "Label policy")->capture_default_str()
      ->check(CLI::IsMember({"rater_a", "rater_b", "mean"}));

  AgreementArgs agreement;
  CLI::App* agreement_cmd =
      app.add_subcommand("agreement", "Inter-rater Jaccard matrix");
  agreement_cmd->add_option("--manifest", agreement.manifest, "Manifest CSV")
      ->required();
  agreement_cmd->add_option("--out", agreement.out, "JSON path")->required();

  ActivationsArgs activations;
  CLI::App* activations_cmd =
      app.add_subcommand("activations", "Export post-ReLU activation maps");
  activations_cmd->add_option("--ckpt", activations.ckpt, "Checkpoint path")
      ->required();
  activations_cmd->add_option("--image", activations.image, "Input PGM")
      ->required();
  activations_cmd->add_option("--out", activations.out, "Output directory")
      ->required();
  activations_cmd->add_option("--compare", activations.compare,
                              "Second PGM; also prints per-layer "
                              "discriminability JSON to stdout");

  SuspectsArgs suspects;
  CLI::App* suspects_cmd =
      app.add_subcommand("suspects", "Flag confidently contradicted labels");
  suspects_cmd->add_option("--manifest", suspects.manifest, "Manifest CSV")
      ->required();
  suspects_cmd->add_option("--ckpt", suspects.ckpt, "Checkpoint path")
      ->required();
  suspects_cmd->add_option("--tau", suspects.tau, "Confidence threshold")->capture_default_str();
  suspects_cmd->add_option("--out", suspects.out, "CSV path")->required();
  suspects_cmd->add_option("--split", suspects.split, "Split to scan")->capture_default_str()
      ->check(CLI::IsMember({"train", "eval", "test"}));
  suspects_cmd->add_option("--labels", suspects.labels, "Label policy")->capture_default_str()
      ->check(CLI::IsMember({"rater_a", "rater_b", "mean"}));

  uint64_t gradcheck_seed = 1;
  CLI::App* gradcheck_cmd =
      app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  gradcheck_cmd->add_option("--seed", gradcheck_seed, "Suite seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);  // prints help to stdout or the error to stderr
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth_cmd) return cmd_synth(synth);
    if (*train_cmd) return cmd_train(train);
    if (*eval_cmd) return cmd_eval(eval);
    if (*agreement_cmd) return cmd_agreement(agreement);
    if (*activations_cmd) return cmd_activations(activations);
    if (*suspects_cmd) return cmd_suspects(suspects);
    if (*gradcheck_cmd) return cmd_gradcheck(gradcheck_seed);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;  // no subcommand (require_subcommand should have caught this)
}

}  // namespace mriq::cli
