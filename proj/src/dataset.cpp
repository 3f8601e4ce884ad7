#include "mriq/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>

#include "mriq/rng.hpp"
#include "mriq/util.hpp"

namespace mriq::data {

std::string split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Eval: return "eval";
    case Split::Test: return "test";
    case Split::Unassigned: return "unassigned";
  }
  throw Error("split_name: invalid split");
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "eval") return Split::Eval;
  if (name == "test") return Split::Test;
  if (name == "unassigned") return Split::Unassigned;
  throw Error("unknown split '" + name + "'");
}

LabelPolicy label_policy_from_name(const std::string& name) {
  if (name == "rater_a") return LabelPolicy::RaterA;
  if (name == "rater_b") return LabelPolicy::RaterB;
  if (name == "mean") return LabelPolicy::MeanRound;
  throw Error("unknown label policy '" + name + "'");
}

std::vector<int> Manifest::indices_of(Split s) const {
  std::vector<int> out;
  for (size_t i = 0; i < records.size(); ++i)
    if (records[i].split == s) out.push_back(static_cast<int>(i));
  return out;
}

namespace {

constexpr const char* kHeader = "id,path,rater_a,rater_b,severity,split,volume";

int parse_label(const std::string& field, const std::string& id,
                const std::string& column) {
  int value = -1;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(),
                                   value);
  if (ec != std::errc() || ptr != field.data() + field.size() || value < 0 ||
      value > 2)
    throw Error("manifest record '" + id + "': " + column + " must be 0, 1 "
                "or 2, got '" + field + "'");
  return value;
}

}  // namespace

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("load_manifest: cannot open " + path.string());

  Manifest manifest;
  manifest.dir = path.parent_path();

  std::string line;
  if (!std::getline(in, line) || line != kHeader)
    throw Error("load_manifest: " + path.string() +
                " does not start with the expected header '" +
                std::string(kHeader) + "'");

  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f = split_csv_line(line);
    if (f.size() != 7)
      throw Error("load_manifest: line " + std::to_string(line_no) + " has " +
                  std::to_string(f.size()) + " fields, expected 7");
    ManifestRecord rec;
    rec.id = f[0];
    rec.path = f[1];
    if (rec.id.empty() || rec.path.empty())
      throw Error("load_manifest: line " + std::to_string(line_no) +
                  ": id and path must be non-empty");
    rec.rater_a = parse_label(f[2], rec.id, "rater_a");
    rec.rater_b = parse_label(f[3], rec.id, "rater_b");
    if (!f[4].empty()) {
      double sev = 0;
      auto [ptr, ec] = std::from_chars(f[4].data(), f[4].data() + f[4].size(),
                                       sev);
      if (ec != std::errc() || ptr != f[4].data() + f[4].size() || sev < 0)
        throw Error("manifest record '" + rec.id +
                    "': severity must be a non-negative number, got '" +
                    f[4] + "'");
      rec.severity = sev;
    }
    rec.split = split_from_name(f[5]);
    rec.volume = f[6];
    manifest.records.push_back(std::move(rec));
  }

  // Duplicate ids would make suspect lists and joins ambiguous.
  std::vector<std::string> ids;
  for (const auto& r : manifest.records) ids.push_back(r.id);
  std::sort(ids.begin(), ids.end());
  auto dup = std::adjacent_find(ids.begin(), ids.end());
  if (dup != ids.end())
    throw Error("load_manifest: duplicate id '" + *dup + "'");
  return manifest;
}

void save_manifest(const Manifest& manifest,
                   const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("save_manifest: cannot open " + path.string());
  out << kHeader << "\n";
  for (const auto& r : manifest.records) {
    for (const std::string* field : {&r.id, &r.path, &r.volume})
      if (field->find_first_of(",\n\r") != std::string::npos)
        throw Error("save_manifest: record '" + r.id +
                    "' contains a comma or newline");
    out << r.id << ',' << r.path << ',' << r.rater_a << ',' << r.rater_b
        << ',' << (r.severity ? fmt_double(*r.severity) : std::string())
        << ',' << split_name(r.split) << ',' << r.volume << "\n";
  }
  if (!out) throw Error("save_manifest: write failed for " + path.string());
}

void split_dataset(Manifest& manifest, const SplitConfig& config) {
  if (config.train < 0 || config.eval < 0 || config.test < 0 ||
      std::abs(config.train + config.eval + config.test - 1.0) > 1e-9)
    throw Error("split_dataset: ratios must be non-negative and sum to 1");
  const size_t n = manifest.records.size();
  if (n == 0) throw Error("split_dataset: empty manifest");

  // The 1e-9 nudge keeps floor() immune to ratios like 0.7 that are not
  // exactly representable; eval and test get their floors, train the rest.
  auto quota = [&](double ratio) {
    return static_cast<size_t>(std::floor(static_cast<double>(n) * ratio +
                                          1e-9));
  };
  const size_t n_eval = quota(config.eval);
  const size_t n_test = quota(config.test);
  if (n_eval + n_test > n)
    throw Error("split_dataset: eval and test quotas exceed the manifest");
  const size_t n_train = n - n_eval - n_test;

  rng::Engine eng(rng::mix(config.seed, rng::kSplitStream));

  if (config.grouping == SplitConfig::Grouping::PerImage) {
    std::vector<int> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
    eng.shuffle(order.begin(), order.end());
    for (size_t i = 0; i < n; ++i) {
      Split s = i < n_train ? Split::Train
                : i < n_train + n_eval ? Split::Eval
                                       : Split::Test;
      manifest.records[order[i]].split = s;
    }
    return;
  }

  // Per-volume: whole volumes are assigned greedily in shuffled order until
  // each split reaches its record quota. Records with no volume id form
  // singleton groups.
  std::map<std::string, std::vector<int>> groups;
  std::vector<std::vector<int>> group_list;
  for (size_t i = 0; i < n; ++i) {
    const std::string& vol = manifest.records[i].volume;
    if (vol.empty())
      group_list.push_back({static_cast<int>(i)});
    else
      groups[vol].push_back(static_cast<int>(i));
  }
  for (auto& [vol, members] : groups) group_list.push_back(members);
  eng.shuffle(group_list.begin(), group_list.end());

  size_t filled_train = 0, filled_eval = 0;
  for (const auto& members : group_list) {
    Split s;
    if (filled_train < n_train)
      s = Split::Train;
    else if (filled_eval < n_eval)
      s = Split::Eval;
    else
      s = Split::Test;
    for (int idx : members) manifest.records[idx].split = s;
    if (s == Split::Train)
      filled_train += members.size();
    else if (s == Split::Eval)
      filled_eval += members.size();
  }
}

std::vector<int> binarize_labels(const std::vector<int>& labels) {
  std::vector<int> out(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] > 2)
      throw Error("binarize_labels: label " + std::to_string(labels[i]) +
                  " at position " + std::to_string(i) +
                  " is outside {0, 1, 2}");
    out[i] = labels[i] == 0 ? 0 : 1;
  }
  return out;
}

std::vector<int> aggregate_raters(const std::vector<int>& rater_a,
                                  const std::vector<int>& rater_b,
                                  LabelPolicy policy) {
  if (rater_a.size() != rater_b.size())
    throw Error("aggregate_raters: " + std::to_string(rater_a.size()) +
                " vs " + std::to_string(rater_b.size()) + " labels");
  std::vector<int> out(rater_a.size());
  for (size_t i = 0; i < rater_a.size(); ++i) {
    switch (policy) {
      case LabelPolicy::RaterA: out[i] = rater_a[i]; break;
      case LabelPolicy::RaterB: out[i] = rater_b[i]; break;
      case LabelPolicy::MeanRound:
        out[i] = (rater_a[i] + rater_b[i] + 1) / 2;  // mean, halves up
        break;
    }
  }
  return out;
}

int task_classes(const std::string& task) {
  if (task == "binary") return 2;
  if (task == "three") return 3;
  throw Error("unknown task '" + task + "'");
}

std::vector<int> split_labels(const Manifest& manifest,
                              const std::vector<int>& indices,
                              LabelPolicy policy, int classes) {
  std::vector<int> a, b;
  for (int idx : indices) {
    a.push_back(manifest.records[idx].rater_a);
    b.push_back(manifest.records[idx].rater_b);
  }
  std::vector<int> labels = aggregate_raters(a, b, policy);
  if (classes == 2) return binarize_labels(labels);
  if (classes == 3) return labels;
  throw Error("split_labels: classes must be 2 or 3, got " +
              std::to_string(classes));
}

std::vector<long> count_per_class(const std::vector<int>& labels,
                                  int classes) {
  std::vector<long> counts(classes, 0);
  for (int l : labels) {
    if (l < 0 || l >= classes)
      throw Error("count_per_class: label " + std::to_string(l) +
                  " outside [0, " + std::to_string(classes) + ")");
    ++counts[l];
  }
  return counts;
}

std::vector<long> class_distribution(const Manifest& manifest, int classes) {
  std::vector<int> labels;
  for (const auto& r : manifest.records) labels.push_back(r.rater_a);
  if (classes == 2) labels = binarize_labels(labels);
  return count_per_class(labels, classes);
}

kspace::RealGrid normalize_image(const pgm::ImageU8& image) {
  kspace::RealGrid grid(image.h, image.w);
  for (size_t i = 0; i < image.pixels.size(); ++i)
    grid.v[i] = image.pixels[i] / 255.0;
  return grid;
}

std::vector<int> apportion_largest_remainder(
    int n, const std::vector<double>& weights) {
  if (n < 0) throw Error("apportion_largest_remainder: negative total");
  double sum = 0;
  for (double w : weights) {
    if (w < 0) throw Error("apportion_largest_remainder: negative weight");
    sum += w;
  }
  if (weights.empty() || sum <= 0)
    throw Error("apportion_largest_remainder: weights must be positive");

  std::vector<int> counts(weights.size(), 0);
  std::vector<std::pair<double, size_t>> remainders;
  int assigned = 0;
  for (size_t i = 0; i < weights.size(); ++i) {
    double quota = n * weights[i] / sum;
    counts[i] = static_cast<int>(std::floor(quota + 1e-9));
    assigned += counts[i];
    remainders.push_back({quota - counts[i], i});
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) {
                     return a.first > b.first;  // ties keep index order
                   });
  for (int extra = 0; extra < n - assigned; ++extra)
    ++counts[remainders[extra % remainders.size()].second];
  return counts;
}

}  // namespace mriq::data
