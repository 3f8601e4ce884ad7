#include "mriq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "mriq/util.hpp"

namespace mriq::metrics {

double accuracy(const std::vector<int>& predictions,
                const std::vector<int>& labels) {
  if (predictions.size() != labels.size())
    throw Error("accuracy: " + std::to_string(predictions.size()) +
                " predictions vs " + std::to_string(labels.size()) +
                " labels");
  if (predictions.empty()) throw Error("accuracy: empty input");
  long hits = 0;
  for (size_t i = 0; i < predictions.size(); ++i)
    if (predictions[i] == labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

ConfusionMatrix confusion(const std::vector<int>& predictions,
                          const std::vector<int>& labels, int k) {
  if (k < 2) throw Error("confusion: need at least 2 classes");
  if (predictions.size() != labels.size())
    throw Error("confusion: prediction/label length mismatch");
  ConfusionMatrix m;
  m.k = k;
  m.counts.assign(static_cast<size_t>(k) * k, 0);
  m.normalized.assign(static_cast<size_t>(k) * k, 0.0);
  m.zero_rows.assign(k, false);
  for (size_t i = 0; i < labels.size(); ++i) {
    int t = labels[i], p = predictions[i];
    if (t < 0 || t >= k)
      throw Error("confusion: label " + std::to_string(t) + " out of range at " +
                  std::to_string(i));
    if (p < 0 || p >= k)
      throw Error("confusion: prediction " + std::to_string(p) +
                  " out of range at " + std::to_string(i));
    ++m.counts[static_cast<size_t>(t) * k + p];
  }
  for (int i = 0; i < k; ++i) {
    long support = 0;
    for (int j = 0; j < k; ++j) support += m.count_at(i, j);
    if (support == 0) {
      m.zero_rows[i] = true;
      continue;
    }
    for (int j = 0; j < k; ++j)
      m.normalized[static_cast<size_t>(i) * k + j] =
          static_cast<double>(m.count_at(i, j)) / static_cast<double>(support);
  }
  return m;
}

RocCurve roc_binary(const std::vector<double>& scores,
                    const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw Error("roc: score/label length mismatch");
  if (scores.empty()) throw Error("roc: empty input");
  RocCurve curve;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1)
      ++curve.pos;
    else if (labels[i] == 0)
      ++curve.neg;
    else
      throw Error("roc: label " + std::to_string(labels[i]) +
                  " at position " + std::to_string(i) + " is not 0/1");
    if (!std::isfinite(scores[i]))
      throw Error("roc: non-finite score at position " + std::to_string(i));
  }
  if (curve.pos == 0 || curve.neg == 0)
    throw Error("roc: need both classes present (got " +
                std::to_string(curve.pos) + " positive, " +
                std::to_string(curve.neg) + " negative)");

  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return scores[a] > scores[b];
  });

  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  long tp = 0, fp = 0;
  size_t i = 0;
  while (i < order.size()) {
    // Consume the whole tie group at this score before emitting a point;
    // ties advance TP and FP together, giving the diagonal tie segment.
    double s = scores[order[i]];
    long dtp = 0, dfp = 0;
    while (i < order.size() && scores[order[i]] == s) {
      if (labels[order[i]] == 1)
        ++dtp;
      else
        ++dfp;
      ++i;
    }
    // Trapezoid area over this fp step, doubled to stay integral:
    // dfp * (tp_before + tp_after) = dfp * (2*tp + dtp).
    curve.auc_num += static_cast<long long>(dfp) * (2 * tp + dtp);
    tp += dtp;
    fp += dfp;
    curve.points.push_back({s,
                            static_cast<double>(fp) / curve.neg,
                            static_cast<double>(tp) / curve.pos});
  }
  // Complement-form division: whichever of num and denom-num is at least
  // half yields a quotient in [1/2, 1], where subtraction from 1 is exact.
  // Negating every score swaps num with denom-num, so the negated curve's
  // auc lands bit-for-bit on 1 - auc.
  long long denom = 2LL * curve.pos * curve.neg;
  if (2 * curve.auc_num >= denom)
    curve.auc = static_cast<double>(curve.auc_num) / static_cast<double>(denom);
  else
    curve.auc = 1.0 - static_cast<double>(denom - curve.auc_num) /
                          static_cast<double>(denom);
  return curve;
}

MulticlassRoc roc_multiclass(const std::vector<double>& probs,
                             const std::vector<int>& labels, int k) {
  if (k < 2) throw Error("roc_multiclass: need at least 2 classes");
  if (labels.empty()) throw Error("roc_multiclass: empty input");
  if (probs.size() != labels.size() * static_cast<size_t>(k))
    throw Error("roc_multiclass: expected " +
                std::to_string(labels.size() * static_cast<size_t>(k)) +
                " probabilities, got " + std::to_string(probs.size()));
  std::vector<long> present(k, 0);
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= k)
      throw Error("roc_multiclass: label " + std::to_string(labels[i]) +
                  " out of range at position " + std::to_string(i));
    ++present[labels[i]];
    double row = 0;
    for (int c = 0; c < k; ++c) row += probs[i * k + c];
    if (std::abs(row - 1.0) > 1e-6)
      throw Error("roc_multiclass: probability row " + std::to_string(i) +
                  " sums to " + fmt_double(row));
  }
  std::string absent;
  for (int c = 0; c < k; ++c)
    if (present[c] == 0) absent += (absent.empty() ? "" : ", ") + std::to_string(c);
  if (!absent.empty())
    throw Error("roc_multiclass: classes absent from labels: " + absent);
  MulticlassRoc out;
  std::vector<double> scores(labels.size());
  std::vector<int> bin(labels.size());
  for (int c = 0; c < k; ++c) {
    for (size_t i = 0; i < labels.size(); ++i) {
      scores[i] = probs[i * k + c];
      bin[i] = labels[i] == c ? 1 : 0;
    }
    out.per_class.push_back(roc_binary(scores, bin));
    out.auc_per_class.push_back(out.per_class.back().auc);
  }
  double sum = 0;
  for (double a : out.auc_per_class) sum += a;
  out.auc_macro = sum / k;
  return out;
}

JaccardMatrix jaccard_matrix(const std::vector<int>& a,
                             const std::vector<int>& b, int k) {
  if (a.size() != b.size()) throw Error("jaccard: rater length mismatch");
  if (a.empty()) throw Error("jaccard: empty input");
  if (k < 2) throw Error("jaccard: need at least 2 classes");
  std::vector<long> count_a(k, 0), count_b(k, 0),
      joint(static_cast<size_t>(k) * k, 0);
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i] < 0 || a[i] >= k || b[i] < 0 || b[i] >= k)
      throw Error("jaccard: label out of range at position " +
                  std::to_string(i));
    ++count_a[a[i]];
    ++count_b[b[i]];
    ++joint[static_cast<size_t>(a[i]) * k + b[i]];
  }
  JaccardMatrix m;
  m.k = k;
  m.values.assign(static_cast<size_t>(k) * k, 0.0);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      long inter = joint[static_cast<size_t>(i) * k + j];
      long uni = count_a[i] + count_b[j] - inter;
      m.values[static_cast<size_t>(i) * k + j] =
          uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
    }
  return m;
}

namespace {

void append_matrix(std::ostringstream& os, const std::vector<double>& v,
                   int k) {
  os << "[";
  for (int i = 0; i < k; ++i) {
    if (i) os << ",";
    os << "[";
    for (int j = 0; j < k; ++j) {
      if (j) os << ",";
      os << fmt_double(v[static_cast<size_t>(i) * k + j]);
    }
    os << "]";
  }
  os << "]";
}

void append_counts(std::ostringstream& os, const std::vector<long>& v, int k) {
  os << "[";
  for (int i = 0; i < k; ++i) {
    if (i) os << ",";
    os << "[";
    for (int j = 0; j < k; ++j) {
      if (j) os << ",";
      os << v[static_cast<size_t>(i) * k + j];
    }
    os << "]";
  }
  os << "]";
}

}  // namespace

std::string bundle_to_json(const MetricsBundle& bundle) {
  // Hand-assembled to keep key order stable across runs and platforms.
  std::ostringstream os;
  os << "{";
  os << "\"classes\":" << bundle.classes;
  os << ",\"accuracy\":" << fmt_double(bundle.acc);
  os << ",\"class_counts\":[";
  for (size_t i = 0; i < bundle.class_counts.size(); ++i) {
    if (i) os << ",";
    os << bundle.class_counts[i];
  }
  os << "]";
  os << ",\"confusion_counts\":";
  append_counts(os, bundle.conf.counts, bundle.conf.k);
  os << ",\"confusion_normalized\":";
  append_matrix(os, bundle.conf.normalized, bundle.conf.k);
  os << ",\"confusion_zero_rows\":[";
  for (int i = 0; i < bundle.conf.k; ++i) {
    if (i) os << ",";
    os << (bundle.conf.zero_rows[i] ? "true" : "false");
  }
  os << "]";
  if (bundle.roc) {
    os << ",\"auc\":" << fmt_double(bundle.roc->auc);
  }
  if (bundle.roc_mc) {
    os << ",\"auc_per_class\":[";
    for (size_t i = 0; i < bundle.roc_mc->auc_per_class.size(); ++i) {
      if (i) os << ",";
      os << fmt_double(bundle.roc_mc->auc_per_class[i]);
    }
    os << "],\"auc_macro\":" << fmt_double(bundle.roc_mc->auc_macro);
  }
  if (bundle.jaccard) {
    os << ",\"jaccard\":";
    append_matrix(os, bundle.jaccard->values, bundle.jaccard->k);
  }
  os << "}";
  return os.str();
}

std::string roc_to_csv(const RocCurve& curve) {
  std::ostringstream os;
  os << "threshold,fpr,tpr\n";
  for (const auto& p : curve.points) {
    if (std::isinf(p.threshold))
      os << "inf";
    else
      os << fmt_double(p.threshold);
    os << "," << fmt_double(p.fpr) << "," << fmt_double(p.tpr) << "\n";
  }
  return os.str();
}

}  // namespace mriq::metrics
