#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mriq/errors.hpp"

namespace mriq::metrics {

double accuracy(const std::vector<int>& predictions,
                const std::vector<int>& labels);

/// Row = true class, column = predicted class. The normalized view divides
/// each row by its support; zero-support rows stay all-zero and are flagged
/// instead of divided.
struct ConfusionMatrix {
  int k = 0;
  std::vector<long> counts;        // k*k row-major
  std::vector<double> normalized;  // k*k row-major
  std::vector<bool> zero_rows;

  long count_at(int i, int j) const { return counts[i * k + j]; }
  double norm_at(int i, int j) const { return normalized[i * k + j]; }
};

ConfusionMatrix confusion(const std::vector<int>& predictions,
                          const std::vector<int>& labels, int k);

/// ROC swept over descending distinct scores, one point per threshold plus
/// the (0,0) sentinel at threshold +infinity. The trapezoid area is kept as
/// an exact integer numerator over 2*P*N, which makes it identical to the
/// tie-aware pairwise statistic P(s+ > s-) + P(s+ = s-)/2 and makes score
/// negation map auc -> 1 - auc exactly.
struct RocPoint {
  double threshold, fpr, tpr;
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0;
  long long auc_num = 0;  // auc = auc_num / (2*pos*neg)
  long pos = 0, neg = 0;
};

RocCurve roc_binary(const std::vector<double>& scores,
                    const std::vector<int>& labels);

/// One-vs-rest ROC per class from probability rows; macro AUC is their mean.
struct MulticlassRoc {
  std::vector<RocCurve> per_class;
  std::vector<double> auc_per_class;
  double auc_macro = 0;
};

MulticlassRoc roc_multiclass(const std::vector<double>& probs,
                             const std::vector<int>& labels, int k);

/// Inter-rater agreement: J[i][j] = |A_i and B_j| / |A_i or B_j| over the
/// index sets labeled i by rater A and j by rater B; 0/0 counts as 0.
struct JaccardMatrix {
  int k = 0;
  std::vector<double> values;  // k*k row-major

  double at(int i, int j) const { return values[i * k + j]; }
};

JaccardMatrix jaccard_matrix(const std::vector<int>& a,
                             const std::vector<int>& b, int k);

/// Everything one evaluation run reports.
struct MetricsBundle {
  int classes = 0;
  double acc = 0;
  ConfusionMatrix conf;
  std::vector<long> class_counts;
  std::optional<RocCurve> roc;            // binary task
  std::optional<MulticlassRoc> roc_mc;    // three-class task
  std::optional<JaccardMatrix> jaccard;   // rater agreement
};

/// JSON with fixed keys: accuracy, confusion_counts, confusion_normalized,
/// auc (binary) or auc_per_class + auc_macro (three-class), jaccard.
std::string bundle_to_json(const MetricsBundle& bundle);

/// CSV with header threshold,fpr,tpr.
std::string roc_to_csv(const RocCurve& curve);

}  // namespace mriq::metrics
