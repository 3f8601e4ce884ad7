#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "mriq/metrics.hpp"
#include "mriq/rng.hpp"
#include "oracles.hpp"

namespace mm = mriq::metrics;

TEST_CASE("accuracy is the plain fraction of matches") {
  CHECK(mm::accuracy({1, 0, 1, 1}, {1, 1, 1, 0}) == doctest::Approx(0.5));
  CHECK(mm::accuracy({2, 2}, {2, 2}) == 1.0);
  CHECK_THROWS_AS(mm::accuracy({1}, {1, 0}), mriq::Error);
  CHECK_THROWS_AS(mm::accuracy({}, {}), mriq::Error);
}

TEST_CASE("the majority baseline on an imbalanced binary corpus") {
  // 518 of one class, 1592 of the other; always predicting the majority
  // class scores 1592/2110.
  std::vector<int> labels(2110, 1);
  std::fill_n(labels.begin(), 518, 0);
  std::vector<int> preds(2110, 1);
  double acc = mm::accuracy(preds, labels);
  CHECK(acc == doctest::Approx(1592.0 / 2110.0).epsilon(1e-15));
  CHECK(std::abs(acc - 0.7545) < 1e-4);
}

TEST_CASE("confusion counts rows by true class") {
  // true:      0 0 1 1 1 2
  // predicted: 0 1 1 1 0 2
  mm::ConfusionMatrix cm = mm::confusion({0, 1, 1, 1, 0, 2},
                                         {0, 0, 1, 1, 1, 2}, 3);
  CHECK(cm.count_at(0, 0) == 1);
  CHECK(cm.count_at(0, 1) == 1);
  CHECK(cm.count_at(1, 0) == 1);
  CHECK(cm.count_at(1, 1) == 2);
  CHECK(cm.count_at(2, 2) == 1);
  CHECK(cm.norm_at(0, 0) == doctest::Approx(0.5));
  CHECK(cm.norm_at(1, 1) == doctest::Approx(2.0 / 3.0));
  CHECK(cm.norm_at(1, 2) == 0.0);
  for (int i = 0; i < 3; ++i) CHECK_FALSE(cm.zero_rows[i]);

  // A class with no support keeps an all-zero normalized row, flagged.
  mm::ConfusionMatrix z = mm::confusion({0, 1}, {0, 1}, 3);
  CHECK(z.zero_rows[2]);
  for (int j = 0; j < 3; ++j) CHECK(z.norm_at(2, j) == 0.0);

  CHECK_THROWS_AS(mm::confusion({0, 3}, {0, 1}, 3), mriq::Error);
  CHECK_THROWS_AS(mm::confusion({0}, {0}, 1), mriq::Error);
}

TEST_CASE("roc handles the canonical hand cases") {
  SUBCASE("perfect separation") {
    mm::RocCurve r = mm::roc_binary({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0});
    CHECK(r.auc == 1.0);
  }
  SUBCASE("perfectly reversed") {
    mm::RocCurve r = mm::roc_binary({0.1, 0.2, 0.8, 0.9}, {1, 1, 0, 0});
    CHECK(r.auc == 0.0);
  }
  SUBCASE("all scores tied") {
    mm::RocCurve r = mm::roc_binary({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0});
    CHECK(r.auc == 0.5);
  }
  SUBCASE("one inversion") {
    // pairs: (0.9 vs 0.3) win, (0.9 vs 0.7) win, (0.4 vs 0.3) win,
    // (0.4 vs 0.7) loss -> 3/4
    mm::RocCurve r = mm::roc_binary({0.9, 0.4, 0.3, 0.7}, {1, 1, 0, 0});
    CHECK(r.auc == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(r.pos == 2);
    CHECK(r.neg == 2);
    CHECK(r.auc_num == 3 * 2);  // numerator counts half-wins in units of 1/2
  }
}

TEST_CASE("roc curves start at (0,0), end at (1,1) and never step back") {
  mriq::rng::Engine eng(mriq::rng::mix(21, 0xA0));
  std::vector<double> scores;
  std::vector<int> labels;
  for (int i = 0; i < 150; ++i) {
    double s = eng.normal();
    scores.push_back(i % 3 == 0 ? std::round(s * 4) / 4 : s);
    labels.push_back(eng.uniform() < 0.4 ? 1 : 0);
  }
  labels[0] = 1;
  labels[1] = 0;
  mm::RocCurve r = mm::roc_binary(scores, labels);
  REQUIRE(r.points.size() >= 2);
  CHECK(r.points.front().fpr == 0.0);
  CHECK(r.points.front().tpr == 0.0);
  CHECK(std::isinf(r.points.front().threshold));
  CHECK(r.points.back().fpr == 1.0);
  CHECK(r.points.back().tpr == 1.0);
  for (size_t i = 1; i < r.points.size(); ++i) {
    CHECK(r.points[i].fpr >= r.points[i - 1].fpr);
    CHECK(r.points[i].tpr >= r.points[i - 1].tpr);
    CHECK(r.points[i].threshold < r.points[i - 1].threshold);
  }
}

TEST_CASE("trapezoid auc equals the exhaustive pairwise statistic") {
  mriq::rng::Engine eng(mriq::rng::mix(22, 0xA1));
  double worst = 0;
  for (int trial = 0; trial < 120; ++trial) {
    int n = eng.uniform_int(2, 200);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    bool quantize = trial % 2 == 0;  // half the cases are tie-heavy
    for (int i = 0; i < n; ++i) {
      double s = eng.normal();
      scores[i] = quantize ? std::round(s * 2) / 2 : s;
      labels[i] = eng.uniform() < 0.5 ? 1 : 0;
    }
    labels[0] = 1;
    if (n > 1) labels[1] = 0;
    double got = mm::roc_binary(scores, labels).auc;
    double want = oracle::pairwise_auc(scores, labels);
    worst = std::max(worst, std::abs(got - want));
  }
  CAPTURE(worst);
  CHECK(worst <= 1e-12);
}

TEST_CASE("negating the scores reflects the auc exactly") {
  mriq::rng::Engine eng(mriq::rng::mix(23, 0xA2));
  for (int trial = 0; trial < 60; ++trial) {
    int n = eng.uniform_int(2, 120);
    std::vector<double> scores(n), neg(n);
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) {
      scores[i] = std::round(eng.normal() * 3) / 3;
      neg[i] = -scores[i];
      labels[i] = eng.uniform() < 0.5 ? 1 : 0;
    }
    labels[0] = 1;
    if (n > 1) labels[1] = 0;
    double a = mm::roc_binary(scores, labels).auc;
    double b = mm::roc_binary(neg, labels).auc;
    CHECK(b == 1.0 - a);  // bitwise, not approximate
  }
}

TEST_CASE("roc validates its inputs") {
  CHECK_THROWS_AS(mm::roc_binary({0.5, 0.5}, {1, 1}), mriq::Error);
  CHECK_THROWS_AS(mm::roc_binary({0.5, 0.5}, {0, 0}), mriq::Error);
  CHECK_THROWS_AS(mm::roc_binary({0.5}, {1, 0}), mriq::Error);
  CHECK_THROWS_AS(mm::roc_binary({}, {}), mriq::Error);
  CHECK_THROWS_AS(mm::roc_binary({0.5, 0.3}, {1, 2}), mriq::Error);
  double nan = std::nan("");
  CHECK_THROWS_AS(mm::roc_binary({nan, 0.3}, {1, 0}), mriq::Error);
}

TEST_CASE("one-vs-rest roc per class matches manual binarization") {
  mriq::rng::Engine eng(mriq::rng::mix(24, 0xA3));
  const int k = 3, n = 90;
  std::vector<double> probs;
  std::vector<int> labels;
  for (int i = 0; i < n; ++i) {
    double a = eng.uniform() + 0.05, b = eng.uniform() + 0.05,
           c = eng.uniform() + 0.05;
    double z = a + b + c;
    probs.insert(probs.end(), {a / z, b / z, c / z});
    labels.push_back(i % k);  // every class present
  }
  mm::MulticlassRoc mc = mm::roc_multiclass(probs, labels, k);
  REQUIRE(mc.per_class.size() == 3);
  double mean = 0;
  for (int cls = 0; cls < k; ++cls) {
    std::vector<double> scores(n);
    std::vector<int> ovr(n);
    for (int i = 0; i < n; ++i) {
      scores[i] = probs[static_cast<size_t>(i) * k + cls];
      ovr[i] = labels[i] == cls ? 1 : 0;
    }
    double want = mm::roc_binary(scores, ovr).auc;
    CHECK(mc.auc_per_class[cls] == want);
    CHECK(mc.auc_per_class[cls] ==
          doctest::Approx(oracle::pairwise_auc(scores, ovr)).epsilon(1e-12));
    mean += want;
  }
  CHECK(mc.auc_macro == doctest::Approx(mean / 3).epsilon(1e-15));
}

TEST_CASE("one-vs-rest roc validates probability rows and class coverage") {
  std::vector<double> bad_rows = {0.7, 0.7, 0.3, 0.3};  // rows sum to 1.4/0.6
  CHECK_THROWS_AS(mm::roc_multiclass(bad_rows, {0, 1}, 2), mriq::Error);

  std::vector<double> ok = {0.9, 0.1, 0.2, 0.8};
  CHECK_THROWS_AS(mm::roc_multiclass(ok, {0, 0}, 2), mriq::Error);  // 1 absent
  CHECK_THROWS_AS(mm::roc_multiclass(ok, {0}, 2), mriq::Error);     // length
  CHECK_NOTHROW(mm::roc_multiclass(ok, {0, 1}, 2));
}

TEST_CASE("jaccard agreement on the worked four-sample example") {
  mm::JaccardMatrix j = mm::jaccard_matrix({0, 0, 1, 1}, {0, 1, 0, 1}, 2);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      CHECK(j.at(a, b) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("jaccard of identical labelings is the identity matrix") {
  mm::JaccardMatrix j = mm::jaccard_matrix({0, 1, 2, 0, 1}, {0, 1, 2, 0, 1}, 3);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) CHECK(j.at(a, b) == (a == b ? 1.0 : 0.0));
}

TEST_CASE("jaccard counts empty intersections and unions as zero") {
  // Rater A uses only class 0, rater B only class 1: cell (2,2) is 0/0.
  mm::JaccardMatrix j = mm::jaccard_matrix({0, 0}, {1, 1}, 3);
  CHECK(j.at(0, 1) == 1.0);  // identical index sets
  CHECK(j.at(0, 0) == 0.0);
  CHECK(j.at(2, 2) == 0.0);  // both sets empty
}

TEST_CASE("jaccard transposes when the raters swap") {
  mriq::rng::Engine eng(mriq::rng::mix(25, 0xA4));
  std::vector<int> a(40), b(40);
  for (int i = 0; i < 40; ++i) {
    a[i] = eng.uniform_int(0, 2);
    b[i] = eng.uniform_int(0, 2);
  }
  mm::JaccardMatrix ab = mm::jaccard_matrix(a, b, 3);
  mm::JaccardMatrix ba = mm::jaccard_matrix(b, a, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(ab.at(i, j) == ba.at(j, i));

  CHECK_THROWS_AS(mm::jaccard_matrix({0}, {0, 1}, 2), mriq::Error);
  CHECK_THROWS_AS(mm::jaccard_matrix({0, 5}, {0, 1}, 2), mriq::Error);
}

TEST_CASE("metric bundles serialize to parseable json") {
  mm::MetricsBundle bundle;
  bundle.classes = 2;
  bundle.acc = 0.875;
  bundle.conf = mm::confusion({1, 1, 0, 1}, {1, 1, 0, 0}, 2);
  bundle.class_counts = {2, 2};
  bundle.roc = mm::roc_binary({0.9, 0.8, 0.1, 0.6}, {1, 1, 0, 0});

  std::string text = mm::bundle_to_json(bundle);
  auto j = nlohmann::json::parse(text);
  CHECK(j["accuracy"].get<double>() == doctest::Approx(0.875));
  CHECK(j["confusion_counts"].size() == 2);
  CHECK(j["confusion_counts"][0][0].get<long>() == 1);
  CHECK(j["confusion_normalized"][0][1].get<double>() ==
        doctest::Approx(0.5));
  CHECK(j.contains("auc"));
  CHECK_FALSE(j.contains("auc_macro"));

  // Three-class form switches to per-class aucs.
  mm::MetricsBundle b3;
  b3.classes = 3;
  b3.acc = 1.0;
  b3.conf = mm::confusion({0, 1, 2}, {0, 1, 2}, 3);
  b3.class_counts = {1, 1, 1};
  std::vector<double> probs = {0.8, 0.1, 0.1, 0.1, 0.8, 0.1, 0.1, 0.1, 0.8};
  b3.roc_mc = mm::roc_multiclass(probs, {0, 1, 2}, 3);
  auto j3 = nlohmann::json::parse(mm::bundle_to_json(b3));
  CHECK(j3["auc_per_class"].size() == 3);
  CHECK(j3.contains("auc_macro"));
  CHECK_FALSE(j3.contains("auc"));

  // Jaccard rides along when present.
  bundle.jaccard = mm::jaccard_matrix({0, 1, 0, 1}, {0, 1, 0, 1}, 2);
  auto jj = nlohmann::json::parse(mm::bundle_to_json(bundle));
  CHECK(jj["jaccard"][0][0].get<double>() == 1.0);
}

TEST_CASE("roc csv carries the curve with an explicit header") {
  mm::RocCurve r = mm::roc_binary({0.9, 0.4, 0.3, 0.7}, {1, 1, 0, 0});
  std::string csv = mm::roc_to_csv(r);
  CHECK(csv.rfind("threshold,fpr,tpr\n", 0) == 0);
  CHECK(csv.find("inf") != std::string::npos);  // the (0,0) sentinel
  size_t lines = 0;
  for (char c : csv)
    if (c == '\n') ++lines;
  CHECK(lines == r.points.size() + 1);
}
