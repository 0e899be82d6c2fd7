#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "seqclass/eval.hpp"
#include "seqclass/random.hpp"

using namespace seqclass;

namespace {

double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1.0;
      if (s[i] > s[j]) wins += 1.0;
      else if (s[i] == s[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

// Random labels with both classes and coarse scores so ties are common.
void random_instance(Rng& rng, std::vector<double>& s, std::vector<int>& y) {
  const std::size_t n = 2 + rng.below(199);
  s.resize(n);
  y.resize(n);
  const std::size_t levels = 1 + rng.below(20);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = rng.below(3) == 0 ? rng.uniform() : static_cast<double>(rng.below(levels)) / static_cast<double>(levels);
    y[i] = static_cast<int>(rng.below(2));
  }
  y[0] = 0;
  y[1] = 1;
}

std::vector<std::string> ids_for(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("doc" + std::to_string(i));
  return ids;
}

}  // namespace

// ---- recalls -------------------------------------------------------------

TEST(ClassRecalls, Examples) {
  EXPECT_EQ(class_recalls(std::vector<int>{1, 1, 0, 0}, std::vector<int>{1, 0, 1, 0}), std::make_pair(0.5, 0.5));
  EXPECT_EQ(class_recalls(std::vector<int>{1, 0, 1}, std::vector<int>{1, 0, 1}), std::make_pair(1.0, 1.0));
  EXPECT_EQ(class_recalls(std::vector<int>{1, 1, 1}, std::vector<int>{1, 0, 1}), std::make_pair(1.0, 0.0));
}

TEST(ClassRecalls, ConfusionMatrixOracle) {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(100);
    std::vector<int> pred(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = static_cast<int>(rng.below(2));
      y[i] = static_cast<int>(rng.below(2));
    }
    y[0] = 0;
    y[1] = 1;
    std::size_t tp = 0, fn = 0, tn = 0, fp = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (y[i] == 1) (pred[i] == 1 ? tp : fn)++;
      else (pred[i] == 0 ? tn : fp)++;
    }
    const auto [r1, r2] = class_recalls(pred, y);
    EXPECT_EQ(r1, static_cast<double>(tp) / static_cast<double>(tp + fn));
    EXPECT_EQ(r2, static_cast<double>(tn) / static_cast<double>(tn + fp));
    EXPECT_NEAR(r1, 1.0 - static_cast<double>(fn) / static_cast<double>(tp + fn), 1e-15);
    EXPECT_NEAR(r2, 1.0 - static_cast<double>(fp) / static_cast<double>(tn + fp), 1e-15);
    EXPECT_GE(r1, 0.0);
    EXPECT_LE(r1, 1.0);
  }
}

TEST(ClassRecalls, MissingClassIsDataError) {
  EXPECT_THROW(class_recalls(std::vector<int>{1, 1}, std::vector<int>{1, 1}), DataError);
  EXPECT_THROW(class_recalls(std::vector<int>{1}, std::vector<int>{1, 0}), std::invalid_argument);
}

// ---- AUC -----------------------------------------------------------------

TEST(RocAuc, Examples) {
  EXPECT_EQ(roc_auc(std::vector<double>{0.9, 0.8, 0.3, 0.1}, std::vector<int>{1, 1, 0, 0}), 1.0);
  EXPECT_EQ(roc_auc(std::vector<double>{0.4, 0.4, 0.4, 0.4}, std::vector<int>{1, 0, 0, 1}), 0.5);
  EXPECT_EQ(roc_auc(std::vector<double>{0.1, 0.8}, std::vector<int>{1, 0}), 0.0);
  EXPECT_THROW(roc_auc(std::vector<double>{0.1, 0.8}, std::vector<int>{1, 1}), DataError);
}

TEST(RocAuc, PairwiseOracle) {
  Rng rng(2);
  std::vector<double> s;
  std::vector<int> y;
  for (int trial = 0; trial < 1000; ++trial) {
    random_instance(rng, s, y);
    EXPECT_NEAR(roc_auc(s, y), pairwise_auc(s, y), 1e-12);
  }
}

TEST(RocAuc, InvariantUnderIncreasingTransforms) {
  Rng rng(3);
  std::vector<double> s;
  std::vector<int> y;
  for (int trial = 0; trial < 300; ++trial) {
    random_instance(rng, s, y);
    const double base = roc_auc(s, y);
    std::vector<double> sig(s.size()), aff(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      sig[i] = 1.0 / (1.0 + std::exp(-s[i]));
      aff[i] = 2.5 * s[i] - 7.0;
    }
    EXPECT_NEAR(roc_auc(sig, y), base, 1e-12);
    EXPECT_NEAR(roc_auc(aff, y), base, 1e-12);
  }
}

TEST(RocAuc, ComplementaryLabelsSumToOne) {
  Rng rng(4);
  std::vector<double> s;
  std::vector<int> y;
  for (int trial = 0; trial < 300; ++trial) {
    random_instance(rng, s, y);
    std::vector<int> flipped(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) flipped[i] = 1 - y[i];
    EXPECT_NEAR(roc_auc(s, y) + roc_auc(s, flipped), 1.0, 1e-12);
  }
}

TEST(Evaluate, UsesStrictThreshold) {
  const auto r = evaluate(std::vector<double>{0.5, 0.7, 0.2, 0.5}, std::vector<int>{1, 1, 0, 0});
  EXPECT_EQ(r.class1_recall, 0.5);
  EXPECT_EQ(r.class2_recall, 1.0);
  EXPECT_EQ(r.n, 4u);
  const auto j = to_json(r);
  for (const char* key : {"class1_recall", "class2_recall", "auc", "n"}) EXPECT_TRUE(j.contains(key));
}

// ---- folds ---------------------------------------------------------------

TEST(Folds, TenDocumentsFiveFolds) {
  const auto ids = ids_for(10);
  const std::vector<int> y{1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
  const auto plan = kfold_split(ids, y, 5, 7);
  for (std::size_t f = 0; f < 5; ++f) {
    const auto m = plan.members(f);
    ASSERT_EQ(m.size(), 2u);
    EXPECT_NE(y[m[0]], y[m[1]]);
  }
}

TEST(Folds, DeterministicPerSeed) {
  const auto ids = ids_for(50);
  std::vector<int> y(50);
  for (std::size_t i = 0; i < 50; ++i) y[i] = i % 3 == 0;
  EXPECT_EQ(kfold_split(ids, y, 4, 3).fold_of, kfold_split(ids, y, 4, 3).fold_of);
  EXPECT_NE(kfold_split(ids, y, 4, 3).fold_of, kfold_split(ids, y, 4, 4).fold_of);
}

TEST(Folds, PartitionBalanceStratification) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + rng.below(9);
    const std::size_t n1 = k + rng.below(60), n0 = k + rng.below(60);
    std::vector<int> y;
    for (std::size_t i = 0; i < n1; ++i) y.push_back(1);
    for (std::size_t i = 0; i < n0; ++i) y.push_back(0);
    rng.shuffle(std::span(y));
    const auto ids = ids_for(y.size());
    const auto plan = kfold_split(ids, y, k, rng.next());

    std::set<std::size_t> seen;
    std::size_t lo = y.size(), hi = 0;
    const double p = static_cast<double>(n1) / static_cast<double>(y.size());
    for (std::size_t f = 0; f < k; ++f) {
      const auto m = plan.members(f);
      for (auto i : m) EXPECT_TRUE(seen.insert(i).second);
      lo = std::min(lo, m.size());
      hi = std::max(hi, m.size());
      std::size_t ones = 0;
      for (auto i : m) ones += y[i] == 1;
      EXPECT_LT(std::abs(static_cast<double>(ones) / static_cast<double>(m.size()) - p),
                1.0 / static_cast<double>(m.size()));
    }
    EXPECT_EQ(seen.size(), y.size());
    EXPECT_LE(hi - lo, 1u);
    const auto by_id = plan.by_id(ids);
    EXPECT_EQ(by_id.size(), ids.size());
  }
}

TEST(Folds, Errors) {
  const auto ids = ids_for(4);
  EXPECT_THROW(kfold_split(ids, std::vector<int>{1, 1, 1, 0}, 2, 1), DataError);
  EXPECT_THROW(kfold_split(ids, std::vector<int>{1, 1, 0, 0}, 1, 1), std::invalid_argument);
}

// ---- cross-validation ----------------------------------------------------

TEST(CrossValidate, ConstantTrainer) {
  const auto ids = ids_for(20);
  std::vector<int> y(20);
  for (std::size_t i = 0; i < 20; ++i) y[i] = i % 2;
  const auto r = cross_validate(
      [](auto, auto test) { return std::vector<double>(test.size(), 0.5); }, ids, y, 5, 1);
  EXPECT_EQ(r.mean.auc, 0.5);
  EXPECT_EQ(r.stddev.auc, 0.0);
}

TEST(CrossValidate, OracleTrainerAndSingleUse) {
  const auto ids = ids_for(30);
  std::vector<int> y(30);
  for (std::size_t i = 0; i < 30; ++i) y[i] = i % 3 == 0;
  std::vector<int> used(30, 0);
  const auto r = cross_validate(
      [&](std::span<const std::size_t> train, std::span<const std::size_t> test) {
        for (auto i : test) ++used[i];
        for (auto i : train) EXPECT_EQ(std::find(test.begin(), test.end(), i), test.end());
        std::vector<double> s;
        for (auto i : test) s.push_back(y[i]);
        return s;
      },
      ids, y, 5, 2);
  EXPECT_EQ(r.mean.class1_recall, 1.0);
  EXPECT_EQ(r.mean.class2_recall, 1.0);
  EXPECT_EQ(r.stddev.class1_recall, 0.0);
  for (int u : used) EXPECT_EQ(u, 1);
  EXPECT_EQ(r.per_fold.size(), 5u);
  EXPECT_EQ(r.mean.n, 30u);
}

TEST(CrossValidate, SummaryArithmetic) {
  MetricsReport a, b;
  a.auc = 0.8;
  b.auc = 0.9;
  const auto r = summarize_folds({a, b});
  EXPECT_NEAR(r.mean.auc, 0.85, 1e-15);
  EXPECT_NEAR(r.stddev.auc, 0.05, 1e-15);
  const auto j = to_json(r);
  EXPECT_TRUE(j.contains("per_fold"));
  EXPECT_TRUE(j.contains("mean"));
  EXPECT_TRUE(j.contains("std"));
}

// ---- output statistics ---------------------------------------------------

TEST(OutputStats, TwoPoints) {
  const auto s = output_stats(std::vector<double>{0.2, 0.6});
  EXPECT_NEAR(s.mean, 0.4, 1e-15);
  EXPECT_NEAR(s.median, 0.4, 1e-15);
  EXPECT_EQ(s.n_below, 1u);
  EXPECT_EQ(s.n_above, 1u);
  EXPECT_EQ(s.n_at, 0u);
}

TEST(OutputStats, AllAtThreshold) {
  const auto s = output_stats(std::vector<double>(7, 0.5));
  EXPECT_EQ(s.n_below, 0u);
  EXPECT_EQ(s.n_above, 0u);
  EXPECT_EQ(s.n_at, 7u);
  EXPECT_EQ(s.frac_at, 1.0);
  EXPECT_THROW(output_stats(std::vector<double>{}), DataError);
}

TEST(OutputStats, IndependentOracle) {
  Rng rng(6);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> xs(1 + rng.below(80));
    for (double& x : xs) x = rng.below(5) == 0 ? 0.5 : rng.uniform();
    // two-pass mean, nth_element median, direct variance
    long double sum = 0;
    for (double x : xs) sum += x;
    const double mean = static_cast<double>(sum / xs.size());
    long double var = 0;
    for (double x : xs) var += (x - mean) * (x - mean);
    auto sorted = xs;
    std::size_t mid = sorted.size() / 2;
    std::nth_element(sorted.begin(), sorted.begin() + mid, sorted.end());
    double median = sorted[mid];
    if (sorted.size() % 2 == 0) median = 0.5 * (median + *std::max_element(sorted.begin(), sorted.begin() + mid));
    const auto s = output_stats(xs);
    EXPECT_NEAR(s.mean, mean, 1e-12);
    EXPECT_NEAR(s.median, median, 1e-12);
    EXPECT_NEAR(s.stddev, std::sqrt(static_cast<double>(var / xs.size())), 1e-12);
    EXPECT_EQ(s.n_below + s.n_above + s.n_at, xs.size());
    EXPECT_EQ(s.n_at, static_cast<std::size_t>(std::count(xs.begin(), xs.end(), 0.5)));
  }
}

TEST(OutputStats, PerSourceGroups) {
  const std::map<std::string, std::vector<double>> groups{{"left", {0.9, 0.8}}, {"right", {0.1, 0.3, 0.6}}};
  const auto out = corpus_output_stats(groups);
  EXPECT_EQ(out.at("left").n_above, 2u);
  EXPECT_EQ(out.at("right").n_below, 2u);
  const auto j = to_json(out.at("right"));
  for (const char* key : {"mean", "median", "std", "n_below", "n_above", "frac_below", "frac_above"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
}
