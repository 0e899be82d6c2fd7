#pragma once

// Per-class recall, rank-based ROC-AUC, stratified k-fold plans, the
// cross-validation loop, and per-source output statistics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "json.hpp"
#include "seqclass/errors.hpp"
#include "seqclass/random.hpp"

namespace seqclass {

struct MetricsReport {
  double class1_recall = 0.0;
  double class2_recall = 0.0;
  double auc = 0.0;
  std::size_t n = 0;
};

namespace detail {

inline void check_labels(std::span<const int> labels, bool require_both) {
  bool has0 = false, has1 = false;
  for (int v : labels) {
    if (v == 0) has0 = true;
    else if (v == 1) has1 = true;
    else throw DataError("labels must be 0 or 1");
  }
  if (require_both && (!has0 || !has1)) throw DataError("both classes must be present in the labels");
}

}  // namespace detail

// (recall on label 1, recall on label 0)
inline std::pair<double, double> class_recalls(std::span<const int> predicted, std::span<const int> labels) {
  if (predicted.size() != labels.size()) throw std::invalid_argument("prediction/label count mismatch");
  detail::check_labels(labels, true);
  std::size_t hit[2] = {0, 0}, total[2] = {0, 0};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++total[labels[i]];
    if (predicted[i] == labels[i]) ++hit[labels[i]];
  }
  return {static_cast<double>(hit[1]) / static_cast<double>(total[1]),
          static_cast<double>(hit[0]) / static_cast<double>(total[0])};
}

// Mann-Whitney AUC with mid-ranks, so each tied positive/negative pair counts 1/2.
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("score/label count mismatch");
  detail::check_labels(labels, true);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of 2*rank over positives keeps everything integral until the end.
  std::uint64_t rank2_pos = 0;
  std::uint64_t n_pos = 0;
  for (std::size_t start = 0; start < n;) {
    std::size_t end = start + 1;
    while (end < n && scores[order[end]] == scores[order[start]]) ++end;
    const std::uint64_t mid2 = start + 1 + end;  // 2 * average 1-based rank
    for (std::size_t k = start; k < end; ++k) {
      if (labels[order[k]] == 1) {
        rank2_pos += mid2;
        ++n_pos;
      }
    }
    start = end;
  }
  const std::uint64_t n_neg = n - n_pos;
  const double u2 = static_cast<double>(rank2_pos - n_pos * (n_pos + 1));
  return u2 / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

inline MetricsReport evaluate(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5) {
  std::vector<int> predicted(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) predicted[i] = scores[i] > threshold ? 1 : 0;
  const auto [r1, r2] = class_recalls(predicted, labels);
  return {r1, r2, roc_auc(scores, labels), scores.size()};
}

inline nlohmann::json to_json(const MetricsReport& r) {
  return {{"class1_recall", r.class1_recall}, {"class2_recall", r.class2_recall}, {"auc", r.auc}, {"n", r.n}};
}

// ---------------------------------------------------------------------------
// Folds

struct FoldPlan {
  std::size_t k = 0;
  std::vector<std::size_t> fold_of;  // per input position

  std::vector<std::size_t> members(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
      if (fold_of[i] == fold) out.push_back(i);
    }
    return out;
  }

  std::map<std::string, std::size_t> by_id(std::span<const std::string> ids) const {
    std::map<std::string, std::size_t> out;
    for (std::size_t i = 0; i < ids.size(); ++i) out.emplace(ids[i], fold_of[i]);
    return out;
  }
};

// Stratified: each class is shuffled with the seed and dealt round-robin. The
// deal position carries over from class 1 to class 0, so fold sizes as well as
// per-class counts differ by at most one.
inline FoldPlan kfold_split(std::span<const std::string> ids, std::span<const int> labels, std::size_t k,
                            std::uint64_t seed) {
  if (ids.size() != labels.size()) throw std::invalid_argument("id/label count mismatch");
  if (k < 2) throw std::invalid_argument("k must be >= 2");
  detail::check_labels(labels, false);
  std::vector<std::size_t> members[2];
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(i);
  for (const auto& m : members) {
    if (m.size() < k) throw DataError("k=" + std::to_string(k) + " exceeds a class count of " + std::to_string(m.size()));
  }
  FoldPlan plan{k, std::vector<std::size_t>(ids.size(), 0)};
  Rng rng(seed);
  std::size_t next = 0;
  for (int cls : {1, 0}) {
    auto& m = members[cls];
    rng.shuffle(std::span(m));
    for (std::size_t i : m) {
      plan.fold_of[i] = next;
      next = (next + 1) % k;
    }
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Cross-validation

struct CvReport {
  std::vector<MetricsReport> per_fold;
  MetricsReport mean;
  MetricsReport stddev;  // population standard deviation; n holds the total count
};

// (train positions, test positions) -> probabilities for the test positions
using FoldTrainer =
    std::function<std::vector<double>(std::span<const std::size_t> train, std::span<const std::size_t> test)>;

inline std::pair<double, double> mean_and_std(std::span<const double> xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / n)};
}

inline CvReport summarize_folds(std::vector<MetricsReport> folds) {
  CvReport r;
  r.per_fold = std::move(folds);
  std::vector<double> c1, c2, auc;
  std::size_t total = 0;
  for (const auto& f : r.per_fold) {
    c1.push_back(f.class1_recall);
    c2.push_back(f.class2_recall);
    auc.push_back(f.auc);
    total += f.n;
  }
  std::tie(r.mean.class1_recall, r.stddev.class1_recall) = mean_and_std(c1);
  std::tie(r.mean.class2_recall, r.stddev.class2_recall) = mean_and_std(c2);
  std::tie(r.mean.auc, r.stddev.auc) = mean_and_std(auc);
  r.mean.n = r.stddev.n = total;
  return r;
}

// Trains on k-1 folds and scores the held-out fold, for every fold in order.
inline CvReport cross_validate(const FoldTrainer& trainer, std::span<const std::string> ids,
                               std::span<const int> labels, std::size_t k, std::uint64_t seed,
                               double threshold = 0.5) {
  const FoldPlan plan = kfold_split(ids, labels, k, seed);
  std::vector<MetricsReport> folds;
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < plan.fold_of.size(); ++i) (plan.fold_of[i] == f ? test : train).push_back(i);
    const auto scores = trainer(train, test);
    if (scores.size() != test.size()) throw std::logic_error("trainer returned the wrong number of scores");
    std::vector<int> test_labels;
    for (std::size_t i : test) test_labels.push_back(labels[i]);
    folds.push_back(evaluate(scores, test_labels, threshold));
  }
  return summarize_folds(std::move(folds));
}

inline nlohmann::json to_json(const CvReport& r) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : r.per_fold) folds.push_back(to_json(f));
  return {{"per_fold", folds}, {"mean", to_json(r.mean)}, {"std", to_json(r.stddev)}};
}

// ---------------------------------------------------------------------------
// Output statistics

struct OutputStats {
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double stddev = 0.0;  // population
  std::size_t n_below = 0;
  std::size_t n_above = 0;
  std::size_t n_at = 0;
  double frac_below = 0.0;
  double frac_above = 0.0;
  double frac_at = 0.0;
};

inline OutputStats output_stats(std::span<const double> scores, double threshold = 0.5) {
  if (scores.empty()) throw DataError("empty score group");
  OutputStats s;
  s.count = scores.size();
  std::tie(s.mean, s.stddev) = mean_and_std(scores);
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  s.median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  for (double v : scores) {
    if (v < threshold) ++s.n_below;
    else if (v > threshold) ++s.n_above;
    else ++s.n_at;
  }
  const double c = static_cast<double>(n);
  s.frac_below = static_cast<double>(s.n_below) / c;
  s.frac_above = static_cast<double>(s.n_above) / c;
  s.frac_at = static_cast<double>(s.n_at) / c;
  return s;
}

inline std::map<std::string, OutputStats> corpus_output_stats(const std::map<std::string, std::vector<double>>& groups,
                                                              double threshold = 0.5) {
  std::map<std::string, OutputStats> out;
  for (const auto& [source, scores] : groups) {
    if (scores.empty()) throw DataError("source '" + source + "' has no scores");
    out.emplace(source, output_stats(scores, threshold));
  }
  return out;
}

inline nlohmann::json to_json(const OutputStats& s) {
  return {{"count", s.count},         {"mean", s.mean},         {"median", s.median},
          {"std", s.stddev},             {"n_below", s.n_below},   {"n_above", s.n_above},
          {"n_at", s.n_at},           {"frac_below", s.frac_below}, {"frac_above", s.frac_above},
          {"frac_at", s.frac_at}};
}

}  // namespace seqclass
