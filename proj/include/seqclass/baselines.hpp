#pragma once

// Classical baselines: tf-idf features, l2-regularized logistic regression,
// multinomial naive Bayes, and a top-n-gram presence feature selector.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "seqclass/errors.hpp"
#include "seqclass/tensor.hpp"

namespace seqclass {

// Indices strictly increasing, values nonzero.
struct SparseVector {
  std::vector<std::size_t> indices;
  std::vector<double> values;

  std::size_t size() const { return indices.size(); }
  bool empty() const { return indices.empty(); }

  bool operator==(const SparseVector&) const = default;
};

inline SparseVector make_sparse(std::map<std::size_t, double> entries) {
  SparseVector v;
  for (const auto& [i, x] : entries) {
    if (x == 0.0) continue;
    v.indices.push_back(i);
    v.values.push_back(x);
  }
  return v;
}

inline double sparse_dot(std::span<const double> dense, const SparseVector& x) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (x.indices[k] < dense.size()) s += dense[x.indices[k]] * x.values[k];
  }
  return s;
}

// ---------------------------------------------------------------------------
// tf-idf

struct TfidfModel {
  std::unordered_map<std::string, std::size_t> term_index;
  std::vector<std::string> terms;  // column order (lexicographic)
  std::vector<double> idf;

  std::size_t num_features() const { return terms.size(); }
};

// idf(t) = ln((1 + N) / (1 + df(t))) + 1
inline TfidfModel fit_tfidf(std::span<const std::vector<std::string>> corpus) {
  if (corpus.empty()) throw DataError("tf-idf corpus is empty");
  std::map<std::string, std::size_t> df;
  for (const auto& doc : corpus) {
    std::vector<std::string> unique(doc.begin(), doc.end());
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    for (auto& t : unique) ++df[t];
  }
  TfidfModel m;
  const double n = static_cast<double>(corpus.size());
  for (const auto& [term, count] : df) {
    m.term_index.emplace(term, m.terms.size());
    m.terms.push_back(term);
    m.idf.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
  }
  return m;
}

// count(t) * idf(t), l2-normalized. Unseen terms are dropped.
inline SparseVector transform_tfidf(const TfidfModel& model, std::span<const std::string> doc) {
  std::map<std::size_t, double> counts;
  for (const auto& t : doc) {
    auto it = model.term_index.find(t);
    if (it != model.term_index.end()) counts[it->second] += 1.0;
  }
  double sq = 0.0;
  for (auto& [i, x] : counts) {
    x *= model.idf[i];
    sq += x * x;
  }
  if (sq > 0.0) {
    const double norm = std::sqrt(sq);
    for (auto& [i, x] : counts) x /= norm;
  }
  return make_sparse(std::move(counts));
}

// Raw term counts over the tf-idf columns, for naive Bayes.
inline SparseVector term_counts(const TfidfModel& model, std::span<const std::string> doc) {
  std::map<std::size_t, double> counts;
  for (const auto& t : doc) {
    auto it = model.term_index.find(t);
    if (it != model.term_index.end()) counts[it->second] += 1.0;
  }
  return make_sparse(std::move(counts));
}

// ---------------------------------------------------------------------------
// Logistic regression

struct LinearModel {
  std::vector<double> weights;
  double bias = 0.0;
};

inline double predict_linear(const LinearModel& model, const SparseVector& x) {
  return sigmoid(sparse_dot(model.weights, x) + model.bias);
}

struct LogisticOptions {
  double inverse_strength = 1.0;  // C
  std::size_t max_iter = 100;
  double tolerance = 1e-6;  // on the gradient norm
};

namespace detail {

inline void check_binary(std::span<const int> y) {
  bool has0 = false, has1 = false;
  for (int v : y) {
    if (v == 0) has0 = true;
    else if (v == 1) has1 = true;
    else throw DataError("labels must be 0 or 1");
  }
  if (!has0 || !has1) throw DataError("both classes must be present");
}

inline double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace detail

// mean BCE + ||w||^2 / (2 C N); the bias is not penalized.
inline double logistic_objective(std::span<const SparseVector> X, std::span<const int> y, const LinearModel& m,
                                 double inverse_strength) {
  const double n = static_cast<double>(X.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    const double z = sparse_dot(m.weights, X[i]) + m.bias;
    loss += detail::softplus(z) - (y[i] == 1 ? z : 0.0);
  }
  return loss / n + dot(m.weights, m.weights) / (2.0 * inverse_strength * n);
}

// Gradient as (weights..., bias).
inline std::vector<double> logistic_gradient(std::span<const SparseVector> X, std::span<const int> y,
                                             const LinearModel& m, double inverse_strength) {
  const double n = static_cast<double>(X.size());
  std::vector<double> g(m.weights.size() + 1, 0.0);
  for (std::size_t i = 0; i < X.size(); ++i) {
    const double r = (predict_linear(m, X[i]) - y[i]) / n;
    for (std::size_t k = 0; k < X[i].size(); ++k) g[X[i].indices[k]] += r * X[i].values[k];
    g.back() += r;
  }
  for (std::size_t k = 0; k < m.weights.size(); ++k) g[k] += m.weights[k] / (inverse_strength * n);
  return g;
}

struct LogisticFit {
  LinearModel model;
  std::vector<double> objective;  // value after every accepted iterate, starting at w = 0
  std::size_t iterations = 0;
};

// Full-batch gradient descent. Each step starts from a Barzilai-Borwein length
// estimate and backtracks until the Armijo condition holds, so the objective
// never increases.
inline LogisticFit fit_logistic(std::span<const SparseVector> X, std::span<const int> y, std::size_t num_features,
                                const LogisticOptions& opts = {}) {
  if (X.size() != y.size() || X.size() < 2) throw DataError("need at least two labeled examples");
  if (!(opts.inverse_strength > 0.0)) throw std::invalid_argument("inverse regularization strength must be > 0");
  detail::check_binary(y);
  for (const auto& x : X) {
    if (!x.indices.empty() && x.indices.back() >= num_features) throw ShapeError("feature index out of range");
  }

  LogisticFit fit;
  LinearModel& m = fit.model;
  m.weights.assign(num_features, 0.0);
  double f = logistic_objective(X, y, m, opts.inverse_strength);
  fit.objective.push_back(f);
  auto g = logistic_gradient(X, y, m, opts.inverse_strength);
  double step = 1.0;
  std::vector<double> prev_params, prev_grad;

  for (std::size_t it = 0; it < opts.max_iter; ++it) {
    const double gnorm2 = dot(g, g);
    if (std::sqrt(gnorm2) < opts.tolerance) break;
    std::vector<double> params(m.weights);
    params.push_back(m.bias);
    if (!prev_params.empty()) {
      double ss = 0.0, sy = 0.0;
      for (std::size_t k = 0; k < params.size(); ++k) {
        const double s = params[k] - prev_params[k];
        const double d = g[k] - prev_grad[k];
        ss += s * s;
        sy += s * d;
      }
      if (sy > 0.0) step = ss / sy;
    }
    LinearModel trial = m;
    double f_trial = f;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t k = 0; k < num_features; ++k) trial.weights[k] = m.weights[k] - step * g[k];
      trial.bias = m.bias - step * g.back();
      f_trial = logistic_objective(X, y, trial, opts.inverse_strength);
      if (f_trial <= f - 1e-4 * step * gnorm2) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    prev_params = std::move(params);
    prev_grad = g;
    m = std::move(trial);
    f = f_trial;
    g = logistic_gradient(X, y, m, opts.inverse_strength);
    fit.objective.push_back(f);
    ++fit.iterations;
  }
  return fit;
}

inline LinearModel train_logistic(std::span<const SparseVector> X, std::span<const int> y, std::size_t num_features,
                                  double l2_inverse_strength = 1.0, std::size_t max_iter = 100) {
  return fit_logistic(X, y, num_features, {l2_inverse_strength, max_iter, 1e-6}).model;
}

// ---------------------------------------------------------------------------
// Multinomial naive Bayes

struct NbModel {
  double log_prior[2] = {0.0, 0.0};
  std::vector<double> log_likelihood[2];  // per class, per term; Laplace-smoothed
};

// Accepts real-valued (e.g. tf-idf) counts.
inline NbModel train_nb(std::span<const SparseVector> X, std::span<const int> y, std::size_t num_features,
                        double alpha = 1.0) {
  if (X.size() != y.size() || X.empty()) throw DataError("need labeled examples");
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be > 0");
  detail::check_binary(y);
  std::vector<double> totals[2] = {std::vector<double>(num_features, 0.0), std::vector<double>(num_features, 0.0)};
  double docs[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < X.size(); ++i) {
    docs[y[i]] += 1.0;
    for (std::size_t k = 0; k < X[i].size(); ++k) {
      if (X[i].values[k] < 0.0) throw DataError("negative term count");
      if (X[i].indices[k] >= num_features) throw ShapeError("feature index out of range");
      totals[y[i]][X[i].indices[k]] += X[i].values[k];
    }
  }
  NbModel m;
  for (int c = 0; c < 2; ++c) {
    m.log_prior[c] = std::log(docs[c] / static_cast<double>(X.size()));
    double sum = 0.0;
    for (double v : totals[c]) sum += v;
    const double denom = std::log(sum + alpha * static_cast<double>(num_features));
    m.log_likelihood[c].resize(num_features);
    for (std::size_t t = 0; t < num_features; ++t) m.log_likelihood[c][t] = std::log(totals[c][t] + alpha) - denom;
  }
  return m;
}

// Posterior of class 1 via log-sum-exp.
inline double predict_nb(const NbModel& model, const SparseVector& x) {
  double score[2];
  for (int c = 0; c < 2; ++c) {
    score[c] = model.log_prior[c];
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (x.values[k] < 0.0) throw DataError("negative term count");
      if (x.indices[k] < model.log_likelihood[c].size()) score[c] += x.values[k] * model.log_likelihood[c][x.indices[k]];
    }
  }
  const double hi = std::max(score[0], score[1]);
  const double e0 = std::exp(score[0] - hi);
  const double e1 = std::exp(score[1] - hi);
  return e1 / (e0 + e1);
}

// ---------------------------------------------------------------------------
// Top n-gram selection

inline std::vector<std::string> ngrams(std::span<const std::string> tokens) {
  std::vector<std::string> out(tokens.begin(), tokens.end());
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) out.push_back(tokens[i] + " " + tokens[i + 1]);
  return out;
}

// Binary presence features over a fixed n-gram set (bigrams are space-joined).
struct NgramFeatureSet {
  std::vector<std::string> features;  // sorted
  std::unordered_map<std::string, std::size_t> index;

  std::size_t num_features() const { return features.size(); }

  SparseVector presence(std::span<const std::string> tokens) const {
    std::map<std::size_t, double> hits;
    for (const auto& g : ngrams(tokens)) {
      auto it = index.find(g);
      if (it != index.end()) hits[it->second] = 1.0;
    }
    return make_sparse(std::move(hits));
  }
};

// Union over both classes of each class's k most frequent unigrams and
// bigrams, ranked by (count desc, n-gram asc).
inline NgramFeatureSet select_top_ngrams(std::span<const std::vector<std::string>> corpus, std::span<const int> labels,
                                         std::size_t k = 500) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (corpus.size() != labels.size()) throw std::invalid_argument("corpus/label count mismatch");
  std::map<std::string, std::size_t> counts[2];
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw DataError("labels must be 0 or 1");
    for (auto& g : ngrams(corpus[i])) ++counts[labels[i]][g];
  }
  std::vector<std::string> selected;
  for (auto& class_counts : counts) {
    std::vector<std::pair<std::string, std::size_t>> ranked(class_counts.begin(), class_counts.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    for (std::size_t i = 0; i < ranked.size() && i < k; ++i) selected.push_back(ranked[i].first);
  }
  std::sort(selected.begin(), selected.end());
  selected.erase(std::unique(selected.begin(), selected.end()), selected.end());
  NgramFeatureSet set;
  set.features = std::move(selected);
  for (std::size_t i = 0; i < set.features.size(); ++i) set.index.emplace(set.features[i], i);
  return set;
}

}  // namespace seqclass
