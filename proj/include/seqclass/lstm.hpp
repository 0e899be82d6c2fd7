#pragma once

// LSTM sequence classifier: cell, unrolled forward pass with a sigmoid head on
// the final state, binary cross-entropy, backpropagation through time, the
// bidirectional variant, and the mini-batch training loop.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "seqclass/corpus.hpp"
#include "seqclass/embeddings.hpp"
#include "seqclass/errors.hpp"
#include "seqclass/hash.hpp"
#include "seqclass/random.hpp"
#include "seqclass/tensor.hpp"

namespace seqclass {

inline constexpr std::size_t kNumGates = 4;
enum class Gate : std::size_t { Input = 0, Forget = 1, Output = 2, Candidate = 3 };

// Gate weights for one direction. Rows of w, u and b are stacked in Gate order,
// H rows per gate.
struct LstmParams {
  std::size_t hidden = 0;
  std::size_t input = 0;
  Matrix w;               // 4H x d
  Matrix u;               // 4H x H
  std::vector<double> b;  // 4H

  LstmParams() = default;
  LstmParams(std::size_t hidden_size, std::size_t input_size)
      : hidden(hidden_size),
        input(input_size),
        w(kNumGates * hidden_size, input_size),
        u(kNumGates * hidden_size, hidden_size),
        b(kNumGates * hidden_size, 0.0) {}

  std::size_t offset(Gate g) const { return static_cast<std::size_t>(g) * hidden; }

  bool operator==(const LstmParams&) const = default;
};

struct ClassifierHead {
  std::vector<double> w;  // H, or 2H when bidirectional
  double b = 0.0;

  bool operator==(const ClassifierHead&) const = default;
};

enum class OptimizerKind { Sgd, Adam };

inline OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "adam") return OptimizerKind::Adam;
  throw std::invalid_argument("unknown optimizer '" + std::string(name) + "'");
}

inline std::string_view optimizer_name(OptimizerKind k) { return k == OptimizerKind::Sgd ? "sgd" : "adam"; }

struct ModelConfig {
  std::size_t cutoff = 30;
  std::size_t hidden_size = 32;
  std::size_t embed_dim = kDefaultEmbeddingDim;
  bool bidirectional = false;
  std::size_t batch_size = 100;
  std::size_t epochs = 10;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::Adam;
  std::uint64_t seed = 0;
  double threshold = 0.5;
  double clip_norm = 5.0;

  void validate() const {
    if (cutoff < 1) throw std::invalid_argument("cutoff must be >= 1");
    if (hidden_size < 1) throw std::invalid_argument("hidden_size must be >= 1");
    if (embed_dim < 1) throw std::invalid_argument("embed_dim must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("threshold must be in (0, 1)");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
    if (!(clip_norm > 0.0)) throw std::invalid_argument("clip_norm must be > 0");
  }

  bool operator==(const ModelConfig&) const = default;
};

struct LstmModel {
  EmbeddingMatrix embedding;
  LstmParams forward;
  std::optional<LstmParams> backward;
  ClassifierHead head;
  ModelConfig config;

  bool operator==(const LstmModel&) const = default;
};

// Same shapes as every array of an LstmModel. Embedding gradients are dense;
// rows of tokens absent from the sequence stay zero.
struct Gradients {
  Matrix embedding;
  LstmParams forward;
  std::optional<LstmParams> backward;
  ClassifierHead head;

  static Gradients zeros_like(const LstmModel& m) {
    Gradients g;
    g.embedding = Matrix(m.embedding.rows(), m.embedding.dim());
    g.forward = LstmParams(m.forward.hidden, m.forward.input);
    if (m.backward) g.backward = LstmParams(m.backward->hidden, m.backward->input);
    g.head.w.assign(m.head.w.size(), 0.0);
    return g;
  }
};

namespace detail {

inline std::span<double> embedding_span(LstmModel& m) { return m.embedding.vectors.data(); }
inline std::span<const double> embedding_span(const LstmModel& m) { return m.embedding.vectors.data(); }
inline std::span<double> embedding_span(Gradients& g) { return g.embedding.data(); }
inline std::span<const double> embedding_span(const Gradients& g) { return g.embedding.data(); }

}  // namespace detail

// Visits every parameter array in a fixed order as fn(name, span).
template <class Params, class Fn>
void for_each_array(Params& p, Fn&& fn) {
  fn(std::string_view("embedding"), detail::embedding_span(p));
  fn(std::string_view("forward.w"), p.forward.w.data());
  fn(std::string_view("forward.u"), p.forward.u.data());
  fn(std::string_view("forward.b"), std::span(p.forward.b));
  if (p.backward) {
    fn(std::string_view("backward.w"), p.backward->w.data());
    fn(std::string_view("backward.u"), p.backward->u.data());
    fn(std::string_view("backward.b"), std::span(p.backward->b));
  }
  fn(std::string_view("head.w"), std::span(p.head.w));
  fn(std::string_view("head.b"), std::span(&p.head.b, 1));
}

inline std::uint64_t parameter_fingerprint(const LstmModel& m) {
  Fnv1a h;
  for_each_array(m, [&h](std::string_view, std::span<const double> a) { h.update(a); });
  return h.digest();
}

// ---------------------------------------------------------------------------
// Cell

struct StepCache {
  std::vector<double> x, h_prev, c_prev;
  std::vector<double> i, f, o, g;  // gate activations
  std::vector<double> c, tanh_c, h;
};

struct StepResult {
  std::vector<double> h;
  std::vector<double> c;
  StepCache cache;
};

inline StepResult cell_step(std::span<const double> x, std::span<const double> h_prev,
                            std::span<const double> c_prev, const LstmParams& p) {
  const std::size_t H = p.hidden;
  if (x.size() != p.input || h_prev.size() != H || c_prev.size() != H || p.w.rows() != kNumGates * H ||
      p.u.cols() != H || p.b.size() != kNumGates * H) {
    throw ShapeError("cell_step: inconsistent shapes");
  }
  std::vector<double> pre(p.b);
  for (std::size_t r = 0; r < kNumGates * H; ++r) {
    pre[r] += dot(p.w.row(r), x) + dot(p.u.row(r), h_prev);
  }

  StepCache s;
  s.x.assign(x.begin(), x.end());
  s.h_prev.assign(h_prev.begin(), h_prev.end());
  s.c_prev.assign(c_prev.begin(), c_prev.end());
  s.i.resize(H);
  s.f.resize(H);
  s.o.resize(H);
  s.g.resize(H);
  s.c.resize(H);
  s.tanh_c.resize(H);
  s.h.resize(H);
  for (std::size_t k = 0; k < H; ++k) {
    s.i[k] = sigmoid(pre[p.offset(Gate::Input) + k]);
    s.f[k] = sigmoid(pre[p.offset(Gate::Forget) + k]);
    s.o[k] = sigmoid(pre[p.offset(Gate::Output) + k]);
    s.g[k] = std::tanh(pre[p.offset(Gate::Candidate) + k]);
    s.c[k] = s.f[k] * c_prev[k] + s.i[k] * s.g[k];
    s.tanh_c[k] = std::tanh(s.c[k]);
    s.h[k] = s.o[k] * s.tanh_c[k];
  }
  StepResult out{s.h, s.c, {}};
  out.cache = std::move(s);
  return out;
}

// ---------------------------------------------------------------------------
// Forward

struct DirectionCache {
  std::vector<std::size_t> tokens;
  std::vector<StepCache> steps;

  std::span<const double> final_h() const { return steps.back().h; }
};

// Steps are stored for real tokens only: the recurrence starts at the first
// non-PAD position, so leading padding has no effect on the result.
struct ForwardCache {
  std::size_t cutoff = 0;
  DirectionCache forward;
  std::optional<DirectionCache> backward;
  std::vector<double> features;  // head input: h_fwd, or [h_fwd; h_bwd]
  double logit = 0.0;
  double probability = 0.5;
  std::uint64_t fingerprint = 0;
};

struct ForwardResult {
  double probability = 0.5;
  ForwardCache cache;
};

namespace detail {

inline DirectionCache run_direction(std::vector<std::size_t> tokens, const LstmParams& p, const Matrix& embedding) {
  DirectionCache dc;
  dc.tokens = std::move(tokens);
  dc.steps.reserve(dc.tokens.size());
  std::vector<double> h(p.hidden, 0.0), c(p.hidden, 0.0);
  for (std::size_t token : dc.tokens) {
    auto step = cell_step(embedding.row(token), h, c, p);
    h = std::move(step.h);
    c = std::move(step.c);
    dc.steps.push_back(std::move(step.cache));
  }
  return dc;
}

inline void check_sequence(const EncodedSequence& seq, const LstmModel& model) {
  if (seq.cutoff() != model.config.cutoff || seq.mask.size() != seq.indices.size()) {
    throw ShapeError("sequence length " + std::to_string(seq.cutoff()) + " does not match model cutoff " +
                     std::to_string(model.config.cutoff));
  }
  if (!seq.last_real_position || std::find(seq.mask.begin(), seq.mask.end(), 1) == seq.mask.end()) {
    throw EmptySequenceError("sequence has no real tokens");
  }
  for (std::size_t idx : seq.indices) {
    if (idx >= model.embedding.rows()) throw ShapeError("token index outside the embedding matrix");
  }
}

inline ForwardResult forward_impl(const EncodedSequence& seq, const LstmModel& model, bool fingerprint) {
  check_sequence(seq, model);
  std::vector<std::size_t> real;
  for (std::size_t t = 0; t < seq.cutoff(); ++t) {
    if (seq.mask[t]) real.push_back(seq.indices[t]);
  }
  ForwardResult out;
  ForwardCache& cache = out.cache;
  cache.cutoff = seq.cutoff();
  cache.forward = run_direction(real, model.forward, model.embedding.vectors);
  cache.features.assign(cache.forward.final_h().begin(), cache.forward.final_h().end());
  if (model.config.bidirectional) {
    if (!model.backward) throw ShapeError("bidirectional model lacks backward parameters");
    std::vector<std::size_t> reversed(real.rbegin(), real.rend());
    cache.backward = run_direction(std::move(reversed), *model.backward, model.embedding.vectors);
    const auto hb = cache.backward->final_h();
    cache.features.insert(cache.features.end(), hb.begin(), hb.end());
  }
  if (model.head.w.size() != cache.features.size()) throw ShapeError("head size does not match the LSTM output");
  cache.logit = dot(model.head.w, cache.features) + model.head.b;
  cache.probability = sigmoid(cache.logit);
  if (fingerprint) cache.fingerprint = parameter_fingerprint(model);
  out.probability = cache.probability;
  return out;
}

}  // namespace detail

// Unrolls over the sequence from a zero state and squashes the final state
// through the head. Handles both directional variants according to the config.
inline ForwardResult forward(const EncodedSequence& seq, const LstmModel& model) {
  return detail::forward_impl(seq, model, true);
}

inline ForwardResult forward_bidirectional(const EncodedSequence& seq, const LstmModel& model) {
  if (!model.config.bidirectional || !model.backward) {
    throw std::invalid_argument("forward_bidirectional needs a bidirectional model");
  }
  return detail::forward_impl(seq, model, true);
}

inline constexpr double kProbabilityEpsilon = 1e-12;

inline double bce_loss(double probability, int label) {
  const double p = std::clamp(probability, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
  return label == 1 ? -std::log(p) : -std::log(1.0 - p);
}

// ---------------------------------------------------------------------------
// Backward

namespace detail {

inline void backprop_direction(const DirectionCache& dc, std::span<const double> dh_final, const LstmParams& p,
                               LstmParams& gp, Matrix& g_embedding, double scale) {
  const std::size_t H = p.hidden;
  const std::size_t d = p.input;
  std::vector<double> dh(dh_final.begin(), dh_final.end());
  std::vector<double> dc_next(H, 0.0);
  std::vector<double> da(kNumGates * H);
  std::vector<double> dh_prev(H);
  std::vector<double> dx(d);

  for (std::size_t t = dc.steps.size(); t-- > 0;) {
    const StepCache& s = dc.steps[t];
    for (std::size_t k = 0; k < H; ++k) {
      const double d_o = dh[k] * s.tanh_c[k];
      const double d_c = dc_next[k] + dh[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
      const double d_i = d_c * s.g[k];
      const double d_g = d_c * s.i[k];
      const double d_f = d_c * s.c_prev[k];
      dc_next[k] = d_c * s.f[k];
      da[p.offset(Gate::Input) + k] = d_i * s.i[k] * (1.0 - s.i[k]);
      da[p.offset(Gate::Forget) + k] = d_f * s.f[k] * (1.0 - s.f[k]);
      da[p.offset(Gate::Output) + k] = d_o * s.o[k] * (1.0 - s.o[k]);
      da[p.offset(Gate::Candidate) + k] = d_g * (1.0 - s.g[k] * s.g[k]);
    }
    std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
    std::fill(dx.begin(), dx.end(), 0.0);
    for (std::size_t r = 0; r < kNumGates * H; ++r) {
      const double a = da[r];
      if (a == 0.0) continue;
      const double sa = scale * a;
      gp.b[r] += sa;
      auto gw = gp.w.row(r);
      auto w = p.w.row(r);
      for (std::size_t c = 0; c < d; ++c) {
        gw[c] += sa * s.x[c];
        dx[c] += w[c] * a;
      }
      auto gu = gp.u.row(r);
      auto u = p.u.row(r);
      for (std::size_t c = 0; c < H; ++c) {
        gu[c] += sa * s.h_prev[c];
        dh_prev[c] += u[c] * a;
      }
    }
    auto ge = g_embedding.row(dc.tokens[t]);
    for (std::size_t c = 0; c < d; ++c) ge[c] += scale * dx[c];
    std::swap(dh, dh_prev);
  }
}

inline void accumulate_gradients(const ForwardCache& cache, int label, const LstmModel& model, Gradients& acc,
                                 double scale) {
  const double dlogit = cache.probability - static_cast<double>(label);
  for (std::size_t k = 0; k < cache.features.size(); ++k) acc.head.w[k] += scale * dlogit * cache.features[k];
  acc.head.b += scale * dlogit;

  const std::size_t H = model.forward.hidden;
  std::vector<double> dfeat(cache.features.size());
  for (std::size_t k = 0; k < dfeat.size(); ++k) dfeat[k] = dlogit * model.head.w[k];
  backprop_direction(cache.forward, std::span<const double>(dfeat).first(H), model.forward, acc.forward,
                     acc.embedding, scale);
  if (cache.backward) {
    backprop_direction(*cache.backward, std::span<const double>(dfeat).subspan(H), *model.backward,
                       *acc.backward, acc.embedding, scale);
  }
}

}  // namespace detail

// Exact gradient of bce_loss(forward(seq)) with respect to every parameter.
inline Gradients backward(const ForwardCache& cache, int label, const LstmModel& model) {
  if (label != 0 && label != 1) throw std::invalid_argument("label must be 0 or 1");
  if (cache.fingerprint != parameter_fingerprint(model)) {
    throw StaleCacheError("model parameters changed since the forward pass");
  }
  Gradients g = Gradients::zeros_like(model);
  detail::accumulate_gradients(cache, label, model, g, 1.0);
  return g;
}

// ---------------------------------------------------------------------------
// Gradient checking

inline double sequence_loss(const LstmModel& model, const EncodedSequence& seq, int label) {
  return bce_loss(detail::forward_impl(seq, model, false).probability, label);
}

namespace detail {

template <class T>
std::vector<T> reference_direction(std::span<const std::size_t> tokens, const LstmParams& p, const Matrix& embedding) {
  const std::size_t H = p.hidden;
  std::vector<T> h(H, T(0)), c(H, T(0)), z(kNumGates * H);
  auto sig = [](T x) { return x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x)); };
  for (std::size_t token : tokens) {
    for (std::size_t r = 0; r < kNumGates * H; ++r) {
      T acc = p.b[r];
      for (std::size_t j = 0; j < p.input; ++j) acc += T(p.w(r, j)) * T(embedding(token, j));
      for (std::size_t j = 0; j < H; ++j) acc += T(p.u(r, j)) * h[j];
      z[r] = acc;
    }
    for (std::size_t k = 0; k < H; ++k) {
      const T i = sig(z[p.offset(Gate::Input) + k]);
      const T f = sig(z[p.offset(Gate::Forget) + k]);
      const T o = sig(z[p.offset(Gate::Output) + k]);
      const T g = std::tanh(z[p.offset(Gate::Candidate) + k]);
      c[k] = f * c[k] + i * g;
      h[k] = o * std::tanh(c[k]);
    }
  }
  return h;
}

// Loss re-evaluated in wider arithmetic T. Finite differences of a double
// evaluation lose ~1e-11 to cancellation at delta=1e-5, which swamps the
// relative error of gradients near the 1e-8 floor.
template <class T>
T reference_loss(const LstmModel& model, const EncodedSequence& seq, int label) {
  check_sequence(seq, model);
  std::vector<std::size_t> real;
  for (std::size_t t = 0; t < seq.cutoff(); ++t) {
    if (seq.mask[t]) real.push_back(seq.indices[t]);
  }
  std::vector<T> features = reference_direction<T>(real, model.forward, model.embedding.vectors);
  if (model.backward) {
    const std::vector<std::size_t> reversed(real.rbegin(), real.rend());
    const auto hb = reference_direction<T>(reversed, *model.backward, model.embedding.vectors);
    features.insert(features.end(), hb.begin(), hb.end());
  }
  T z = model.head.b;
  for (std::size_t k = 0; k < features.size(); ++k) z += T(model.head.w[k]) * features[k];
  // -log s(z) for label 1, -log s(-z) for label 0
  const T a = label == 1 ? -z : z;
  return a > T(0) ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a));
}

}  // namespace detail

// Max over all parameters of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8),
// with numeric gradients from central differences of step `delta` on the loss
// evaluated in long double.
inline double gradient_relative_error(const LstmModel& model, const EncodedSequence& seq, int label,
                                      const Gradients& analytic, double delta) {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw std::invalid_argument("grad_check step must be > 0");
  LstmModel probe = model;
  std::vector<std::span<double>> params;
  std::vector<std::span<const double>> grads;
  for_each_array(probe, [&](std::string_view, std::span<double> a) { params.push_back(a); });
  for_each_array(analytic, [&](std::string_view, std::span<const double> a) { grads.push_back(a); });
  if (params.size() != grads.size()) throw ShapeError("gradient layout does not match the model");

  double worst = 0.0;
  for (std::size_t a = 0; a < params.size(); ++a) {
    if (params[a].size() != grads[a].size()) throw ShapeError("gradient layout does not match the model");
    for (std::size_t k = 0; k < params[a].size(); ++k) {
      const double saved = params[a][k];
      params[a][k] = saved + delta;
      const long double up = detail::reference_loss<long double>(probe, seq, label);
      params[a][k] = saved - delta;
      const long double down = detail::reference_loss<long double>(probe, seq, label);
      params[a][k] = saved;
      const double numeric = static_cast<double>((up - down) / (2.0L * static_cast<long double>(delta)));
      const double exact = grads[a][k];
      const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(exact - numeric) / denom);
    }
  }
  return worst;
}

inline double grad_check(const LstmModel& model, const EncodedSequence& seq, int label, double delta = 1e-5) {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw std::invalid_argument("grad_check step must be > 0");
  const auto fwd = forward(seq, model);
  return gradient_relative_error(model, seq, label, backward(fwd.cache, label, model), delta);
}

// ---------------------------------------------------------------------------
// Initialization

inline LstmParams init_lstm_params(std::size_t hidden, std::size_t input, Rng& rng) {
  LstmParams p(hidden, input);
  const double w_range = std::sqrt(6.0 / static_cast<double>(input + hidden));
  const double u_range = std::sqrt(6.0 / static_cast<double>(2 * hidden));
  for (double& v : p.w.data()) v = rng.uniform(-w_range, w_range);
  for (double& v : p.u.data()) v = rng.uniform(-u_range, u_range);
  for (std::size_t k = 0; k < hidden; ++k) p.b[p.offset(Gate::Forget) + k] = 1.0;
  return p;
}

// Glorot-uniform gate weights, forget bias 1, zero head.
inline LstmModel init_model(EmbeddingMatrix embedding, const ModelConfig& config) {
  config.validate();
  if (embedding.dim() != config.embed_dim) {
    throw ShapeError("embedding dim " + std::to_string(embedding.dim()) + " does not match config embed_dim " +
                     std::to_string(config.embed_dim));
  }
  LstmModel m;
  m.embedding = std::move(embedding);
  m.config = config;
  Rng rng(config.seed);
  m.forward = init_lstm_params(config.hidden_size, config.embed_dim, rng);
  if (config.bidirectional) m.backward = init_lstm_params(config.hidden_size, config.embed_dim, rng);
  m.head.w.assign(config.bidirectional ? 2 * config.hidden_size : config.hidden_size, 0.0);
  m.head.b = 0.0;
  return m;
}

// ---------------------------------------------------------------------------
// Optimization

class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate) : kind_(kind), lr_(learning_rate) {}

  // Applies one update. Arrays are visited in for_each_array order; the
  // embedding is skipped when it is frozen.
  void step(LstmModel& model, const Gradients& grads) {
    std::vector<std::span<double>> params;
    std::vector<std::span<const double>> g;
    for_each_array(model, [&](std::string_view, std::span<double> a) { params.push_back(a); });
    for_each_array(grads, [&](std::string_view, std::span<const double> a) { g.push_back(a); });
    if (kind_ == OptimizerKind::Adam && m_.empty()) {
      for (auto a : params) {
        m_.emplace_back(a.size(), 0.0);
        v_.emplace_back(a.size(), 0.0);
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    const std::size_t first = model.embedding.trainable ? 0 : 1;
    for (std::size_t a = first; a < params.size(); ++a) {
      auto p = params[a];
      auto ga = g[a];
      if (kind_ == OptimizerKind::Sgd) {
        for (std::size_t k = 0; k < p.size(); ++k) p[k] -= lr_ * ga[k];
        continue;
      }
      auto& m = m_[a];
      auto& v = v_[a];
      for (std::size_t k = 0; k < p.size(); ++k) {
        m[k] = kBeta1 * m[k] + (1.0 - kBeta1) * ga[k];
        v[k] = kBeta2 * v[k] + (1.0 - kBeta2) * ga[k] * ga[k];
        p[k] -= lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + kEpsilon);
      }
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  OptimizerKind kind_;
  double lr_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Rescales gradients so their global l2 norm is at most max_norm. Returns the
// norm before clipping.
inline double clip_global_norm(Gradients& g, double max_norm) {
  double sq = 0.0;
  for_each_array(g, [&](std::string_view, std::span<double> a) { sq += dot(a, a); });
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for_each_array(g, [&](std::string_view, std::span<double> a) {
      for (double& v : a) v *= s;
    });
  }
  return norm;
}

struct TrainResult {
  LstmModel model;
  std::vector<double> epoch_loss;
};

// Mini-batch training from an initialized model. Examples are reshuffled every
// epoch with the config seed; the final partial batch is kept; batch gradients
// are averaged and clipped before the optimizer step.
inline TrainResult train_encoded(LstmModel model, std::span<const EncodedSequence> seqs,
                                 std::span<const int> labels) {
  const ModelConfig& cfg = model.config;
  cfg.validate();
  if (seqs.empty()) throw DataError("training set is empty");
  if (seqs.size() != labels.size()) throw std::invalid_argument("sequence/label count mismatch");
  for (std::size_t n = 0; n < seqs.size(); ++n) {
    detail::check_sequence(seqs[n], model);
    if (labels[n] != 0 && labels[n] != 1) throw DataError("labels must be 0 or 1");
  }

  TrainResult result{std::move(model), {}};
  LstmModel& m = result.model;
  Optimizer opt(cfg.optimizer, cfg.learning_rate);
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(seqs.size());
  for (std::size_t n = 0; n < order.size(); ++n) order[n] = n;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      Gradients grads = Gradients::zeros_like(m);
      for (std::size_t j = start; j < end; ++j) {
        const std::size_t n = order[j];
        const auto fwd = detail::forward_impl(seqs[n], m, false);
        loss_sum += bce_loss(fwd.probability, labels[n]);
        detail::accumulate_gradients(fwd.cache, labels[n], m, grads, scale);
      }
      if (!m.embedding.trainable) std::fill(grads.embedding.data().begin(), grads.embedding.data().end(), 0.0);
      clip_global_norm(grads, cfg.clip_norm);
      opt.step(m, grads);
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(seqs.size()));
  }
  return result;
}

inline TrainResult train(std::span<const Document> docs, SignalSpec signal, const Vocabulary& vocab,
                         EmbeddingMatrix embedding, const ModelConfig& config) {
  config.validate();
  if (docs.empty()) throw DataError("training set is empty");
  if (embedding.rows() != vocab.size()) throw ShapeError("embedding rows do not match vocabulary size");
  std::vector<EncodedSequence> seqs;
  std::vector<int> labels;
  seqs.reserve(docs.size());
  for (const auto& doc : docs) {
    if (!doc.label) throw DataError("document '" + doc.id + "' has no label");
    seqs.push_back(encode_document(doc, signal, vocab, config.cutoff));
    if (!seqs.back().last_real_position) throw EmptySequenceError("document '" + doc.id + "' has no tokens");
    labels.push_back(*doc.label);
  }
  return train_encoded(init_model(std::move(embedding), config), seqs, labels);
}

// ---------------------------------------------------------------------------
// Prediction

struct Prediction {
  double probability = 0.5;
  int label = 0;
};

// Class 1 iff the probability is strictly above the threshold.
inline int classify(double probability, double threshold = 0.5) { return probability > threshold ? 1 : 0; }

inline double predict_probability(const LstmModel& model, const EncodedSequence& seq) {
  return detail::forward_impl(seq, model, false).probability;
}

inline Prediction predict(const LstmModel& model, const Document& doc, SignalSpec signal, const Vocabulary& vocab) {
  const auto seq = encode_document(doc, signal, vocab, model.config.cutoff);
  if (!seq.last_real_position) throw EmptySequenceError("document '" + doc.id + "' has no tokens");
  const double p = predict_probability(model, seq);
  return {p, classify(p, model.config.threshold)};
}

}  // namespace seqclass
