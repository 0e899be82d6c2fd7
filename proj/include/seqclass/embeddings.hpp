#pragma once

// Word vectors: random initialization, word2vec text loading, and skip-gram
// negative-sampling pretraining.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "seqclass/corpus.hpp"
#include "seqclass/errors.hpp"
#include "seqclass/random.hpp"
#include "seqclass/tensor.hpp"

namespace seqclass {

inline constexpr std::size_t kDefaultEmbeddingDim = 300;
inline constexpr double kEmbeddingInitRange = 0.05;

// Row r is the vector of vocabulary index r. The PAD row is always zero.
struct EmbeddingMatrix {
  Matrix vectors;
  bool trainable = true;

  std::size_t dim() const { return vectors.cols(); }
  std::size_t rows() const { return vectors.rows(); }

  bool operator==(const EmbeddingMatrix&) const = default;
};

inline EmbeddingMatrix init_random(const Vocabulary& vocab, std::size_t dim = kDefaultEmbeddingDim,
                                   std::uint64_t seed = 0) {
  if (dim < 1) throw std::invalid_argument("embedding dim must be >= 1");
  EmbeddingMatrix m{Matrix(vocab.size(), dim), true};
  Rng rng(seed);
  for (double& v : m.vectors.data()) v = rng.uniform(-kEmbeddingInitRange, kEmbeddingInitRange);
  for (double& v : m.vectors.row(Vocabulary::kPad)) v = 0.0;
  return m;
}

// ---------------------------------------------------------------------------
// word2vec text format

struct PretrainedLoad {
  EmbeddingMatrix matrix;
  std::size_t matched = 0;
  // Fraction of non-special vocabulary tokens found in the file.
  double coverage = 0.0;
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) fields.push_back(line.substr(i, j - i));
    i = j;
  }
  return fields;
}

template <class T>
bool parse_number(std::string_view text, T& out) {
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace detail

// Words present in the vocabulary receive their file vectors verbatim; the
// rest keep their init_random rows. The PAD row stays zero.
inline PretrainedLoad load_pretrained(std::istream& in, const Vocabulary& vocab, std::size_t dim,
                                      std::uint64_t seed) {
  PretrainedLoad result{init_random(vocab, dim, seed)};
  std::vector<bool> filled(vocab.size(), false);
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = detail::split_fields(line);
    if (fields.empty()) continue;
    if (first) {
      first = false;
      std::size_t declared_rows = 0;
      std::size_t declared_dim = 0;
      if (fields.size() == 2 && detail::parse_number(fields[0], declared_rows) &&
          detail::parse_number(fields[1], declared_dim)) {
        if (declared_dim != dim) {
          throw DimensionMismatch("file declares dimension " + std::to_string(declared_dim) + ", expected " +
                                  std::to_string(dim));
        }
        continue;
      }
    }
    if (fields.size() - 1 != dim) {
      throw DimensionMismatch("line " + std::to_string(line_no) + ": " + std::to_string(fields.size() - 1) +
                              " values, expected " + std::to_string(dim));
    }
    std::vector<double> values(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      if (!detail::parse_number(fields[k + 1], values[k]) || !std::isfinite(values[k])) {
        throw ParseError("line " + std::to_string(line_no) + ": malformed value '" + std::string(fields[k + 1]) +
                         "'");
      }
    }
    const auto index = vocab.find(fields[0]);
    if (!index || *index == Vocabulary::kPad || filled[*index]) continue;
    std::copy(values.begin(), values.end(), result.matrix.vectors.row(*index).begin());
    filled[*index] = true;
    if (!Vocabulary::is_special(*index)) ++result.matched;
  }
  if (in.bad()) throw IoError("read failure");
  const std::size_t regular = vocab.size() - Vocabulary::kNumSpecials;
  result.coverage = regular == 0 ? 0.0 : static_cast<double>(result.matched) / static_cast<double>(regular);
  return result;
}

inline PretrainedLoad load_pretrained(const std::string& path, const Vocabulary& vocab, std::size_t dim,
                                      std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embeddings '" + path + "'");
  return load_pretrained(in, vocab, dim, seed);
}

// Reads every word of a word2vec text file into a fresh vocabulary (file order,
// specials prepended), for inspecting a vector file without a corpus.
inline std::pair<Vocabulary, EmbeddingMatrix> read_word2vec(std::istream& in) {
  std::vector<std::pair<std::string, std::vector<double>>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::size_t> dim;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = detail::split_fields(line);
    if (fields.empty()) continue;
    std::size_t a = 0, b = 0;
    if (rows.empty() && !dim && fields.size() == 2 && detail::parse_number(fields[0], a) &&
        detail::parse_number(fields[1], b)) {
      dim = b;
      continue;
    }
    if (!dim) dim = fields.size() - 1;
    if (fields.size() - 1 != *dim) throw DimensionMismatch("line " + std::to_string(line_no) + ": wrong width");
    std::vector<double> values(*dim);
    for (std::size_t k = 0; k < *dim; ++k) {
      if (!detail::parse_number(fields[k + 1], values[k])) {
        throw ParseError("line " + std::to_string(line_no) + ": malformed value");
      }
    }
    rows.emplace_back(std::string(fields[0]), std::move(values));
  }
  Vocabulary vocab;
  std::vector<std::pair<std::size_t, std::vector<double>>> placed;
  for (auto& [tok, values] : rows) {
    const std::string lower = to_lower(tok);
    if (is_special_token(lower) || vocab.find(lower)) continue;
    placed.emplace_back(vocab.add(lower), std::move(values));
  }
  EmbeddingMatrix m{Matrix(vocab.size(), dim.value_or(0)), true};
  for (auto& [index, values] : placed) std::copy(values.begin(), values.end(), m.vectors.row(index).begin());
  return {std::move(vocab), std::move(m)};
}

// ---------------------------------------------------------------------------
// Skip-gram negative sampling

struct SgnsConfig {
  std::size_t dim = kDefaultEmbeddingDim;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double learning_rate = 0.025;
  std::uint64_t seed = 1;

  void validate() const {
    if (dim < 1) throw std::invalid_argument("sgns dim must be >= 1");
    if (window < 1) throw std::invalid_argument("sgns window must be >= 1");
    if (negatives < 1) throw std::invalid_argument("sgns negatives must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("sgns learning_rate must be > 0");
  }
};

namespace detail {

// log(sigmoid(x)) without overflow.
inline double log_sigmoid(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

}  // namespace detail

// Loss of one (center, context, negatives) sample:
//   -log s(center . context) - sum_n log s(-center . negative_n)
inline double sgns_pair_loss(std::span<const double> center, std::span<const double> context,
                             std::span<const std::span<const double>> negatives) {
  double loss = -detail::log_sigmoid(dot(center, context));
  for (auto neg : negatives) loss -= detail::log_sigmoid(-dot(center, neg));
  return loss;
}

struct SgnsPairGradient {
  double loss = 0.0;
  std::vector<double> center;
  std::vector<double> context;
  std::vector<std::vector<double>> negatives;
};

inline SgnsPairGradient sgns_pair_gradient(std::span<const double> center, std::span<const double> context,
                                           std::span<const std::span<const double>> negatives) {
  const std::size_t d = center.size();
  SgnsPairGradient g;
  g.loss = sgns_pair_loss(center, context, negatives);
  g.center.assign(d, 0.0);
  g.context.assign(d, 0.0);

  // d/ds [-log s(s)] = s(s) - 1 for the positive pair, s(s) for negatives.
  const double pos = sigmoid(dot(center, context)) - 1.0;
  for (std::size_t k = 0; k < d; ++k) {
    g.center[k] += pos * context[k];
    g.context[k] = pos * center[k];
  }
  for (auto neg : negatives) {
    const double coef = sigmoid(dot(center, neg));
    std::vector<double> gn(d);
    for (std::size_t k = 0; k < d; ++k) {
      g.center[k] += coef * neg[k];
      gn[k] = coef * center[k];
    }
    g.negatives.push_back(std::move(gn));
  }
  return g;
}

struct SgnsResult {
  EmbeddingMatrix matrix;
  // Mean per-(center, context) loss of each epoch, measured before each update.
  std::vector<double> epoch_loss;
};

// Draws vocabulary indices from the unigram^(3/4) distribution.
class NoiseSampler {
 public:
  explicit NoiseSampler(std::span<const std::size_t> counts) : cumulative_(counts.size()) {
    double total = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (i != Vocabulary::kPad) total += std::pow(static_cast<double>(counts[i]), 0.75);
      cumulative_[i] = total;
    }
  }

  double total() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }

  std::size_t sample(Rng& rng) const {
    const double r = rng.uniform() * total();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), r);
    if (it == cumulative_.end()) --it;
    return static_cast<std::size_t>(it - cumulative_.begin());
  }

 private:
  std::vector<double> cumulative_;
};

// For every center word and every context word within `window`, takes one
// gradient step on the positive pair plus `negatives` sampled noise words.
// Returns the input-side matrix. PAD never participates.
inline SgnsResult train_sgns(std::span<const std::vector<std::string>> corpus, const Vocabulary& vocab,
                             const SgnsConfig& config) {
  config.validate();
  std::vector<std::vector<std::size_t>> sentences;
  std::vector<std::size_t> counts(vocab.size(), 0);
  std::size_t total_tokens = 0;
  for (const auto& doc : corpus) {
    std::vector<std::size_t> ids;
    for (const auto& tok : doc) {
      const std::size_t id = vocab.index_or_unk(tok);
      if (id == Vocabulary::kPad) continue;
      ids.push_back(id);
      ++counts[id];
    }
    total_tokens += ids.size();
    if (!ids.empty()) sentences.push_back(std::move(ids));
  }
  if (total_tokens == 0) throw DataError("SGNS corpus is empty");

  SgnsResult result{init_random(vocab, config.dim, config.seed), {}};
  Matrix& input = result.matrix.vectors;
  Matrix output(vocab.size(), config.dim, 0.0);
  const NoiseSampler noise(counts);
  Rng rng(config.seed ^ 0x5851f42d4c957f2dULL);

  const double total_steps = static_cast<double>(config.epochs) * static_cast<double>(total_tokens);
  double processed = 0.0;
  std::vector<std::size_t> negs(config.negatives);
  std::vector<std::span<const double>> neg_rows(config.negatives);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t pairs = 0;
    for (const auto& ids : sentences) {
      for (std::size_t pos = 0; pos < ids.size(); ++pos) {
        const double lr =
            config.learning_rate * std::max(1e-4, 1.0 - processed / (total_steps + 1.0));
        processed += 1.0;
        const std::size_t center = ids[pos];
        const std::size_t lo = pos >= config.window ? pos - config.window : 0;
        const std::size_t hi = std::min(ids.size(), pos + config.window + 1);
        for (std::size_t c = lo; c < hi; ++c) {
          if (c == pos) continue;
          const std::size_t context = ids[c];
          for (std::size_t n = 0; n < config.negatives; ++n) {
            std::size_t draw = noise.sample(rng);
            for (int attempt = 0; attempt < 16 && draw == context; ++attempt) draw = noise.sample(rng);
            negs[n] = draw;
            neg_rows[n] = output.row(draw);
          }
          const auto g = sgns_pair_gradient(input.row(center), output.row(context), neg_rows);
          loss_sum += g.loss;
          ++pairs;
          auto in_row = input.row(center);
          for (std::size_t k = 0; k < config.dim; ++k) in_row[k] -= lr * g.center[k];
          auto ctx_row = output.row(context);
          for (std::size_t k = 0; k < config.dim; ++k) ctx_row[k] -= lr * g.context[k];
          for (std::size_t n = 0; n < config.negatives; ++n) {
            auto row = output.row(negs[n]);
            for (std::size_t k = 0; k < config.dim; ++k) row[k] -= lr * g.negatives[n][k];
          }
        }
      }
    }
    result.epoch_loss.push_back(pairs == 0 ? 0.0 : loss_sum / static_cast<double>(pairs));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Inspection

inline double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

// Top-k non-special tokens by cosine similarity to `word`, excluding `word`.
inline std::vector<std::pair<std::string, double>> cosine_neighbors(const EmbeddingMatrix& matrix,
                                                                    const Vocabulary& vocab,
                                                                    std::string_view word, std::size_t k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  const auto query = vocab.find(word);
  if (!query) throw DataError("word '" + std::string(word) + "' is not in the vocabulary");
  std::vector<std::pair<std::string, double>> scored;
  for (std::size_t i = Vocabulary::kNumSpecials; i < vocab.size(); ++i) {
    if (i == *query) continue;
    scored.emplace_back(vocab.token(i), cosine(matrix.vectors.row(*query), matrix.vectors.row(i)));
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (scored.size() > k) scored.resize(k);
  return scored;
}

}  // namespace seqclass
