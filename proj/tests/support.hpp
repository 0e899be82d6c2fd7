#pragma once

// Shared fixtures: synthetic corpora, random models and scratch directories.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "seqclass/corpus.hpp"
#include "seqclass/embeddings.hpp"
#include "seqclass/lstm.hpp"
#include "seqclass/random.hpp"

namespace seqclass::fixtures {

// Keyword-separable corpus: 20 filler tokens with "alpha" (label 1) or "beta"
// (label 0) inserted at a random position. Labels alternate.
inline std::vector<Document> keyword_corpus(std::size_t n, std::uint64_t seed, const std::string& id_prefix = "d",
                                            std::size_t filler_vocab = 30) {
  Rng rng(seed);
  std::vector<Document> docs;
  for (std::size_t k = 0; k < n; ++k) {
    const int label = static_cast<int>(k % 2 == 0);
    std::vector<std::string> words;
    for (int j = 0; j < 20; ++j) words.push_back("w" + std::to_string(rng.below(filler_vocab)));
    const std::size_t at = rng.below(words.size() + 1);
    words.insert(words.begin() + static_cast<std::ptrdiff_t>(at), label == 1 ? "alpha" : "beta");
    std::string text;
    for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
    Document d;
    d.id = id_prefix + std::to_string(k);
    d.title = text;
    d.label = label;
    docs.push_back(std::move(d));
  }
  return docs;
}

// Two clusters {a1..a5} and {b1..b5}; each sentence draws from one cluster.
inline std::vector<std::vector<std::string>> two_cluster_corpus(std::size_t sentences, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<std::string>> corpus;
  for (std::size_t s = 0; s < sentences; ++s) {
    const char cluster = s % 2 == 0 ? 'a' : 'b';
    std::vector<std::string> sent;
    for (int j = 0; j < 10; ++j) sent.push_back(std::string(1, cluster) + std::to_string(1 + rng.below(5)));
    corpus.push_back(std::move(sent));
  }
  return corpus;
}

inline Vocabulary word_vocab(std::size_t words) {
  Vocabulary v;
  for (std::size_t k = 0; k < words; ++k) v.add("v" + std::to_string(k), 1);
  return v;
}

// Model with every parameter drawn uniformly at healthy magnitudes, so
// gradients are far from the relative-error floor.
inline LstmModel random_model(std::size_t hidden, std::size_t dim, std::size_t cutoff, bool bidirectional,
                              std::size_t vocab_size, Rng& rng) {
  ModelConfig c;
  c.hidden_size = hidden;
  c.embed_dim = dim;
  c.cutoff = cutoff;
  c.bidirectional = bidirectional;
  LstmModel m;
  m.config = c;
  m.embedding = EmbeddingMatrix{Matrix(vocab_size, dim), true};
  for (std::size_t r = 1; r < vocab_size; ++r) {
    for (double& v : m.embedding.vectors.row(r)) v = rng.uniform(-0.8, 0.8);
  }
  auto fill = [&](LstmParams& p) {
    p = LstmParams(hidden, dim);
    for (double& v : p.w.data()) v = rng.uniform(-0.5, 0.5);
    for (double& v : p.u.data()) v = rng.uniform(-0.5, 0.5);
    for (double& v : p.b) v = rng.uniform(-0.5, 0.5);
  };
  fill(m.forward);
  if (bidirectional) {
    m.backward.emplace();
    fill(*m.backward);
  }
  m.head.w.resize(bidirectional ? 2 * hidden : hidden);
  for (double& v : m.head.w) v = rng.uniform(-1.0, 1.0);
  m.head.b = rng.uniform(-0.5, 0.5);
  return m;
}

// Random left-padded sequence with 1..cutoff real tokens drawn from non-PAD rows.
inline EncodedSequence random_sequence(std::size_t cutoff, std::size_t vocab_size, Rng& rng) {
  const std::size_t real = 1 + rng.below(cutoff);
  EncodedSequence s;
  s.indices.assign(cutoff, Vocabulary::kPad);
  s.mask.assign(cutoff, 0);
  for (std::size_t t = cutoff - real; t < cutoff; ++t) {
    s.indices[t] = 1 + rng.below(vocab_size - 1);
    s.mask[t] = 1;
  }
  s.last_real_position = cutoff - 1;
  return s;
}

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    Rng rng(std::hash<std::string>{}(tag) ^ static_cast<std::uint64_t>(
                                               std::filesystem::file_time_type::clock::now().time_since_epoch().count()));
    path_ = std::filesystem::temp_directory_path() / ("seqclass-" + tag + "-" + std::to_string(rng.next()));
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline void write_jsonl(const std::string& path, const std::vector<Document>& docs) {
  std::ofstream out(path);
  for (const auto& d : docs) out << document_to_json(d).dump() << '\n';
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace seqclass::fixtures
