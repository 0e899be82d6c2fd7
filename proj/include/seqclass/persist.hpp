#pragma once

// Model files and word2vec text export.
//
// Model file layout:
//   line 1  "seqclass-model <version>"
//   line 2  one-line JSON manifest: kind, config, signal, vocabulary, array
//           names and lengths
//   rest    every parameter array as little-endian IEEE-754 binary64, in
//           for_each_array order

#include <bit>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "seqclass/corpus.hpp"
#include "seqclass/embeddings.hpp"
#include "seqclass/errors.hpp"
#include "seqclass/lstm.hpp"

namespace seqclass {

inline constexpr int kModelFormatVersion = 1;
inline constexpr std::string_view kModelMagic = "seqclass-model";

struct ModelFile {
  LstmModel model;
  Vocabulary vocab;
  SignalSpec signal = SignalSpec::TitleBody;
};

inline nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"cutoff", c.cutoff},
          {"hidden_size", c.hidden_size},
          {"embed_dim", c.embed_dim},
          {"bidirectional", c.bidirectional},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"optimizer", optimizer_name(c.optimizer)},
          {"seed", c.seed},
          {"threshold", c.threshold},
          {"clip_norm", c.clip_norm}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.cutoff = j.at("cutoff").get<std::size_t>();
  c.hidden_size = j.at("hidden_size").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.bidirectional = j.at("bidirectional").get<bool>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  c.threshold = j.at("threshold").get<double>();
  c.clip_norm = j.value("clip_norm", 5.0);
  return c;
}

inline void save_model(std::ostream& out, const LstmModel& model, const Vocabulary& vocab, SignalSpec signal) {
  if (model.embedding.rows() != vocab.size()) throw ShapeError("embedding rows do not match vocabulary size");
  nlohmann::json arrays = nlohmann::json::array();
  for_each_array(model, [&](std::string_view name, std::span<const double> a) {
    arrays.push_back({{"name", name}, {"size", a.size()}});
  });
  const nlohmann::json manifest = {{"kind", "lstm"},
                                   {"config", config_to_json(model.config)},
                                   {"signal", signal_name(signal)},
                                   {"embedding_trainable", model.embedding.trainable},
                                   {"vocabulary", {{"tokens", vocab.tokens()}, {"counts", vocab.counts()}}},
                                   {"arrays", arrays}};
  out << kModelMagic << ' ' << kModelFormatVersion << '\n' << manifest.dump() << '\n';
  for_each_array(model, [&](std::string_view, std::span<const double> a) {
    for (double v : a) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      char bytes[8];
      for (int k = 0; k < 8; ++k) bytes[k] = static_cast<char>((bits >> (8 * k)) & 0xffU);
      out.write(bytes, 8);
    }
  });
  if (!out) throw IoError("model write failed");
}

inline void save_model(const std::string& path, const LstmModel& model, const Vocabulary& vocab, SignalSpec signal) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write model '" + path + "'");
  save_model(out, model, vocab, signal);
}

inline ModelFile load_model(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw ParseError("empty model file");
  std::istringstream hs(header);
  std::string magic;
  int version = 0;
  if (!(hs >> magic >> version) || magic != kModelMagic) throw ParseError("not a seqclass model file");
  if (version != kModelFormatVersion) {
    throw VersionError("unsupported model format version " + std::to_string(version));
  }

  std::string manifest_line;
  if (!std::getline(in, manifest_line)) throw ParseError("truncated model file: missing manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(manifest_line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed model manifest: ") + e.what());
  }

  ModelFile file;
  try {
    if (manifest.at("kind") != "lstm") throw ParseError("unknown model kind");
    file.signal = parse_signal(manifest.at("signal").get<std::string>());
    const ModelConfig config = config_from_json(manifest.at("config"));
    config.validate();

    const auto tokens = manifest.at("vocabulary").at("tokens").get<std::vector<std::string>>();
    const auto counts = manifest.at("vocabulary").at("counts").get<std::vector<std::size_t>>();
    if (tokens.size() != counts.size() || tokens.size() < Vocabulary::kNumSpecials) {
      throw ShapeError("inconsistent vocabulary");
    }
    for (std::size_t i = 0; i < Vocabulary::kNumSpecials; ++i) {
      if (tokens[i] != file.vocab.token(i)) throw ShapeError("vocabulary specials out of place");
    }
    for (std::size_t i = Vocabulary::kNumSpecials; i < tokens.size(); ++i) file.vocab.add(tokens[i], counts[i]);

    LstmModel& m = file.model;
    m.config = config;
    m.embedding = EmbeddingMatrix{Matrix(tokens.size(), config.embed_dim), manifest.at("embedding_trainable").get<bool>()};
    m.forward = LstmParams(config.hidden_size, config.embed_dim);
    if (config.bidirectional) m.backward = LstmParams(config.hidden_size, config.embed_dim);
    m.head.w.assign(config.bidirectional ? 2 * config.hidden_size : config.hidden_size, 0.0);

    const auto& arrays = manifest.at("arrays");
    std::size_t slot = 0;
    for_each_array(m, [&](std::string_view name, std::span<double> a) {
      if (slot >= arrays.size() || arrays[slot].at("name").get<std::string>() != name ||
          arrays[slot].at("size").get<std::size_t>() != a.size()) {
        throw ShapeError("array '" + std::string(name) + "' inconsistent with the config");
      }
      ++slot;
    });
    if (slot != arrays.size()) throw ShapeError("unexpected extra arrays");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed model manifest: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("invalid model manifest: ") + e.what());
  }

  const std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t expected = 0;
  for_each_array(file.model, [&](std::string_view, std::span<double> a) { expected += 8 * a.size(); });
  if (payload.size() != expected) {
    throw ParseError("model payload has " + std::to_string(payload.size()) + " bytes, expected " +
                     std::to_string(expected));
  }
  std::size_t pos = 0;
  for_each_array(file.model, [&](std::string_view, std::span<double> a) {
    for (double& v : a) {
      std::uint64_t bits = 0;
      for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(payload[pos + k])) << (8 * k);
      v = std::bit_cast<double>(bits);
      pos += 8;
    }
  });
  return file;
}

inline ModelFile load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model '" + path + "'");
  return load_model(in);
}

// ---------------------------------------------------------------------------
// word2vec text export

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

// Header "V d", then one line per non-special token with 17 significant digits.
inline void save_embeddings_text(std::ostream& out, const EmbeddingMatrix& matrix, const Vocabulary& vocab) {
  if (matrix.rows() != vocab.size()) throw ShapeError("embedding rows do not match vocabulary size");
  out << vocab.size() - Vocabulary::kNumSpecials << ' ' << matrix.dim() << '\n';
  for (std::size_t i = Vocabulary::kNumSpecials; i < vocab.size(); ++i) {
    out << vocab.token(i);
    for (double v : matrix.vectors.row(i)) out << ' ' << format_double(v);
    out << '\n';
  }
  if (!out) throw IoError("embedding write failed");
}

inline void save_embeddings_text(const std::string& path, const EmbeddingMatrix& matrix, const Vocabulary& vocab) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write embeddings '" + path + "'");
  save_embeddings_text(out, matrix, vocab);
}

}  // namespace seqclass
