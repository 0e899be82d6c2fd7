#pragma once

// Dataset ingestion, signal composition, tokenization, vocabulary and
// fixed-length encoding.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"
#include "seqclass/errors.hpp"

namespace seqclass {

struct Document {
  std::string id;
  std::string title;
  std::optional<std::string> body;
  std::optional<std::string> best_answer;
  std::optional<int> label;
  std::optional<std::string> source;

  bool operator==(const Document&) const = default;
};

enum class SignalSpec { Title, Body, TitleBody, TitleBodyBestAnswer };

inline SignalSpec parse_signal(std::string_view name) {
  if (name == "title") return SignalSpec::Title;
  if (name == "body") return SignalSpec::Body;
  if (name == "title+body") return SignalSpec::TitleBody;
  if (name == "title+body+ba") return SignalSpec::TitleBodyBestAnswer;
  throw std::invalid_argument("unknown signal '" + std::string(name) +
                              "' (expected title, body, title+body or title+body+ba)");
}

inline std::string_view signal_name(SignalSpec spec) {
  switch (spec) {
    case SignalSpec::Title: return "title";
    case SignalSpec::Body: return "body";
    case SignalSpec::TitleBody: return "title+body";
    case SignalSpec::TitleBodyBestAnswer: return "title+body+ba";
  }
  return "title";
}

// ---------------------------------------------------------------------------
// Loading

namespace detail {

inline std::optional<std::string> optional_string(const nlohmann::json& rec, const char* key,
                                                  std::size_t line) {
  auto it = rec.find(key);
  if (it == rec.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw SchemaError(line, std::string("'") + key + "' must be a string or null");
  return it->get<std::string>();
}

}  // namespace detail

inline Document parse_document(std::string_view text, std::size_t line) {
  nlohmann::json rec;
  try {
    rec = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(line, std::string("malformed JSON: ") + e.what());
  }
  if (!rec.is_object()) throw SchemaError(line, "record must be a JSON object");

  Document doc;
  auto id = rec.find("id");
  if (id == rec.end() || !id->is_string()) throw SchemaError(line, "missing string field 'id'");
  doc.id = id->get<std::string>();
  if (doc.id.empty()) throw SchemaError(line, "'id' must be nonempty");

  auto title = rec.find("title");
  if (title == rec.end() || !title->is_string()) throw SchemaError(line, "missing string field 'title'");
  doc.title = title->get<std::string>();

  doc.body = detail::optional_string(rec, "body", line);
  doc.best_answer = detail::optional_string(rec, "best_answer", line);
  doc.source = detail::optional_string(rec, "source", line);

  auto label = rec.find("label");
  if (label != rec.end() && !label->is_null()) {
    if (!label->is_number_integer()) throw SchemaError(line, "'label' must be 0, 1 or null");
    const auto v = label->get<long long>();
    if (v != 0 && v != 1) throw SchemaError(line, "invalid label value " + std::to_string(v));
    doc.label = static_cast<int>(v);
  }

  if (doc.title.empty() && doc.body.value_or("").empty()) {
    throw SchemaError(line, "'title' may be empty only when 'body' is nonempty");
  }
  return doc;
}

inline std::vector<Document> load_dataset(std::istream& in) {
  std::vector<Document> docs;
  std::unordered_set<std::string> seen;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    Document doc = parse_document(text, line);
    if (!seen.insert(doc.id).second) throw SchemaError(line, "duplicate id '" + doc.id + "'");
    docs.push_back(std::move(doc));
  }
  if (in.bad()) throw IoError("read failure");
  return docs;
}

inline std::vector<Document> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset '" + path + "'");
  return load_dataset(in);
}

inline nlohmann::json document_to_json(const Document& doc) {
  nlohmann::json j;
  j["id"] = doc.id;
  j["title"] = doc.title;
  j["body"] = doc.body ? nlohmann::json(*doc.body) : nlohmann::json(nullptr);
  j["best_answer"] = doc.best_answer ? nlohmann::json(*doc.best_answer) : nlohmann::json(nullptr);
  j["label"] = doc.label ? nlohmann::json(*doc.label) : nlohmann::json(nullptr);
  j["source"] = doc.source ? nlohmann::json(*doc.source) : nlohmann::json(nullptr);
  return j;
}

// ---------------------------------------------------------------------------
// Signal composition

inline std::string compose_signal(const Document& doc, SignalSpec spec) {
  std::string out;
  auto append = [&out](std::string_view part) {
    if (part.empty()) return;
    if (!out.empty()) out += ' ';
    out += part;
  };
  const std::string_view body = doc.body ? std::string_view(*doc.body) : std::string_view();
  switch (spec) {
    case SignalSpec::Title: append(doc.title); break;
    case SignalSpec::Body: append(body); break;
    case SignalSpec::TitleBody:
      append(doc.title);
      append(body);
      break;
    case SignalSpec::TitleBodyBestAnswer:
      append(doc.title);
      append(body);
      if (doc.best_answer) append(*doc.best_answer);
      break;
  }
  return out;
}

// TitleBodyBestAnswer requires a dataset that carries the best-answer field.
inline void validate_signal(std::span<const Document> docs, SignalSpec spec) {
  if (spec != SignalSpec::TitleBodyBestAnswer) return;
  const bool any = std::any_of(docs.begin(), docs.end(),
                               [](const Document& d) { return d.best_answer.has_value(); });
  if (!any && !docs.empty()) throw DataError("signal title+body+ba needs a dataset with best_answer fields");
}

// ---------------------------------------------------------------------------
// Tokenization

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kBosToken = "<bos>";
inline constexpr std::string_view kEosToken = "<eos>";

namespace detail {

inline bool is_space(unsigned char ch) {
  return ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r' || ch == '\v' || ch == '\f';
}

// Bytes >= 0x80 belong to UTF-8 multibyte characters and are kept inside words.
inline bool is_word_char(unsigned char ch) {
  return (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') || ch >= 0x80;
}

inline char ascii_lower(char ch) { return (ch >= 'A' && ch <= 'Z') ? static_cast<char>(ch - 'A' + 'a') : ch; }

}  // namespace detail

inline std::string to_lower(std::string_view text) {
  std::string out(text);
  for (char& ch : out) ch = detail::ascii_lower(ch);
  return out;
}

// Lowercases, splits into sentences at [.?!] followed by whitespace or end of
// text, and wraps every nonempty sentence as <bos> ... <eos>. Tokens are
// maximal runs of letters/digits or single punctuation characters.
inline std::vector<std::string> tokenize(std::string_view raw) {
  const std::string text = to_lower(raw);
  std::vector<std::string> out;
  std::vector<std::string> sentence;
  auto flush = [&] {
    if (sentence.empty()) return;
    out.emplace_back(kBosToken);
    for (auto& tok : sentence) out.push_back(std::move(tok));
    out.emplace_back(kEosToken);
    sentence.clear();
  };

  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const auto ch = static_cast<unsigned char>(text[i]);
    if (detail::is_space(ch)) {
      ++i;
    } else if (detail::is_word_char(ch)) {
      std::size_t j = i;
      while (j < n && detail::is_word_char(static_cast<unsigned char>(text[j]))) ++j;
      sentence.emplace_back(text.substr(i, j - i));
      i = j;
    } else {
      sentence.emplace_back(1, text[i]);
      ++i;
      const bool terminal = ch == '.' || ch == '?' || ch == '!';
      if (terminal && (i == n || detail::is_space(static_cast<unsigned char>(text[i])))) flush();
    }
  }
  flush();
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary

class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kBos = 2;
  static constexpr std::size_t kEos = 3;
  static constexpr std::size_t kNumSpecials = 4;

  Vocabulary() {
    for (auto tok : {kPadToken, kUnkToken, kBosToken, kEosToken}) push(std::string(tok), 0);
  }

  // Appends a non-special token. Tokens must be lowercase and unique.
  std::size_t add(const std::string& token, std::size_t count = 0) {
    if (to_lower(token) != token) throw std::invalid_argument("vocabulary tokens must be lowercase: " + token);
    if (token_to_index_.count(token)) throw std::invalid_argument("duplicate vocabulary token: " + token);
    return push(token, count);
  }

  std::size_t size() const { return index_to_token_.size(); }

  std::optional<std::size_t> find(std::string_view token) const {
    auto it = token_to_index_.find(std::string(token));
    if (it == token_to_index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t index_or_unk(std::string_view token) const { return find(token).value_or(kUnk); }

  const std::string& token(std::size_t index) const { return index_to_token_.at(index); }
  const std::vector<std::string>& tokens() const { return index_to_token_; }
  std::size_t count(std::size_t index) const { return counts_.at(index); }
  const std::vector<std::size_t>& counts() const { return counts_; }

  static bool is_special(std::size_t index) { return index < kNumSpecials; }

  bool operator==(const Vocabulary& other) const {
    return index_to_token_ == other.index_to_token_ && counts_ == other.counts_;
  }

 private:
  std::size_t push(std::string token, std::size_t count) {
    const std::size_t index = index_to_token_.size();
    token_to_index_.emplace(token, index);
    index_to_token_.push_back(std::move(token));
    counts_.push_back(count);
    return index;
  }

  std::unordered_map<std::string, std::size_t> token_to_index_;
  std::vector<std::string> index_to_token_;
  std::vector<std::size_t> counts_;
};

inline bool is_special_token(std::string_view token) {
  return token == kPadToken || token == kUnkToken || token == kBosToken || token == kEosToken;
}

// Keeps tokens seen at least min_count times, ranked by (count desc, token asc),
// truncated so the vocabulary including specials has at most max_size entries.
inline Vocabulary build_vocabulary(std::span<const std::vector<std::string>> corpus, std::size_t min_count = 1,
                                   std::optional<std::size_t> max_size = std::nullopt) {
  if (min_count < 1) throw std::invalid_argument("min_count must be >= 1");
  if (max_size && *max_size < Vocabulary::kNumSpecials) {
    throw std::invalid_argument("max_size must leave room for the 4 special tokens");
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& doc : corpus) {
    for (const auto& tok : doc) {
      if (!is_special_token(tok)) ++counts[tok];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [tok, n] : counts) {
    if (n >= min_count) ranked.emplace_back(tok, n);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (max_size && ranked.size() > *max_size - Vocabulary::kNumSpecials) {
    ranked.resize(*max_size - Vocabulary::kNumSpecials);
  }
  Vocabulary vocab;
  for (const auto& [tok, n] : ranked) vocab.add(tok, n);
  return vocab;
}

// ---------------------------------------------------------------------------
// Encoding

struct EncodedSequence {
  std::vector<std::size_t> indices;
  std::vector<std::uint8_t> mask;
  // Index of the final real token; empty when every position is PAD.
  std::optional<std::size_t> last_real_position;

  std::size_t cutoff() const { return indices.size(); }
  std::size_t first_real_position() const {
    return static_cast<std::size_t>(std::find(mask.begin(), mask.end(), 1) - mask.begin());
  }
  std::size_t real_length() const { return cutoff() - first_real_position(); }

  bool operator==(const EncodedSequence&) const = default;
};

// Keeps the first `cutoff` tokens and left-pads shorter inputs so the last
// position holds the last real token.
inline EncodedSequence encode_sequence(std::span<const std::string> tokens, const Vocabulary& vocab,
                                       std::size_t cutoff) {
  if (cutoff < 1) throw std::invalid_argument("cutoff must be >= 1");
  const std::size_t kept = std::min(tokens.size(), cutoff);
  const std::size_t pad = cutoff - kept;
  EncodedSequence seq;
  seq.indices.assign(cutoff, Vocabulary::kPad);
  seq.mask.assign(cutoff, 0);
  for (std::size_t i = 0; i < kept; ++i) {
    const std::size_t index = vocab.index_or_unk(tokens[i]);
    seq.indices[pad + i] = index == Vocabulary::kPad ? Vocabulary::kUnk : index;
    seq.mask[pad + i] = 1;
  }
  if (kept > 0) seq.last_real_position = cutoff - 1;
  return seq;
}

inline EncodedSequence encode_document(const Document& doc, SignalSpec signal, const Vocabulary& vocab,
                                       std::size_t cutoff) {
  const auto tokens = tokenize(compose_signal(doc, signal));
  return encode_sequence(tokens, vocab, cutoff);
}

}  // namespace seqclass
