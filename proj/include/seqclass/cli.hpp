#pragma once

// Command-line driver. dispatch() parses a subcommand, runs it, writes its
// artifacts plus a reproducibility manifest, and returns the exit code:
// 0 success, 1 usage error, 2 data error.

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "seqclass/baselines.hpp"
#include "seqclass/corpus.hpp"
#include "seqclass/embeddings.hpp"
#include "seqclass/errors.hpp"
#include "seqclass/eval.hpp"
#include "seqclass/hash.hpp"
#include "seqclass/lstm.hpp"
#include "seqclass/persist.hpp"

namespace seqclass::cli {

inline constexpr std::uint64_t kDefaultSeed = 1;
inline constexpr const char* kSeedEnv = "SEQCLASS_SEED";

// Conflicting or incomplete flag combinations.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunOptions {
  // data
  std::string dataset;
  std::string test_dataset;
  std::string unlabeled;
  std::string model_path;
  std::string scores;
  std::string signal = "title+body";
  std::string out;
  std::string log;
  std::string manifest;
  // model
  std::size_t hidden = 32;
  std::size_t cutoff = 30;
  std::size_t batch = 100;
  std::size_t epochs = 10;
  std::size_t embed_dim = kDefaultEmbeddingDim;
  double lr = 1e-3;
  std::string optimizer = "adam";
  bool bidirectional = false;
  double threshold = 0.5;
  std::string embeddings = "integrated";
  std::size_t min_count = 1;
  std::size_t max_vocab = 0;  // 0 = unlimited
  // sgns
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t sgns_epochs = 5;
  double sgns_lr = 0.025;
  // evaluation / baselines
  std::size_t folds = 5;
  std::string baseline_model = "logreg";
  std::string features = "tfidf";
  double inverse_strength = 1.0;
  std::size_t max_iter = 100;
  double alpha = 1.0;
  std::size_t top_k = 500;
  // inspection
  std::string word;
  std::size_t neighbors = 10;

  std::uint64_t seed = kDefaultSeed;
};

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string file_digest(const std::string& path) {
  Fnv1a h;
  h.update(read_file(path));
  std::ostringstream ss;
  ss << "fnv1a64:" << std::hex << std::setw(16) << std::setfill('0') << h.digest();
  return ss.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline void write_json(const std::string& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

inline std::vector<std::string> content_tokens(const Document& doc, SignalSpec signal) {
  std::vector<std::string> out;
  for (auto& t : tokenize(compose_signal(doc, signal))) {
    if (!is_special_token(t)) out.push_back(std::move(t));
  }
  return out;
}

inline std::vector<int> require_labels(std::span<const Document> docs) {
  std::vector<int> labels;
  for (const auto& d : docs) {
    if (!d.label) throw DataError("document '" + d.id + "' has no label");
    labels.push_back(*d.label);
  }
  return labels;
}

// Dimension declared by a word2vec text file (header or width of the first row).
inline std::size_t peek_word2vec_dim(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embeddings '" + path + "'");
  std::string line;
  while (std::getline(in, line)) {
    const auto fields = seqclass::detail::split_fields(line);
    if (fields.empty()) continue;
    std::size_t a = 0, b = 0;
    if (fields.size() == 2 && seqclass::detail::parse_number(fields[0], a) &&
        seqclass::detail::parse_number(fields[1], b)) {
      return b;
    }
    return fields.size() - 1;
  }
  throw ParseError("embeddings file '" + path + "' is empty");
}

}  // namespace detail

// Per-run context: options plus the bookkeeping needed for the manifest.
class Runner {
 public:
  Runner(RunOptions opts, std::ostream& out) : o_(std::move(opts)), out_(out) {}

  const RunOptions& options() const { return o_; }
  const std::map<std::string, std::string>& inputs() const { return inputs_; }
  const std::vector<std::string>& outputs() const { return outputs_; }

  std::vector<Document> load(const std::string& path) {
    if (path.empty()) throw UsageError("a dataset path is required");
    inputs_[path] = detail::file_digest(path);
    return load_dataset(path);
  }

  void note_input(const std::string& path) { inputs_[path] = detail::file_digest(path); }
  void note_output(const std::string& path) { outputs_.push_back(path); }

  SignalSpec signal() const {
    try {
      return parse_signal(o_.signal);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }

  ModelConfig model_config() const {
    ModelConfig c;
    c.cutoff = o_.cutoff;
    c.hidden_size = o_.hidden;
    c.embed_dim = o_.embed_dim;
    c.bidirectional = o_.bidirectional;
    c.batch_size = o_.batch;
    c.epochs = o_.epochs;
    c.learning_rate = o_.lr;
    c.optimizer = parse_optimizer(o_.optimizer);
    c.seed = o_.seed;
    c.threshold = o_.threshold;
    c.validate();
    return c;
  }

  SgnsConfig sgns_config() const {
    SgnsConfig c;
    c.dim = o_.embed_dim;
    c.window = o_.window;
    c.negatives = o_.negatives;
    c.epochs = o_.sgns_epochs;
    c.learning_rate = o_.sgns_lr;
    c.seed = o_.seed;
    c.validate();
    return c;
  }

  std::optional<std::size_t> max_vocab() const {
    return o_.max_vocab == 0 ? std::nullopt : std::optional<std::size_t>(o_.max_vocab);
  }

  // Validates the --embeddings mode and fixes embed_dim for pretrained files.
  void resolve_embedding_mode(bool embed_dim_given) {
    const std::string& mode = o_.embeddings;
    if (mode == "integrated" || mode == "sgns-train") {
      if (!o_.unlabeled.empty() && mode == "integrated") {
        throw UsageError("--unlabeled only applies to --embeddings sgns-train");
      }
      return;
    }
    if (mode.rfind("pretrained:", 0) == 0) {
      const std::string path = mode.substr(11);
      if (path.empty()) throw UsageError("--embeddings pretrained:PATH needs a path");
      if (!o_.unlabeled.empty()) throw UsageError("--unlabeled only applies to --embeddings sgns-train");
      note_input(path);
      if (!embed_dim_given) o_.embed_dim = detail::peek_word2vec_dim(path);
      return;
    }
    throw UsageError("unknown --embeddings mode '" + mode + "' (integrated, pretrained:PATH, sgns-train)");
  }

  // Vocabulary from the labeled training documents, plus the unlabeled corpus
  // in sgns-train mode.
  Vocabulary build_vocab(std::span<const Document> train_docs,
                         std::span<const std::vector<std::string>> unlabeled_tokens) const {
    std::vector<std::vector<std::string>> corpus;
    for (const auto& d : train_docs) corpus.push_back(tokenize(compose_signal(d, signal())));
    if (o_.embeddings == "sgns-train") corpus.insert(corpus.end(), unlabeled_tokens.begin(), unlabeled_tokens.end());
    return build_vocabulary(corpus, o_.min_count, max_vocab());
  }

  EmbeddingMatrix build_embedding(const Vocabulary& vocab, std::span<const std::vector<std::string>> unlabeled_tokens,
                                  nlohmann::json& log) const {
    const std::string& mode = o_.embeddings;
    if (mode == "integrated") return init_random(vocab, o_.embed_dim, o_.seed);
    if (mode == "sgns-train") {
      auto r = train_sgns(unlabeled_tokens, vocab, sgns_config());
      log["sgns_epoch_loss"] = r.epoch_loss;
      return std::move(r.matrix);
    }
    auto r = load_pretrained(mode.substr(11), vocab, o_.embed_dim, o_.seed);
    log["embedding_coverage"] = r.coverage;
    return std::move(r.matrix);
  }

  std::vector<std::vector<std::string>> unlabeled_tokens(std::span<const Document> fallback) {
    if (o_.embeddings != "sgns-train") return {};
    std::vector<std::vector<std::string>> corpus;
    if (o_.unlabeled.empty()) {
      for (const auto& d : fallback) corpus.push_back(tokenize(compose_signal(d, signal())));
    } else {
      for (const auto& d : load(o_.unlabeled)) corpus.push_back(tokenize(compose_signal(d, signal())));
    }
    return corpus;
  }

  // ---- subcommands -------------------------------------------------------

  void embed_train() {
    const auto docs = load(o_.dataset);
    std::vector<std::vector<std::string>> corpus;
    for (const auto& d : docs) corpus.push_back(tokenize(compose_signal(d, signal())));
    const Vocabulary vocab = build_vocabulary(corpus, o_.min_count, max_vocab());
    const auto result = train_sgns(corpus, vocab, sgns_config());
    save_embeddings_text(o_.out, result.matrix, vocab);
    note_output(o_.out);
    out_ << "embed-train: " << vocab.size() << " tokens, final epoch loss "
         << (result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back()) << "\n";
  }

  void train_cmd() {
    const auto docs = load(o_.dataset);
    const SignalSpec sig = signal();
    validate_signal(docs, sig);
    const ModelConfig config = model_config();
    const auto extra = unlabeled_tokens(docs);
    const Vocabulary vocab = build_vocab(docs, extra);
    nlohmann::json log;
    EmbeddingMatrix embedding = build_embedding(vocab, extra, log);
    const auto result = train(docs, sig, vocab, std::move(embedding), config);
    save_model(o_.out, result.model, vocab, sig);
    note_output(o_.out);
    log["config"] = config_to_json(config);
    log["signal"] = signal_name(sig);
    log["vocab_size"] = vocab.size();
    log["epoch_loss"] = result.epoch_loss;
    const std::string log_path = o_.log.empty() ? o_.out + ".log.json" : o_.log;
    detail::write_json(log_path, log);
    note_output(log_path);
    out_ << "train: " << docs.size() << " documents, final epoch loss "
         << (result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back()) << "\n";
  }

  void eval_cmd() {
    if (o_.model_path.empty()) throw UsageError("--model is required");
    note_input(o_.model_path);
    const ModelFile file = load_model(o_.model_path);
    const auto docs = load(o_.dataset);
    const auto labels = detail::require_labels(docs);
    std::vector<double> scores;
    for (const auto& d : docs) scores.push_back(predict(file.model, d, file.signal, file.vocab).probability);
    const auto report = evaluate(scores, labels, file.model.config.threshold);
    const auto j = to_json(report);
    detail::write_json(o_.out, j);
    note_output(o_.out);
    out_ << j.dump() << "\n";
  }

  void cv_cmd() {
    const auto docs = load(o_.dataset);
    const SignalSpec sig = signal();
    validate_signal(docs, sig);
    const ModelConfig config = model_config();
    const auto labels = detail::require_labels(docs);
    std::vector<std::string> ids;
    for (const auto& d : docs) ids.push_back(d.id);
    const auto extra = unlabeled_tokens({});

    FoldTrainer trainer = [&](std::span<const std::size_t> tr, std::span<const std::size_t> te) {
      std::vector<Document> train_docs;
      for (std::size_t i : tr) train_docs.push_back(docs[i]);
      const Vocabulary vocab = build_vocab(train_docs, extra.empty() ? unlabeled_fallback(train_docs) : extra);
      nlohmann::json ignored;
      EmbeddingMatrix emb =
          build_embedding(vocab, extra.empty() ? unlabeled_fallback(train_docs) : extra, ignored);
      const auto model = train(train_docs, sig, vocab, std::move(emb), config).model;
      std::vector<double> scores;
      for (std::size_t i : te) scores.push_back(predict(model, docs[i], sig, vocab).probability);
      return scores;
    };
    const auto report = cross_validate(trainer, ids, labels, o_.folds, o_.seed, config.threshold);
    const auto j = to_json(report);
    detail::write_json(o_.out, j);
    note_output(o_.out);
    out_ << j["mean"].dump() << "\n";
  }

  void predict_cmd() {
    if (o_.model_path.empty()) throw UsageError("--model is required");
    note_input(o_.model_path);
    const ModelFile file = load_model(o_.model_path);
    const auto docs = load(o_.dataset);
    std::ostringstream lines;
    for (const auto& d : docs) {
      const auto p = predict(file.model, d, file.signal, file.vocab);
      nlohmann::json j = {{"id", d.id}, {"probability", p.probability}, {"class", p.label}};
      j["source"] = d.source ? nlohmann::json(*d.source) : nlohmann::json(nullptr);
      if (d.label) j["label"] = *d.label;
      lines << j.dump() << "\n";
    }
    detail::write_text(o_.out, lines.str());
    note_output(o_.out);
    out_ << "predict: " << docs.size() << " documents scored\n";
  }

  void corpus_stats_cmd() {
    if (o_.scores.empty()) throw UsageError("--scores is required");
    note_input(o_.scores);
    std::istringstream in(detail::read_file(o_.scores));
    std::map<std::string, std::vector<double>> groups;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw SchemaError(line_no, e.what());
      }
      if (!j.is_object() || !j.contains("probability") || !j["probability"].is_number()) {
        throw SchemaError(line_no, "record needs a numeric 'probability'");
      }
      const std::string source =
          j.contains("source") && j["source"].is_string() ? j["source"].get<std::string>() : std::string("(none)");
      groups[source].push_back(j["probability"].get<double>());
    }
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [source, stats] : corpus_output_stats(groups, o_.threshold)) j[source] = to_json(stats);
    detail::write_json(o_.out, j);
    note_output(o_.out);
    out_ << "corpus-stats: " << groups.size() << " sources\n";
  }

  void baseline_cmd() {
    const auto docs = load(o_.dataset);
    const SignalSpec sig = signal();
    validate_signal(docs, sig);
    if (o_.baseline_model != "logreg" && o_.baseline_model != "nb") {
      throw UsageError("--model must be logreg or nb");
    }
    if (o_.features != "tfidf" && o_.features != "ngrams") throw UsageError("--features must be tfidf or ngrams");

    auto fit_and_score = [&](std::span<const Document> train_docs, std::span<const Document> test_docs) {
      std::vector<std::vector<std::string>> train_tokens, test_tokens;
      for (const auto& d : train_docs) train_tokens.push_back(detail::content_tokens(d, sig));
      for (const auto& d : test_docs) test_tokens.push_back(detail::content_tokens(d, sig));
      const auto y = detail::require_labels(train_docs);
      std::vector<SparseVector> X, Xt;
      std::size_t width = 0;
      if (o_.features == "tfidf") {
        const auto tfidf = fit_tfidf(train_tokens);
        for (const auto& t : train_tokens) X.push_back(transform_tfidf(tfidf, t));
        for (const auto& t : test_tokens) Xt.push_back(transform_tfidf(tfidf, t));
        width = tfidf.num_features();
      } else {
        const auto set = select_top_ngrams(train_tokens, y, o_.top_k);
        for (const auto& t : train_tokens) X.push_back(set.presence(t));
        for (const auto& t : test_tokens) Xt.push_back(set.presence(t));
        width = set.num_features();
      }
      std::vector<double> scores;
      if (o_.baseline_model == "logreg") {
        const auto model = train_logistic(X, y, width, o_.inverse_strength, o_.max_iter);
        for (const auto& x : Xt) scores.push_back(predict_linear(model, x));
      } else {
        const auto model = train_nb(X, y, width, o_.alpha);
        for (const auto& x : Xt) scores.push_back(predict_nb(model, x));
      }
      return scores;
    };

    nlohmann::json j;
    if (!o_.test_dataset.empty()) {
      const auto test_docs = load(o_.test_dataset);
      const auto labels = detail::require_labels(test_docs);
      j = to_json(evaluate(fit_and_score(docs, test_docs), labels, o_.threshold));
    } else {
      const auto labels = detail::require_labels(docs);
      std::vector<std::string> ids;
      for (const auto& d : docs) ids.push_back(d.id);
      FoldTrainer trainer = [&](std::span<const std::size_t> tr, std::span<const std::size_t> te) {
        std::vector<Document> a, b;
        for (std::size_t i : tr) a.push_back(docs[i]);
        for (std::size_t i : te) b.push_back(docs[i]);
        return fit_and_score(a, b);
      };
      j = to_json(cross_validate(trainer, ids, labels, o_.folds, o_.seed, o_.threshold));
    }
    j["model"] = o_.baseline_model;
    j["features"] = o_.features;
    detail::write_json(o_.out, j);
    note_output(o_.out);
    out_ << j.dump() << "\n";
  }

  void neighbors_cmd() {
    std::ifstream in(o_.embeddings);
    if (!in) throw IoError("cannot open embeddings '" + o_.embeddings + "'");
    const auto [vocab, matrix] = read_word2vec(in);
    for (const auto& [tok, sim] : cosine_neighbors(matrix, vocab, to_lower(o_.word), o_.neighbors)) {
      out_ << tok << '\t' << format_double(sim) << '\n';
    }
  }

 private:
  std::vector<std::vector<std::string>> unlabeled_fallback(std::span<const Document> train_docs) const {
    if (o_.embeddings != "sgns-train") return {};
    std::vector<std::vector<std::string>> corpus;
    for (const auto& d : train_docs) corpus.push_back(tokenize(compose_signal(d, signal())));
    return corpus;
  }

  RunOptions o_;
  std::ostream& out_;
  std::map<std::string, std::string> inputs_;
  std::vector<std::string> outputs_;
};

namespace detail {

inline bool has_flag(const std::vector<std::string>& args, const std::string& flag) {
  for (const auto& a : args) {
    if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
  }
  return false;
}

// Prepends flags from a JSON config for keys not already given on the
// command line. Booleans become bare flags.
inline std::vector<std::string> merge_config(std::vector<std::string> args) {
  std::string path;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (path.empty()) return rest;
  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("config '" + path + "': " + e.what());
  }
  if (!cfg.is_object()) throw ParseError("config '" + path + "' must be a JSON object");
  std::vector<std::string> merged(rest.begin(), rest.begin() + (rest.empty() ? 0 : 1));
  for (const auto& [key, value] : cfg.items()) {
    const std::string flag = "--" + key;
    if (has_flag(rest, flag)) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) merged.push_back(flag);
    } else if (value.is_string()) {
      merged.push_back(flag);
      merged.push_back(value.get<std::string>());
    } else if (value.is_number()) {
      merged.push_back(flag);
      merged.push_back(value.dump());
    } else {
      throw ParseError("config key '" + key + "' must be a string, number or boolean");
    }
  }
  if (!rest.empty()) merged.insert(merged.end(), rest.begin() + 1, rest.end());
  return merged;
}

inline std::uint64_t seed_from_env() {
  const char* env = std::getenv(kSeedEnv);
  if (env == nullptr || *env == '\0') return kDefaultSeed;
  std::uint64_t v = 0;
  if (!seqclass::detail::parse_number(std::string_view(env), v)) {
    throw UsageError(std::string(kSeedEnv) + " must be an unsigned integer");
  }
  return v;
}

}  // namespace detail

inline int dispatch(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr);

namespace detail {

inline int replay(const std::string& manifest_path, std::ostream& out, std::ostream& err) {
  const auto m = nlohmann::json::parse(read_file(manifest_path));
  for (const auto& [path, digest] : m.at("inputs").items()) {
    if (file_digest(path) != digest.get<std::string>()) {
      throw DataError("input '" + path + "' changed since the manifest was written");
    }
  }
  auto args = m.at("args").get<std::vector<std::string>>();
  return dispatch(std::move(args), out, err);
}

}  // namespace detail

inline int dispatch(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  RunOptions o;
  CLI::App app{"LSTM and baseline text classification toolkit", "seqclass"};
  app.require_subcommand(1);
  std::string replay_manifest;

  auto add_data = [&](CLI::App* s, bool with_signal) {
    s->add_option("--dataset,--corpus", o.dataset, "JSON-lines dataset")->required();
    if (with_signal) s->add_option("--signal", o.signal, "title | body | title+body | title+body+ba");
  };
  std::map<const CLI::App*, std::string> default_out;
  auto add_common = [&](CLI::App* s, const std::string& out_path) {
    default_out[s] = out_path;
    s->add_option("--out", o.out, "output path");
    s->add_option("--manifest", o.manifest, "manifest path (default: <out>.manifest.json)");
    s->add_option("--seed", o.seed, std::string("random seed (fallback: $") + kSeedEnv + ")");
  };
  auto add_vocab = [&](CLI::App* s) {
    s->add_option("--min-count", o.min_count)->check(CLI::PositiveNumber);
    s->add_option("--max-vocab", o.max_vocab, "0 = unlimited");
  };
  auto add_sgns = [&](CLI::App* s, const std::string& prefix) {
    s->add_option("--" + prefix + "window", o.window)->check(CLI::PositiveNumber);
    s->add_option("--" + prefix + "negatives", o.negatives)->check(CLI::PositiveNumber);
    s->add_option("--" + prefix + "epochs", o.sgns_epochs);
    s->add_option("--" + prefix + "lr", o.sgns_lr);
  };
  auto add_model = [&](CLI::App* s) {
    s->add_option("--hidden", o.hidden, "LSTM memory size")->check(CLI::PositiveNumber);
    s->add_option("--cutoff", o.cutoff, "word cutoff")->check(CLI::PositiveNumber);
    s->add_option("--batch", o.batch, "batch size")->check(CLI::PositiveNumber);
    s->add_option("--epochs", o.epochs);
    s->add_option("--lr", o.lr);
    s->add_option("--optimizer", o.optimizer)->check(CLI::IsMember({"sgd", "adam"}));
    s->add_flag("--bidirectional", o.bidirectional);
    s->add_option("--embed-dim", o.embed_dim)->check(CLI::PositiveNumber);
    s->add_option("--embeddings", o.embeddings, "integrated | pretrained:PATH | sgns-train");
    s->add_option("--unlabeled", o.unlabeled, "unlabeled JSON-lines corpus for sgns-train");
    s->add_option("--threshold", o.threshold);
    add_vocab(s);
    add_sgns(s, "sgns-");
  };

  auto* embed = app.add_subcommand("embed-train", "pretrain SGNS embeddings on unlabeled text");
  add_data(embed, true);
  add_common(embed, "embeddings.txt");
  add_vocab(embed);
  embed->add_option("--dim", o.embed_dim)->check(CLI::PositiveNumber);
  add_sgns(embed, "");

  auto* train_sub = app.add_subcommand("train", "train an LSTM classifier");
  add_data(train_sub, true);
  add_common(train_sub, "model.seqclass");
  add_model(train_sub);
  train_sub->add_option("--log", o.log, "training log path (default: <out>.log.json)");

  auto* eval_sub = app.add_subcommand("eval", "evaluate a model on labeled data");
  add_data(eval_sub, false);
  add_common(eval_sub, "metrics.json");
  eval_sub->add_option("--model", o.model_path)->required();

  auto* cv_sub = app.add_subcommand("cv", "stratified k-fold cross-validation of the LSTM");
  add_data(cv_sub, true);
  add_common(cv_sub, "cv.json");
  add_model(cv_sub);
  cv_sub->add_option("--folds", o.folds)->check(CLI::Range(2, 1000));

  auto* predict_sub = app.add_subcommand("predict", "score documents");
  add_data(predict_sub, false);
  add_common(predict_sub, "predictions.jsonl");
  predict_sub->add_option("--model", o.model_path)->required();

  auto* stats_sub = app.add_subcommand("corpus-stats", "per-source output statistics of scored documents");
  stats_sub->add_option("--scores", o.scores, "predict output")->required();
  stats_sub->add_option("--threshold", o.threshold);
  add_common(stats_sub, "corpus_stats.json");

  auto* base_sub = app.add_subcommand("baseline", "tf-idf/n-gram logistic regression or naive Bayes");
  add_data(base_sub, true);
  add_common(base_sub, "baseline.json");
  base_sub->add_option("--test", o.test_dataset, "held-out dataset (default: k-fold cross-validation)");
  base_sub->add_option("--model", o.baseline_model, "logreg | nb")->check(CLI::IsMember({"logreg", "nb"}));
  base_sub->add_option("--features", o.features)->check(CLI::IsMember({"tfidf", "ngrams"}));
  base_sub->add_option("--C", o.inverse_strength, "inverse l2 regularization strength");
  base_sub->add_option("--max-iter", o.max_iter);
  base_sub->add_option("--alpha", o.alpha, "naive Bayes smoothing");
  base_sub->add_option("--top-k", o.top_k, "n-grams kept per class");
  base_sub->add_option("--folds", o.folds)->check(CLI::Range(2, 1000));
  base_sub->add_option("--threshold", o.threshold);

  auto* nn_sub = app.add_subcommand("neighbors", "nearest words in a word2vec text file");
  nn_sub->add_option("--embeddings", o.embeddings)->required();
  nn_sub->add_option("--word", o.word)->required();
  nn_sub->add_option("--k", o.neighbors)->check(CLI::PositiveNumber);

  auto* replay_sub = app.add_subcommand("replay", "re-run a command from its manifest");
  replay_sub->add_option("--manifest", replay_manifest)->required();

  try {
    args = detail::merge_config(std::move(args));
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);

    if (replay_sub->parsed()) return detail::replay(replay_manifest, out, err);

    CLI::App* sub = app.get_subcommands().front();
    if (sub != nn_sub && sub->count("--seed") == 0) o.seed = detail::seed_from_env();
    if (o.out.empty() && default_out.count(sub) > 0) o.out = default_out[sub];

    Runner runner(o, out);
    const std::string name = sub->get_name();
    if (sub == train_sub || sub == cv_sub) runner.resolve_embedding_mode(sub->count("--embed-dim") > 0);
    if (sub == embed) runner.embed_train();
    else if (sub == train_sub) runner.train_cmd();
    else if (sub == eval_sub) runner.eval_cmd();
    else if (sub == cv_sub) runner.cv_cmd();
    else if (sub == predict_sub) runner.predict_cmd();
    else if (sub == stats_sub) runner.corpus_stats_cmd();
    else if (sub == base_sub) runner.baseline_cmd();
    else if (sub == nn_sub) {
      runner.neighbors_cmd();
      return 0;
    }

    // Stored args carry the resolved seed so a replay does not depend on the
    // environment.
    std::vector<std::string> stored = args;
    if (!detail::has_flag(stored, "--seed")) {
      stored.push_back("--seed");
      stored.push_back(std::to_string(runner.options().seed));
    }
    const nlohmann::json manifest = {{"command", name},
                                     {"args", stored},
                                     {"seed", runner.options().seed},
                                     {"inputs", runner.inputs()},
                                     {"outputs", runner.outputs()}};
    const std::string manifest_path = o.manifest.empty() ? o.out + ".manifest.json" : o.manifest;
    detail::write_json(manifest_path, manifest);
    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const seqclass::Error& e) {
    err << "data error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    err << "data error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace seqclass::cli
