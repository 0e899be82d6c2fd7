#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "seqclass/cli.hpp"
#include "support.hpp"

using namespace seqclass;
using fixtures::ScratchDir;
using fixtures::slurp;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::dispatch(std::move(args), out, err);
  return {code, out.str(), err.str()};
}

nlohmann::json read_json(const std::string& path) { return nlohmann::json::parse(slurp(path)); }

// Fast settings that still separate the keyword corpus.
std::vector<std::string> small_model_flags() {
  return {"--hidden", "16", "--embed-dim", "16", "--cutoff", "30", "--batch", "20",
          "--epochs", "50", "--lr", "0.01", "--signal", "title"};
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

class CliTest : public ::testing::Test {
 protected:
  CliTest() : dir_("cli") {
    fixtures::write_jsonl(path("train.jsonl"), fixtures::keyword_corpus(200, 1, "tr"));
    fixtures::write_jsonl(path("test.jsonl"), fixtures::keyword_corpus(100, 2, "te"));
    fixtures::write_jsonl(path("tiny.jsonl"), fixtures::keyword_corpus(20, 3, "ti"));
  }
  std::string path(const std::string& name) const { return dir_.file(name); }

  ScratchDir dir_;
};

}  // namespace

TEST_F(CliTest, UsageErrorsExitOne) {
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({"train", "--dataset", path("tiny.jsonl"), "--no-such-flag"}).code, 1);
  EXPECT_EQ(run({"train"}).code, 1);
  EXPECT_EQ(run({"train", "--dataset", path("tiny.jsonl"), "--signal", "content"}).code, 1);
  EXPECT_EQ(run({"train", "--dataset", path("tiny.jsonl"), "--embeddings", "magic"}).code, 1);
  EXPECT_EQ(run({"train", "--dataset", path("tiny.jsonl"), "--unlabeled", path("tiny.jsonl")}).code, 1);
  EXPECT_EQ(run({"train", "--dataset", path("tiny.jsonl"), "--optimizer", "rmsprop"}).code, 1);
  EXPECT_EQ(run({"train", "--dataset", path("tiny.jsonl"), "--threshold", "1.5", "--out", path("m")}).code, 1);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST_F(CliTest, DataErrorsExitTwo) {
  EXPECT_EQ(run({"train", "--dataset", path("missing.jsonl"), "--out", path("m")}).code, 2);
  {
    std::ofstream bad(path("bad.jsonl"));
    bad << R"({"id":"a","title":"x","label":7})" << '\n';
  }
  const auto r = run({"train", "--dataset", path("bad.jsonl"), "--out", path("m")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("line 1"), std::string::npos);
  EXPECT_EQ(run({"train", "--dataset", path("tiny.jsonl"), "--embeddings", "pretrained:" + path("none.txt")}).code,
            2);
  EXPECT_EQ(run({"eval", "--model", path("none.model"), "--dataset", path("tiny.jsonl")}).code, 2);
  EXPECT_EQ(run({"train", "--dataset", path("tiny.jsonl"), "--signal", "title+body+ba", "--out", path("m")}).code,
            2);
}

TEST_F(CliTest, TrainEvalPredictCorpusStats) {
  const auto model = path("model.seqclass");
  auto r = run(concat({"train", "--dataset", path("train.jsonl"), "--out", model, "--seed", "4"}, small_model_flags()));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(model));
  const auto log = read_json(model + ".log.json");
  EXPECT_EQ(log["epoch_loss"].size(), 50u);
  const auto manifest = read_json(model + ".manifest.json");
  EXPECT_EQ(manifest["command"], "train");
  EXPECT_EQ(manifest["seed"], 4);
  EXPECT_TRUE(manifest["inputs"].contains(path("train.jsonl")));

  r = run({"eval", "--model", model, "--dataset", path("test.jsonl"), "--out", path("metrics.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto metrics = read_json(path("metrics.json"));
  EXPECT_GE(metrics["auc"].get<double>(), 0.95);
  EXPECT_EQ(metrics["n"], 100);

  // two synthetic sources
  auto docs = fixtures::keyword_corpus(40, 8, "src");
  for (std::size_t i = 0; i < docs.size(); ++i) docs[i].source = i < 20 ? "left" : "right";
  docs[3].source.reset();
  fixtures::write_jsonl(path("sources.jsonl"), docs);
  r = run({"predict", "--model", model, "--dataset", path("sources.jsonl"), "--out", path("pred.jsonl")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(slurp(path("pred.jsonl")));
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("id") && j.contains("probability") && j.contains("class") && j.contains("source"));
    EXPECT_EQ(j["class"].get<int>(), j["probability"].get<double>() > 0.5 ? 1 : 0);
    ++n;
  }
  EXPECT_EQ(n, 40u);

  r = run({"corpus-stats", "--scores", path("pred.jsonl"), "--out", path("stats.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto stats = read_json(path("stats.json"));
  for (const char* source : {"left", "right", "(none)"}) {
    ASSERT_TRUE(stats.contains(source)) << source;
    for (const char* key : {"mean", "median", "n_below", "n_above", "frac_below", "frac_above"}) {
      EXPECT_TRUE(stats[source].contains(key)) << key;
    }
  }
  EXPECT_EQ(stats["left"]["count"].get<int>() + stats["right"]["count"].get<int>() + stats["(none)"]["count"].get<int>(),
            40);
}

TEST_F(CliTest, TrainIsDeterministicAndReplays) {
  const auto flags = std::vector<std::string>{"--hidden", "4", "--embed-dim", "6", "--epochs", "2", "--batch", "7"};
  ASSERT_EQ(run(concat({"train", "--dataset", path("tiny.jsonl"), "--out", path("a.model")}, flags)).code, 0);
  ASSERT_EQ(run(concat({"train", "--dataset", path("tiny.jsonl"), "--out", path("b.model")}, flags)).code, 0);
  EXPECT_EQ(slurp(path("a.model")), slurp(path("b.model")));

  const auto original = slurp(path("a.model"));
  std::filesystem::remove(path("a.model"));
  const auto r = run({"replay", "--manifest", path("a.model.manifest.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(path("a.model")), original);

  // replay refuses changed inputs
  fixtures::write_jsonl(path("tiny.jsonl"), fixtures::keyword_corpus(20, 99, "ti"));
  EXPECT_EQ(run({"replay", "--manifest", path("a.model.manifest.json")}).code, 2);
}

TEST_F(CliTest, EmbedTrainIsDeterministicAndFeedsTrain) {
  const auto base = std::vector<std::string>{"--dim", "8", "--epochs", "2", "--window", "2"};
  ASSERT_EQ(run(concat({"embed-train", "--corpus", path("tiny.jsonl"), "--out", path("e1.txt")}, base)).code, 0);
  ASSERT_EQ(run(concat({"embed-train", "--corpus", path("tiny.jsonl"), "--out", path("e2.txt")}, base)).code, 0);
  EXPECT_EQ(slurp(path("e1.txt")), slurp(path("e2.txt")));
  EXPECT_TRUE(std::filesystem::exists(path("e1.txt.manifest.json")));

  // embed dim inferred from the vector file; large memory size and cutoff
  const auto r = run({"train", "--dataset", path("tiny.jsonl"), "--signal", "title+body", "--hidden", "800",
                      "--cutoff", "800", "--batch", "100", "--epochs", "1", "--embeddings",
                      "pretrained:" + path("e1.txt"), "--out", path("big.model")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(path("big.model"), std::ios::binary);
  const auto f = load_model(in);
  EXPECT_EQ(f.model.config.hidden_size, 800u);
  EXPECT_EQ(f.model.config.cutoff, 800u);
  EXPECT_EQ(f.model.config.embed_dim, 8u);
  EXPECT_DOUBLE_EQ(read_json(path("big.model.log.json"))["embedding_coverage"].get<double>(), 1.0);

  EXPECT_EQ(run({"train", "--dataset", path("tiny.jsonl"), "--embed-dim", "9", "--embeddings",
                 "pretrained:" + path("e1.txt"), "--out", path("bad.model")})
                .code,
            2);
}

TEST_F(CliTest, SgnsTrainMode) {
  const auto r = run({"train", "--dataset", path("tiny.jsonl"), "--embeddings", "sgns-train", "--unlabeled",
                      path("train.jsonl"), "--embed-dim", "8", "--hidden", "4", "--epochs", "1", "--sgns-epochs", "1",
                      "--out", path("sg.model")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto log = read_json(path("sg.model.log.json"));
  EXPECT_EQ(log["sgns_epoch_loss"].size(), 1u);
}

TEST_F(CliTest, CrossValidation) {
  const auto r = run({"cv", "--dataset", path("tiny.jsonl"), "--folds", "4", "--hidden", "4", "--embed-dim", "6",
                      "--epochs", "2", "--out", path("cv.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = read_json(path("cv.json"));
  EXPECT_EQ(j["per_fold"].size(), 4u);
  EXPECT_TRUE(j.contains("mean") && j.contains("std"));
  EXPECT_EQ(j["mean"]["n"], 20);
}

TEST_F(CliTest, Baselines) {
  auto r = run({"baseline", "--dataset", path("train.jsonl"), "--test", path("test.jsonl"), "--out", path("lr.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_GE(read_json(path("lr.json"))["auc"].get<double>(), 0.95);

  r = run({"baseline", "--dataset", path("train.jsonl"), "--model", "nb", "--folds", "5", "--out", path("nb.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_json(path("nb.json"))["per_fold"].size(), 5u);

  r = run({"baseline", "--dataset", path("train.jsonl"), "--test", path("test.jsonl"), "--features", "ngrams",
           "--top-k", "50", "--out", path("ng.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(run({"baseline", "--dataset", path("train.jsonl"), "--model", "svm"}).code, 1);
}

TEST_F(CliTest, Neighbors) {
  {
    std::ofstream out(path("vec.txt"));
    out << "3 2\nking 1 0\nqueen 0.9 0.1\napple 0 1\n";
  }
  const auto r = run({"neighbors", "--embeddings", path("vec.txt"), "--word", "King", "--k", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.substr(0, 6), "queen\t");
  EXPECT_EQ(run({"neighbors", "--embeddings", path("vec.txt"), "--word", "pear"}).code, 2);
}

TEST_F(CliTest, SeedFromEnvironment) {
  ::setenv("SEQCLASS_SEED", "1234", 1);
  const auto r = run({"train", "--dataset", path("tiny.jsonl"), "--hidden", "3", "--embed-dim", "4", "--epochs", "1",
                      "--out", path("env.model")});
  ::unsetenv("SEQCLASS_SEED");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto manifest = read_json(path("env.model.manifest.json"));
  EXPECT_EQ(manifest["seed"], 1234);
  const auto args = manifest["args"].get<std::vector<std::string>>();
  EXPECT_NE(std::find(args.begin(), args.end(), "1234"), args.end());

  ::setenv("SEQCLASS_SEED", "nope", 1);
  EXPECT_EQ(run({"train", "--dataset", path("tiny.jsonl"), "--out", path("x.model")}).code, 1);
  ::unsetenv("SEQCLASS_SEED");
}

TEST_F(CliTest, ConfigFileMergesUnderFlags) {
  {
    std::ofstream cfg(path("cfg.json"));
    cfg << R"({"hidden": 3, "embed-dim": 5, "epochs": 1, "bidirectional": true, "seed": 77})";
  }
  const auto r = run({"train", "--config", path("cfg.json"), "--dataset", path("tiny.jsonl"), "--hidden", "2",
                      "--out", path("cfg.model")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(path("cfg.model"), std::ios::binary);
  const auto f = load_model(in);
  EXPECT_EQ(f.model.config.hidden_size, 2u);
  EXPECT_EQ(f.model.config.embed_dim, 5u);
  EXPECT_TRUE(f.model.config.bidirectional);
  EXPECT_EQ(f.model.config.seed, 77u);

  {
    std::ofstream cfg(path("bad.json"));
    cfg << "{not json";
  }
  EXPECT_EQ(run({"train", "--config", path("bad.json"), "--dataset", path("tiny.jsonl")}).code, 2);
}

TEST_F(CliTest, ExecutableExitCodes) {
  const char* bin = std::getenv("SEQCLASS_BIN");
  if (bin == nullptr) GTEST_SKIP() << "SEQCLASS_BIN not set";
  auto status = [&](const std::string& args) {
    const int raw = std::system((std::string(bin) + " " + args + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(raw);
  };
  EXPECT_EQ(status("bogus"), 1);
  EXPECT_EQ(status("eval --model " + path("nope") + " --dataset " + path("tiny.jsonl")), 2);
  EXPECT_EQ(status("train --dataset " + path("tiny.jsonl") + " --hidden 2 --embed-dim 3 --epochs 1 --out " +
                   path("bin.model")),
            0);
}
