#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

#include "chulo/candidates.hpp"
#include "chulo/chunking.hpp"
#include "chulo/keyphrase.hpp"
#include "chulo/pipeline.hpp"
#include "chulo/scorer_protocol.hpp"
#include "chulo/synthetic.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace chulo;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kData = CHULO_TEST_DATA;
const std::string kMock = CHULO_MOCK_SCORER;
const std::string kCli = CHULO_CLI;

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::vector<std::string> golden_types() {
  std::ifstream in(kData / "scorer_golden_types.json");
  return json::parse(in).get<std::vector<std::string>>();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("chulo_protocol_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run(const std::string& command) {
  const int status = std::system((command + " >/dev/null 2>&1").c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Keeps the process environment clean when a test sets the scorer variable.
struct ScopedEnv {
  ScopedEnv(const char* name, const std::string& value) : name_(name) { setenv(name, value.c_str(), 1); }
  ~ScopedEnv() { unsetenv(name_); }
  const char* name_;
};

SkpConfig test_skp() {
  SkpConfig cfg;
  cfg.segment_length = 40;
  return cfg;
}

}  // namespace

TEST_CASE("request and response lines round-trip") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-50.0, 0.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto segment = testing::random_document(rng, 1 + rng() % 20);
    std::vector<std::string> prompt = {"the", "document", "mainly", "discusses", "x", "y"};
    const ScoreRequest req{segment, prompt, 4, 2};
    const auto rid = static_cast<std::int64_t>(rng() % 100000);
    const WireRequest back = decode_request(encode_request(rid, req));
    CHECK(back.rid == rid);
    CHECK(back.segment == segment);
    CHECK(back.prompt == prompt);
    CHECK(back.phrase_start == 4);
    CHECK(back.phrase_len == 2);

    WireResponse resp;
    resp.rid = rid;
    resp.token_logprobs = {u(rng), u(rng) * 1e-300, -std::numeric_limits<double>::denorm_min()};
    const WireResponse r2 = decode_response(encode_response(resp));
    CHECK(r2.rid == rid);
    CHECK(r2.token_logprobs == resp.token_logprobs);
    CHECK_FALSE(r2.error);
  }

  const WireResponse err = decode_response(encode_response({5, {}, std::string("boom")}));
  CHECK(err.rid == 5);
  REQUIRE(err.error);
  CHECK(*err.error == "boom");

  CHECK_THROWS_AS(decode_request("{\"rid\": 1}"), ScorerError);
  CHECK_THROWS_AS(decode_request("not json"), ScorerError);
  CHECK_THROWS_AS(decode_response("{\"token_logprobs\": [0.0]}"), ScorerError);
}

TEST_CASE("golden transcript conformance") {
  NgramScorer scorer = NgramScorer::uniform(golden_types());
  const auto requests = read_lines(kData / "scorer_golden_requests.jsonl");
  const auto responses = read_lines(kData / "scorer_golden_responses.jsonl");
  REQUIRE(requests.size() == responses.size());
  for (std::size_t i = 0; i < requests.size(); ++i) {
    CAPTURE(requests[i]);
    const WireResponse got = answer_request_line(requests[i], scorer);
    const WireResponse want = decode_response(responses[i]);
    CHECK(got.rid == want.rid);
    CHECK(got.error.has_value() == want.error.has_value());
    REQUIRE(got.token_logprobs.size() == want.token_logprobs.size());
    for (std::size_t k = 0; k < want.token_logprobs.size(); ++k) {
      CHECK(got.token_logprobs[k] == doctest::Approx(want.token_logprobs[k]).epsilon(1e-12));
      CHECK(got.token_logprobs[k] <= 0.0);
    }
  }
}

TEST_CASE("external scorer matches out-of-order replies by rid") {
  const fs::path types = kData / "scorer_golden_types.json";
  NgramScorer local = NgramScorer::uniform(golden_types());
  for (const std::string order : {"reverse", "fifo"}) {
    CAPTURE(order);
    ExternalScorer remote(kMock + " --types " + types.string() + " --order " + order);
    const std::vector<std::string> seg1 = {"solar", "panel", "solar"};
    const std::vector<std::string> seg2 = {"wind"};
    const std::vector<std::string> seg3 = {"the", "document"};
    const std::vector<std::string> prompt = {"the", "document", "mainly", "discusses", "solar", "panel"};
    const std::vector<ScoreRequest> batch = {
        {seg1, prompt, 4, 2}, {seg2, prompt, 0, 3}, {seg3, prompt, 5, 1}, {seg1, prompt, 1, 1}};
    const auto got = remote.token_logprobs_batch(batch);
    REQUIRE(got.size() == batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      CHECK(got[i] == local.token_logprobs(batch[i]));
    }
    // A second batch on the same process continues the rid sequence.
    CHECK(remote.token_logprobs(batch[2]) == local.token_logprobs(batch[2]));
  }
}

TEST_CASE("external scorer surfaces errors") {
  const fs::path types = kData / "scorer_golden_types.json";
  const std::vector<std::string> ok = {"solar"};
  const std::vector<std::string> bad = {"wind"};
  const std::vector<std::string> prompt = {"solar", "panel"};
  {
    ExternalScorer remote(kMock + " --types " + types.string() + " --fail-word wind");
    const std::vector<ScoreRequest> batch = {{ok, prompt, 0, 2}, {bad, prompt, 0, 2}};
    try {
      remote.token_logprobs_batch(batch);
      FAIL("expected a scorer error");
    } catch (const ScorerError& e) {
      REQUIRE(e.request_index());
      CHECK(*e.request_index() == 1);
    }
  }
  {
    ExternalScorer dead("true");
    CHECK_THROWS_AS(dead.token_logprobs({ok, prompt, 0, 2}), ScorerError);
  }
  {
    // Replies to a rid nobody asked for.
    ExternalScorer liar("cat >/dev/null & echo '{\"rid\": 99, \"token_logprobs\": [-1.0]}'");
    CHECK_THROWS_AS(liar.token_logprobs({ok, prompt, 0, 1}), ScorerError);
  }
}

TEST_CASE("ranking through the mock bridge is bit-identical to the in-process scorer") {
  const fs::path dir = scratch_dir("neutral");
  std::mt19937 rng(17);
  std::vector<std::vector<std::string>> docs;
  for (int i = 0; i < 6; ++i) docs.push_back(testing::random_document(rng, 60 + 25 * i));
  const SkpConfig cfg = test_skp();
  const auto prompt = build_prompt(cfg, "x").tokens;
  NgramScorer local = NgramScorer::train(docs, prompt);
  local.save(dir / "ngram.json");
  ExternalScorer remote(kMock + " --model " + (dir / "ngram.json").string());

  for (const auto& tokens : docs) {
    Document doc;
    for (const auto& t : tokens) doc.tokens.push_back({t, kUnkId});
    const auto tagged = pos_tag(doc, default_tagger());
    const auto candidates = extract_candidates(tagged);
    REQUIRE(!candidates.empty());
    const auto a = rank_keyphrases(tokens, candidates, cfg, local);
    const auto b = rank_keyphrases(tokens, candidates, cfg, remote);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].phrase.surface == b[i].phrase.surface);
      CHECK(a[i].score == b[i].score);
      CHECK(a[i].segment_scores == b[i].segment_scores);
    }
  }
}

TEST_CASE("make_scorer honors the scorer environment variable") {
  const std::vector<std::vector<std::string>> docs = {{"solar", "panel"}};
  unsetenv(kScorerEnvVar);
  CHECK(dynamic_cast<NgramScorer*>(make_scorer({}, docs).get()) != nullptr);
  ScopedEnv env(kScorerEnvVar, kMock + " --types " + (kData / "scorer_golden_types.json").string());
  const auto scorer = make_scorer({}, docs);
  const auto* ext = dynamic_cast<ExternalScorer*>(scorer.get());
  REQUIRE(ext != nullptr);
  CHECK(ext->command().find("--types") != std::string::npos);
}

TEST_CASE("cli: extract-keyphrases and chunk produce consistent files") {
  const fs::path dir = scratch_dir("cli");
  synthetic::DocCorpusOptions opts;
  opts.num_train = 12;
  opts.num_test = 4;
  const auto corpus = synthetic::doc_classification(opts);
  synthetic::write_corpus(corpus, dir);
  const fs::path docs = dir / "train.jsonl";
  const fs::path keys = dir / "keys.jsonl";
  const fs::path chunks = dir / "chunks.bin";

  REQUIRE(run(kCli + " extract-keyphrases --input " + docs.string() + " --output " +
              keys.string() + " --top-n 4") == 0);
  const auto key_lines = read_lines(keys);
  REQUIRE(key_lines.size() == corpus.train.docs.size());
  for (std::size_t i = 0; i < key_lines.size(); ++i) {
    const json j = json::parse(key_lines[i]);
    CHECK(j.at("id") == corpus.train.docs[i].id);
    CHECK(j.at("keyphrases").size() <= 4);
    double prev = 0.0;
    for (const auto& k : j.at("keyphrases")) {
      CHECK(k.at("score").get<double>() <= prev);
      prev = k.at("score").get<double>();
      CHECK(k.at("occurrences").at(0).at(0) == k.at("first_occurrence"));
    }
  }

  REQUIRE(run(kCli + " chunk --input " + docs.string() + " --keys " + keys.string() +
              " --output " + chunks.string() + " --chunk-size 16 --weights 0.8,0.1 --dim 8") == 0);
  std::ifstream in(chunks, std::ios::binary);
  ChunkRecord rec;
  std::size_t count = 0;
  while (read_chunk_record(in, rec)) {
    const auto& doc = corpus.train.docs.at(count);
    const json j = json::parse(key_lines.at(count));
    ++count;
    CHECK(rec.chunk_size == 16);
    CHECK(rec.dim == 8);
    CHECK(rec.num_chunks == (doc.length() + 15) / 16);
    std::vector<std::uint8_t> flags(static_cast<std::size_t>(rec.num_chunks) * 16, 0);
    for (const auto& k : j.at("keyphrases")) {
      for (const auto& s : k.at("occurrences")) {
        for (std::size_t t = s.at(0); t <= s.at(1).get<std::size_t>(); ++t) flags[t] = 1;
      }
    }
    CHECK(rec.keyphrase_flags == flags);
  }
  CHECK(count == corpus.train.docs.size());

  // Same keys through the mock bridge replaying the built-in model.
  std::vector<std::vector<std::string>> surfaces;
  for (const auto& d : corpus.train.docs) surfaces.push_back(d.surfaces());
  NgramScorer::train(surfaces, build_prompt(SkpConfig{}, "x").tokens).save(dir / "ngram.json");
  const fs::path keys_ext = dir / "keys_ext.jsonl";
  {
    ScopedEnv env(kScorerEnvVar, kMock + " --model " + (dir / "ngram.json").string());
    REQUIRE(run(kCli + " extract-keyphrases --input " + docs.string() + " --output " +
                keys_ext.string() + " --top-n 4") == 0);
  }
  CHECK(slurp(keys_ext) == slurp(keys));
}

TEST_CASE("cli exit codes") {
  const fs::path dir = scratch_dir("exit");
  CHECK(run(kCli + " --no-such-flag") == 2);
  CHECK(run(kCli + " extract-keyphrases --input " + (dir / "missing.jsonl").string() +
            " --output " + (dir / "k.jsonl").string()) == 3);
  {
    std::ofstream(dir / "bad.cfg") << "train.learning_rate = fast\n";
  }
  CHECK(run(kCli + " train --config " + (dir / "bad.cfg").string() + " --output " +
            (dir / "run").string()) == 2);
  {
    std::ofstream(dir / "broken.jsonl") << "{\"id\": \"a\", \"text\": \"fine\"}\n{oops\n";
  }
  CHECK(run(kCli + " extract-keyphrases --input " + (dir / "broken.jsonl").string() +
            " --output " + (dir / "k.jsonl").string()) == 3);
  CHECK(run(kCli + " gradcheck --mode doc-single --coords 3") == 0);
  CHECK(run(kCli + " gradcheck --mode doc-single --coords 3 --tolerance 0") == 4);
  CHECK(run(kCli + " selftest") == 0);
  CHECK(run(kCli + " report --input " + (dir / "broken.jsonl").string()) == 3);
}
