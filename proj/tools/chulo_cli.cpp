#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "chulo/chunking.hpp"
#include "chulo/config.hpp"
#include "chulo/gradcheck.hpp"
#include "chulo/keyphrase.hpp"
#include "chulo/pipeline.hpp"
#include "chulo/synthetic.hpp"

using nlohmann::json;
using namespace chulo;

namespace {

std::ofstream open_output(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> surfaces_of(const std::vector<Document>& docs) {
  std::vector<std::vector<std::string>> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(d.surfaces());
  return out;
}

// ---------------------------------------------------------------------------
// extract-keyphrases

struct ExtractArgs {
  std::string input;
  std::string output;
  std::string method = "skp";
  std::string config;
  std::size_t top_n = 0;  // 0 => from config
};

json keyphrase_json(const RankedKeyphrase& k) {
  json occ = json::array();
  for (const auto& s : k.phrase.all_occurrences) occ.push_back({s.start, s.end});
  return {{"surface", k.phrase.surface},
          {"score", k.score},
          {"first_occurrence", k.phrase.first_occurrence},
          {"occurrences", std::move(occ)}};
}

int run_extract(const ExtractArgs& args) {
  ExperimentConfig cfg;
  if (!args.config.empty()) cfg = ExperimentConfig::parse(read_text(args.config));
  if (args.top_n > 0) cfg.skp.top_n = args.top_n;
  cfg.skp.validate();
  const RankingMethod method = parse_ranking_method(args.method);
  if (method == RankingMethod::kAverage) {
    throw ConfigError("extract-keyphrases supports skp and tfidf");
  }

  const auto docs = load_unlabeled(args.input);
  const auto surfaces = surfaces_of(docs);
  std::unique_ptr<LogProbScorer> scorer;
  CorpusStats stats;
  if (method == RankingMethod::kSkp) {
    scorer = make_scorer(cfg.skp, surfaces);
  } else {
    stats = CorpusStats::build(surfaces);
  }

  auto out = open_output(args.output);
  for (const auto& doc : docs) {
    std::vector<RankedKeyphrase> keys;
    try {
      keys = select_keyphrases(doc, method, cfg.skp, cfg.max_candidates, scorer.get(), &stats);
    } catch (const std::exception& e) {
      throw StageError("keyphrases", doc.id, e.what(), exit_code_for(e));
    }
    json line{{"id", doc.id}, {"keyphrases", json::array()}};
    for (const auto& k : keys) line["keyphrases"].push_back(keyphrase_json(k));
    out << line.dump() << '\n';
  }
  const char* source = method == RankingMethod::kTfidf ? "tf-idf"
                       : std::getenv(kScorerEnvVar)    ? "external scorer"
                                                       : "built-in scorer";
  std::cerr << "extracted keyphrases for " << docs.size() << " documents (" << source << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// chunk

struct ChunkArgs {
  std::string input;
  std::string keys;
  std::string output;
  std::string run_dir;
  std::size_t chunk_size = 10;
  std::vector<double> weights{0.8, 0.1};
  std::size_t dim = 64;
  std::uint64_t seed = 1;
  int min_freq = 1;
};

std::map<std::string, std::vector<CandidatePhrase>> load_keys(const std::string& path) {
  std::map<std::string, std::vector<CandidatePhrase>> out;
  std::istringstream in(read_text(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      auto& phrases = out[j.at("id").get<std::string>()];
      for (const auto& k : j.at("keyphrases")) {
        CandidatePhrase p;
        p.surface = k.at("surface").get<std::string>();
        p.first_occurrence = k.at("first_occurrence").get<std::size_t>();
        for (const auto& s : k.at("occurrences")) {
          p.all_occurrences.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()});
        }
        if (!p.all_occurrences.empty()) {
          p.token_span_length = p.all_occurrences.front().length();
        }
        phrases.push_back(std::move(p));
      }
    } catch (const json::exception& e) {
      throw DataError("bad keyphrase record on line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

int run_chunk(const ChunkArgs& args) {
  if (args.weights.size() != 2) throw ConfigError("--weights takes two values a,b");
  const WeightConfig weights{args.weights[0], args.weights[1]};
  weights.validate();
  if (args.chunk_size == 0) throw ConfigError("--chunk-size must be positive");

  auto docs = load_unlabeled(args.input);
  const auto keys = load_keys(args.keys);

  Vocabulary vocab;
  Eigen::MatrixXd table;
  if (!args.run_dir.empty()) {
    SavedRun run = load_run(args.run_dir);
    vocab = run.vocab;
    table = run.model.param("embedding").value;
  } else {
    vocab = Vocabulary::build(surfaces_of(docs), args.min_freq);
    std::mt19937_64 rng(args.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    table.resize(static_cast<Eigen::Index>(vocab.size()), static_cast<Eigen::Index>(args.dim));
    for (Eigen::Index i = 0; i < table.size(); ++i) table.data()[i] = normal(rng);
  }

  auto out = open_output(args.output, std::ios::binary);
  for (auto& doc : docs) {
    vocab.assign_ids(doc);
    ChunkSequence cs = chunk_document(doc, args.chunk_size);
    try {
      if (const auto it = keys.find(doc.id); it != keys.end()) mark_keyphrase_tokens(cs, it->second);
      write_chunk_record(out, make_chunk_record(cs, embed_document(cs, table, weights)));
    } catch (const std::exception& e) {
      throw StageError("chunking", doc.id, e.what(), exit_code_for(e));
    }
  }
  std::cerr << "wrote " << docs.size() << " chunk records, d=" << table.cols() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train / eval / report

int run_train(const std::string& config_path, const std::string& out_dir, bool quiet) {
  const ExperimentConfig cfg = ExperimentConfig::load(config_path);
  const auto t0 = std::chrono::steady_clock::now();
  const Experiment exp = prepare_experiment(cfg);
  if (!quiet) {
    std::cerr << "train " << exp.train.docs.size() << ", dev " << exp.dev.docs.size() << ", test "
              << exp.test.docs.size() << " documents; vocabulary " << exp.vocab.size() << "\n";
  }
  const TrainResult result = run_experiment(exp, [&](const EpochRecord& e) {
    if (quiet) return;
    std::fprintf(stderr, "epoch %3zu  loss %.5f  dev %.4f\n", e.epoch, e.train_loss,
                 e.dev_metric);
  });
  save_run(out_dir, exp, result);
  std::cout << report_table(result.report);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cerr << "best epoch " << result.report.best_epoch << ", " << secs << " s, saved to "
            << out_dir << "\n";
  return 0;
}

int run_eval(const std::string& config_path, const std::string& run_dir,
             const std::string& output) {
  const ExperimentConfig cfg = ExperimentConfig::load(config_path);
  const Experiment exp = prepare_experiment(cfg);
  const SavedRun run = load_run(run_dir);
  const MetricsReport report = evaluate_run(run, exp);
  std::cout << report_table(report);
  if (!output.empty()) open_output(output) << report_to_json(report).dump(2) << '\n';
  return 0;
}

int run_report(const std::string& input, bool as_json) {
  json j;
  try {
    j = json::parse(read_text(input));
  } catch (const json::exception& e) {
    throw DataError("malformed report " + input + ": " + e.what());
  }
  MetricsReport report;
  try {
    report = report_from_json(j);
  } catch (const json::exception& e) {
    throw DataError("malformed report " + input + ": " + e.what());
  }
  if (as_json) {
    std::cout << report_to_json(report).dump(2) << '\n';
  } else {
    std::cout << report_table(report);
    std::cout << "fingerprint " << report_fingerprint(report) << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// gradcheck / selftest

nn::ModelConfig toy_model(TaskMode mode, std::size_t d_model) {
  nn::ModelConfig c;
  c.d_model = d_model;
  c.n_heads = 2;
  c.n_layers_encoder = 2;
  c.n_layers_decoder = 1;
  c.ffn_dim = 2 * d_model;
  c.max_chunks = 4;
  c.num_classes = 3;
  c.task_mode = mode;
  c.decoder_window = 4;
  return c;
}

// Two chunks of four tokens, every third token flagged.
nn::Sample toy_sample(std::uint64_t seed, std::size_t vocab) {
  std::mt19937_64 rng(seed);
  std::vector<TokenId> ids(8);
  for (auto& t : ids) t = static_cast<TokenId>(2 + rng() % (vocab - 2));
  nn::Sample s;
  s.chunks = chunk_tokens(ids, 4);
  for (std::size_t k = 0; k < ids.size(); ++k) s.chunks.keyphrase_flags[k] = k % 3 == 0;
  s.label = static_cast<int>(rng() % 3);
  s.labels = {1, 0, 1};
  for (std::size_t k = 0; k < ids.size(); ++k) s.token_labels.push_back(static_cast<int>(rng() % 3));
  return s;
}

bool gradcheck_mode(TaskMode mode, std::size_t d_model, std::size_t coords, std::uint64_t seed,
                    double tolerance) {
  constexpr std::size_t kVocab = 24;
  nn::Model model(toy_model(mode, d_model), kVocab, seed);
  const nn::Sample s = toy_sample(seed + 1, kVocab);
  const nn::Sample* batch[] = {&s};
  const auto report = nn::gradient_check(model, batch, {0.8, 0.1}, coords, seed);
  const bool ok = report.max_rel_error <= tolerance;
  std::printf("%-10s %-4s max rel. error %.3e (%s, %zu coordinates)\n",
              std::string(task_mode_name(mode)).c_str(), ok ? "ok" : "FAIL", report.max_rel_error,
              report.worst_group.c_str(), report.entries.size());
  return ok;
}

int run_gradcheck(const std::string& mode, std::size_t d_model, std::size_t coords,
                  std::uint64_t seed, double tolerance) {
  std::vector<TaskMode> modes;
  if (mode == "all") {
    modes = {TaskMode::kDocSingle, TaskMode::kDocMulti, TaskMode::kToken};
  } else {
    modes = {parse_task_mode(mode)};
  }
  bool ok = true;
  for (const TaskMode m : modes) ok = gradcheck_mode(m, d_model, coords, seed, tolerance) && ok;
  return ok ? 0 : 4;
}

int run_selftest() {
  bool all = true;
  auto check = [&](const char* name, bool ok) {
    std::printf("%-4s %s\n", ok ? "ok" : "FAIL", name);
    all = all && ok;
  };

  {
    ChunkSequence cs = chunk_tokens(std::vector<TokenId>{0, 1}, 2);
    cs.keyphrase_flags = {1, 0};
    Eigen::MatrixXd table(2, 2);
    table << 1, 0, 0, 1;
    const auto emb = embed_document(cs, table, {0.8, 0.1});
    check("weighted chunk embedding",
          std::abs(emb.rows(0, 0) - 0.8 / 0.9) < 1e-12 && std::abs(emb.rows(0, 1) - 0.1 / 0.9) < 1e-12);
  }

  synthetic::DocCorpusOptions opts;
  opts.num_train = 40;
  opts.num_test = 12;
  opts.min_length = 60;
  opts.max_length = 120;
  const auto corpus = synthetic::doc_classification(opts);
  ExperimentConfig cfg;
  cfg.model = toy_model(TaskMode::kDocSingle, 16);
  cfg.model.max_chunks = 16;
  cfg.train.max_epochs = 2;
  cfg.train.batch_size = 8;
  cfg.train.learning_rate = 1e-3;
  cfg.buckets = {80};

  {
    const auto exp = prepare_experiment(cfg, corpus.labels, corpus.train.docs, {}, corpus.test.docs);
    bool top_n = true;
    for (const auto& k : exp.train.keyphrases) top_n = top_n && k.size() <= cfg.skp.top_n;
    check("keyphrase selection respects top-n", top_n);
    const auto a = run_experiment(exp);
    const auto b = run_experiment(exp);
    check("training is deterministic",
          report_fingerprint(a.report) == report_fingerprint(b.report));
  }

  for (const TaskMode m : {TaskMode::kDocSingle, TaskMode::kToken}) {
    check(m == TaskMode::kToken ? "gradient check (token)" : "gradient check (document)",
          gradcheck_mode(m, 16, 5, 3, 1e-4));
  }
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Keyphrase-prioritized chunking for long documents"};
  app.require_subcommand(1);

  ExtractArgs ex;
  auto* extract = app.add_subcommand("extract-keyphrases", "rank keyphrases per document");
  extract->add_option("--input", ex.input, "documents (JSON lines)")->required();
  extract->add_option("--output", ex.output, "keys.jsonl")->required();
  extract->add_option("--method", ex.method, "skp or tfidf")
      ->check(CLI::IsMember({"skp", "tfidf"}));
  extract->add_option("--top-n", ex.top_n, "keyphrases kept per document");
  extract->add_option("--config", ex.config, "key-value config (skp.* keys)");

  ChunkArgs ch;
  auto* chunk = app.add_subcommand("chunk", "write weighted chunk embeddings");
  chunk->add_option("--input", ch.input, "documents (JSON lines)")->required();
  chunk->add_option("--keys", ch.keys, "output of extract-keyphrases")->required();
  chunk->add_option("--output", ch.output, "chunks.bin")->required();
  chunk->add_option("--chunk-size", ch.chunk_size, "tokens per chunk");
  chunk->add_option("--weights", ch.weights, "a,b")->delimiter(',')->expected(2);
  auto* run_opt = chunk->add_option("--run", ch.run_dir, "take vocabulary and embeddings from a trained run");
  chunk->add_option("--dim", ch.dim, "random embedding width")->excludes(run_opt);
  chunk->add_option("--seed", ch.seed, "random embedding seed")->excludes(run_opt);
  chunk->add_option("--min-freq", ch.min_freq, "vocabulary cutoff")->excludes(run_opt);

  std::string config_path;
  std::string run_dir;
  std::string output;
  bool quiet = false;
  auto* train = app.add_subcommand("train", "train and save a run");
  train->add_option("--config", config_path, "experiment config")->required();
  train->add_option("--output", run_dir, "run directory")->required();
  train->add_flag("--quiet", quiet, "no per-epoch log");

  auto* eval = app.add_subcommand("eval", "evaluate a saved run");
  eval->add_option("--config", config_path, "experiment config")->required();
  eval->add_option("--run", run_dir, "run directory")->required();
  eval->add_option("--output", output, "report.json");

  std::string report_path;
  bool as_json = false;
  auto* report = app.add_subcommand("report", "render report.json");
  report->add_option("--input", report_path, "report.json")->required();
  report->add_flag("--json", as_json, "print canonical JSON instead of the table");

  std::string gc_mode = "all";
  std::size_t gc_d = 16;
  std::size_t gc_coords = 20;
  std::uint64_t gc_seed = 1;
  double gc_tol = 1e-4;
  auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient check on a toy model");
  grad->add_option("--mode", gc_mode, "doc-single, doc-multi, token or all");
  grad->add_option("--d-model", gc_d, "model width");
  grad->add_option("--coords", gc_coords, "coordinates per parameter group");
  grad->add_option("--seed", gc_seed, "seed");
  grad->add_option("--tolerance", gc_tol, "maximum relative error");

  auto* selftest = app.add_subcommand("selftest", "quick end-to-end checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*extract) return run_extract(ex);
    if (*chunk) return run_chunk(ch);
    if (*train) return run_train(config_path, run_dir, quiet);
    if (*eval) return run_eval(config_path, run_dir, output);
    if (*report) return run_report(report_path, as_json);
    if (*grad) return run_gradcheck(gc_mode, gc_d, gc_coords, gc_seed, gc_tol);
    if (*selftest) return run_selftest();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return 0;
}
