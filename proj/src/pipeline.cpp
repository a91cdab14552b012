#include "chulo/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>

#include "chulo/candidates.hpp"
#include "chulo/gradcheck.hpp"
#include "chulo/scorer_protocol.hpp"

namespace chulo {

StageError::StageError(std::string stage, std::string doc_id, const std::string& what,
                       int exit_code)
    : std::runtime_error("stage " + stage + (doc_id.empty() ? "" : ", document " + doc_id) +
                         ": " + what),
      stage_(std::move(stage)),
      doc_id_(std::move(doc_id)),
      exit_code_(exit_code) {}

int exit_code_for(const std::exception& e) {
  if (const auto* s = dynamic_cast<const StageError*>(&e)) return s->exit_code();
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const std::invalid_argument*>(&e)) {
    return 2;
  }
  if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const ScorerError*>(&e) ||
      dynamic_cast<const std::out_of_range*>(&e)) {
    return 3;
  }
  if (dynamic_cast<const nn::NumericError*>(&e)) return 4;
  return 1;
}

namespace {

template <class F>
auto run_stage(const std::string& stage, const std::string& doc_id, F&& f) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, doc_id, e.what(), exit_code_for(e));
  }
}

std::vector<std::vector<std::string>> surfaces_of(std::span<const Document> docs) {
  std::vector<std::vector<std::string>> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(d.surfaces());
  return out;
}

}  // namespace

std::unique_ptr<LogProbScorer> make_scorer(
    const SkpConfig& skp, std::span<const std::vector<std::string>> training_docs) {
  if (const char* cmd = std::getenv(kScorerEnvVar); cmd != nullptr && *cmd != '\0') {
    return std::make_unique<ExternalScorer>(cmd);
  }
  const PromptBundle prompt = build_prompt(skp, "x");
  std::vector<std::string> extra = prompt.tokens;
  return std::make_unique<NgramScorer>(NgramScorer::train(training_docs, extra));
}

std::vector<RankedKeyphrase> select_keyphrases(const Document& doc, RankingMethod method,
                                               const SkpConfig& skp, std::size_t max_candidates,
                                               LogProbScorer* scorer, const CorpusStats* stats,
                                               const Tagger& tagger) {
  if (method == RankingMethod::kAverage) return {};
  const PosTaggedDocument tagged = pos_tag(doc, tagger);
  const auto candidates = extract_candidates(tagged, max_candidates);
  if (candidates.empty()) return {};
  std::vector<RankedKeyphrase> ranked;
  if (method == RankingMethod::kSkp) {
    if (scorer == nullptr) throw std::logic_error("SKP ranking needs a scorer");
    ranked = rank_keyphrases(tagged.tokens, candidates, skp, *scorer);
  } else {
    if (stats == nullptr) throw std::logic_error("tf-idf ranking needs corpus statistics");
    ranked = rank_tfidf_baseline(tagged.tokens, candidates, *stats);
  }
  return select_top_n(ranked, skp.top_n);
}

nn::Sample make_sample(const Document& doc, std::span<const RankedKeyphrase> keyphrases,
                       std::size_t chunk_size, TaskMode mode, std::size_t num_classes) {
  nn::Sample s;
  s.chunks = chunk_document(doc, chunk_size);
  std::vector<CandidatePhrase> phrases;
  phrases.reserve(keyphrases.size());
  for (const auto& k : keyphrases) phrases.push_back(k.phrase);
  mark_keyphrase_tokens(s.chunks, phrases);
  switch (mode) {
    case TaskMode::kDocSingle:
      if (!doc.doc_label) throw DataError("document has no label");
      s.label = *doc.doc_label;
      break;
    case TaskMode::kDocMulti:
      if (!doc.doc_labels) throw DataError("document has no labels");
      s.labels.assign(num_classes, 0);
      for (int l : *doc.doc_labels) s.labels.at(static_cast<std::size_t>(l)) = 1;
      break;
    case TaskMode::kToken:
      if (!doc.token_tags) throw DataError("document has no token tags");
      s.token_labels = *doc.token_tags;
      break;
  }
  return s;
}

void hold_out_dev(std::vector<Document>& train, std::vector<Document>& dev, double fraction,
                  std::uint64_t seed) {
  if (train.size() < 2) throw DataError("need at least two training documents to hold out dev");
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(train.size())));
  count = std::clamp<std::size_t>(count, 1, train.size() - 1);
  std::vector<std::uint8_t> to_dev(train.size(), 0);
  for (std::size_t i = 0; i < count; ++i) to_dev[order[i]] = 1;
  std::vector<Document> kept;
  for (std::size_t i = 0; i < train.size(); ++i) {
    (to_dev[i] ? dev : kept).push_back(std::move(train[i]));
  }
  train = std::move(kept);
}

Experiment prepare_experiment(const ExperimentConfig& cfg) {
  cfg.validate(true);
  LabelSet labels = run_stage("load", "", [&] { return LabelSet::load(cfg.labels_path); });
  auto load = [&](const std::filesystem::path& p) {
    if (p.empty()) return std::vector<Document>{};
    return run_stage("load", "", [&] { return load_dataset(p, cfg.task_mode, labels); });
  };
  auto train = load(cfg.train_path);
  auto dev = load(cfg.dev_path);
  auto test = load(cfg.test_path);
  return prepare_experiment(cfg, std::move(labels), std::move(train), std::move(dev),
                            std::move(test));
}

Experiment prepare_experiment(const ExperimentConfig& cfg, LabelSet labels,
                              std::vector<Document> train, std::vector<Document> dev,
                              std::vector<Document> test) {
  cfg.validate(false);
  Experiment exp;
  exp.config = cfg;
  exp.config.model.task_mode = cfg.task_mode;
  exp.config.model.num_classes = labels.size();
  exp.labels = std::move(labels);
  if (dev.empty()) {
    run_stage("split", "", [&] {
      hold_out_dev(train, dev, cfg.dev_fraction, cfg.train.seed);
      return 0;
    });
  }

  const auto train_surfaces = surfaces_of(train);
  exp.vocab = Vocabulary::build(train_surfaces, cfg.min_frequency);

  std::unique_ptr<LogProbScorer> scorer;
  std::optional<CorpusStats> stats;
  if (cfg.ranking == RankingMethod::kSkp) {
    scorer = run_stage("scorer", "", [&] { return make_scorer(cfg.skp, train_surfaces); });
  } else if (cfg.ranking == RankingMethod::kTfidf) {
    stats = CorpusStats::build(train_surfaces);
  }

  auto prepare = [&](std::vector<Document> docs, PreparedSplit& out) {
    for (auto& doc : docs) {
      exp.vocab.assign_ids(doc);
      auto keys = run_stage("keyphrases", doc.id, [&] {
        return select_keyphrases(doc, cfg.ranking, cfg.skp, cfg.max_candidates, scorer.get(),
                                 stats ? &*stats : nullptr);
      });
      auto sample = run_stage("chunking", doc.id, [&] {
        return make_sample(doc, keys, cfg.chunk_size, cfg.task_mode, exp.labels.size());
      });
      if (sample.chunks.num_chunks > exp.config.model.max_chunks) {
        throw StageError("chunking", doc.id,
                         std::to_string(sample.chunks.num_chunks) + " chunks exceed max_chunks " +
                             std::to_string(exp.config.model.max_chunks) +
                             "; use a larger chunk.size",
                         2);
      }
      out.keyphrases.push_back(std::move(keys));
      out.samples.push_back(std::move(sample));
    }
    out.docs = std::move(docs);
  };
  prepare(std::move(train), exp.train);
  prepare(std::move(dev), exp.dev);
  prepare(std::move(test), exp.test);
  return exp;
}

MetricKind metric_for(TaskMode mode) {
  return mode == TaskMode::kDocSingle ? MetricKind::kAccuracy : MetricKind::kMicroF1;
}

namespace {

int argmax_row(const nn::Matrix& m, Eigen::Index r) {
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < m.cols(); ++c) {
    if (m(r, c) > m(r, best)) best = c;
  }
  return static_cast<int>(best);
}

}  // namespace

DocResult evaluate_sample(const nn::Model& model, const nn::Sample& sample,
                          const WeightConfig& weights, std::optional<int> exclude,
                          std::string id) {
  const nn::Matrix scores = model.predict(sample, weights);
  DocResult r;
  r.id = id.empty() ? sample.chunks.doc_id : std::move(id);
  r.length = sample.chunks.doc_length();
  switch (model.config().task_mode) {
    case TaskMode::kDocSingle: {
      const int pred[] = {argmax_row(scores, 0)};
      const int gold[] = {sample.label};
      r.correct = pred[0] == gold[0];
      r.total = 1;
      r.counts = count_labels(pred, gold, exclude);
      break;
    }
    case TaskMode::kDocMulti: {
      std::vector<int> pred, gold;
      for (Eigen::Index c = 0; c < scores.cols(); ++c) {
        if (scores(0, c) > 0.0) pred.push_back(static_cast<int>(c));
        if (sample.labels[static_cast<std::size_t>(c)]) gold.push_back(static_cast<int>(c));
      }
      r.correct = pred == gold;
      r.total = 1;
      const std::vector<int> p[] = {pred}, g[] = {gold};
      r.counts = count_label_sets(p, g, exclude);
      break;
    }
    case TaskMode::kToken: {
      std::vector<int> pred(static_cast<std::size_t>(scores.rows()));
      for (Eigen::Index t = 0; t < scores.rows(); ++t) pred[static_cast<std::size_t>(t)] = argmax_row(scores, t);
      for (std::size_t t = 0; t < pred.size(); ++t) r.correct += pred[t] == sample.token_labels[t];
      r.total = pred.size();
      r.counts = count_labels(pred, sample.token_labels, exclude);
      break;
    }
  }
  return r;
}

MetricsReport evaluate_samples(const nn::Model& model, std::span<const nn::Sample> samples,
                               const WeightConfig& weights, std::span<const std::size_t> buckets,
                               std::optional<int> exclude) {
  MetricsReport report;
  report.metric = metric_for(model.config().task_mode);
  for (const auto& s : samples) {
    report.docs.push_back(run_stage("evaluate", s.chunks.doc_id,
                                    [&] { return evaluate_sample(model, s, weights, exclude); }));
  }
  report.overall = pooled_metric(report.metric, report.docs);
  report.buckets = bucket_metrics(report.metric, report.docs, buckets);
  return report;
}

bool EarlyStopper::update(std::size_t epoch, double metric) {
  if (!seen_ || metric > best_) {
    seen_ = true;
    best_ = metric;
    best_epoch_ = epoch;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

TrainResult train_model(std::span<const nn::Sample> train, std::span<const nn::Sample> dev,
                        const nn::ModelConfig& model_cfg, const nn::TrainConfig& train_cfg,
                        const WeightConfig& weights, std::size_t vocab_size,
                        std::optional<int> exclude, const EpochCallback& on_epoch) {
  if (train.empty()) throw DataError("training split is empty");
  if (dev.empty()) throw DataError("dev split is empty");
  train_cfg.validate();

  TrainResult result{nn::Model(model_cfg, vocab_size, train_cfg.seed), {}, {}};
  nn::Model model = result.model;
  nn::AdamState state = nn::AdamState::zeros_like(model.params());
  result.state = state;

  const std::size_t batch = train_cfg.batch_size;
  const std::size_t steps_per_epoch = (train.size() + batch - 1) / batch;
  const std::size_t total_steps = steps_per_epoch * train_cfg.max_epochs;
  std::size_t global_step = 0;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  nn::Gradients grads = nn::Gradients::zeros_like(model.params());
  EarlyStopper stopper(train_cfg.patience);
  result.report.metric = metric_for(model_cfg.task_mode);
  result.report.seed = train_cfg.seed;

  for (std::size_t epoch = 1; epoch <= train_cfg.max_epochs; ++epoch) {
    std::seed_seq seq{static_cast<std::uint32_t>(train_cfg.seed),
                      static_cast<std::uint32_t>(train_cfg.seed >> 32),
                      static_cast<std::uint32_t>(epoch), 0x5eedu};
    std::mt19937_64 shuffle_rng(seq);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::vector<const nn::Sample*> items;
      for (std::size_t i = start; i < end; ++i) items.push_back(&train[order[i]]);
      grads.set_zero();
      const nn::DropoutKey key{train_cfg.seed, epoch, start};
      const double loss = run_stage("train", items.front()->chunks.doc_id, [&] {
        return nn::batch_loss(model, items, weights, &grads, &key);
      });
      loss_sum += loss * static_cast<double>(items.size());
      nn::adamw_step(model.params(), grads, state, train_cfg, global_step, total_steps);
      ++global_step;
    }
    const double train_loss = loss_sum / static_cast<double>(train.size());
    if (!std::isfinite(train_loss)) {
      throw nn::NumericError("training loss is not finite at epoch " + std::to_string(epoch));
    }

    std::vector<DocResult> dev_results;
    for (const auto& s : dev) dev_results.push_back(evaluate_sample(model, s, weights, exclude));
    const EpochRecord record{epoch, train_loss, pooled_metric(result.report.metric, dev_results)};
    result.report.curve.push_back(record);
    if (on_epoch) on_epoch(record);

    if (stopper.update(epoch, record.dev_metric)) {
      result.model = model;
      result.state = state;
    }
    if (stopper.should_stop()) break;
  }
  result.report.best_epoch = stopper.best_epoch();
  result.report.overall = stopper.best_metric();
  return result;
}

namespace {

std::optional<int> excluded_label(const Experiment& exp) {
  if (!exp.config.exclude_outside) return std::nullopt;
  return exp.labels.outside_index();
}

const std::vector<nn::Sample>& eval_split(const Experiment& exp) {
  return exp.test.samples.empty() ? exp.dev.samples : exp.test.samples;
}

}  // namespace

TrainResult run_experiment(const Experiment& exp, const EpochCallback& on_epoch) {
  const auto& cfg = exp.config;
  const auto exclude = excluded_label(exp);
  const WeightConfig weights = cfg.effective_weights();
  TrainResult result = train_model(exp.train.samples, exp.dev.samples, cfg.model, cfg.train,
                                   weights, exp.vocab.size(), exclude, on_epoch);
  MetricsReport report =
      evaluate_samples(result.model, eval_split(exp), weights, cfg.buckets, exclude);
  report.curve = std::move(result.report.curve);
  report.best_epoch = result.report.best_epoch;
  report.seed = cfg.train.seed;
  report.config_fingerprint = fingerprint(cfg.to_text());
  result.report = std::move(report);
  return result;
}

void save_run(const std::filesystem::path& dir, const Experiment& exp, const TrainResult& result) {
  std::filesystem::create_directories(dir);
  nn::save_checkpoint(dir / "model.ckpt", result.model, result.state);
  exp.vocab.save(dir / "vocab.json");
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream out(dir / name);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    out << text;
  };
  write("labels.json", exp.labels.to_json() + "\n");
  write("config.txt", exp.config.to_text());
  write("report.json", report_to_json(result.report).dump(2) + "\n");
  write("report.txt", report_table(result.report));
}

SavedRun load_run(const std::filesystem::path& dir) {
  SavedRun run;
  nn::load_checkpoint(dir / "model.ckpt", run.model, &run.state);
  run.vocab = Vocabulary::load(dir / "vocab.json");
  run.labels = LabelSet::load(dir / "labels.json");
  return run;
}

void check_compatible(const SavedRun& run, const Experiment& exp) {
  if (!(run.labels == exp.labels)) throw DataError("label set differs from the saved run");
  if (!(run.vocab == exp.vocab)) throw DataError("vocabulary differs from the saved run");
  const auto& m = run.model.config();
  if (m.task_mode != exp.config.task_mode) throw DataError("task mode differs from the saved run");
  if (m.num_classes != exp.labels.size()) {
    throw DataError("checkpoint has " + std::to_string(m.num_classes) + " classes, label set has " +
                    std::to_string(exp.labels.size()));
  }
  if (run.model.vocab_size() != exp.vocab.size()) {
    throw DataError("checkpoint vocabulary size differs from vocab.json");
  }
}

MetricsReport evaluate_run(const SavedRun& run, const Experiment& exp) {
  check_compatible(run, exp);
  MetricsReport report = evaluate_samples(run.model, eval_split(exp), exp.config.effective_weights(),
                                          exp.config.buckets, excluded_label(exp));
  report.seed = exp.config.train.seed;
  report.config_fingerprint = fingerprint(exp.config.to_text());
  return report;
}

}  // namespace chulo
