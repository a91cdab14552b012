#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chulo/config.hpp"
#include "chulo/keyphrase.hpp"
#include "chulo/metrics.hpp"
#include "chulo/model.hpp"
#include "chulo/optim.hpp"
#include "chulo/pos_tagger.hpp"
#include "chulo/scorer.hpp"

namespace chulo {

/// A stage failure tagged with the stage name, the document id and an exit
/// category (2 config, 3 data, 4 numeric).
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, std::string doc_id, const std::string& what, int exit_code);
  const std::string& stage() const { return stage_; }
  const std::string& doc_id() const { return doc_id_; }
  int exit_code() const { return exit_code_; }

 private:
  std::string stage_;
  std::string doc_id_;
  int exit_code_;
};

/// Exit category for any exception: 2 config, 3 data, 4 numeric, 1 other.
int exit_code_for(const std::exception& e);

/// Environment variable naming the external scorer command.
inline constexpr const char* kScorerEnvVar = "CHULO_SCORER_CMD";

/// External scorer when CHULO_SCORER_CMD is set, otherwise the built-in
/// n-gram model trained on `training_docs` (prompt words added as types).
std::unique_ptr<LogProbScorer> make_scorer(const SkpConfig& skp,
                                           std::span<const std::vector<std::string>> training_docs);

/// Tag, extract candidates and rank them with `method`; returns the top-n.
/// For "average" nothing is extracted and the result is empty.
std::vector<RankedKeyphrase> select_keyphrases(const Document& doc, RankingMethod method,
                                               const SkpConfig& skp, std::size_t max_candidates,
                                               LogProbScorer* scorer, const CorpusStats* stats,
                                               const Tagger& tagger = default_tagger());

/// Chunks the document (ids must be assigned), flags keyphrase tokens and
/// attaches labels for the task mode.
nn::Sample make_sample(const Document& doc, std::span<const RankedKeyphrase> keyphrases,
                       std::size_t chunk_size, TaskMode mode, std::size_t num_classes);

struct PreparedSplit {
  std::vector<Document> docs;
  std::vector<std::vector<RankedKeyphrase>> keyphrases;
  std::vector<nn::Sample> samples;
};

/// Loaded data plus everything derived from the training split.
struct Experiment {
  ExperimentConfig config;
  LabelSet labels;
  Vocabulary vocab;
  PreparedSplit train, dev, test;
};

/// Loads the splits, holds out a dev split when none is configured, builds
/// the vocabulary on train, ranks keyphrases and builds samples.
Experiment prepare_experiment(const ExperimentConfig& cfg);
/// Same, from in-memory documents (labels already resolved).
Experiment prepare_experiment(const ExperimentConfig& cfg, LabelSet labels,
                              std::vector<Document> train, std::vector<Document> dev,
                              std::vector<Document> test);

/// Deterministic train/dev split: shuffles indices with `seed` and moves
/// round(fraction * size) documents (at least one) to dev.
void hold_out_dev(std::vector<Document>& train, std::vector<Document>& dev, double fraction,
                  std::uint64_t seed);

MetricKind metric_for(TaskMode mode);

/// Per-document evaluation: argmax for single-label tasks, score > 0 for
/// multi-label.
DocResult evaluate_sample(const nn::Model& model, const nn::Sample& sample,
                          const WeightConfig& weights, std::optional<int> exclude,
                          std::string id = {});

/// Overall metric plus buckets over the given samples.
MetricsReport evaluate_samples(const nn::Model& model, std::span<const nn::Sample> samples,
                               const WeightConfig& weights, std::span<const std::size_t> buckets,
                               std::optional<int> exclude);

/// Strict-improvement early stopping.
class EarlyStopper {
 public:
  explicit EarlyStopper(std::size_t patience) : patience_(patience) {}
  /// Records the metric of `epoch`; returns true when it is a new best.
  bool update(std::size_t epoch, double metric);
  bool should_stop() const { return since_best_ >= patience_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_metric() const { return best_; }

 private:
  std::size_t patience_;
  std::size_t since_best_ = 0;
  std::size_t best_epoch_ = 0;
  double best_ = 0.0;
  bool seen_ = false;
};

struct TrainResult {
  nn::Model model;       // weights from the best dev epoch
  nn::AdamState state;   // optimizer state at that epoch
  MetricsReport report;  // curve, best epoch, overall = best dev metric
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// The training loop: shuffled mini-batches, AdamW with the configured
/// schedule, dev evaluation every epoch and early stopping.
TrainResult train_model(std::span<const nn::Sample> train, std::span<const nn::Sample> dev,
                        const nn::ModelConfig& model_cfg, const nn::TrainConfig& train_cfg,
                        const WeightConfig& weights, std::size_t vocab_size,
                        std::optional<int> exclude, const EpochCallback& on_epoch = {});

/// train_model over a prepared experiment, then evaluation on its test split
/// (or dev when there is no test split). The returned report carries the
/// training curve together with the test metrics.
TrainResult run_experiment(const Experiment& exp, const EpochCallback& on_epoch = {});

/// Writes model.ckpt, vocab.json, labels.json, config.txt, report.json and
/// report.txt into `dir`.
void save_run(const std::filesystem::path& dir, const Experiment& exp, const TrainResult& result);

/// What save_run wrote, minus the report.
struct SavedRun {
  nn::Model model;
  nn::AdamState state;
  Vocabulary vocab;
  LabelSet labels;
};
SavedRun load_run(const std::filesystem::path& dir);

/// Throws DataError when `run` cannot evaluate `exp`: different label set,
/// vocabulary, task mode or class count.
void check_compatible(const SavedRun& run, const Experiment& exp);

/// Test-split metrics of a saved run (dev when there is no test split).
MetricsReport evaluate_run(const SavedRun& run, const Experiment& exp);

}  // namespace chulo
