#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "chulo/chunking.hpp"
#include "chulo/corpus.hpp"
#include "chulo/keyphrase.hpp"
#include "chulo/model.hpp"
#include "chulo/optim.hpp"

namespace chulo {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses "key = value" lines. '#' starts a comment; blank lines are
/// skipped. Duplicate keys and lines without '=' raise ConfigError with the
/// line number.
std::map<std::string, std::string> parse_key_values(std::string_view text);

enum class RankingMethod { kSkp, kTfidf, kAverage };
RankingMethod parse_ranking_method(std::string_view name);
std::string_view ranking_method_name(RankingMethod method);

struct ExperimentConfig {
  std::filesystem::path train_path;
  std::filesystem::path dev_path;   // optional; empty => hold out dev_fraction of train
  std::filesystem::path test_path;  // optional
  std::filesystem::path labels_path;
  TaskMode task_mode = TaskMode::kDocSingle;
  int min_frequency = 2;

  SkpConfig skp;
  std::size_t max_candidates = kDefaultCandidateCap;
  RankingMethod ranking = RankingMethod::kSkp;

  std::size_t chunk_size = 10;
  WeightConfig weights;

  nn::ModelConfig model;  // num_classes and task_mode come from the data section
  nn::TrainConfig train;
  double dev_fraction = 0.1;

  std::vector<std::size_t> buckets;
  bool exclude_outside = false;  // drop "O" from micro-F1 pools

  /// Weights actually used for pooling: "average" forces a == b.
  WeightConfig effective_weights() const;

  /// Checks invariants; with `check_files`, also that data.train and
  /// data.labels are set and every referenced file exists. Throws ConfigError.
  void validate(bool check_files) const;

  /// Relative paths resolve against `base_dir`.
  static ExperimentConfig parse(std::string_view text,
                                const std::filesystem::path& base_dir = {});
  static ExperimentConfig load(const std::filesystem::path& path);
  /// Canonical text form; parse(to_text()) reproduces the config.
  std::string to_text() const;
};

}  // namespace chulo
