#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace chulo {

/// Fraction of equal positions. Throws std::invalid_argument on a length
/// mismatch; empty input gives 0.
double accuracy(std::span<const int> predictions, std::span<const int> golds);

struct F1Counts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  F1Counts& operator+=(const F1Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  /// 2TP / (2TP + FP + FN); 0 when the denominator is 0.
  double f1() const;
  double precision() const;
  double recall() const;
};

/// Pools (item, label) decisions. `exclude` drops that label from both the
/// predicted and gold side before counting.
F1Counts count_label_sets(std::span<const std::vector<int>> predictions,
                          std::span<const std::vector<int>> golds,
                          std::optional<int> exclude = std::nullopt);
/// Single-label convenience: each item contributes {prediction} vs {gold}.
F1Counts count_labels(std::span<const int> predictions, std::span<const int> golds,
                      std::optional<int> exclude = std::nullopt);

/// Micro-F1 over label sets. Empty input is defined as 0 and logs a warning.
double micro_f1(std::span<const std::vector<int>> predictions,
                std::span<const std::vector<int>> golds, std::optional<int> exclude = std::nullopt);
double micro_f1(std::span<const int> predictions, std::span<const int> golds,
                std::optional<int> exclude = std::nullopt);

enum class MetricKind { kAccuracy, kMicroF1 };
std::string_view metric_name(MetricKind kind);

/// Per-document tallies, enough to recompute any bucket's metric.
struct DocResult {
  std::string id;
  std::size_t length = 0;
  std::size_t correct = 0;  // accuracy numerator
  std::size_t total = 0;    // accuracy denominator
  F1Counts counts;
};

double pooled_metric(MetricKind kind, std::span<const DocResult> docs);

struct BucketMetric {
  std::size_t threshold = 0;
  std::size_t count = 0;
  std::optional<double> metric;  // empty bucket => n/a
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double dev_metric = 0.0;
};

struct MetricsReport {
  MetricKind metric = MetricKind::kAccuracy;
  double overall = 0.0;
  std::vector<BucketMetric> buckets;
  std::vector<EpochRecord> curve;
  std::size_t best_epoch = 0;
  std::uint64_t seed = 0;
  std::string config_fingerprint;
  std::vector<DocResult> docs;
};

/// Buckets of documents strictly longer than each threshold. Thresholds must
/// be sorted ascending.
std::vector<BucketMetric> bucket_metrics(MetricKind kind, std::span<const DocResult> docs,
                                         std::span<const std::size_t> thresholds);

/// Human table: an "All" row then one "> t (count)" row per bucket.
std::string report_table(const MetricsReport& report);
nlohmann::json report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);

/// FNV-1a 64 of the canonical JSON dump, as 16 hex digits.
std::string fingerprint(std::string_view text);
std::string report_fingerprint(const MetricsReport& report);

}  // namespace chulo
