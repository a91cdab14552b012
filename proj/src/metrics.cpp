#include "chulo/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <stdexcept>

namespace chulo {

double accuracy(std::span<const int> predictions, std::span<const int> golds) {
  if (predictions.size() != golds.size()) {
    throw std::invalid_argument("accuracy: predictions and golds differ in length");
  }
  if (predictions.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) correct += predictions[i] == golds[i];
  return static_cast<double>(correct) / static_cast<double>(golds.size());
}

double F1Counts::f1() const {
  const std::size_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

double F1Counts::precision() const {
  return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
}

double F1Counts::recall() const {
  return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
}

F1Counts count_label_sets(std::span<const std::vector<int>> predictions,
                          std::span<const std::vector<int>> golds, std::optional<int> exclude) {
  if (predictions.size() != golds.size()) {
    throw std::invalid_argument("micro_f1: predictions and golds differ in length");
  }
  F1Counts c;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    std::vector<int> p = predictions[i], g = golds[i];
    if (exclude) {
      std::erase(p, *exclude);
      std::erase(g, *exclude);
    }
    std::sort(p.begin(), p.end());
    p.erase(std::unique(p.begin(), p.end()), p.end());
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    std::vector<int> both;
    std::set_intersection(p.begin(), p.end(), g.begin(), g.end(), std::back_inserter(both));
    c.tp += both.size();
    c.fp += p.size() - both.size();
    c.fn += g.size() - both.size();
  }
  return c;
}

F1Counts count_labels(std::span<const int> predictions, std::span<const int> golds,
                      std::optional<int> exclude) {
  if (predictions.size() != golds.size()) {
    throw std::invalid_argument("micro_f1: predictions and golds differ in length");
  }
  F1Counts c;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const bool p_counts = !exclude || predictions[i] != *exclude;
    const bool g_counts = !exclude || golds[i] != *exclude;
    if (p_counts && g_counts && predictions[i] == golds[i]) {
      ++c.tp;
      continue;
    }
    c.fp += p_counts;
    c.fn += g_counts;
  }
  return c;
}

double micro_f1(std::span<const std::vector<int>> predictions,
                std::span<const std::vector<int>> golds, std::optional<int> exclude) {
  if (golds.empty()) {
    std::cerr << "warning: micro_f1 on empty input, reporting 0\n";
    return 0.0;
  }
  return count_label_sets(predictions, golds, exclude).f1();
}

double micro_f1(std::span<const int> predictions, std::span<const int> golds,
                std::optional<int> exclude) {
  if (golds.empty()) {
    std::cerr << "warning: micro_f1 on empty input, reporting 0\n";
    return 0.0;
  }
  return count_labels(predictions, golds, exclude).f1();
}

std::string_view metric_name(MetricKind kind) {
  return kind == MetricKind::kAccuracy ? "accuracy" : "micro_f1";
}

double pooled_metric(MetricKind kind, std::span<const DocResult> docs) {
  if (kind == MetricKind::kAccuracy) {
    std::size_t correct = 0, total = 0;
    for (const auto& d : docs) {
      correct += d.correct;
      total += d.total;
    }
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  }
  F1Counts c;
  for (const auto& d : docs) c += d.counts;
  return c.f1();
}

std::vector<BucketMetric> bucket_metrics(MetricKind kind, std::span<const DocResult> docs,
                                         std::span<const std::size_t> thresholds) {
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
    throw std::invalid_argument("bucket thresholds must be sorted ascending");
  }
  std::vector<BucketMetric> out;
  for (const std::size_t t : thresholds) {
    std::vector<DocResult> selected;
    for (const auto& d : docs) {
      if (d.length > t) selected.push_back(d);
    }
    BucketMetric b{t, selected.size(), std::nullopt};
    if (!selected.empty()) b.metric = pooled_metric(kind, selected);
    out.push_back(b);
  }
  return out;
}

std::string report_table(const MetricsReport& report) {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof line, "%-18s %s\n", "Bucket", std::string(metric_name(report.metric)).c_str());
  out << line;
  std::snprintf(line, sizeof line, "%-18s %.4f\n",
                ("All (" + std::to_string(report.docs.size()) + ")").c_str(), report.overall);
  out << line;
  for (const auto& b : report.buckets) {
    const std::string label = "> " + std::to_string(b.threshold) + " (" + std::to_string(b.count) + ")";
    if (b.metric) {
      std::snprintf(line, sizeof line, "%-18s %.4f\n", label.c_str(), *b.metric);
    } else {
      std::snprintf(line, sizeof line, "%-18s n/a\n", label.c_str());
    }
    out << line;
  }
  return out.str();
}

nlohmann::json report_to_json(const MetricsReport& report) {
  nlohmann::json j;
  j["metric"] = metric_name(report.metric);
  j["overall"] = report.overall;
  j["best_epoch"] = report.best_epoch;
  j["seed"] = report.seed;
  j["config_fingerprint"] = report.config_fingerprint;
  j["buckets"] = nlohmann::json::array();
  for (const auto& b : report.buckets) {
    nlohmann::json row = {{"threshold", b.threshold}, {"count", b.count}};
    row["metric"] = b.metric ? nlohmann::json(*b.metric) : nlohmann::json(nullptr);
    j["buckets"].push_back(row);
  }
  j["curve"] = nlohmann::json::array();
  for (const auto& e : report.curve) {
    j["curve"].push_back(
        {{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"dev_metric", e.dev_metric}});
  }
  j["docs"] = nlohmann::json::array();
  for (const auto& d : report.docs) {
    j["docs"].push_back({{"id", d.id},
                         {"length", d.length},
                         {"correct", d.correct},
                         {"total", d.total},
                         {"tp", d.counts.tp},
                         {"fp", d.counts.fp},
                         {"fn", d.counts.fn}});
  }
  return j;
}

MetricsReport report_from_json(const nlohmann::json& j) {
  MetricsReport r;
  const std::string metric = j.at("metric").get<std::string>();
  if (metric == "accuracy") {
    r.metric = MetricKind::kAccuracy;
  } else if (metric == "micro_f1") {
    r.metric = MetricKind::kMicroF1;
  } else {
    throw std::invalid_argument("unknown metric in report: " + metric);
  }
  r.overall = j.at("overall").get<double>();
  r.best_epoch = j.at("best_epoch").get<std::size_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.config_fingerprint = j.at("config_fingerprint").get<std::string>();
  for (const auto& row : j.at("buckets")) {
    BucketMetric b{row.at("threshold").get<std::size_t>(), row.at("count").get<std::size_t>(),
                   std::nullopt};
    if (!row.at("metric").is_null()) b.metric = row.at("metric").get<double>();
    r.buckets.push_back(b);
  }
  for (const auto& e : j.at("curve")) {
    r.curve.push_back({e.at("epoch").get<std::size_t>(), e.at("train_loss").get<double>(),
                       e.at("dev_metric").get<double>()});
  }
  for (const auto& d : j.at("docs")) {
    DocResult doc;
    doc.id = d.at("id").get<std::string>();
    doc.length = d.at("length").get<std::size_t>();
    doc.correct = d.at("correct").get<std::size_t>();
    doc.total = d.at("total").get<std::size_t>();
    doc.counts = {d.at("tp").get<std::size_t>(), d.at("fp").get<std::size_t>(),
                  d.at("fn").get<std::size_t>()};
    r.docs.push_back(std::move(doc));
  }
  return r;
}

std::string fingerprint(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string report_fingerprint(const MetricsReport& report) {
  return fingerprint(report_to_json(report).dump());
}

}  // namespace chulo
