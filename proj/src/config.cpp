#include "chulo/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace chulo {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<std::size_t> to_size_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(to_size(key, item));
  }
  return out;
}

struct Field {
  std::string_view key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <class Get>
Field size_field(std::string_view key, Get member) {
  return {key,
          [key, member](ExperimentConfig& c, const std::string& v) {
            member(c) = to_size(std::string(key), v);
          },
          [member](const ExperimentConfig& c) {
            return std::to_string(member(c));
          }};
}

template <class Get>
Field double_field(std::string_view key, Get member) {
  return {key,
          [key, member](ExperimentConfig& c, const std::string& v) {
            member(c) = to_double(std::string(key), v);
          },
          [member](const ExperimentConfig& c) {
            return format_double(member(c));
          }};
}

template <class Get>
Field string_field(std::string_view key, Get member) {
  return {key, [member](ExperimentConfig& c, const std::string& v) { member(c) = v; },
          [member](const ExperimentConfig& c) { return member(c); }};
}

template <class Get>
Field path_field(std::string_view key, Get member) {
  return {key, [member](ExperimentConfig& c, const std::string& v) { member(c) = v; },
          [member](const ExperimentConfig& c) {
            return member(c).string();
          }};
}

const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  static const std::vector<Field> table = {
      path_field("data.train", [](auto& c) -> auto& { return c.train_path; }),
      path_field("data.dev", [](auto& c) -> auto& { return c.dev_path; }),
      path_field("data.test", [](auto& c) -> auto& { return c.test_path; }),
      path_field("data.labels", [](auto& c) -> auto& { return c.labels_path; }),
      {"data.task",
       [](C& c, const std::string& v) {
         try {
           c.task_mode = parse_task_mode(v);
         } catch (const std::exception& e) {
           throw ConfigError(std::string("data.task: ") + e.what());
         }
       },
       [](const C& c) { return std::string(task_mode_name(c.task_mode)); }},
      {"data.min_freq",
       [](C& c, const std::string& v) { c.min_frequency = static_cast<int>(to_size("data.min_freq", v)); },
       [](const C& c) { return std::to_string(c.min_frequency); }},
      double_field("data.dev_fraction", [](auto& c) -> auto& { return c.dev_fraction; }),

      double_field("skp.alpha", [](auto& c) -> auto& { return c.skp.alpha; }),
      double_field("skp.gamma", [](auto& c) -> auto& { return c.skp.gamma; }),
      size_field("skp.segment_length", [](auto& c) -> auto& { return c.skp.segment_length; }),
      string_field("skp.prompt_template", [](auto& c) -> auto& { return c.skp.prompt_template; }),
      string_field("skp.category", [](auto& c) -> auto& { return c.skp.category; }),
      size_field("skp.top_n", [](auto& c) -> auto& { return c.skp.top_n; }),
      size_field("skp.max_candidates", [](auto& c) -> auto& { return c.max_candidates; }),
      {"ranking.method",
       [](C& c, const std::string& v) { c.ranking = parse_ranking_method(v); },
       [](const C& c) { return std::string(ranking_method_name(c.ranking)); }},

      size_field("chunk.size", [](auto& c) -> auto& { return c.chunk_size; }),
      double_field("chunk.weight_keyphrase", [](auto& c) -> auto& { return c.weights.keyphrase; }),
      double_field("chunk.weight_other", [](auto& c) -> auto& { return c.weights.non_keyphrase; }),

      size_field("model.d_model", [](auto& c) -> auto& { return c.model.d_model; }),
      size_field("model.n_heads", [](auto& c) -> auto& { return c.model.n_heads; }),
      size_field("model.n_layers_encoder", [](auto& c) -> auto& { return c.model.n_layers_encoder; }),
      size_field("model.n_layers_decoder", [](auto& c) -> auto& { return c.model.n_layers_decoder; }),
      size_field("model.ffn_dim", [](auto& c) -> auto& { return c.model.ffn_dim; }),
      size_field("model.max_chunks", [](auto& c) -> auto& { return c.model.max_chunks; }),
      double_field("model.dropout", [](auto& c) -> auto& { return c.model.dropout_rate; }),
      size_field("model.decoder_window", [](auto& c) -> auto& { return c.model.decoder_window; }),

      double_field("train.learning_rate", [](auto& c) -> auto& { return c.train.learning_rate; }),
      size_field("train.batch_size", [](auto& c) -> auto& { return c.train.batch_size; }),
      size_field("train.max_epochs", [](auto& c) -> auto& { return c.train.max_epochs; }),
      size_field("train.patience", [](auto& c) -> auto& { return c.train.patience; }),
      double_field("train.warmup_fraction", [](auto& c) -> auto& { return c.train.warmup_fraction; }),
      {"train.warmup_shape",
       [](C& c, const std::string& v) {
         try {
           c.train.warmup_shape = nn::parse_warmup_shape(v);
         } catch (const std::exception& e) {
           throw ConfigError(std::string("train.warmup_shape: ") + e.what());
         }
       },
       [](const C& c) { return std::string(nn::warmup_shape_name(c.train.warmup_shape)); }},
      double_field("train.weight_decay", [](auto& c) -> auto& { return c.train.weight_decay; }),
      double_field("train.beta1", [](auto& c) -> auto& { return c.train.beta1; }),
      double_field("train.beta2", [](auto& c) -> auto& { return c.train.beta2; }),
      double_field("train.epsilon", [](auto& c) -> auto& { return c.train.epsilon; }),
      {"train.seed",
       [](C& c, const std::string& v) { c.train.seed = to_size("train.seed", v); },
       [](const C& c) { return std::to_string(c.train.seed); }},

      {"eval.buckets",
       [](C& c, const std::string& v) { c.buckets = to_size_list("eval.buckets", v); },
       [](const C& c) {
         std::string out;
         for (std::size_t i = 0; i < c.buckets.size(); ++i) {
           if (i) out += ",";
           out += std::to_string(c.buckets[i]);
         }
         return out;
       }},
      {"eval.exclude_outside",
       [](C& c, const std::string& v) { c.exclude_outside = to_bool("eval.exclude_outside", v); },
       [](const C& c) { return std::string(c.exclude_outside ? "true" : "false"); }},
  };
  return table;
}

}  // namespace

std::map<std::string, std::string> parse_key_values(std::string_view text) {
  std::map<std::string, std::string> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (!out.emplace(key, trim(line.substr(eq + 1))).second) {
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key " + key);
    }
  }
  return out;
}

RankingMethod parse_ranking_method(std::string_view name) {
  if (name == "skp") return RankingMethod::kSkp;
  if (name == "tfidf") return RankingMethod::kTfidf;
  if (name == "average") return RankingMethod::kAverage;
  throw ConfigError("unknown ranking method: " + std::string(name));
}

std::string_view ranking_method_name(RankingMethod method) {
  switch (method) {
    case RankingMethod::kSkp: return "skp";
    case RankingMethod::kTfidf: return "tfidf";
    case RankingMethod::kAverage: return "average";
  }
  return "?";
}

WeightConfig ExperimentConfig::effective_weights() const {
  if (ranking == RankingMethod::kAverage) return {weights.keyphrase, weights.keyphrase};
  return weights;
}

void ExperimentConfig::validate(bool check_files) const {
  try {
    skp.validate();
    effective_weights().validate();
    model.validate();
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (chunk_size < 1) throw ConfigError("chunk.size must be >= 1");
  if (max_candidates < 1) throw ConfigError("skp.max_candidates must be >= 1");
  if (min_frequency < 1) throw ConfigError("data.min_freq must be >= 1");
  if (!(dev_fraction > 0.0 && dev_fraction < 1.0)) {
    throw ConfigError("data.dev_fraction must be in (0, 1)");
  }
  if (!std::is_sorted(buckets.begin(), buckets.end())) {
    throw ConfigError("eval.buckets must be sorted ascending");
  }
  if (check_files) {
    if (train_path.empty()) throw ConfigError("data.train is required");
    if (labels_path.empty()) throw ConfigError("data.labels is required");
    for (const auto* p : {&train_path, &dev_path, &test_path, &labels_path}) {
      if (!p->empty() && !std::filesystem::exists(*p)) {
        throw ConfigError("referenced file does not exist: " + p->string());
      }
    }
  }
}

ExperimentConfig ExperimentConfig::parse(std::string_view text,
                                         const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  for (const auto& [key, value] : parse_key_values(text)) {
    const auto& table = fields();
    const auto it = std::find_if(table.begin(), table.end(),
                                 [&](const Field& f) { return f.key == key; });
    if (it == table.end()) throw ConfigError("unknown config key: " + key);
    it->set(cfg, value);
  }
  for (auto* p : {&cfg.train_path, &cfg.dev_path, &cfg.test_path, &cfg.labels_path}) {
    if (!p->empty() && p->is_relative() && !base_dir.empty()) *p = base_dir / *p;
  }
  cfg.model.task_mode = cfg.task_mode;
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto cfg = parse(ss.str(), path.parent_path());
  cfg.validate(true);
  return cfg;
}

std::string ExperimentConfig::to_text() const {
  std::string out;
  for (const auto& f : fields()) {
    out += std::string(f.key) + " = " + f.get(*this) + "\n";
  }
  return out;
}

}  // namespace chulo
