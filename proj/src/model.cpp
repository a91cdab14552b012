#include "chulo/model.hpp"

#include <algorithm>
#include <cmath>

namespace chulo::nn {

namespace {

Matrix normal_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> normal(0.0, stddev);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

// Glorot normal for projections.
Matrix weight_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  return normal_matrix(rows, cols, rng, std::sqrt(2.0 / static_cast<double>(rows + cols)));
}

Matrix zeros(std::size_t rows, std::size_t cols) {
  return Matrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

Matrix ones(std::size_t cols) { return Matrix::Ones(1, static_cast<Eigen::Index>(cols)); }

}  // namespace

void ModelConfig::validate() const {
  if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0) {
    throw std::invalid_argument("d_model must be a positive multiple of n_heads");
  }
  if (max_chunks < 1) throw std::invalid_argument("max_chunks must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw std::invalid_argument("dropout_rate must be in [0, 1)");
  }
  if (ffn_dim == 0) throw std::invalid_argument("ffn_dim must be positive");
  if (num_classes == 0) throw std::invalid_argument("num_classes must be positive");
  if (n_layers_encoder == 0) throw std::invalid_argument("n_layers_encoder must be >= 1");
  if (task_mode == TaskMode::kToken && (n_layers_decoder == 0 || decoder_window == 0)) {
    throw std::invalid_argument("token mode needs n_layers_decoder >= 1 and decoder_window >= 1");
  }
}

std::size_t Model::add_param(std::string name, Matrix value, bool decay) {
  params_.push_back(Parameter{std::move(name), std::move(value), decay});
  return params_.size() - 1;
}

Model::AttentionIdx Model::add_attention(const std::string& prefix, std::mt19937_64& rng) {
  const std::size_t d = config_.d_model;
  AttentionIdx idx{};
  idx.wq = add_param(prefix + ".wq", weight_matrix(d, d, rng), true);
  idx.bq = add_param(prefix + ".bq", zeros(1, d), false);
  idx.wk = add_param(prefix + ".wk", weight_matrix(d, d, rng), true);
  idx.bk = add_param(prefix + ".bk", zeros(1, d), false);
  idx.wv = add_param(prefix + ".wv", weight_matrix(d, d, rng), true);
  idx.bv = add_param(prefix + ".bv", zeros(1, d), false);
  idx.wo = add_param(prefix + ".wo", weight_matrix(d, d, rng), true);
  idx.bo = add_param(prefix + ".bo", zeros(1, d), false);
  return idx;
}

Model::Model(const ModelConfig& config, std::size_t vocab_size, std::uint64_t seed)
    : config_(config), vocab_size_(vocab_size) {
  config_.validate();
  if (vocab_size < 2) throw std::invalid_argument("vocabulary must hold at least PAD and UNK");
  std::mt19937_64 rng(seed);
  const std::size_t d = config_.d_model;
  const std::size_t f = config_.ffn_dim;

  embedding_ = add_param("embedding", normal_matrix(vocab_size, d, rng, 1.0), true);
  chunk_pos_ = add_param("chunk_pos", normal_matrix(config_.max_chunks, d, rng, 1.0), true);
  cls_ = add_param("cls", normal_matrix(1, d, rng, 1.0), true);
  for (std::size_t l = 0; l < config_.n_layers_encoder; ++l) {
    const std::string p = "enc." + std::to_string(l);
    EncoderLayerIdx layer{};
    layer.ln1_g = add_param(p + ".ln1.g", ones(d), false);
    layer.ln1_b = add_param(p + ".ln1.b", zeros(1, d), false);
    layer.attn = add_attention(p + ".attn", rng);
    layer.ln2_g = add_param(p + ".ln2.g", ones(d), false);
    layer.ln2_b = add_param(p + ".ln2.b", zeros(1, d), false);
    layer.w1 = add_param(p + ".ffn.w1", weight_matrix(d, f, rng), true);
    layer.b1 = add_param(p + ".ffn.b1", zeros(1, f), false);
    layer.w2 = add_param(p + ".ffn.w2", weight_matrix(f, d, rng), true);
    layer.b2 = add_param(p + ".ffn.b2", zeros(1, d), false);
    encoder_.push_back(layer);
  }
  enc_ln_g_ = add_param("enc.ln.g", ones(d), false);
  enc_ln_b_ = add_param("enc.ln.b", zeros(1, d), false);

  if (config_.task_mode == TaskMode::kToken) {
    token_pos_ = add_param("token_pos", normal_matrix(config_.decoder_window, d, rng, 1.0), true);
    for (std::size_t l = 0; l < config_.n_layers_decoder; ++l) {
      const std::string p = "dec." + std::to_string(l);
      DecoderLayerIdx layer{};
      layer.ln1_g = add_param(p + ".ln1.g", ones(d), false);
      layer.ln1_b = add_param(p + ".ln1.b", zeros(1, d), false);
      layer.self_attn = add_attention(p + ".self", rng);
      layer.lnc_g = add_param(p + ".lnc.g", ones(d), false);
      layer.lnc_b = add_param(p + ".lnc.b", zeros(1, d), false);
      layer.cross_attn = add_attention(p + ".cross", rng);
      layer.ln2_g = add_param(p + ".ln2.g", ones(d), false);
      layer.ln2_b = add_param(p + ".ln2.b", zeros(1, d), false);
      layer.w1 = add_param(p + ".ffn.w1", weight_matrix(d, f, rng), true);
      layer.b1 = add_param(p + ".ffn.b1", zeros(1, f), false);
      layer.w2 = add_param(p + ".ffn.w2", weight_matrix(f, d, rng), true);
      layer.b2 = add_param(p + ".ffn.b2", zeros(1, d), false);
      decoder_.push_back(layer);
    }
    dec_ln_g_ = add_param("dec.ln.g", ones(d), false);
    dec_ln_b_ = add_param("dec.ln.b", zeros(1, d), false);
  }
  head_w_ = add_param("head.w", weight_matrix(d, config_.num_classes, rng), true);
  head_b_ = add_param("head.b", zeros(1, config_.num_classes), false);
}

std::size_t Model::param_index(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  throw std::out_of_range("no parameter named " + std::string(name));
}

std::vector<std::uint8_t> Model::memory_mask(std::span<const std::uint8_t> chunk_valid) {
  std::vector<std::uint8_t> mask;
  mask.reserve(chunk_valid.size() + 1);
  mask.push_back(1);
  mask.insert(mask.end(), chunk_valid.begin(), chunk_valid.end());
  return mask;
}

Var Model::project(Tape& tape, std::size_t w, std::size_t b, Var x) const {
  return tape.add_row(tape.matmul(x, tape.param(w)), tape.param(b));
}

Var Model::attend(Tape& tape, const AttentionIdx& idx, Var queries, Var keys, Var values,
                  std::span<const std::uint8_t> key_valid, std::vector<Matrix>* probs) const {
  const Var q = project(tape, idx.wq, idx.bq, queries);
  const Var a = tape.attention(q, keys, values, key_valid, static_cast<int>(config_.n_heads), probs);
  return project(tape, idx.wo, idx.bo, a);
}

Var Model::ffn_block(Tape& tape, std::size_t w1, std::size_t b1, std::size_t w2, std::size_t b2,
                     Var x) const {
  return project(tape, w2, b2, tape.gelu(project(tape, w1, b1, x)));
}

Var Model::maybe_dropout(Tape& tape, Var x, std::mt19937_64* rng) const {
  if (rng == nullptr) return x;
  return tape.dropout(x, config_.dropout_rate, *rng);
}

Var Model::encode(Tape& tape, Var chunk_embeddings, std::span<const std::uint8_t> chunk_valid,
                  std::mt19937_64* dropout, AttentionTrace* trace) const {
  const auto m = static_cast<std::size_t>(tape.value(chunk_embeddings).rows());
  if (m > config_.max_chunks) {
    throw std::invalid_argument("document has " + std::to_string(m) + " chunks but max_chunks is " +
                                std::to_string(config_.max_chunks) +
                                "; use a larger chunk_size n");
  }
  if (chunk_valid.size() != m) throw std::invalid_argument("chunk_valid length differs from m");
  const auto mask = memory_mask(chunk_valid);

  Var x = tape.param(cls_);
  if (m > 0) {
    const Var pos = tape.slice_rows(tape.param(chunk_pos_), 0, static_cast<Eigen::Index>(m));
    const Var parts[] = {x, tape.add(chunk_embeddings, pos)};
    x = tape.concat_rows(parts);
  }
  if (trace != nullptr) trace->layers.clear();
  for (const auto& layer : encoder_) {
    std::vector<Matrix>* probs = nullptr;
    if (trace != nullptr) probs = &trace->layers.emplace_back();
    const Var h = tape.layer_norm(x, tape.param(layer.ln1_g), tape.param(layer.ln1_b));
    const Var k = project(tape, layer.attn.wk, layer.attn.bk, h);
    const Var v = project(tape, layer.attn.wv, layer.attn.bv, h);
    x = tape.add(x, maybe_dropout(tape, attend(tape, layer.attn, h, k, v, mask, probs), dropout));
    const Var h2 = tape.layer_norm(x, tape.param(layer.ln2_g), tape.param(layer.ln2_b));
    x = tape.add(x, maybe_dropout(tape, ffn_block(tape, layer.w1, layer.b1, layer.w2, layer.b2, h2),
                                  dropout));
  }
  return tape.layer_norm(x, tape.param(enc_ln_g_), tape.param(enc_ln_b_));
}

Var Model::doc_head(Tape& tape, Var encoded) const {
  if (config_.task_mode == TaskMode::kToken) {
    throw std::logic_error("doc_head needs task mode doc-single or doc-multi");
  }
  return project(tape, head_w_, head_b_, tape.slice_rows(encoded, 0, 1));
}

Var Model::token_decoder(Tape& tape, std::span<const TokenId> ids, Var memory,
                         std::span<const std::uint8_t> memory_valid,
                         std::mt19937_64* dropout) const {
  if (config_.task_mode != TaskMode::kToken) {
    throw std::logic_error("token_decoder needs task mode token");
  }
  if (ids.empty()) return tape.constant(Matrix(0, static_cast<Eigen::Index>(config_.num_classes)));

  // Memory keys and values do not depend on the window.
  std::vector<std::pair<Var, Var>> memory_kv;
  for (const auto& layer : decoder_) {
    const auto& c = layer.cross_attn;
    memory_kv.emplace_back(project(tape, c.wk, c.bk, memory), project(tape, c.wv, c.bv, memory));
  }

  const std::size_t window = config_.decoder_window;
  std::vector<Var> outputs;
  for (std::size_t start = 0; start < ids.size(); start += window) {
    const std::size_t len = std::min(window, ids.size() - start);
    const std::vector<std::uint8_t> self_mask(len, 1);
    const Var tokens = tape.gather_rows(embedding_, ids.subspan(start, len));
    const Var pos = tape.slice_rows(tape.param(token_pos_), 0, static_cast<Eigen::Index>(len));
    Var x = tape.add(tokens, pos);
    for (std::size_t l = 0; l < decoder_.size(); ++l) {
      const auto& layer = decoder_[l];
      const Var h = tape.layer_norm(x, tape.param(layer.ln1_g), tape.param(layer.ln1_b));
      const auto& s = layer.self_attn;
      const Var k = project(tape, s.wk, s.bk, h);
      const Var v = project(tape, s.wv, s.bv, h);
      x = tape.add(x, maybe_dropout(tape, attend(tape, s, h, k, v, self_mask, nullptr), dropout));
      const Var hc = tape.layer_norm(x, tape.param(layer.lnc_g), tape.param(layer.lnc_b));
      const Var cross = attend(tape, layer.cross_attn, hc, memory_kv[l].first,
                               memory_kv[l].second, memory_valid, nullptr);
      x = tape.add(x, maybe_dropout(tape, cross, dropout));
      const Var h2 = tape.layer_norm(x, tape.param(layer.ln2_g), tape.param(layer.ln2_b));
      x = tape.add(x, maybe_dropout(
                          tape, ffn_block(tape, layer.w1, layer.b1, layer.w2, layer.b2, h2), dropout));
    }
    x = tape.layer_norm(x, tape.param(dec_ln_g_), tape.param(dec_ln_b_));
    outputs.push_back(project(tape, head_w_, head_b_, x));
  }
  return outputs.size() == 1 ? outputs.front() : tape.concat_rows(outputs);
}

Var Model::forward(Tape& tape, const Sample& sample, const WeightConfig& weights,
                   std::mt19937_64* dropout, AttentionTrace* trace) const {
  std::vector<std::uint8_t> chunk_valid;
  const Var pooled = tape.chunk_pool(embedding_, sample.chunks, weights, &chunk_valid);
  const Var encoded = encode(tape, pooled, chunk_valid, dropout, trace);
  if (config_.task_mode != TaskMode::kToken) return doc_head(tape, encoded);
  const auto ids = sample.chunks.real_tokens();
  return token_decoder(tape, ids, encoded, memory_mask(chunk_valid), dropout);
}

Var Model::loss(Tape& tape, Var scores, const Sample& sample) const {
  const Matrix& s = tape.value(scores);
  switch (config_.task_mode) {
    case TaskMode::kDocSingle: {
      const int target[] = {sample.label};
      if (sample.label < 0) throw std::invalid_argument("sample has no label");
      return tape.softmax_cross_entropy(scores, target);
    }
    case TaskMode::kDocMulti:
      if (sample.labels.size() != static_cast<std::size_t>(s.cols())) {
        throw std::out_of_range("multi-label target has " + std::to_string(sample.labels.size()) +
                                " entries but num_classes is " + std::to_string(s.cols()));
      }
      return tape.sigmoid_bce(scores, sample.labels);
    case TaskMode::kToken:
      if (sample.token_labels.size() != static_cast<std::size_t>(s.rows())) {
        throw std::invalid_argument("token label count differs from document length");
      }
      return tape.softmax_cross_entropy(scores, sample.token_labels);
  }
  throw std::logic_error("unreachable task mode");
}

Matrix Model::predict(const Sample& sample, const WeightConfig& weights) const {
  Tape tape(params_, nullptr);
  return tape.value(forward(tape, sample, weights, nullptr));
}

}  // namespace chulo::nn
