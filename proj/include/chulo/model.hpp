#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "chulo/autograd.hpp"
#include "chulo/chunking.hpp"
#include "chulo/corpus.hpp"

namespace chulo::nn {

/// Non-finite values or diverging numerics.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelConfig {
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_layers_encoder = 2;
  std::size_t n_layers_decoder = 2;
  std::size_t ffn_dim = 256;
  std::size_t max_chunks = 512;
  double dropout_rate = 0.1;
  std::size_t num_classes = 2;
  TaskMode task_mode = TaskMode::kDocSingle;
  std::size_t decoder_window = 128;  // W, token-decoder self-attention window

  /// Throws std::invalid_argument.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// One training or evaluation item, already chunked and flagged.
struct Sample {
  ChunkSequence chunks;
  int label = -1;                      // doc-single
  std::vector<std::uint8_t> labels;    // doc-multi, one 0/1 entry per class
  std::vector<int> token_labels;       // token mode, one per real token
};

/// Per-layer attention probabilities, for inspection.
struct AttentionTrace {
  std::vector<std::vector<Matrix>> layers;  // [layer][head] -> (m+1) x (m+1)
};

class Model {
 public:
  Model() = default;
  /// Random initialization: N(0, 1) embedding tables (tokens, positions,
  /// CLS), Glorot-normal weight matrices, zero biases, unit layer-norm gains.
  Model(const ModelConfig& config, std::size_t vocab_size, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  std::size_t vocab_size() const { return vocab_size_; }
  std::vector<Parameter>& params() { return params_; }
  const std::vector<Parameter>& params() const { return params_; }
  /// Throws std::out_of_range for an unknown name.
  std::size_t param_index(std::string_view name) const;
  Parameter& param(std::string_view name) { return params_[param_index(name)]; }

  /// Key mask used against the encoder output: CLS first, always valid.
  static std::vector<std::uint8_t> memory_mask(std::span<const std::uint8_t> chunk_valid);

  /// Contextual chunk states, (m+1) x d with the CLS row first. `dropout`
  /// null means inference.
  Var encode(Tape& tape, Var chunk_embeddings, std::span<const std::uint8_t> chunk_valid,
             std::mt19937_64* dropout, AttentionTrace* trace = nullptr) const;
  /// Linear map of the CLS row to class scores (1 x num_classes).
  Var doc_head(Tape& tape, Var encoded) const;
  /// Per-token scores (l x num_classes). Windows of width W attend to
  /// themselves and to the whole chunk memory.
  Var token_decoder(Tape& tape, std::span<const TokenId> ids, Var memory,
                    std::span<const std::uint8_t> memory_valid, std::mt19937_64* dropout) const;

  /// Chunk pooling, encoder, then the head for the configured task mode.
  Var forward(Tape& tape, const Sample& sample, const WeightConfig& weights,
              std::mt19937_64* dropout, AttentionTrace* trace = nullptr) const;
  /// Mean cross-entropy (doc-single, token) or mean sigmoid BCE (doc-multi).
  Var loss(Tape& tape, Var scores, const Sample& sample) const;

  /// Inference-mode scores.
  Matrix predict(const Sample& sample, const WeightConfig& weights) const;

 private:
  struct AttentionIdx {
    std::size_t wq, bq, wk, bk, wv, bv, wo, bo;
  };
  struct EncoderLayerIdx {
    std::size_t ln1_g, ln1_b, ln2_g, ln2_b, w1, b1, w2, b2;
    AttentionIdx attn;
  };
  struct DecoderLayerIdx {
    std::size_t ln1_g, ln1_b, lnc_g, lnc_b, ln2_g, ln2_b, w1, b1, w2, b2;
    AttentionIdx self_attn, cross_attn;
  };

  std::size_t add_param(std::string name, Matrix value, bool decay);
  AttentionIdx add_attention(const std::string& prefix, std::mt19937_64& rng);
  Var project(Tape& tape, std::size_t w, std::size_t b, Var x) const;
  /// Attention with the key/value projections already applied.
  Var attend(Tape& tape, const AttentionIdx& idx, Var queries, Var keys, Var values,
             std::span<const std::uint8_t> key_valid, std::vector<Matrix>* probs) const;
  Var ffn_block(Tape& tape, std::size_t w1, std::size_t b1, std::size_t w2, std::size_t b2,
                Var x) const;
  Var maybe_dropout(Tape& tape, Var x, std::mt19937_64* rng) const;

  ModelConfig config_;
  std::size_t vocab_size_ = 0;
  std::vector<Parameter> params_;

  std::size_t embedding_ = 0, chunk_pos_ = 0, cls_ = 0, enc_ln_g_ = 0, enc_ln_b_ = 0;
  std::vector<EncoderLayerIdx> encoder_;
  std::size_t head_w_ = 0, head_b_ = 0;
  std::size_t token_pos_ = 0, dec_ln_g_ = 0, dec_ln_b_ = 0;
  std::vector<DecoderLayerIdx> decoder_;
};

}  // namespace chulo::nn
