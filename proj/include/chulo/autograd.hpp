#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "chulo/chunking.hpp"

namespace chulo::nn {

using Matrix = Eigen::MatrixXd;

struct Parameter {
  std::string name;
  Matrix value;
  bool decay = true;  // receives decoupled weight decay
};

/// Gradients aligned index-for-index with a parameter list.
struct Gradients {
  std::vector<Matrix> values;

  static Gradients zeros_like(std::span<const Parameter> params);
  void set_zero();
  void add(const Gradients& other);
  void scale(double factor);
  double squared_norm() const;
};

/// Handle to a node on a Tape.
struct Var {
  int id = -1;
};

/// Define-by-run reverse-mode tape. Parameters are referenced, not copied;
/// their gradients land in the Gradients object given at construction (or
/// nowhere, for inference).
class Tape {
 public:
  Tape(std::span<const Parameter> params, Gradients* grads);
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  const Matrix& value(Var v) const;
  const Matrix& grad(Var v) const { return nodes_[v.id].grad; }
  double scalar(Var v) const { return value(v)(0, 0); }

  Var param(std::size_t index);
  Var constant(Matrix value);

  Var matmul(Var a, Var b);
  /// a * b^T
  Var matmul_nt(Var a, Var b);
  Var add(Var a, Var b);
  /// Adds a 1 x cols row to every row of a.
  Var add_row(Var a, Var bias);
  Var scale(Var a, double factor);
  Var gelu(Var a);
  Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
  Var dropout(Var x, double rate, std::mt19937_64& rng);
  Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
  Var concat_rows(std::span<const Var> parts);

  /// Multi-head scaled dot-product attention. Keys with key_valid == 0 get
  /// exactly zero weight. If `probs_out` is given, per-head probability
  /// matrices are copied there.
  Var attention(Var q, Var k, Var v, std::span<const std::uint8_t> key_valid, int heads,
                std::vector<Matrix>* probs_out = nullptr);

  /// Rows of the embedding parameter selected by `ids`.
  Var gather_rows(std::size_t table_param, std::span<const TokenId> ids);
  /// Keyphrase-weighted chunk pooling straight off an embedding parameter.
  Var chunk_pool(std::size_t table_param, const ChunkSequence& cs, const WeightConfig& weights,
                 std::vector<std::uint8_t>* chunk_valid = nullptr);

  /// Mean softmax cross-entropy over rows.
  Var softmax_cross_entropy(Var logits, std::span<const int> targets);
  /// Mean sigmoid binary cross-entropy over all entries of a 1 x K row.
  Var sigmoid_bce(Var logits, std::span<const std::uint8_t> targets);

  /// Seeds d(root)/d(root) = seed and runs every recorded backward step.
  void backward(Var root, double seed = 1.0);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    const Matrix* external = nullptr;
    int param = -1;
    std::function<void(Tape&, int)> backward;
  };

  Var push(Matrix value, std::function<void(Tape&, int)> backward);
  Matrix& grad_ref(int id);
  Matrix* param_grad(std::size_t index);

  std::span<const Parameter> params_;
  Gradients* grads_;
  std::vector<Node> nodes_;
};

}  // namespace chulo::nn
