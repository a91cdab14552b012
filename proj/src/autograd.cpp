#include "chulo/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace chulo::nn {

Gradients Gradients::zeros_like(std::span<const Parameter> params) {
  Gradients g;
  g.values.reserve(params.size());
  for (const auto& p : params) g.values.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  return g;
}

void Gradients::set_zero() {
  for (auto& m : values) m.setZero();
}

void Gradients::add(const Gradients& other) {
  for (std::size_t i = 0; i < values.size(); ++i) values[i] += other.values[i];
}

void Gradients::scale(double factor) {
  for (auto& m : values) m *= factor;
}

double Gradients::squared_norm() const {
  double total = 0.0;
  for (const auto& m : values) total += m.squaredNorm();
  return total;
}

Tape::Tape(std::span<const Parameter> params, Gradients* grads) : params_(params), grads_(grads) {
  nodes_.reserve(256);
}

const Matrix& Tape::value(Var v) const {
  const Node& n = nodes_[v.id];
  return n.external != nullptr ? *n.external : n.value;
}

Var Tape::push(Matrix value, std::function<void(Tape&, int)> backward) {
  Node n;
  n.value = std::move(value);
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size() - 1)};
}

Matrix& Tape::grad_ref(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) {
    const Matrix& v = n.external != nullptr ? *n.external : n.value;
    n.grad = Matrix::Zero(v.rows(), v.cols());
  }
  return n.grad;
}

Matrix* Tape::param_grad(std::size_t index) {
  return grads_ == nullptr ? nullptr : &grads_->values[index];
}

Var Tape::param(std::size_t index) {
  Node n;
  n.external = &params_[index].value;
  n.param = static_cast<int>(index);
  n.backward = [index](Tape& t, int self) {
    if (Matrix* g = t.param_grad(index)) *g += t.nodes_[self].grad;
  };
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size() - 1)};
}

Var Tape::constant(Matrix value) { return push(std::move(value), nullptr); }

Var Tape::matmul(Var a, Var b) {
  if (value(a).cols() != value(b).rows()) throw std::invalid_argument("matmul: shape mismatch");
  Matrix out = value(a) * value(b);
  return push(std::move(out), [a, b](Tape& t, int self) {
    const Matrix& g = t.nodes_[self].grad;
    t.grad_ref(a.id).noalias() += g * t.value(b).transpose();
    t.grad_ref(b.id).noalias() += t.value(a).transpose() * g;
  });
}

Var Tape::matmul_nt(Var a, Var b) {
  if (value(a).cols() != value(b).cols()) throw std::invalid_argument("matmul_nt: shape mismatch");
  Matrix out = value(a) * value(b).transpose();
  return push(std::move(out), [a, b](Tape& t, int self) {
    const Matrix& g = t.nodes_[self].grad;
    t.grad_ref(a.id).noalias() += g * t.value(b);
    t.grad_ref(b.id).noalias() += g.transpose() * t.value(a);
  });
}

Var Tape::add(Var a, Var b) {
  if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols()) {
    throw std::invalid_argument("add: shape mismatch");
  }
  Matrix out = value(a) + value(b);
  return push(std::move(out), [a, b](Tape& t, int self) {
    const Matrix& g = t.nodes_[self].grad;
    t.grad_ref(a.id) += g;
    t.grad_ref(b.id) += g;
  });
}

Var Tape::add_row(Var a, Var bias) {
  if (value(bias).rows() != 1 || value(bias).cols() != value(a).cols()) {
    throw std::invalid_argument("add_row: bias must be 1 x cols");
  }
  Matrix out = value(a).rowwise() + value(bias).row(0);
  return push(std::move(out), [a, bias](Tape& t, int self) {
    const Matrix& g = t.nodes_[self].grad;
    t.grad_ref(a.id) += g;
    t.grad_ref(bias.id) += g.colwise().sum();
  });
}

Var Tape::scale(Var a, double factor) {
  Matrix out = value(a) * factor;
  return push(std::move(out), [a, factor](Tape& t, int self) {
    t.grad_ref(a.id) += t.nodes_[self].grad * factor;
  });
}

Var Tape::gelu(Var a) {
  const Matrix& x = value(a);
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x.data()[i];
    out.data()[i] = 0.5 * v * (1.0 + std::erf(v * M_SQRT1_2));
  }
  return push(std::move(out), [a](Tape& t, int self) {
    const Matrix& x = t.value(a);
    const Matrix& g = t.nodes_[self].grad;
    Matrix& ga = t.grad_ref(a.id);
    constexpr double kInvSqrt2Pi = 0.3989422804014327;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double v = x.data()[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * M_SQRT1_2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      ga.data()[i] += g.data()[i] * (cdf + v * pdf);
    }
  });
}

Var Tape::layer_norm(Var x, Var gain, Var bias, double eps) {
  const Matrix& in = value(x);
  const Eigen::Index cols = in.cols();
  Matrix normalized(in.rows(), cols);
  Eigen::VectorXd inv_std(in.rows());
  for (Eigen::Index r = 0; r < in.rows(); ++r) {
    const double mean = in.row(r).mean();
    const double var = (in.row(r).array() - mean).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    normalized.row(r) = (in.row(r).array() - mean) * inv_std(r);
  }
  Matrix out = (normalized.array().rowwise() * value(gain).row(0).array()).matrix();
  out.rowwise() += value(bias).row(0);
  return push(std::move(out), [x, gain, bias, normalized = std::move(normalized),
                               inv_std = std::move(inv_std)](Tape& t, int self) {
    const Matrix& g = t.nodes_[self].grad;
    t.grad_ref(gain.id) += (g.array() * normalized.array()).matrix().colwise().sum();
    t.grad_ref(bias.id) += g.colwise().sum();
    const Matrix dxhat = (g.array().rowwise() * t.value(gain).row(0).array()).matrix();
    Matrix& gx = t.grad_ref(x.id);
    const double n = static_cast<double>(dxhat.cols());
    for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
      const double mean_d = dxhat.row(r).sum() / n;
      const double mean_dx = dxhat.row(r).dot(normalized.row(r)) / n;
      gx.row(r).array() +=
          inv_std(r) * (dxhat.row(r).array() - mean_d - normalized.row(r).array() * mean_dx);
    }
  });
}

Var Tape::dropout(Var x, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return x;
  const Matrix& in = value(x);
  Matrix mask(in.rows(), in.cols());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = u(rng) < rate ? 0.0 : keep_scale;
  }
  Matrix out = in.cwiseProduct(mask);
  return push(std::move(out), [x, mask = std::move(mask)](Tape& t, int self) {
    t.grad_ref(x.id) += t.nodes_[self].grad.cwiseProduct(mask);
  });
}

Var Tape::slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > value(a).rows()) {
    throw std::out_of_range("slice_rows: range outside matrix");
  }
  Matrix out = value(a).middleRows(start, count);
  return push(std::move(out), [a, start, count](Tape& t, int self) {
    t.grad_ref(a.id).middleRows(start, count) += t.nodes_[self].grad;
  });
}

Var Tape::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: nothing to concatenate");
  const Eigen::Index cols = value(parts[0]).cols();
  Eigen::Index rows = 0;
  for (Var p : parts) {
    if (value(p).cols() != cols) throw std::invalid_argument("concat_rows: column mismatch");
    rows += value(p).rows();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleRows(at, value(p).rows()) = value(p);
    at += value(p).rows();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return push(std::move(out), [inputs = std::move(inputs)](Tape& t, int self) {
    Eigen::Index at = 0;
    for (Var p : inputs) {
      const Eigen::Index r = t.value(p).rows();
      t.grad_ref(p.id) += t.nodes_[self].grad.middleRows(at, r);
      at += r;
    }
  });
}

Var Tape::attention(Var q, Var k, Var v, std::span<const std::uint8_t> key_valid, int heads,
                    std::vector<Matrix>* probs_out) {
  const Matrix& Q = value(q);
  const Matrix& K = value(k);
  const Matrix& V = value(v);
  const Eigen::Index d = Q.cols();
  if (K.cols() != d || V.cols() != d || K.rows() != V.rows() ||
      static_cast<Eigen::Index>(key_valid.size()) != K.rows() || heads < 1 || d % heads != 0) {
    throw std::invalid_argument("attention: shape mismatch");
  }
  const Eigen::Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Matrix> probs(static_cast<std::size_t>(heads));
  Matrix out(Q.rows(), d);
  for (int h = 0; h < heads; ++h) {
    Matrix s = Q.middleCols(h * dh, dh) * K.middleCols(h * dh, dh).transpose();
    Matrix& p = probs[static_cast<std::size_t>(h)];
    p = Matrix::Zero(s.rows(), s.cols());
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
      double max_score = -std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < s.cols(); ++c) {
        if (key_valid[c]) max_score = std::max(max_score, s(r, c) * scale);
      }
      if (!std::isfinite(max_score)) throw std::invalid_argument("attention: no valid keys");
      double total = 0.0;
      for (Eigen::Index c = 0; c < s.cols(); ++c) {
        if (!key_valid[c]) continue;
        p(r, c) = std::exp(s(r, c) * scale - max_score);
        total += p(r, c);
      }
      p.row(r) /= total;
    }
    out.middleCols(h * dh, dh).noalias() = p * V.middleCols(h * dh, dh);
  }
  if (probs_out != nullptr) *probs_out = probs;
  return push(std::move(out), [q, k, v, heads, dh, scale, probs = std::move(probs)](Tape& t,
                                                                                    int self) {
    const Matrix& g = t.nodes_[self].grad;
    const Matrix& Q = t.value(q);
    const Matrix& K = t.value(k);
    const Matrix& V = t.value(v);
    Matrix dQ = Matrix::Zero(Q.rows(), Q.cols());
    Matrix dK = Matrix::Zero(K.rows(), K.cols());
    Matrix dV = Matrix::Zero(V.rows(), V.cols());
    for (int h = 0; h < heads; ++h) {
      const Matrix& p = probs[static_cast<std::size_t>(h)];
      const auto gh = g.middleCols(h * dh, dh);
      dV.middleCols(h * dh, dh).noalias() += p.transpose() * gh;
      const Matrix dp = gh * V.middleCols(h * dh, dh).transpose();
      const Eigen::VectorXd row_dot = (dp.array() * p.array()).rowwise().sum();
      const Matrix ds = (p.array() * (dp.array().colwise() - row_dot.array())).matrix() * scale;
      dQ.middleCols(h * dh, dh).noalias() += ds * K.middleCols(h * dh, dh);
      dK.middleCols(h * dh, dh).noalias() += ds.transpose() * Q.middleCols(h * dh, dh);
    }
    t.grad_ref(q.id) += dQ;
    t.grad_ref(k.id) += dK;
    t.grad_ref(v.id) += dV;
  });
}

Var Tape::gather_rows(std::size_t table_param, std::span<const TokenId> ids) {
  const Matrix& table = params_[table_param].value;
  Matrix out(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || ids[r] >= table.rows()) {
      throw std::out_of_range("token id " + std::to_string(ids[r]) + " outside embedding table");
    }
    out.row(static_cast<Eigen::Index>(r)) = table.row(ids[r]);
  }
  std::vector<TokenId> saved(ids.begin(), ids.end());
  return push(std::move(out), [table_param, saved = std::move(saved)](Tape& t, int self) {
    Matrix* g = t.param_grad(table_param);
    if (g == nullptr) return;
    const Matrix& dy = t.nodes_[self].grad;
    for (std::size_t r = 0; r < saved.size(); ++r) {
      g->row(saved[r]) += dy.row(static_cast<Eigen::Index>(r));
    }
  });
}

Var Tape::chunk_pool(std::size_t table_param, const ChunkSequence& cs, const WeightConfig& weights,
                     std::vector<std::uint8_t>* chunk_valid) {
  ChunkEmbeddingMatrix pooled = embed_document(cs, params_[table_param].value, weights);
  if (chunk_valid != nullptr) *chunk_valid = pooled.chunk_valid;

  // Normalized weight of every cell, so the backward pass is a plain scatter.
  std::vector<double> cell_weight(cs.token_ids.size(), 0.0);
  for (std::size_t i = 0; i < cs.num_chunks; ++i) {
    const auto w = token_weights(cs.chunk_flags(i), cs.chunk_pad_mask(i), weights);
    double total = 0.0;
    for (double x : w) total += x;
    if (total == 0.0) continue;
    for (std::size_t k = 0; k < w.size(); ++k) cell_weight[i * cs.chunk_size + k] = w[k] / total;
  }
  return push(std::move(pooled.rows), [table_param, ids = cs.token_ids, chunk = cs.chunk_size,
                                       cell_weight = std::move(cell_weight)](Tape& t, int self) {
    Matrix* g = t.param_grad(table_param);
    if (g == nullptr) return;
    const Matrix& dy = t.nodes_[self].grad;
    for (std::size_t cell = 0; cell < ids.size(); ++cell) {
      if (cell_weight[cell] == 0.0) continue;
      g->row(ids[cell]) += cell_weight[cell] * dy.row(static_cast<Eigen::Index>(cell / chunk));
    }
  });
}

Var Tape::softmax_cross_entropy(Var logits, std::span<const int> targets) {
  const Matrix& z = value(logits);
  if (static_cast<Eigen::Index>(targets.size()) != z.rows() || z.rows() == 0) {
    throw std::invalid_argument("cross entropy: target count mismatch");
  }
  Matrix probs(z.rows(), z.cols());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const int target = targets[static_cast<std::size_t>(r)];
    if (target < 0 || target >= z.cols()) {
      throw std::out_of_range("target index " + std::to_string(target) + " >= num_classes");
    }
    const double max_z = z.row(r).maxCoeff();
    const Eigen::RowVectorXd e = (z.row(r).array() - max_z).exp();
    const double total = e.sum();
    probs.row(r) = e / total;
    loss += std::log(total) + max_z - z(r, target);
  }
  const double rows = static_cast<double>(z.rows());
  Matrix out(1, 1);
  out(0, 0) = loss / rows;
  std::vector<int> saved(targets.begin(), targets.end());
  return push(std::move(out), [logits, rows, probs = std::move(probs),
                               saved = std::move(saved)](Tape& t, int self) {
    const double g = t.nodes_[self].grad(0, 0);
    Matrix d = probs;
    for (std::size_t r = 0; r < saved.size(); ++r) d(static_cast<Eigen::Index>(r), saved[r]) -= 1.0;
    t.grad_ref(logits.id) += d * (g / rows);
  });
}

Var Tape::sigmoid_bce(Var logits, std::span<const std::uint8_t> targets) {
  const Matrix& z = value(logits);
  if (static_cast<Eigen::Index>(targets.size()) != z.size() || z.size() == 0) {
    throw std::invalid_argument("bce: target count mismatch");
  }
  double loss = 0.0;
  Matrix d(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double x = z.data()[i];
    const double y = targets[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
    loss += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
    const double sig = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    d.data()[i] = sig - y;
  }
  const double count = static_cast<double>(z.size());
  Matrix out(1, 1);
  out(0, 0) = loss / count;
  return push(std::move(out), [logits, count, d = std::move(d)](Tape& t, int self) {
    t.grad_ref(logits.id) += d * (t.nodes_[self].grad(0, 0) / count);
  });
}

void Tape::backward(Var root, double seed) {
  if (value(root).size() != 1) throw std::invalid_argument("backward: root must be a scalar");
  grad_ref(root.id)(0, 0) += seed;
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.grad.size() == 0 || !n.backward) continue;
    n.backward(*this, i);
  }
}

}  // namespace chulo::nn
