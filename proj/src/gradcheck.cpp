#include "chulo/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace chulo::nn {

std::mt19937_64 dropout_stream(std::uint64_t seed, std::uint64_t epoch, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

double batch_loss(const Model& model, std::span<const Sample* const> batch,
                  const WeightConfig& weights, Gradients* grads, const DropoutKey* dropout_key,
                  double loss_scale) {
  if (batch.empty()) return 0.0;
  const double inv = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Tape tape(model.params(), grads);
    std::mt19937_64 rng;
    std::mt19937_64* dropout = nullptr;
    if (dropout_key != nullptr) {
      rng = dropout_stream(dropout_key->seed, dropout_key->epoch, dropout_key->first_index + i);
      dropout = &rng;
    }
    const Var scores = model.forward(tape, *batch[i], weights, dropout);
    const Var loss = model.loss(tape, scores, *batch[i]);
    total += tape.scalar(loss);
    if (grads != nullptr) tape.backward(loss, loss_scale * inv);
  }
  if (grads != nullptr) {
    for (std::size_t i = 0; i < grads->values.size(); ++i) {
      if (!grads->values[i].allFinite()) {
        throw NumericError("non-finite gradient in parameter group " + model.params()[i].name);
      }
    }
  }
  return loss_scale * total * inv;
}

double gradcheck_rel_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport gradient_check(Model& model, std::span<const Sample* const> batch,
                               const WeightConfig& weights, std::size_t coords_per_group,
                               std::uint64_t seed, double h) {
  auto& params = model.params();
  Gradients grads = Gradients::zeros_like(params);
  batch_loss(model, batch, weights, &grads);

  std::set<TokenId> used_ids;
  std::size_t max_m = 0, max_len = 0;
  for (const Sample* s : batch) {
    for (TokenId id : s->chunks.real_tokens()) used_ids.insert(id);
    max_m = std::max(max_m, s->chunks.num_chunks);
    max_len = std::max(max_len, std::min(s->chunks.doc_length(), model.config().decoder_window));
  }

  std::mt19937_64 rng(seed);
  GradCheckReport report;
  for (std::size_t g = 0; g < params.size(); ++g) {
    Matrix& value = params[g].value;
    std::vector<Eigen::Index> rows;
    if (params[g].name == "embedding") {
      rows.assign(used_ids.begin(), used_ids.end());
    } else {
      Eigen::Index limit = value.rows();
      if (params[g].name == "chunk_pos") limit = static_cast<Eigen::Index>(max_m);
      if (params[g].name == "token_pos") limit = static_cast<Eigen::Index>(max_len);
      for (Eigen::Index r = 0; r < limit; ++r) rows.push_back(r);
    }
    if (rows.empty()) continue;
    std::vector<std::pair<Eigen::Index, Eigen::Index>> coords;
    for (Eigen::Index r : rows) {
      for (Eigen::Index c = 0; c < value.cols(); ++c) coords.emplace_back(r, c);
    }
    std::shuffle(coords.begin(), coords.end(), rng);
    if (coords.size() > coords_per_group) coords.resize(coords_per_group);

    for (const auto& [r, c] : coords) {
      const double saved = value(r, c);
      value(r, c) = saved + h;
      const double plus = batch_loss(model, batch, weights, nullptr);
      value(r, c) = saved - h;
      const double minus = batch_loss(model, batch, weights, nullptr);
      value(r, c) = saved;
      GradCheckEntry e;
      e.group = params[g].name;
      e.row = r;
      e.col = c;
      e.analytic = grads.values[g](r, c);
      e.numeric = (plus - minus) / (2.0 * h);
      e.rel_error = gradcheck_rel_error(e.analytic, e.numeric);
      if (report.entries.empty() || e.rel_error > report.max_rel_error) {
        report.max_rel_error = e.rel_error;
        report.worst_group = e.group;
      }
      report.entries.push_back(std::move(e));
    }
  }
  return report;
}

}  // namespace chulo::nn
