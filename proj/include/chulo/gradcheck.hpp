#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "chulo/model.hpp"

namespace chulo::nn {

/// Dropout stream for sample `index` of `epoch`.
std::mt19937_64 dropout_stream(std::uint64_t seed, std::uint64_t epoch, std::uint64_t index);

/// Identifies the dropout streams of one batch: sample i of the batch uses
/// dropout_stream(seed, epoch, first_index + i).
struct DropoutKey {
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;
  std::uint64_t first_index = 0;
};

/// Mean loss over the batch, times `loss_scale`. When `grads` is given it
/// receives the exact gradient of that value, accumulated sample by sample in
/// batch order. A null `dropout` disables dropout. Throws NumericError naming
/// the parameter group on a non-finite gradient.
double batch_loss(const Model& model, std::span<const Sample* const> batch,
                  const WeightConfig& weights, Gradients* grads,
                  const DropoutKey* dropout = nullptr, double loss_scale = 1.0);

struct GradCheckEntry {
  std::string group;
  Eigen::Index row = 0;
  Eigen::Index col = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  std::string worst_group;
};

/// |a - n| / max(|a|, |n|, floor).
double gradcheck_rel_error(double analytic, double numeric, double floor = 1e-6);

/// Compares reverse-mode gradients with central differences (step `h`) on
/// `coords_per_group` coordinates of every parameter group. Coordinates are
/// drawn among entries the batch can influence (used embedding rows, chunk
/// positions below m). Dropout is off.
GradCheckReport gradient_check(Model& model, std::span<const Sample* const> batch,
                               const WeightConfig& weights, std::size_t coords_per_group = 20,
                               std::uint64_t seed = 1, double h = 1e-4);

}  // namespace chulo::nn
