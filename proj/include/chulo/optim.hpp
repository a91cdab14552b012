#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>

#include "chulo/autograd.hpp"
#include "chulo/model.hpp"

namespace chulo::nn {

enum class WarmupShape { kLinear, kCosine };

WarmupShape parse_warmup_shape(std::string_view name);
std::string_view warmup_shape_name(WarmupShape shape);

struct TrainConfig {
  double learning_rate = 5e-5;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  double warmup_fraction = 0.1;
  WarmupShape warmup_shape = WarmupShape::kLinear;
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 13;

  void validate() const;
};

/// Schedule multiplier in [0, 1]: warmup from 0 to 1 over
/// warmup_fraction * total_steps, then linear (or cosine) decay to 0.
double lr_multiplier(std::size_t step, std::size_t total_steps, double warmup_fraction,
                     WarmupShape shape);

struct AdamState {
  Gradients m;
  Gradients v;
  std::uint64_t step = 0;

  static AdamState zeros_like(std::span<const Parameter> params);
};

/// One AdamW update at learning rate `lr` (schedule already applied).
/// Weight decay is decoupled and skips parameters with decay == false.
void adamw_update(std::span<Parameter> params, const Gradients& grads, AdamState& state,
                  const TrainConfig& cfg, double lr);

/// adamw_update with lr = cfg.learning_rate * lr_multiplier(global_step, ...).
void adamw_step(std::span<Parameter> params, const Gradients& grads, AdamState& state,
                const TrainConfig& cfg, std::size_t global_step, std::size_t total_steps);

// Checkpoint: "CHLM", u32 version, config block, u32 vocab size, u32 param
// count, then per parameter u32 name length + name + u32 rows + u32 cols +
// f64 values (row-major), then m and v in the same order, then u64 step.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const Model& model, const AdamState& state);
/// `state` may be null when only the weights are wanted.
void read_checkpoint(std::istream& in, Model& model, AdamState* state);
void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const AdamState& state);
void load_checkpoint(const std::filesystem::path& path, Model& model, AdamState* state);

}  // namespace chulo::nn
