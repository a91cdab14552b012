#include "chulo/optim.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "chulo/corpus.hpp"

namespace chulo::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

WarmupShape parse_warmup_shape(std::string_view name) {
  if (name == "linear") return WarmupShape::kLinear;
  if (name == "cosine") return WarmupShape::kCosine;
  throw std::invalid_argument("unknown warmup shape: " + std::string(name));
}

std::string_view warmup_shape_name(WarmupShape shape) {
  return shape == WarmupShape::kLinear ? "linear" : "cosine";
}

void TrainConfig::validate() const {
  if (patience < 1) throw std::invalid_argument("patience must be >= 1");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) {
    throw std::invalid_argument("warmup_fraction must be in [0, 1)");
  }
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("betas must be in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
}

double lr_multiplier(std::size_t step, std::size_t total_steps, double warmup_fraction,
                     WarmupShape shape) {
  if (total_steps == 0) return 0.0;
  const double warmup = warmup_fraction * static_cast<double>(total_steps);
  const double t = static_cast<double>(step);
  if (t < warmup) return t / warmup;
  const double span = static_cast<double>(total_steps) - warmup;
  const double progress = std::clamp((t - warmup) / span, 0.0, 1.0);
  if (shape == WarmupShape::kLinear) return 1.0 - progress;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

AdamState AdamState::zeros_like(std::span<const Parameter> params) {
  return AdamState{Gradients::zeros_like(params), Gradients::zeros_like(params), 0};
}

void adamw_update(std::span<Parameter> params, const Gradients& grads, AdamState& state,
                  const TrainConfig& cfg, double lr) {
  if (state.m.values.size() != params.size()) state = AdamState::zeros_like(params);
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = params[i].value;
    Matrix& m = state.m.values[i];
    Matrix& v = state.v.values[i];
    const Matrix& g = grads.values[i];
    if (params[i].decay && cfg.weight_decay != 0.0) p *= 1.0 - lr * cfg.weight_decay;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / correction1) /
                 ((v.array() / correction2).sqrt() + cfg.epsilon);
  }
}

void adamw_step(std::span<Parameter> params, const Gradients& grads, AdamState& state,
                const TrainConfig& cfg, std::size_t global_step, std::size_t total_steps) {
  const double lr = cfg.learning_rate *
                    lr_multiplier(global_step, total_steps, cfg.warmup_fraction, cfg.warmup_shape);
  adamw_update(params, grads, state, cfg, lr);
}

namespace {

template <class T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw DataError("checkpoint truncated");
  }
  return value;
}

void put_matrix(std::ostream& out, const Matrix& m) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) put<double>(out, m(r, c));
  }
}

void get_matrix(std::istream& in, Matrix& m, const std::string& name) {
  const auto rows = get<std::uint32_t>(in);
  const auto cols = get<std::uint32_t>(in);
  if (rows != m.rows() || cols != m.cols()) {
    throw DataError("checkpoint shape mismatch for " + name);
  }
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = get<double>(in);
  }
}

}  // namespace

void write_checkpoint(std::ostream& out, const Model& model, const AdamState& state) {
  const auto& cfg = model.config();
  const auto& params = model.params();
  out.write("CHLM", 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.d_model));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.n_heads));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.n_layers_encoder));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.n_layers_decoder));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.ffn_dim));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.max_chunks));
  put<double>(out, cfg.dropout_rate);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.num_classes));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.task_mode));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.decoder_window));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.vocab_size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put_matrix(out, p.value);
  }
  const bool has_moments = state.m.values.size() == params.size();
  for (const Gradients* moments : {&state.m, &state.v}) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      put_matrix(out, has_moments ? moments->values[i]
                                  : Matrix::Zero(params[i].value.rows(), params[i].value.cols()));
    }
  }
  put<std::uint64_t>(out, state.step);
  if (!out) throw std::runtime_error("failed writing checkpoint");
}

void read_checkpoint(std::istream& in, Model& model, AdamState* state) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "CHLM", 4) != 0) {
    throw DataError("not a checkpoint (bad magic)");
  }
  if (get<std::uint32_t>(in) != kCheckpointVersion) throw DataError("unsupported checkpoint version");
  ModelConfig cfg;
  cfg.d_model = get<std::uint32_t>(in);
  cfg.n_heads = get<std::uint32_t>(in);
  cfg.n_layers_encoder = get<std::uint32_t>(in);
  cfg.n_layers_decoder = get<std::uint32_t>(in);
  cfg.ffn_dim = get<std::uint32_t>(in);
  cfg.max_chunks = get<std::uint32_t>(in);
  cfg.dropout_rate = get<double>(in);
  cfg.num_classes = get<std::uint32_t>(in);
  const auto mode = get<std::uint32_t>(in);
  if (mode > static_cast<std::uint32_t>(TaskMode::kToken)) throw DataError("bad task mode in checkpoint");
  cfg.task_mode = static_cast<TaskMode>(mode);
  cfg.decoder_window = get<std::uint32_t>(in);
  const auto vocab = get<std::uint32_t>(in);
  Model loaded;
  try {
    loaded = Model(cfg, vocab, 0);
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("bad checkpoint config: ") + e.what());
  }
  auto& params = loaded.params();
  if (get<std::uint32_t>(in) != params.size()) throw DataError("checkpoint parameter count mismatch");
  for (auto& p : params) {
    const auto len = get<std::uint32_t>(in);
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw DataError("checkpoint truncated");
    if (name != p.name) throw DataError("checkpoint parameter order mismatch at " + name);
    get_matrix(in, p.value, p.name);
  }
  AdamState moments = AdamState::zeros_like(params);
  for (Gradients* g : {&moments.m, &moments.v}) {
    for (std::size_t i = 0; i < params.size(); ++i) get_matrix(in, g->values[i], params[i].name);
  }
  moments.step = get<std::uint64_t>(in);
  model = std::move(loaded);
  if (state != nullptr) *state = std::move(moments);
}

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const AdamState& state) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_checkpoint(out, model, state);
}

void load_checkpoint(const std::filesystem::path& path, Model& model, AdamState* state) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  read_checkpoint(in, model, state);
}

}  // namespace chulo::nn
