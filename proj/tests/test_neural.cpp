#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "chulo/gradcheck.hpp"
#include "chulo/model.hpp"
#include "chulo/optim.hpp"
#include "doctest.h"

using namespace chulo;
using namespace chulo::nn;

namespace {

ModelConfig toy_config(TaskMode mode, std::size_t classes = 3) {
  ModelConfig c;
  c.d_model = 16;
  c.n_heads = 4;
  c.ffn_dim = 32;
  c.max_chunks = 6;
  c.num_classes = classes;
  c.task_mode = mode;
  c.decoder_window = 8;
  return c;
}

Sample toy_sample(std::vector<TokenId> ids, std::size_t chunk_size) {
  Sample s;
  s.chunks = chunk_tokens(ids, chunk_size);
  for (std::size_t k = 0; k < s.chunks.keyphrase_flags.size(); ++k) {
    s.chunks.keyphrase_flags[k] = s.chunks.pad_mask[k] && k % 3 == 0;
  }
  s.label = 1;
  s.labels = {1, 0, 1};
  s.token_labels.resize(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) s.token_labels[i] = static_cast<int>(i % 3);
  return s;
}

Matrix encode_eval(const Model& model, const Matrix& chunks, const std::vector<std::uint8_t>& valid,
                   AttentionTrace* trace = nullptr) {
  Tape tape(model.params(), nullptr);
  return tape.value(model.encode(tape, tape.constant(chunks), valid, nullptr, trace));
}

double loss_of(const Model& model, const Sample& s) {
  Tape tape(model.params(), nullptr);
  return tape.scalar(model.loss(tape, model.forward(tape, s, {0.8, 0.1}, nullptr), s));
}

}  // namespace

TEST_CASE("ModelConfig and TrainConfig validation") {
  ModelConfig c;
  CHECK_NOTHROW(c.validate());
  c.n_heads = 5;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = ModelConfig{};
  c.max_chunks = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = ModelConfig{};
  c.dropout_rate = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);

  TrainConfig t;
  CHECK(t.learning_rate == 5e-5);
  CHECK(t.patience == 10);
  CHECK(t.weight_decay == 1e-2);
  CHECK(t.beta1 == 0.9);
  CHECK(t.beta2 == 0.999);
  CHECK_NOTHROW(t.validate());
  t.patience = 0;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  t = TrainConfig{};
  t.warmup_fraction = 1.0;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
}

TEST_CASE("parameter groups depend on task mode") {
  const Model doc(toy_config(TaskMode::kDocSingle), 20, 1);
  const Model tok(toy_config(TaskMode::kToken), 20, 1);
  CHECK_THROWS_AS(doc.param_index("token_pos"), std::out_of_range);
  CHECK(tok.param_index("token_pos") < tok.params().size());
  for (const auto& p : doc.params()) {
    // Biases (b, bq, b1, ...) and layer-norm gains skip weight decay.
    const std::string leaf = p.name.substr(p.name.rfind('.') + 1);
    const bool exempt = p.name.find('.') != std::string::npos && (leaf[0] == 'b' || leaf == "g");
    CHECK(p.decay == !exempt);
    CHECK(p.value.allFinite());
  }
}

TEST_CASE("encoder shapes and masking") {
  const Model model(toy_config(TaskMode::kDocSingle), 20, 3);
  std::mt19937 rng(1);
  const Matrix one = Matrix::Random(1, 16);
  const Matrix out = encode_eval(model, one, {1});
  CHECK(out.rows() == 2);
  CHECK(out.cols() == 16);
  CHECK(out.allFinite());

  // All chunks invalid: CLS attends only to itself, chunk rows still emitted.
  AttentionTrace trace;
  const Matrix three = Matrix::Random(3, 16);
  const Matrix masked = encode_eval(model, three, {0, 0, 0}, &trace);
  CHECK(masked.rows() == 4);
  CHECK(masked.allFinite());
  for (const auto& layer : trace.layers) {
    for (const auto& p : layer) {
      for (Eigen::Index r = 0; r < p.rows(); ++r) {
        CHECK(p(r, 0) == 1.0);
        for (Eigen::Index c = 1; c < p.cols(); ++c) CHECK(p(r, c) == 0.0);
      }
    }
  }

  CHECK_THROWS_WITH_AS(encode_eval(model, Matrix::Random(7, 16), std::vector<std::uint8_t>(7, 1)),
                       doctest::Contains("chunk_size"), std::invalid_argument);
}

TEST_CASE("attention rows sum to one and masked chunks get zero weight") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const Model model(toy_config(TaskMode::kDocSingle), 20, static_cast<std::uint64_t>(trial));
    const std::size_t m = 1 + rng() % 6;
    std::vector<std::uint8_t> valid(m);
    for (auto& v : valid) v = rng() % 3 != 0;
    AttentionTrace trace;
    encode_eval(model, Matrix::Random(static_cast<Eigen::Index>(m), 16), valid, &trace);
    REQUIRE(trace.layers.size() == 2);
    for (const auto& layer : trace.layers) {
      REQUIRE(layer.size() == 4);
      for (const auto& p : layer) {
        for (Eigen::Index r = 0; r < p.rows(); ++r) {
          CHECK(std::abs(p.row(r).sum() - 1.0) < 1e-6);
          for (std::size_t c = 0; c < m; ++c) {
            if (!valid[c]) CHECK(p(r, static_cast<Eigen::Index>(c) + 1) == 0.0);
          }
        }
      }
    }
  }
}

TEST_CASE("swapping two chunks and their positions swaps the output rows") {
  Model model(toy_config(TaskMode::kDocSingle), 20, 9);
  const Matrix chunks = Matrix::Random(4, 16);
  const Matrix before = encode_eval(model, chunks, {1, 1, 1, 1});
  Matrix swapped = chunks;
  swapped.row(1).swap(swapped.row(3));
  Matrix& pos = model.param("chunk_pos").value;
  pos.row(1).swap(pos.row(3));
  const Matrix after = encode_eval(model, swapped, {1, 1, 1, 1});
  CHECK((before.row(0) - after.row(0)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((before.row(2) - after.row(4)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((before.row(4) - after.row(2)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("doc head and losses") {
  Model model(toy_config(TaskMode::kDocSingle, 4), 20, 2);
  Sample s = toy_sample({2, 3, 4, 5, 6, 7}, 4);
  model.param("head.w").value.setZero();
  model.param("head.b").value.setZero();
  const Matrix scores = model.predict(s, {0.8, 0.1});
  CHECK(scores.rows() == 1);
  CHECK(scores.cols() == 4);
  CHECK(scores.isZero(0.0));
  CHECK(loss_of(model, s) == doctest::Approx(std::log(4.0)).epsilon(1e-14));

  s.label = 4;
  CHECK_THROWS_AS(loss_of(model, s), std::out_of_range);

  Model multi(toy_config(TaskMode::kDocMulti), 20, 2);
  multi.param("head.w").value.setZero();
  multi.param("head.b").value.setZero();
  s.labels = {1, 0, 1};
  CHECK(loss_of(multi, s) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  s.labels = {1, 0};
  CHECK_THROWS_AS(loss_of(multi, s), std::out_of_range);

  Model tok(toy_config(TaskMode::kToken), 20, 2);
  Tape tape(tok.params(), nullptr);
  CHECK_THROWS_AS(tok.doc_head(tape, tape.constant(Matrix::Zero(2, 16))), std::logic_error);
}

TEST_CASE("cross-entropy falls toward zero as one-hot scores sharpen") {
  Tape tape({}, nullptr);
  const int target[] = {2};
  double previous = std::numeric_limits<double>::infinity();
  for (int scale = 1; scale <= 10; ++scale) {
    Matrix z = Matrix::Zero(1, 4);
    z(0, 2) = scale;
    const double loss = tape.scalar(tape.softmax_cross_entropy(tape.constant(z), target));
    CHECK(loss < previous);
    previous = loss;
  }
  CHECK(previous < 1e-3);
}

TEST_CASE("token decoder") {
  Model model(toy_config(TaskMode::kToken), 20, 4);
  const Sample s = toy_sample({2, 3, 4}, 4);
  const Matrix scores = model.predict(s, {0.8, 0.1});
  CHECK(scores.rows() == 3);
  CHECK(scores.cols() == 3);
  CHECK(scores.allFinite());

  // Two windows with the same contents share the chunk memory.
  std::vector<TokenId> ids;
  for (int rep = 0; rep < 2; ++rep) {
    for (TokenId t = 2; t < 10; ++t) ids.push_back(t);
  }
  const Matrix twin = model.predict(toy_sample(ids, 4), {0.8, 0.1});
  REQUIRE(twin.rows() == 16);
  CHECK(twin.topRows(8) == twin.bottomRows(8));

  Tape tape(model.params(), nullptr);
  const Var empty = model.token_decoder(tape, {}, tape.constant(Matrix::Zero(1, 16)),
                                        std::vector<std::uint8_t>{1}, nullptr);
  CHECK(tape.value(empty).rows() == 0);

  model.param("head.w").value.setZero();
  model.param("head.b").value.setZero();
  const Matrix uniform = model.predict(toy_sample(ids, 4), {0.8, 0.1});
  CHECK(uniform.isZero(0.0));
  const Sample long_sample = toy_sample(ids, 4);
  CHECK(loss_of(model, long_sample) == doctest::Approx(std::log(3.0)).epsilon(1e-14));
}

TEST_CASE("gradient check on the toy model in every task mode") {
  for (const TaskMode mode : {TaskMode::kDocSingle, TaskMode::kDocMulti, TaskMode::kToken}) {
    CAPTURE(task_mode_name(mode));
    Model model(toy_config(mode), 20, 11);
    const Sample s = toy_sample({2, 3, 4, 5, 6, 7, 8, 9}, 4);
    const Sample* batch[] = {&s};
    const auto report = gradient_check(model, batch, {0.8, 0.1}, 20, 5);
    CHECK(report.max_rel_error <= 1e-4);
    std::set<std::string> groups;
    for (const auto& e : report.entries) groups.insert(e.group);
    CHECK(groups.size() == model.params().size());
  }
}

TEST_CASE("gradient vanishes when every target is matched with saturated scores") {
  Model model(toy_config(TaskMode::kDocSingle, 2), 20, 3);
  model.param("head.w").value.setZero();
  model.param("head.b").value << 60.0, -60.0;
  Sample s = toy_sample({2, 3, 4, 5, 6}, 4);
  s.label = 0;
  const Sample* batch[] = {&s};
  Gradients g = Gradients::zeros_like(model.params());
  batch_loss(model, batch, {0.8, 0.1}, &g);
  CHECK(std::sqrt(g.squared_norm()) < 1e-6);
}

TEST_CASE("doubling the loss doubles every gradient") {
  const Model model(toy_config(TaskMode::kToken), 20, 8);
  const Sample s = toy_sample({2, 3, 4, 5, 6, 7, 8, 9, 10}, 4);
  const Sample* batch[] = {&s};
  Gradients once = Gradients::zeros_like(model.params());
  Gradients twice = Gradients::zeros_like(model.params());
  const double l1 = batch_loss(model, batch, {0.8, 0.1}, &once);
  const double l2 = batch_loss(model, batch, {0.8, 0.1}, &twice, nullptr, 2.0);
  CHECK(l2 == 2.0 * l1);
  for (std::size_t i = 0; i < once.values.size(); ++i) {
    CHECK(twice.values[i] == 2.0 * once.values[i]);
  }
}

TEST_CASE("batch loss is invariant under sample reordering") {
  const Model model(toy_config(TaskMode::kDocSingle), 30, 6);
  std::vector<Sample> samples;
  for (int i = 0; i < 5; ++i) {
    std::vector<TokenId> ids;
    for (int k = 0; k < 5 + 3 * i; ++k) ids.push_back(static_cast<TokenId>(2 + (k * 7 + i) % 28));
    samples.push_back(toy_sample(ids, 4));
    samples.back().label = i % 3;
  }
  std::vector<const Sample*> order;
  for (const auto& s : samples) order.push_back(&s);
  Gradients g1 = Gradients::zeros_like(model.params());
  const double l1 = batch_loss(model, order, {0.8, 0.1}, &g1);
  std::reverse(order.begin(), order.end());
  std::swap(order[0], order[2]);
  Gradients g2 = Gradients::zeros_like(model.params());
  const double l2 = batch_loss(model, order, {0.8, 0.1}, &g2);
  CHECK(std::abs(l1 - l2) <= 1e-12 * std::abs(l1));
  for (std::size_t i = 0; i < g1.values.size(); ++i) {
    CHECK((g1.values[i] - g2.values[i]).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("inference is bit-deterministic; dropout follows its seed") {
  const Model model(toy_config(TaskMode::kToken), 20, 12);
  const Sample s = toy_sample({2, 3, 4, 5, 6, 7, 8, 9, 10, 11}, 4);
  CHECK(model.predict(s, {0.8, 0.1}) == model.predict(s, {0.8, 0.1}));

  auto train_scores = [&](std::uint64_t seed) {
    Tape tape(model.params(), nullptr);
    auto rng = dropout_stream(seed, 0, 0);
    return Matrix(tape.value(model.forward(tape, s, {0.8, 0.1}, &rng)));
  };
  CHECK(train_scores(1) == train_scores(1));
  CHECK(train_scores(1) != train_scores(2));
  CHECK(train_scores(1) != model.predict(s, {0.8, 0.1}));
}

TEST_CASE("learning-rate schedule") {
  CHECK(lr_multiplier(0, 100, 0.1, WarmupShape::kLinear) == 0.0);
  CHECK(lr_multiplier(10, 100, 0.1, WarmupShape::kLinear) == 1.0);
  CHECK(lr_multiplier(5, 100, 0.1, WarmupShape::kLinear) == doctest::Approx(0.5));
  CHECK(lr_multiplier(55, 100, 0.1, WarmupShape::kLinear) == doctest::Approx(0.5));
  CHECK(lr_multiplier(100, 100, 0.1, WarmupShape::kLinear) == 0.0);
  CHECK(lr_multiplier(5, 100, 0.05, WarmupShape::kCosine) == 1.0);
  CHECK(lr_multiplier(100, 100, 0.05, WarmupShape::kCosine) == doctest::Approx(0.0));
  CHECK(lr_multiplier(0, 100, 0.0, WarmupShape::kLinear) == 1.0);
  for (std::size_t step = 0; step <= 100; ++step) {
    for (const auto shape : {WarmupShape::kLinear, WarmupShape::kCosine}) {
      const double m = lr_multiplier(step, 100, 0.1, shape);
      CHECK(m >= 0.0);
      CHECK(m <= 1.0);
    }
  }
}

TEST_CASE("AdamW") {
  TrainConfig cfg;
  std::vector<Parameter> params = {{"w", Matrix::Ones(1, 1), true}, {"b", Matrix::Ones(1, 1), false}};
  Gradients zero = Gradients::zeros_like(params);
  AdamState state = AdamState::zeros_like(params);
  adamw_update(params, zero, state, cfg, 5e-5);
  // Exact up to the rounding of 1 - 5e-7 itself.
  CHECK(std::abs((1.0 - params[0].value(0, 0)) - 5e-7) <= std::numeric_limits<double>::epsilon());
  CHECK(params[1].value(0, 0) == 1.0);

  // Against a straight-line AdamW over three steps.
  std::vector<Parameter> p = {{"w", Matrix::Constant(1, 2, 0.5), true}};
  AdamState s = AdamState::zeros_like(p);
  const double grads[3][2] = {{0.1, -0.3}, {0.2, 0.0}, {-0.5, 0.4}};
  double x[2] = {0.5, 0.5}, m[2] = {0, 0}, v[2] = {0, 0};
  for (int t = 1; t <= 3; ++t) {
    Gradients g = Gradients::zeros_like(p);
    g.values[0] << grads[t - 1][0], grads[t - 1][1];
    const double lr = 1e-2;
    adamw_update(p, g, s, cfg, lr);
    for (int j = 0; j < 2; ++j) {
      x[j] -= lr * cfg.weight_decay * x[j];
      m[j] = 0.9 * m[j] + 0.1 * grads[t - 1][j];
      v[j] = 0.999 * v[j] + 0.001 * grads[t - 1][j] * grads[t - 1][j];
      const double mh = m[j] / (1 - std::pow(0.9, t));
      const double vh = v[j] / (1 - std::pow(0.999, t));
      x[j] -= lr * mh / (std::sqrt(vh) + 1e-8);
      CHECK(p[0].value(0, j) == doctest::Approx(x[j]).epsilon(1e-14));
    }
  }
  CHECK(s.step == 3);
}

TEST_CASE("checkpoint round-trip reproduces outputs bitwise") {
  for (const TaskMode mode : {TaskMode::kDocSingle, TaskMode::kToken}) {
    Model model(toy_config(mode), 20, 21);
    AdamState state = AdamState::zeros_like(model.params());
    const Sample s = toy_sample({2, 3, 4, 5, 6, 7, 8, 9, 10}, 4);
    const Sample* batch[] = {&s};
    TrainConfig cfg;
    for (int step = 0; step < 3; ++step) {
      Gradients g = Gradients::zeros_like(model.params());
      batch_loss(model, batch, {0.8, 0.1}, &g);
      adamw_update(model.params(), g, state, cfg, 1e-3);
    }
    std::stringstream buffer;
    write_checkpoint(buffer, model, state);
    CHECK(buffer.str().substr(0, 4) == "CHLM");
    Model loaded;
    AdamState loaded_state;
    read_checkpoint(buffer, loaded, &loaded_state);
    CHECK(loaded.config() == model.config());
    CHECK(loaded_state.step == 3);
    for (std::size_t i = 0; i < model.params().size(); ++i) {
      CHECK(loaded.params()[i].value == model.params()[i].value);
      CHECK(loaded_state.m.values[i] == state.m.values[i]);
      CHECK(loaded_state.v.values[i] == state.v.values[i]);
    }
    CHECK(loaded.predict(s, {0.8, 0.1}) == model.predict(s, {0.8, 0.1}));
  }
  std::stringstream bad("CHLX");
  Model m;
  CHECK_THROWS_AS(read_checkpoint(bad, m, nullptr), DataError);
}
