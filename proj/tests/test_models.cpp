#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <filesystem>

#include "humor/models.hpp"
#include "humor/ops.hpp"
#include "humor/tokenizer.hpp"
#include "testutil.hpp"

using namespace humor;
using namespace humor::models;
using numcore::backward;
using numcore::cross_entropy_loss;
using numcore::GradGuard;
using numcore::Tensor;

namespace {

TransformerConfig tiny_transformer_config() {
  TransformerConfig c;
  c.vocab_size = 12;
  c.max_seq_len = 8;
  c.model_dim = 8;
  c.num_heads = 2;
  c.num_layers = 2;
  c.ffn_dim = 16;
  c.dropout_rate = 0.0;
  return c;
}

CnnHighwayConfig tiny_cnn_config() {
  CnnHighwayConfig c;
  c.vocab_size = 12;
  c.max_seq_len = 8;
  c.embed_dim = 6;
  c.filter_widths = {2, 3};
  c.filters_per_width = 3;
  c.num_highway_layers = 1;
  return c;
}

tokenizer::TokenSequence make_sequence(std::vector<int> content, int max_len) {
  tokenizer::TokenSequence seq;
  seq.ids.push_back(tokenizer::kClsId);
  for (int id : content) seq.ids.push_back(id);
  seq.ids.push_back(tokenizer::kSepId);
  seq.attention_mask.assign(seq.ids.size(), 1);
  seq.ids.resize(static_cast<std::size_t>(max_len), tokenizer::kPadId);
  seq.attention_mask.resize(static_cast<std::size_t>(max_len), 0);
  return seq;
}

Batch tiny_batch(int max_len) {
  const auto s1 = make_sequence({4, 5, 6}, max_len);
  const auto s2 = make_sequence({7, 8}, max_len);
  const auto s3 = make_sequence({9, 10, 11, 4, 5}, max_len);
  return Batch::from_sequences({&s1, &s2, &s3});
}

bool bit_equal(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("init_transformer is deterministic in the seed") {
  const auto cfg = tiny_transformer_config();
  auto p1 = init_transformer(cfg, 42);
  auto p2 = init_transformer(cfg, 42);
  auto p3 = init_transformer(cfg, 43);
  CHECK(numcore::parameter_digest(p1) == numcore::parameter_digest(p2));
  CHECK(numcore::parameter_digest(p1) != numcore::parameter_digest(p3));
}

TEST_CASE("init_transformer respects the scaled-uniform bound") {
  const auto cfg = tiny_transformer_config();
  auto params = init_transformer(cfg, 7);
  for (const auto& [name, t] : params.entries()) {
    if (name.find("norm") != std::string::npos ||
        name.find("bias") != std::string::npos) {
      continue;  // affine norms and biases use constant init
    }
    int fan_in = t.dim(0), fan_out = t.dim(t.rank() - 1);
    const double bound = std::sqrt(6.0 / (fan_in + fan_out)) + 1e-12;
    for (double v : t.values()) {
      CHECK(std::abs(v) <= bound);
    }
  }
}

TEST_CASE("init validates config fields by name") {
  auto cfg = tiny_transformer_config();
  cfg.model_dim = 9;  // not divisible by num_heads=2
  CHECK_THROWS_WITH_AS(init_transformer(cfg, 1),
                       doctest::Contains("num_heads"), std::invalid_argument);
  auto ccfg = tiny_cnn_config();
  ccfg.filter_widths = {99};
  CHECK_THROWS_WITH_AS(init_cnn_highway(ccfg, 1),
                       doctest::Contains("max_seq_len"), std::invalid_argument);
}

TEST_CASE("transformer logits have shape (batch, 2)") {
  const auto cfg = tiny_transformer_config();
  auto params = init_transformer(cfg, 3);
  GradGuard off(false);
  auto logits = transformer_forward(params, cfg, tiny_batch(8), false);
  CHECK(logits.rows() == 3);
  CHECK(logits.cols() == 2);
}

TEST_CASE("permuting examples in a batch permutes logits identically") {
  const auto cfg = tiny_transformer_config();
  auto params = init_transformer(cfg, 3);
  const auto s1 = make_sequence({4, 5, 6}, 8);
  const auto s2 = make_sequence({7, 8}, 8);
  const auto s3 = make_sequence({9, 10, 11, 4, 5}, 8);
  GradGuard off(false);
  auto fwd = [&](const std::vector<const tokenizer::TokenSequence*>& order) {
    return transformer_forward(params, cfg, Batch::from_sequences(order), false);
  };
  auto abc = fwd({&s1, &s2, &s3});
  auto cab = fwd({&s3, &s1, &s2});
  for (int j = 0; j < 2; ++j) {
    CHECK(abc.values()[static_cast<std::size_t>(j)] ==
          cab.values()[static_cast<std::size_t>(2 + j)]);
    CHECK(abc.values()[static_cast<std::size_t>(2 + j)] ==
          cab.values()[static_cast<std::size_t>(4 + j)]);
    CHECK(abc.values()[static_cast<std::size_t>(4 + j)] ==
          cab.values()[static_cast<std::size_t>(j)]);
  }
}

TEST_CASE("changing a PAD position's token id never changes transformer logits") {
  const auto cfg = tiny_transformer_config();
  auto params = init_transformer(cfg, 5);
  auto s1 = make_sequence({4, 5}, 8);
  auto s2 = make_sequence({6, 7, 8, 9}, 8);
  GradGuard off(false);
  auto base = transformer_forward(params, cfg, Batch::from_sequences({&s1, &s2}), false);
  // PAD tail of s1 sits inside the cropped window because s2 is longer.
  REQUIRE(s1.ids[5] == tokenizer::kPadId);
  REQUIRE(s1.attention_mask[5] == 0);
  s1.ids[5] = 11;  // garbage token id at a masked position
  auto poked = transformer_forward(params, cfg, Batch::from_sequences({&s1, &s2}), false);
  for (std::size_t i = 0; i < base.values().size(); ++i) {
    CHECK(std::abs(base.values()[i] - poked.values()[i]) < 1e-9);
  }
}

TEST_CASE("re-encoding with extra PAD leaves logits unchanged (both models)") {
  const auto tcfg = tiny_transformer_config();
  auto tparams = init_transformer(tcfg, 6);
  const auto ccfg = tiny_cnn_config();
  auto cparams = init_cnn_highway(ccfg, 6);
  GradGuard off(false);
  for (int short_len : {6, 7, 8}) {
    const auto a = make_sequence({4, 5, 6}, short_len);
    const auto b = make_sequence({7, 8, 9}, short_len);
    auto batch = Batch::from_sequences({&a, &b});
    auto t_logits = transformer_forward(tparams, tcfg, batch, false);
    auto c_logits = cnn_highway_forward(cparams, ccfg, batch, false);
    if (short_len == 6) continue;
    const auto a6 = make_sequence({4, 5, 6}, 6);
    const auto b6 = make_sequence({7, 8, 9}, 6);
    auto base = Batch::from_sequences({&a6, &b6});
    CHECK(bit_equal(transformer_forward(tparams, tcfg, base, false).values(),
                    t_logits.values()));
    CHECK(bit_equal(cnn_highway_forward(cparams, ccfg, base, false).values(),
                    c_logits.values()));
  }
}

TEST_CASE("with dropout 0, train and eval forwards agree bit-exactly") {
  auto cfg = tiny_transformer_config();
  cfg.dropout_rate = 0.0;
  auto params = init_transformer(cfg, 8);
  auto batch = tiny_batch(8);
  Rng rng(1);
  GradGuard off(false);
  auto train_logits = transformer_forward(params, cfg, batch, true, &rng);
  auto eval_logits = transformer_forward(params, cfg, batch, false);
  CHECK(bit_equal(train_logits.values(), eval_logits.values()));
}

TEST_CASE("dropout changes training logits but never eval logits") {
  auto cfg = tiny_transformer_config();
  cfg.dropout_rate = 0.3;
  auto params = init_transformer(cfg, 8);
  auto batch = tiny_batch(8);
  GradGuard off(false);
  Rng r1(10), r2(11);
  auto a = transformer_forward(params, cfg, batch, true, &r1);
  auto b = transformer_forward(params, cfg, batch, true, &r2);
  CHECK_FALSE(bit_equal(a.values(), b.values()));
  auto e1 = transformer_forward(params, cfg, batch, false);
  auto e2 = transformer_forward(params, cfg, batch, false);
  CHECK(bit_equal(e1.values(), e2.values()));
}

TEST_CASE("checkpoint save/load reproduces logits bit-exactly") {
  const auto cfg = tiny_transformer_config();
  auto params = init_transformer(cfg, 9);
  const auto dir = std::filesystem::temp_directory_path() / "humor_model_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "model.ckpt").string();
  save_model({cfg, params, 9, "digest", 1}, path);
  auto loaded = load_model(path);
  GradGuard off(false);
  auto batch = tiny_batch(8);
  auto original = transformer_forward(params, cfg, batch, false);
  auto reloaded = forward(loaded.params, loaded.config, batch, false);
  CHECK(bit_equal(original.values(), reloaded.values()));
  std::filesystem::remove_all(dir);
}

TEST_CASE("highway gate saturation reproduces carry and transform exactly") {
  Rng rng(12);
  auto x = testutil::random_tensor({3, 4}, rng, -1, 1, false);
  auto wt = testutil::random_tensor({4, 4}, rng, -0.5, 0.5, false);
  auto wh = testutil::random_tensor({4, 4}, rng, -0.5, 0.5, false);
  auto bh = testutil::random_tensor({4}, rng, -0.5, 0.5, false);

  auto gate_closed = Tensor::full({4}, -1e9);
  auto y_carry = highway_layer(x, wt, gate_closed, wh, bh);
  CHECK(bit_equal(y_carry.values(), x.values()));

  auto gate_open = Tensor::full({4}, 1e9);
  auto y_transform = highway_layer(x, wt, gate_open, wh, bh);
  auto h = numcore::relu(numcore::add_broadcast_row(numcore::matmul(x, wh), bh));
  CHECK(bit_equal(y_transform.values(), h.values()));
}

TEST_CASE("highway layer gradient vs finite differences") {
  Rng rng(13);
  auto x = testutil::random_tensor({3, 4}, rng);
  auto wt = testutil::random_tensor({4, 4}, rng);
  auto bt = testutil::random_tensor({4}, rng);
  auto wh = testutil::random_tensor({4, 4}, rng);
  auto bh = testutil::random_tensor({4}, rng);
  auto w = testutil::random_tensor({3, 4}, rng, -1, 1, false);

  auto fwd = [&]() { return highway_layer(x, wt, bt, wh, bh); };
  auto objective = [&]() {
    GradGuard off(false);
    auto out = fwd();
    double s = 0.0;
    for (std::size_t i = 0; i < out.values().size(); ++i)
      s += out.values()[i] * w.values()[i];
    return s;
  };
  {
    auto out = fwd();
    auto prod = numcore::mul(out, w);
    auto ones_l = Tensor::full({1, 3}, 1.0);
    auto ones_r = Tensor::full({4, 1}, 1.0);
    backward(numcore::matmul(numcore::matmul(ones_l, prod), ones_r));
  }
  for (auto* leaf : {&x, &wt, &bt, &wh, &bh}) {
    auto rep = testutil::check_gradient(*leaf, objective);
    CHECK_MESSAGE(rep.max_rel_err < 1e-5, rep.worst);
  }
}

TEST_CASE("cnn logits shape and short-span error names the example") {
  const auto cfg = tiny_cnn_config();
  auto params = init_cnn_highway(cfg, 14);
  GradGuard off(false);
  auto logits = cnn_highway_forward(params, cfg, tiny_batch(8), false);
  CHECK(logits.rows() == 3);
  CHECK(logits.cols() == 2);

  const auto empty = make_sequence({}, 8);  // span 2 < widest filter 3
  auto batch = Batch::from_sequences({&empty});
  batch.example_ids = {"joke-17"};
  CHECK_THROWS_WITH_AS(cnn_highway_forward(params, cfg, batch, false),
                       doctest::Contains("joke-17"), std::runtime_error);
}

TEST_CASE("full transformer gradient check vs finite differences") {
  const auto cfg = tiny_transformer_config();
  auto params = init_transformer(cfg, 21);
  REQUIRE(params.parameter_count() <= 5000);
  auto batch = tiny_batch(8);
  std::vector<int> labels{0, 1, 0};

  auto objective = [&]() {
    GradGuard off(false);
    return cross_entropy_loss(transformer_forward(params, cfg, batch, false),
                              labels)
        .item();
  };
  backward(cross_entropy_loss(transformer_forward(params, cfg, batch, false),
                              labels));
  double worst = 0.0;
  std::string worst_name;
  for (auto& [name, tensor] : params.entries()) {
    auto t = tensor;
    auto rep = testutil::check_gradient(t, objective, name.c_str());
    if (rep.max_rel_err > worst) {
      worst = rep.max_rel_err;
      worst_name = name + ": " + rep.worst;
    }
  }
  CHECK_MESSAGE(worst < 1e-4, worst_name);
}

TEST_CASE("full cnn+highway gradient check vs finite differences") {
  const auto cfg = tiny_cnn_config();
  auto params = init_cnn_highway(cfg, 22);
  REQUIRE(params.parameter_count() <= 5000);
  auto batch = tiny_batch(8);
  std::vector<int> labels{1, 0, 1};

  auto objective = [&]() {
    GradGuard off(false);
    return cross_entropy_loss(cnn_highway_forward(params, cfg, batch, false),
                              labels)
        .item();
  };
  backward(cross_entropy_loss(cnn_highway_forward(params, cfg, batch, false),
                              labels));
  double worst = 0.0;
  std::string worst_name;
  for (auto& [name, tensor] : params.entries()) {
    auto t = tensor;
    auto rep = testutil::check_gradient(t, objective, name.c_str());
    if (rep.max_rel_err > worst) {
      worst = rep.max_rel_err;
      worst_name = name + ": " + rep.worst;
    }
  }
  CHECK_MESSAGE(worst < 1e-4, worst_name);
}

TEST_CASE("model config json round-trip") {
  ModelConfig t = tiny_transformer_config();
  ModelConfig c = tiny_cnn_config();
  auto t2 = config_from_json(config_to_json(t));
  auto c2 = config_from_json(config_to_json(c));
  CHECK(model_kind(t2) == "transformer");
  CHECK(model_kind(c2) == "cnn_highway");
  CHECK(std::get<TransformerConfig>(t2).ffn_dim == 16);
  CHECK(std::get<CnnHighwayConfig>(c2).filter_widths == std::vector<int>{2, 3});
}
