#include <cmath>
#include <fstream>
#include <stdexcept>

#include "humor/models.hpp"

namespace humor::models {

using numcore::Tensor;

namespace {

void check(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

double xavier_bound(int fan_in, int fan_out) {
  return std::sqrt(6.0 / (fan_in + fan_out));
}

Tensor uniform_init(std::vector<int> shape, int fan_in, int fan_out, Rng& rng) {
  auto t = Tensor::zeros(std::move(shape), /*requires_grad=*/true);
  const double bound = xavier_bound(fan_in, fan_out);
  double* v = t.data();
  for (std::int64_t i = 0; i < t.size(); ++i) v[i] = rng.uniform(-bound, bound);
  return t;
}

Tensor zeros_param(std::vector<int> shape) {
  return Tensor::zeros(std::move(shape), /*requires_grad=*/true);
}

Tensor ones_param(std::vector<int> shape) {
  return Tensor::full(std::move(shape), 1.0, /*requires_grad=*/true);
}

std::string layer_name(int layer, const char* suffix) {
  return "layer" + std::to_string(layer) + "." + suffix;
}

}  // namespace

void TransformerConfig::validate() const {
  check(vocab_size >= tokenizer::kReservedIds,
        "transformer config: vocab_size must cover the reserved ids, got " +
            std::to_string(vocab_size));
  check(max_seq_len >= 2, "transformer config: max_seq_len must be >= 2");
  check(model_dim > 0, "transformer config: model_dim must be positive");
  check(num_heads > 0, "transformer config: num_heads must be positive");
  check(model_dim % num_heads == 0,
        "transformer config: model_dim " + std::to_string(model_dim) +
            " not divisible by num_heads " + std::to_string(num_heads));
  check(num_layers > 0, "transformer config: num_layers must be positive");
  check(ffn_dim > 0, "transformer config: ffn_dim must be positive");
  check(dropout_rate >= 0.0 && dropout_rate < 1.0,
        "transformer config: dropout_rate must be in [0, 1)");
  check(num_classes >= 2, "transformer config: num_classes must be >= 2");
}

nlohmann::json TransformerConfig::to_json() const {
  return {{"vocab_size", vocab_size},     {"max_seq_len", max_seq_len},
          {"model_dim", model_dim},       {"num_heads", num_heads},
          {"num_layers", num_layers},     {"ffn_dim", ffn_dim},
          {"dropout_rate", dropout_rate}, {"num_classes", num_classes}};
}

TransformerConfig TransformerConfig::from_json(const nlohmann::json& j) {
  TransformerConfig c;
  c.vocab_size = j.at("vocab_size").get<int>();
  c.max_seq_len = j.at("max_seq_len").get<int>();
  c.model_dim = j.at("model_dim").get<int>();
  c.num_heads = j.at("num_heads").get<int>();
  c.num_layers = j.at("num_layers").get<int>();
  c.ffn_dim = j.at("ffn_dim").get<int>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.num_classes = j.at("num_classes").get<int>();
  return c;
}

Batch Batch::from_sequences(
    const std::vector<const tokenizer::TokenSequence*>& seqs,
    const std::vector<std::string>* ids) {
  Batch batch;
  batch.size = static_cast<int>(seqs.size());
  if (seqs.empty()) return batch;
  batch.seq_len = seqs[0]->length();
  batch.token_ids.reserve(static_cast<std::size_t>(batch.size) * batch.seq_len);
  batch.mask.reserve(batch.token_ids.capacity());
  for (const auto* seq : seqs) {
    if (seq->length() != batch.seq_len) {
      throw std::invalid_argument(
          "batch mixes sequence lengths: " + std::to_string(batch.seq_len) +
          " vs " + std::to_string(seq->length()));
    }
    batch.token_ids.insert(batch.token_ids.end(), seq->ids.begin(), seq->ids.end());
    batch.mask.insert(batch.mask.end(), seq->attention_mask.begin(),
                      seq->attention_mask.end());
  }
  if (ids) batch.example_ids = *ids;
  return batch;
}

Parameters init_transformer(const TransformerConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const int d = config.model_dim;
  Parameters p;
  p.add("token_embedding",
        uniform_init({config.vocab_size, d}, config.vocab_size, d, rng));
  p.add("position_embedding",
        uniform_init({config.max_seq_len, d}, config.max_seq_len, d, rng));
  for (int l = 0; l < config.num_layers; ++l) {
    for (const char* proj : {"attention.query", "attention.key",
                             "attention.value", "attention.output"}) {
      p.add(layer_name(l, proj) + ".weight", uniform_init({d, d}, d, d, rng));
      p.add(layer_name(l, proj) + ".bias", zeros_param({d}));
    }
    p.add(layer_name(l, "norm1.gain"), ones_param({d}));
    p.add(layer_name(l, "norm1.bias"), zeros_param({d}));
    p.add(layer_name(l, "ffn.expand.weight"),
          uniform_init({d, config.ffn_dim}, d, config.ffn_dim, rng));
    p.add(layer_name(l, "ffn.expand.bias"), zeros_param({config.ffn_dim}));
    p.add(layer_name(l, "ffn.project.weight"),
          uniform_init({config.ffn_dim, d}, config.ffn_dim, d, rng));
    p.add(layer_name(l, "ffn.project.bias"), zeros_param({d}));
    p.add(layer_name(l, "norm2.gain"), ones_param({d}));
    p.add(layer_name(l, "norm2.bias"), zeros_param({d}));
  }
  p.add("classifier.weight", uniform_init({d, config.num_classes}, d,
                                          config.num_classes, rng));
  p.add("classifier.bias", zeros_param({config.num_classes}));
  return p;
}

namespace {

// Longest real-token prefix in the batch. Positions past it are PAD for
// every example: attention gives them exactly zero weight (the -1e9 bias
// underflows the softmax) and nothing else is position-coupled, so cropping
// them changes no logit bit.
int effective_length(const Batch& batch) {
  int longest = 1;
  for (int b = 0; b < batch.size; ++b) {
    int len = 0;
    const std::size_t off = static_cast<std::size_t>(b) * batch.seq_len;
    for (int t = 0; t < batch.seq_len; ++t) len += batch.mask[off + t];
    longest = std::max(longest, len);
  }
  return std::min(longest, batch.seq_len);
}

}  // namespace

Tensor transformer_forward(const Parameters& params,
                           const TransformerConfig& config, const Batch& batch,
                           bool train_mode, Rng* dropout_rng) {
  config.validate();
  check(batch.size > 0, "transformer_forward: empty batch");
  check(batch.seq_len <= config.max_seq_len,
        "transformer_forward: batch seq_len " + std::to_string(batch.seq_len) +
            " exceeds config max_seq_len " + std::to_string(config.max_seq_len));
  if (train_mode && config.dropout_rate > 0.0 && dropout_rng == nullptr) {
    throw std::invalid_argument(
        "transformer_forward: train_mode with dropout needs an rng");
  }
  const int b_count = batch.size;
  const int full_len = batch.seq_len;
  const int len = effective_length(batch);
  const int d = config.model_dim;
  const int heads = config.num_heads;
  const int head_dim = d / heads;

  std::vector<int> flat_ids(static_cast<std::size_t>(b_count) * len);
  std::vector<int> flat_pos(flat_ids.size());
  std::vector<std::vector<std::uint8_t>> key_masked(
      static_cast<std::size_t>(b_count));
  for (int b = 0; b < b_count; ++b) {
    key_masked[static_cast<std::size_t>(b)].resize(static_cast<std::size_t>(len));
    for (int t = 0; t < len; ++t) {
      const std::size_t src = static_cast<std::size_t>(b) * full_len + t;
      const std::size_t dst = static_cast<std::size_t>(b) * len + t;
      flat_ids[dst] = batch.token_ids[src];
      flat_pos[dst] = t;
      key_masked[static_cast<std::size_t>(b)][static_cast<std::size_t>(t)] =
          batch.mask[src] ? 0 : 1;
    }
  }

  const bool use_dropout = train_mode && config.dropout_rate > 0.0;
  auto drop = [&](const Tensor& t) {
    return use_dropout
               ? numcore::dropout(t, config.dropout_rate, *dropout_rng, true)
               : t;
  };

  Tensor x = numcore::add(
      numcore::embedding_lookup(params.at("token_embedding"), flat_ids),
      numcore::embedding_lookup(params.at("position_embedding"), flat_pos));
  x = drop(x);

  for (int l = 0; l < config.num_layers; ++l) {
    const auto name = [l](const char* suffix) { return layer_name(l, suffix); };
    Tensor q = numcore::add_broadcast_row(
        numcore::matmul(x, params.at(name("attention.query.weight"))),
        params.at(name("attention.query.bias")));
    Tensor k = numcore::add_broadcast_row(
        numcore::matmul(x, params.at(name("attention.key.weight"))),
        params.at(name("attention.key.bias")));
    Tensor v = numcore::add_broadcast_row(
        numcore::matmul(x, params.at(name("attention.value.weight"))),
        params.at(name("attention.value.bias")));

    std::vector<Tensor> per_example;
    per_example.reserve(static_cast<std::size_t>(b_count));
    std::vector<int> rows(static_cast<std::size_t>(len));
    for (int b = 0; b < b_count; ++b) {
      for (int t = 0; t < len; ++t) rows[static_cast<std::size_t>(t)] = b * len + t;
      Tensor qb = numcore::gather_rows(q, rows);
      Tensor kb = numcore::gather_rows(k, rows);
      Tensor vb = numcore::gather_rows(v, rows);
      std::vector<Tensor> head_outputs;
      head_outputs.reserve(static_cast<std::size_t>(heads));
      for (int h = 0; h < heads; ++h) {
        Tensor qh = numcore::slice_cols(qb, h * head_dim, head_dim);
        Tensor kh = numcore::slice_cols(kb, h * head_dim, head_dim);
        Tensor vh = numcore::slice_cols(vb, h * head_dim, head_dim);
        head_outputs.push_back(numcore::scaled_dot_attention(
            qh, kh, vh, key_masked[static_cast<std::size_t>(b)]));
      }
      per_example.push_back(numcore::concat_cols(head_outputs));
    }
    Tensor attn = numcore::concat_rows(per_example);
    attn = numcore::add_broadcast_row(
        numcore::matmul(attn, params.at(name("attention.output.weight"))),
        params.at(name("attention.output.bias")));
    attn = drop(attn);
    x = numcore::layer_norm(numcore::add(x, attn), params.at(name("norm1.gain")),
                            params.at(name("norm1.bias")));

    Tensor ffn = numcore::relu(numcore::add_broadcast_row(
        numcore::matmul(x, params.at(name("ffn.expand.weight"))),
        params.at(name("ffn.expand.bias"))));
    ffn = numcore::add_broadcast_row(
        numcore::matmul(ffn, params.at(name("ffn.project.weight"))),
        params.at(name("ffn.project.bias")));
    ffn = drop(ffn);
    x = numcore::layer_norm(numcore::add(x, ffn), params.at(name("norm2.gain")),
                            params.at(name("norm2.bias")));
  }

  std::vector<int> cls_rows(static_cast<std::size_t>(b_count));
  for (int b = 0; b < b_count; ++b) cls_rows[static_cast<std::size_t>(b)] = b * len;
  Tensor cls = numcore::gather_rows(x, cls_rows);
  return numcore::add_broadcast_row(
      numcore::matmul(cls, params.at("classifier.weight")),
      params.at("classifier.bias"));
}

std::string model_kind(const ModelConfig& config) {
  return std::holds_alternative<TransformerConfig>(config) ? "transformer"
                                                           : "cnn_highway";
}

nlohmann::json config_to_json(const ModelConfig& config) {
  nlohmann::json j = std::visit([](const auto& c) { return c.to_json(); }, config);
  j["model"] = model_kind(config);
  return j;
}

ModelConfig config_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("model").get<std::string>();
  if (kind == "transformer") return TransformerConfig::from_json(j);
  if (kind == "cnn_highway") return CnnHighwayConfig::from_json(j);
  throw std::invalid_argument("unknown model kind: " + kind);
}

Parameters init_parameters(const ModelConfig& config, std::uint64_t seed) {
  if (const auto* t = std::get_if<TransformerConfig>(&config)) {
    return init_transformer(*t, seed);
  }
  return init_cnn_highway(std::get<CnnHighwayConfig>(config), seed);
}

Tensor forward(const Parameters& params, const ModelConfig& config,
               const Batch& batch, bool train_mode, Rng* dropout_rng) {
  if (const auto* t = std::get_if<TransformerConfig>(&config)) {
    return transformer_forward(params, *t, batch, train_mode, dropout_rng);
  }
  return cnn_highway_forward(params, std::get<CnnHighwayConfig>(config), batch,
                             train_mode, dropout_rng);
}

void save_model(const ModelBundle& bundle, const std::string& path) {
  numcore::save_checkpoint(bundle.params, path);
  nlohmann::json sidecar;
  sidecar["config"] = config_to_json(bundle.config);
  sidecar["seed"] = bundle.seed;
  sidecar["vocab_digest"] = bundle.vocab_digest;
  sidecar["epoch"] = bundle.epoch;
  std::ofstream out(path + ".json");
  if (!out) throw std::runtime_error("cannot write model sidecar: " + path + ".json");
  out << sidecar.dump(2) << '\n';
}

ModelBundle load_model(const std::string& path, bool requires_grad) {
  std::ifstream in(path + ".json");
  if (!in) throw std::runtime_error("cannot open model sidecar: " + path + ".json");
  nlohmann::json sidecar = nlohmann::json::parse(in);
  ModelBundle bundle{config_from_json(sidecar.at("config")),
                     numcore::load_checkpoint(path, requires_grad),
                     sidecar.at("seed").get<std::uint64_t>(),
                     sidecar.at("vocab_digest").get<std::string>(),
                     sidecar.at("epoch").get<int>()};
  return bundle;
}

}  // namespace humor::models
