#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "humor/models.hpp"

namespace humor::models {

using numcore::Tensor;

namespace {

void check(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

Tensor uniform_init(std::vector<int> shape, int fan_in, int fan_out, Rng& rng) {
  auto t = Tensor::zeros(std::move(shape), /*requires_grad=*/true);
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  double* v = t.data();
  for (std::int64_t i = 0; i < t.size(); ++i) v[i] = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

void CnnHighwayConfig::validate() const {
  check(vocab_size >= tokenizer::kReservedIds,
        "cnn config: vocab_size must cover the reserved ids, got " +
            std::to_string(vocab_size));
  check(max_seq_len >= 2, "cnn config: max_seq_len must be >= 2");
  check(embed_dim > 0, "cnn config: embed_dim must be positive");
  check(!filter_widths.empty(), "cnn config: filter_widths must be non-empty");
  for (int w : filter_widths) {
    check(w > 0, "cnn config: filter widths must be positive");
    check(w <= max_seq_len, "cnn config: filter width " + std::to_string(w) +
                                " exceeds max_seq_len " +
                                std::to_string(max_seq_len));
  }
  check(filters_per_width > 0, "cnn config: filters_per_width must be positive");
  check(num_highway_layers >= 0,
        "cnn config: num_highway_layers must be non-negative");
  check(num_classes >= 2, "cnn config: num_classes must be >= 2");
}

nlohmann::json CnnHighwayConfig::to_json() const {
  return {{"vocab_size", vocab_size},
          {"max_seq_len", max_seq_len},
          {"embed_dim", embed_dim},
          {"filter_widths", filter_widths},
          {"filters_per_width", filters_per_width},
          {"num_highway_layers", num_highway_layers},
          {"num_classes", num_classes}};
}

CnnHighwayConfig CnnHighwayConfig::from_json(const nlohmann::json& j) {
  CnnHighwayConfig c;
  c.vocab_size = j.at("vocab_size").get<int>();
  c.max_seq_len = j.at("max_seq_len").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.filter_widths = j.at("filter_widths").get<std::vector<int>>();
  c.filters_per_width = j.at("filters_per_width").get<int>();
  c.num_highway_layers = j.at("num_highway_layers").get<int>();
  c.num_classes = j.at("num_classes").get<int>();
  return c;
}

Parameters init_cnn_highway(const CnnHighwayConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  Parameters p;
  p.add("embedding", uniform_init({config.vocab_size, config.embed_dim},
                                  config.vocab_size, config.embed_dim, rng));
  for (int w : config.filter_widths) {
    const std::string base = "conv" + std::to_string(w);
    p.add(base + ".weight",
          uniform_init({config.filters_per_width, w, config.embed_dim},
                       w * config.embed_dim, config.filters_per_width, rng));
    p.add(base + ".bias", Tensor::zeros({config.filters_per_width}, true));
  }
  const int dim = config.feature_dim();
  for (int l = 0; l < config.num_highway_layers; ++l) {
    const std::string base = "highway" + std::to_string(l);
    p.add(base + ".transform.weight", uniform_init({dim, dim}, dim, dim, rng));
    p.add(base + ".transform.bias", Tensor::zeros({dim}, true));
    p.add(base + ".carry.weight", uniform_init({dim, dim}, dim, dim, rng));
    p.add(base + ".carry.bias", Tensor::zeros({dim}, true));
  }
  p.add("classifier.weight",
        uniform_init({dim, config.num_classes}, dim, config.num_classes, rng));
  p.add("classifier.bias", Tensor::zeros({config.num_classes}, true));
  return p;
}

Tensor highway_layer(const Tensor& x, const Tensor& transform_weight,
                     const Tensor& transform_bias, const Tensor& carry_weight,
                     const Tensor& carry_bias) {
  Tensor gate = numcore::sigmoid(numcore::add_broadcast_row(
      numcore::matmul(x, transform_weight), transform_bias));
  Tensor candidate = numcore::relu(numcore::add_broadcast_row(
      numcore::matmul(x, carry_weight), carry_bias));
  // Literal gate formula so saturated gates reproduce x or H exactly.
  return numcore::add(numcore::mul(gate, candidate),
                      numcore::mul(numcore::scalar_affine(gate, -1.0, 1.0), x));
}

Tensor cnn_highway_forward(const Parameters& params,
                           const CnnHighwayConfig& config, const Batch& batch,
                           bool train_mode, Rng* dropout_rng) {
  (void)train_mode;  // the baseline has no dropout
  (void)dropout_rng;
  config.validate();
  check(batch.size > 0, "cnn_highway_forward: empty batch");
  check(batch.seq_len <= config.max_seq_len,
        "cnn_highway_forward: batch seq_len " + std::to_string(batch.seq_len) +
            " exceeds config max_seq_len " + std::to_string(config.max_seq_len));
  const int max_width =
      *std::max_element(config.filter_widths.begin(), config.filter_widths.end());

  std::vector<Tensor> pooled_per_example;
  pooled_per_example.reserve(static_cast<std::size_t>(batch.size));
  Tensor embedding = params.at("embedding");
  for (int b = 0; b < batch.size; ++b) {
    const std::size_t off = static_cast<std::size_t>(b) * batch.seq_len;
    int span = 0;
    for (int t = 0; t < batch.seq_len; ++t) span += batch.mask[off + t];
    if (span < max_width) {
      const std::string id =
          b < static_cast<int>(batch.example_ids.size())
              ? batch.example_ids[static_cast<std::size_t>(b)]
              : "#" + std::to_string(b);
      throw std::runtime_error(
          "example " + id + ": " + std::to_string(span) +
          " real tokens is shorter than the widest filter (" +
          std::to_string(max_width) + ")");
    }
    std::vector<int> ids(batch.token_ids.begin() + static_cast<std::ptrdiff_t>(off),
                         batch.token_ids.begin() + static_cast<std::ptrdiff_t>(off + span));
    Tensor x = numcore::embedding_lookup(embedding, ids);  // (span, embed)
    std::vector<Tensor> pooled;
    pooled.reserve(config.filter_widths.size());
    for (int w : config.filter_widths) {
      const std::string base = "conv" + std::to_string(w);
      Tensor conv = numcore::conv1d_valid(x, params.at(base + ".weight"),
                                          params.at(base + ".bias"));
      pooled.push_back(numcore::max_over_time(numcore::relu(conv)));
    }
    pooled_per_example.push_back(numcore::concat_cols(pooled));
  }

  Tensor features = numcore::concat_rows(pooled_per_example);
  for (int l = 0; l < config.num_highway_layers; ++l) {
    const std::string base = "highway" + std::to_string(l);
    features = highway_layer(features, params.at(base + ".transform.weight"),
                             params.at(base + ".transform.bias"),
                             params.at(base + ".carry.weight"),
                             params.at(base + ".carry.bias"));
  }
  return numcore::add_broadcast_row(
      numcore::matmul(features, params.at("classifier.weight")),
      params.at("classifier.bias"));
}

}  // namespace humor::models
