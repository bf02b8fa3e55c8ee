#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "humor/checkpoint.hpp"
#include "humor/ops.hpp"
#include "humor/rng.hpp"
#include "humor/tensor.hpp"
#include "humor/tokenizer.hpp"

namespace humor::models {

using Parameters = numcore::NamedTensors;

struct TransformerConfig {
  int vocab_size = 0;
  int max_seq_len = 128;
  int model_dim = 64;
  int num_heads = 4;
  int num_layers = 2;
  int ffn_dim = 256;
  double dropout_rate = 0.1;
  int num_classes = 2;

  void validate() const;
  nlohmann::json to_json() const;
  static TransformerConfig from_json(const nlohmann::json& j);
};

struct CnnHighwayConfig {
  int vocab_size = 0;
  int max_seq_len = 128;
  int embed_dim = 64;
  std::vector<int> filter_widths{3, 4, 5};
  int filters_per_width = 64;
  int num_highway_layers = 1;
  int num_classes = 2;

  int feature_dim() const {
    return static_cast<int>(filter_widths.size()) * filters_per_width;
  }
  void validate() const;
  nlohmann::json to_json() const;
  static CnnHighwayConfig from_json(const nlohmann::json& j);
};

using ModelConfig = std::variant<TransformerConfig, CnnHighwayConfig>;

std::string model_kind(const ModelConfig& config);
nlohmann::json config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const nlohmann::json& j);

// A batch of encoded sequences, flattened row-major.
struct Batch {
  int size = 0;
  int seq_len = 0;
  std::vector<int> token_ids;            // size * seq_len
  std::vector<std::uint8_t> mask;        // 1 = real token
  std::vector<std::string> example_ids;  // optional, for error messages

  static Batch from_sequences(
      const std::vector<const tokenizer::TokenSequence*>& seqs,
      const std::vector<std::string>* ids = nullptr);
};

Parameters init_transformer(const TransformerConfig& config, std::uint64_t seed);
Parameters init_cnn_highway(const CnnHighwayConfig& config, std::uint64_t seed);

// Logits (batch, num_classes). Dropout draws from `dropout_rng` and is
// applied only when train_mode is set; evaluation should also wrap calls in
// a GradGuard(false) to skip graph recording.
numcore::Tensor transformer_forward(const Parameters& params,
                                    const TransformerConfig& config,
                                    const Batch& batch, bool train_mode,
                                    Rng* dropout_rng = nullptr);

// One gated layer: y = t (.) H + (1 - t) (.) x with t = sigmoid(x Wt + bt)
// and H = relu(x Wh + bh).
numcore::Tensor highway_layer(const numcore::Tensor& x,
                              const numcore::Tensor& transform_weight,
                              const numcore::Tensor& transform_bias,
                              const numcore::Tensor& carry_weight,
                              const numcore::Tensor& carry_bias);

numcore::Tensor cnn_highway_forward(const Parameters& params,
                                    const CnnHighwayConfig& config,
                                    const Batch& batch, bool train_mode,
                                    Rng* dropout_rng = nullptr);

numcore::Tensor forward(const Parameters& params, const ModelConfig& config,
                        const Batch& batch, bool train_mode,
                        Rng* dropout_rng = nullptr);

Parameters init_parameters(const ModelConfig& config, std::uint64_t seed);

// Checkpoint file plus a JSON sidecar (<path>.json) carrying the config,
// seed, and vocabulary digest. Neither file embeds paths or timestamps, so
// identical runs produce identical bytes.
struct ModelBundle {
  ModelConfig config;
  Parameters params;
  std::uint64_t seed = 0;
  std::string vocab_digest;
  int epoch = 0;
};

void save_model(const ModelBundle& bundle, const std::string& path);
ModelBundle load_model(const std::string& path, bool requires_grad = false);

}  // namespace humor::models
