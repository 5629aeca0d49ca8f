#pragma once

#include "hgsum/model.hpp"
#include "hgsum/training.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace hgsum {

// Every command-line setting. JSON keys are the flag names with '-' -> '_'.
struct RunConfig {
  std::string command;

  // paths
  std::string data;
  std::string dev;
  std::string out;
  std::string embeddings;
  std::string sentence_embeddings;
  std::string checkpoint;
  std::string generated;
  std::string references;

  std::uint64_t seed = 13;
  std::string precision = "double";

  // corpus / embeddings / graph
  Index max_input_len = 4096;
  Index min_freq = 2;
  Index embedding_dim = 100;
  double we_threshold = 0.5;
  std::optional<double> ss_threshold;
  bool external_pos = false;

  // text model
  Index d_model = 128;
  Index n_layers_enc = 2;
  Index n_layers_dec = 2;
  Index n_heads = 4;
  Index ffn_dim = 512;
  Index attention_window = 16;
  Index max_out_len = 512;
  double dropout = 0.1;
  bool no_length_norm = false;

  // graph encoder / compressor
  Index mgat_layers = 2;
  Index mgat_heads = 2;
  Index mgat_d_head = 32;
  bool no_mgat = false;
  bool no_residual = false;
  double k = 0.5;
  bool renorm_mask = false;
  bool no_compressor = false;

  // training
  double beta = 0.5;
  double label_smoothing = 0.1;
  double lr = 3e-4;
  Index epochs = 10;
  Index patience = 5;
  Index accum = 1;
  Index max_steps = 0;
  Index dev_max_len = 64;

  // decoding / sweeps
  Index beam_width = 5;
  std::vector<double> k_values;

  ModelConfig model_config() const;
  TrainConfig train_config() const;
  bool single_precision() const { return precision == "single"; }
  void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);
// Keys missing from `j` keep their current values in `cfg`; unknown keys and
// ill-typed values throw ConfigError.
void apply_json(const nlohmann::json& j, RunConfig& cfg);
RunConfig load_run_config(const std::string& path);

}  // namespace hgsum
