#include "hgsum/config.hpp"

#include "hgsum/errors.hpp"

#include <fstream>
#include <variant>

namespace hgsum {

namespace {

using Field = std::variant<std::string RunConfig::*, std::uint64_t RunConfig::*, Index RunConfig::*, double RunConfig::*,
                           bool RunConfig::*, std::optional<double> RunConfig::*, std::vector<double> RunConfig::*>;

struct FieldEntry {
  const char* key;
  Field field;
};

const std::vector<FieldEntry>& fields() {
  static const std::vector<FieldEntry> table = {
      {"command", &RunConfig::command},
      {"data", &RunConfig::data},
      {"dev", &RunConfig::dev},
      {"out", &RunConfig::out},
      {"embeddings", &RunConfig::embeddings},
      {"sentence_embeddings", &RunConfig::sentence_embeddings},
      {"checkpoint", &RunConfig::checkpoint},
      {"generated", &RunConfig::generated},
      {"references", &RunConfig::references},
      {"seed", &RunConfig::seed},
      {"precision", &RunConfig::precision},
      {"max_input_len", &RunConfig::max_input_len},
      {"min_freq", &RunConfig::min_freq},
      {"embedding_dim", &RunConfig::embedding_dim},
      {"we_threshold", &RunConfig::we_threshold},
      {"ss_threshold", &RunConfig::ss_threshold},
      {"external_pos", &RunConfig::external_pos},
      {"d_model", &RunConfig::d_model},
      {"n_layers_enc", &RunConfig::n_layers_enc},
      {"n_layers_dec", &RunConfig::n_layers_dec},
      {"n_heads", &RunConfig::n_heads},
      {"ffn_dim", &RunConfig::ffn_dim},
      {"attention_window", &RunConfig::attention_window},
      {"max_out_len", &RunConfig::max_out_len},
      {"dropout", &RunConfig::dropout},
      {"no_length_norm", &RunConfig::no_length_norm},
      {"mgat_layers", &RunConfig::mgat_layers},
      {"mgat_heads", &RunConfig::mgat_heads},
      {"mgat_d_head", &RunConfig::mgat_d_head},
      {"no_mgat", &RunConfig::no_mgat},
      {"no_residual", &RunConfig::no_residual},
      {"k", &RunConfig::k},
      {"renorm_mask", &RunConfig::renorm_mask},
      {"no_compressor", &RunConfig::no_compressor},
      {"beta", &RunConfig::beta},
      {"label_smoothing", &RunConfig::label_smoothing},
      {"lr", &RunConfig::lr},
      {"epochs", &RunConfig::epochs},
      {"patience", &RunConfig::patience},
      {"accum", &RunConfig::accum},
      {"max_steps", &RunConfig::max_steps},
      {"dev_max_len", &RunConfig::dev_max_len},
      {"beam_width", &RunConfig::beam_width},
      {"k_values", &RunConfig::k_values},
  };
  return table;
}

template <class T>
T read_as(const nlohmann::json& v, const char* key) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError("");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError("");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) throw ConfigError("");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError("");
    }
    return v.get<T>();
  } catch (const std::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type: " + v.dump());
  }
}

}  // namespace

ModelConfig RunConfig::model_config() const {
  ModelConfig m;
  m.text.d_model = d_model;
  m.text.n_layers_enc = n_layers_enc;
  m.text.n_layers_dec = n_layers_dec;
  m.text.n_heads = n_heads;
  m.text.ffn_dim = ffn_dim;
  m.text.attention_window = attention_window;
  m.text.max_input_len = max_input_len;
  m.text.max_out_len = max_out_len;
  m.text.dropout = dropout;
  m.text.length_norm = !no_length_norm;
  m.mgat.n_layers = mgat_layers;
  m.mgat.n_heads = mgat_heads;
  m.mgat.d_head = mgat_d_head;
  m.mgat.residual = !no_residual;
  m.compressor.k = k;
  m.compressor.renorm_mask = renorm_mask;
  m.graph.we_threshold = we_threshold;
  m.graph.ss_threshold = ss_threshold;
  m.graph.external_pos = external_pos;
  m.use_mgat = !no_mgat;
  m.use_compressor = !no_compressor;
  m.finalize();
  return m;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.beta = beta;
  t.label_smoothing = label_smoothing;
  t.lr = lr;
  t.epochs = epochs;
  t.patience = patience;
  t.accum = accum;
  t.max_steps = max_steps;
  t.seed = seed;
  t.single_precision = single_precision();
  t.dev_max_len = dev_max_len;
  t.validate();
  return t;
}

void RunConfig::validate() const {
  if (precision != "single" && precision != "double") {
    throw ConfigError("precision must be 'single' or 'double', got '" + precision + "'");
  }
  if (min_freq < 1) throw ConfigError("min_freq must be >= 1");
  if (embedding_dim < 1) throw ConfigError("embedding_dim must be >= 1");
  if (beam_width < 1) throw ConfigError("beam_width must be >= 1");
  model_config();
  train_config();
}

nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& f : fields()) {
    std::visit(
        [&](auto member) {
          const auto& value = cfg.*member;
          using T = std::decay_t<decltype(value)>;
          if constexpr (std::is_same_v<T, std::optional<double>>) {
            j[f.key] = value ? nlohmann::json(*value) : nlohmann::json(nullptr);
          } else {
            j[f.key] = value;
          }
        },
        f.field);
  }
  return j;
}

void apply_json(const nlohmann::json& j, RunConfig& cfg) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const FieldEntry* entry = nullptr;
    for (const auto& f : fields()) {
      if (it.key() == f.key) entry = &f;
    }
    if (!entry) throw ConfigError("unknown config key '" + it.key() + "'");
    std::visit(
        [&](auto member) {
          auto& target = cfg.*member;
          using T = std::decay_t<decltype(target)>;
          if constexpr (std::is_same_v<T, std::optional<double>>) {
            if (it->is_null())
              target.reset();
            else
              target = read_as<double>(*it, entry->key);
          } else if constexpr (std::is_same_v<T, std::vector<double>>) {
            if (!it->is_array()) throw ConfigError(std::string("config key '") + entry->key + "' must be an array");
            T values;
            for (const auto& v : *it) values.push_back(read_as<double>(v, entry->key));
            target = std::move(values);
          } else {
            target = read_as<T>(*it, entry->key);
          }
        },
        entry->field);
  }
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
  RunConfig cfg;
  apply_json(j, cfg);
  return cfg;
}

}  // namespace hgsum
