#pragma once

#include "hgsum/value.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hgsum {

enum class Init { Xavier, Zeros, Ones };

struct ParamSpec {
  std::string name;
  Index rows = 0;
  Index cols = 0;
  Init init = Init::Xavier;
};

using ShapePlan = std::vector<ParamSpec>;

struct Param {
  std::string name;
  Value value;
  bool trainable = true;
};

// Named trainable parameters in insertion order. Names are unique.
class ModelParams {
 public:
  Value add(std::string name, Matrix data, bool trainable = true);
  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  const Value& at(const std::string& name) const;
  Value& at(const std::string& name);

  std::vector<Param>& entries() { return entries_; }
  const std::vector<Param>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();
  // Copies every parameter's data; the copy shares nothing with `this`.
  ModelParams clone() const;
  // Overwrites data of identically named and shaped parameters.
  void assign_from(const ModelParams& other);

 private:
  std::vector<Param> entries_;
  std::map<std::string, std::size_t> index_;
};

// Xavier-uniform matrices within +-sqrt(6 / (rows + cols)); deterministic in `seed`.
ModelParams init_params(const ShapePlan& plan, std::uint64_t seed);

// Rounds every parameter to the nearest float.
void round_to_single(ModelParams& params);

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  // One update from the accumulated grads. Throws NumericError naming the
  // first parameter with a non-finite gradient; nothing is updated then.
  void step(ModelParams& params, double grad_scale = 1.0);
  std::int64_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::map<std::string, std::pair<Matrix, Matrix>> moments_;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  Index worst_entry = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t entries_checked = 0;
};

// Central differences against the recorded gradient. Params with more than
// `max_entries_per_param` scalars are sampled (at least 64 entries each).
// rel err = |a - n| / max(|a|, |n|, 1e-8).
GradCheckResult grad_check(const std::function<Value()>& loss_fn, const std::vector<Param>& params, double epsilon = 1e-5,
                           std::size_t max_entries_per_param = 64, std::uint64_t seed = 7);

// Binary archive: magic, format version, scalar width, metadata text, then
// (name, rows, cols, raw little-endian scalars) per parameter.
struct CheckpointData {
  std::string metadata;
  int scalar_bytes = 8;
  std::vector<std::pair<std::string, Matrix>> tensors;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const ModelParams& params, const std::string& metadata,
                     bool single_precision = false);
CheckpointData read_checkpoint(const std::string& path);
// Loads into existing params; every name must exist with identical shape.
std::string load_checkpoint(const std::string& path, ModelParams& params);

}  // namespace hgsum
