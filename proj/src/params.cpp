#include "hgsum/params.hpp"

#include "hgsum/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

namespace hgsum {

Value ModelParams::add(std::string name, Matrix data, bool trainable) {
  if (index_.count(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  Value v(std::move(data), trainable);
  index_.emplace(name, entries_.size());
  entries_.push_back(Param{std::move(name), v, trainable});
  return v;
}

const Value& ModelParams::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return entries_[it->second].value;
}

Value& ModelParams::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return entries_[it->second].value;
}

std::size_t ModelParams::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : entries_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

void ModelParams::zero_grad() {
  for (auto& p : entries_) p.value.zero_grad();
}

ModelParams ModelParams::clone() const {
  ModelParams out;
  for (const auto& p : entries_) out.add(p.name, p.value.data(), p.trainable);
  return out;
}

void ModelParams::assign_from(const ModelParams& other) {
  for (auto& p : entries_) {
    if (!other.contains(p.name)) continue;
    const Matrix& src = other.at(p.name).data();
    if (src.rows() == p.value.rows() && src.cols() == p.value.cols()) p.value.mutable_data() = src;
  }
}

ModelParams init_params(const ShapePlan& plan, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ModelParams params;
  for (const auto& spec : plan) {
    Matrix m(spec.rows, spec.cols);
    switch (spec.init) {
      case Init::Zeros:
        m.setZero();
        break;
      case Init::Ones:
        m.setOnes();
        break;
      case Init::Xavier: {
        double bound = std::sqrt(6.0 / static_cast<double>(spec.rows + spec.cols));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (Index k = 0; k < m.size(); ++k) m.data()[k] = dist(rng);
        break;
      }
    }
    params.add(spec.name, std::move(m));
  }
  return params;
}

void round_to_single(ModelParams& params) {
  for (auto& p : params.entries()) {
    Matrix& m = p.value.mutable_data();
    for (Index k = 0; k < m.size(); ++k) m.data()[k] = static_cast<double>(static_cast<float>(m.data()[k]));
  }
}

void Adam::step(ModelParams& params, double grad_scale) {
  for (const auto& p : params.entries()) {
    if (!p.trainable || !p.value.has_grad()) continue;
    if (!p.value.node()->grad.allFinite()) throw NumericError("non-finite gradient in parameter '" + p.name + "'");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (auto& p : params.entries()) {
    if (!p.trainable) continue;
    Matrix g = p.value.grad() * grad_scale;
    auto [it, inserted] = moments_.try_emplace(p.name);
    auto& [m, v] = it->second;
    if (inserted) {
      m = Matrix::Zero(g.rows(), g.cols());
      v = Matrix::Zero(g.rows(), g.cols());
    }
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    Matrix& w = p.value.mutable_data();
    for (Index k = 0; k < w.size(); ++k) {
      double mhat = m.data()[k] / bc1;
      double vhat = v.data()[k] / bc2;
      w.data()[k] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

GradCheckResult grad_check(const std::function<Value()>& loss_fn, const std::vector<Param>& params, double epsilon,
                           std::size_t max_entries_per_param, std::uint64_t seed) {
  for (const auto& p : params) p.value.node()->grad.resize(0, 0);
  Value loss = loss_fn();
  if (!std::isfinite(loss.item())) throw NumericError("grad_check: non-finite loss");
  loss.backward();
  std::vector<Matrix> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(p.value.grad());

  auto eval = [&]() {
    NoGradGuard guard;
    double v = loss_fn().item();
    if (!std::isfinite(v)) throw NumericError("grad_check: non-finite loss under perturbation");
    return v;
  };

  std::mt19937_64 rng(seed);
  GradCheckResult result;
  const std::size_t floor_samples = std::max<std::size_t>(max_entries_per_param, 64);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Matrix& w = params[pi].value.node()->data;
    std::vector<Index> entries(static_cast<std::size_t>(w.size()));
    std::iota(entries.begin(), entries.end(), Index{0});
    if (entries.size() > floor_samples) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(floor_samples);
    }
    for (Index k : entries) {
      const double orig = w.data()[k];
      w.data()[k] = orig + epsilon;
      const double up = eval();
      w.data()[k] = orig - epsilon;
      const double down = eval();
      w.data()[k] = orig;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = analytic[pi].data()[k];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      ++result.entries_checked;
      if (rel > result.max_rel_error || result.worst_entry < 0) {
        result.max_rel_error = rel;
        result.worst_param = params[pi].name;
        result.worst_entry = k;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

namespace {

constexpr char kMagic[8] = {'H', 'G', 'S', 'U', 'M', 'C', 'K', '\0'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void write_pod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError(path + ": truncated checkpoint");
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params, const std::string& metadata,
                     bool single_precision) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(out, kCheckpointVersion);
  write_pod<std::uint32_t>(out, single_precision ? 4u : 8u);
  write_pod<std::uint64_t>(out, metadata.size());
  out.write(metadata.data(), static_cast<std::streamsize>(metadata.size()));
  write_pod<std::uint64_t>(out, params.size());
  for (const auto& p : params.entries()) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(p.value.rows()));
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(p.value.cols()));
    const Matrix& m = p.value.data();
    if (single_precision) {
      for (Index k = 0; k < m.size(); ++k) write_pod<float>(out, static_cast<float>(m.data()[k]));
    } else {
      out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    }
  }
  if (!out) throw DataError("failed writing checkpoint '" + path + "'");
}

CheckpointData read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw DataError(path + ": not a checkpoint file");
  auto version = read_pod<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw DataError(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  CheckpointData data;
  data.scalar_bytes = static_cast<int>(read_pod<std::uint32_t>(in, path));
  if (data.scalar_bytes != 4 && data.scalar_bytes != 8) throw DataError(path + ": bad scalar width");
  auto meta_len = read_pod<std::uint64_t>(in, path);
  data.metadata.resize(meta_len);
  in.read(data.metadata.data(), static_cast<std::streamsize>(meta_len));
  auto count = read_pod<std::uint64_t>(in, path);
  for (std::uint64_t i = 0; i < count; ++i) {
    auto name_len = read_pod<std::uint32_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    auto rows = static_cast<Index>(read_pod<std::uint64_t>(in, path));
    auto cols = static_cast<Index>(read_pod<std::uint64_t>(in, path));
    Matrix m(rows, cols);
    if (data.scalar_bytes == 4) {
      for (Index k = 0; k < m.size(); ++k) m.data()[k] = static_cast<double>(read_pod<float>(in, path));
    } else {
      in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    }
    if (!in) throw DataError(path + ": truncated checkpoint at parameter '" + name + "'");
    data.tensors.emplace_back(std::move(name), std::move(m));
  }
  return data;
}

std::string load_checkpoint(const std::string& path, ModelParams& params) {
  CheckpointData data = read_checkpoint(path);
  std::map<std::string, const Matrix*> by_name;
  for (const auto& [name, m] : data.tensors) by_name[name] = &m;
  for (auto& p : params.entries()) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw ConfigError(path + ": checkpoint lacks parameter '" + p.name + "'");
    const Matrix& m = *it->second;
    if (m.rows() != p.value.rows() || m.cols() != p.value.cols()) {
      throw ConfigError(path + ": parameter '" + p.name + "' has shape [" + std::to_string(m.rows()) + "x" +
                        std::to_string(m.cols()) + "] but the configured model expects " + p.value.shape_str());
    }
  }
  if (by_name.size() != params.size()) {
    for (const auto& [name, m] : by_name) {
      if (!params.contains(name)) throw ConfigError(path + ": checkpoint parameter '" + name + "' is not in the configured model");
    }
  }
  for (auto& p : params.entries()) p.value.mutable_data() = *by_name[p.name];
  return data.metadata;
}

}  // namespace hgsum
