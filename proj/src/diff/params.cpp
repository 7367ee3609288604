//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "hamforge/diff/params.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "hamforge/error.h"

namespace hamforge::diff {
namespace {
  std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c: s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  // Uniform in [0, 1) from the top 53 bits, independent of the standard
  // library's distribution implementation.
  double unit(std::mt19937_64 &rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
  }

  std::string encode_doubles(const Matrix &m) {
    std::string raw(static_cast<std::size_t>(m.size()) * 8, '\0');
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      std::uint64_t bits = std::bit_cast<std::uint64_t>(m.data()[i]);
      for (int b = 0; b < 8; ++b)
        raw[static_cast<std::size_t>(i) * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
    }
    std::string out(4 * ((raw.size() + 2) / 3) + 1, '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char *>(out.data()),
                                  reinterpret_cast<const unsigned char *>(raw.data()),
                                  static_cast<int>(raw.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
  }

  Matrix decode_doubles(const std::string &b64, Eigen::Index rows, Eigen::Index cols,
                        const std::string &name) {
    const auto expect = static_cast<std::size_t>(rows * cols) * 8;
    std::string raw(3 * (b64.size() / 4) + 3, '\0');
    const int n = b64.empty() ? 0
                              : EVP_DecodeBlock(reinterpret_cast<unsigned char *>(raw.data()),
                                                reinterpret_cast<const unsigned char *>(b64.data()),
                                                static_cast<int>(b64.size()));
    if (n < 0 || b64.size() % 4 != 0)
      throw Error(ErrorCode::kBadCheckpoint, fmt::format("tensor {}: invalid base64", name));
    std::size_t len = static_cast<std::size_t>(n);
    // EVP_DecodeBlock counts padding bytes as data
    if (!b64.empty() && b64.back() == '=')
      --len;
    if (b64.size() > 1 && b64[b64.size() - 2] == '=')
      --len;
    if (len != expect)
      throw Error(ErrorCode::kBadCheckpoint,
                  fmt::format("tensor {}: {} bytes for shape {}x{}", name, len, rows, cols));
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b)
        bits |= static_cast<std::uint64_t>(
                    static_cast<unsigned char>(raw[static_cast<std::size_t>(i) * 8 + b]))
                << (8 * b);
      m.data()[i] = std::bit_cast<double>(bits);
    }
    return m;
  }
}  // namespace

void ParamSet::add(const std::string &name, Matrix value, bool trainable) {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), name,
                             [](const Entry &e, const std::string &n) { return e.name < n; });
  if (it != entries_.end() && it->name == name)
    throw Error(ErrorCode::kShapeMismatch, fmt::format("duplicate parameter {}", name));
  entries_.insert(it, Entry { name, std::move(value), trainable });
}

bool ParamSet::contains(std::string_view name) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), name,
                             [](const Entry &e, std::string_view n) { return e.name < n; });
  return it != entries_.end() && it->name == name;
}

std::size_t ParamSet::index(std::string_view name) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), name,
                             [](const Entry &e, std::string_view n) { return e.name < n; });
  if (it == entries_.end() || it->name != name)
    throw Error(ErrorCode::kShapeMismatch, fmt::format("unknown parameter {}", name));
  return static_cast<std::size_t>(it - entries_.begin());
}

void ParamSet::set(std::size_t i, const Matrix &value) {
  Entry &e = entries_.at(i);
  if (value.rows() != e.value.rows() || value.cols() != e.value.cols())
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("parameter {} is {}x{}, got {}x{}", e.name, e.value.rows(),
                            e.value.cols(), value.rows(), value.cols()));
  e.value = value;
}

void ParamSet::set_trainable(std::string_view name, bool trainable) {
  entries_[index(name)].trainable = trainable;
}

std::size_t ParamSet::num_scalars() const {
  std::size_t n = 0;
  for (const Entry &e: entries_)
    n += static_cast<std::size_t>(e.value.size());
  return n;
}

ParamSet init_params(const std::vector<ParamSpec> &spec, std::uint64_t seed) {
  ParamSet out;
  for (const ParamSpec &p: spec) {
    Matrix m = Matrix::Zero(p.rows, p.cols);
    if (p.kind == ParamKind::kWeight) {
      std::seed_seq seq { seed, fnv1a(p.name) };
      std::mt19937_64 rng(seq);
      const double bound = p.gain * std::sqrt(6.0 / static_cast<double>(p.rows + p.cols));
      for (Eigen::Index i = 0; i < m.size(); ++i)
        m.data()[i] = (2.0 * unit(rng) - 1.0) * bound;
    }
    out.add(p.name, std::move(m));
  }
  return out;
}

void Grads::add(const Grads &other) {
  if (g.size() != other.g.size())
    throw Error(ErrorCode::kShapeMismatch, "gradient sets of different size");
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (other.g[i].size() == 0)
      continue;
    if (g[i].size() == 0)
      g[i] = other.g[i];
    else
      g[i] += other.g[i];
  }
}

void Grads::scale(double factor) {
  for (Matrix &m: g)
    m *= factor;
}

double Grads::norm() const {
  double s = 0.0;
  for (const Matrix &m: g)
    s += m.squaredNorm();
  return std::sqrt(s);
}

ParamBinding::ParamBinding(Tape &tape, const ParamSet &params)
    : tape_(tape), params_(params), bound_(params.size()) { }

Var ParamBinding::operator[](std::string_view name) {
  const std::size_t i = params_.index(name);
  if (!bound_[i].valid())
    bound_[i] = tape_.parameter(params_.value(i), params_.trainable(i));
  return bound_[i];
}

Grads ParamBinding::grads() const {
  Grads out(params_.size());
  for (std::size_t i = 0; i < bound_.size(); ++i)
    if (bound_[i].valid() && tape_.requires_grad(bound_[i]))
      out.g[i] = bound_[i].grad();
  return out;
}

nlohmann::json checkpoint_to_json(const ParamSet &params, const nlohmann::json &hyper) {
  nlohmann::json tensors = nlohmann::json::object();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix &m = params.value(i);
    tensors[params.name(i)] = { { "shape", { m.rows(), m.cols() } },
                                { "data_b64", encode_doubles(m) } };
  }
  return { { "format_version", kCheckpointVersion },
           { "hyperparameters", hyper.is_null() ? nlohmann::json::object() : hyper },
           { "tensors", std::move(tensors) } };
}

ParamSet checkpoint_from_json(const nlohmann::json &doc, nlohmann::json *hyper) {
  try {
    if (doc.at("format_version").get<int>() != kCheckpointVersion)
      throw Error(ErrorCode::kBadCheckpoint,
                  fmt::format("unsupported checkpoint version {}", doc.at("format_version").dump()));
    ParamSet out;
    for (const auto &[name, t]: doc.at("tensors").items()) {
      const auto &shape = t.at("shape");
      if (shape.size() != 2)
        throw Error(ErrorCode::kBadCheckpoint, fmt::format("tensor {}: shape must be 2-D", name));
      const auto rows = shape[0].get<Eigen::Index>(), cols = shape[1].get<Eigen::Index>();
      if (rows < 0 || cols < 0)
        throw Error(ErrorCode::kBadCheckpoint, fmt::format("tensor {}: negative shape", name));
      out.add(name, decode_doubles(t.at("data_b64").get<std::string>(), rows, cols, name));
    }
    if (hyper != nullptr)
      *hyper = doc.value("hyperparameters", nlohmann::json::object());
    return out;
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::kBadCheckpoint, fmt::format("malformed checkpoint: {}", e.what()));
  }
}

void write_file_atomic(const std::filesystem::path &path, std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw Error(ErrorCode::kIoError, fmt::format("cannot write {}", tmp.string()));
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out.flush())
      throw Error(ErrorCode::kIoError, fmt::format("short write to {}", tmp.string()));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec)
    throw Error(ErrorCode::kIoError,
                fmt::format("cannot rename {} to {}: {}", tmp.string(), path.string(), ec.message()));
}

void save_checkpoint(const std::filesystem::path &path, const ParamSet &params,
                     const nlohmann::json &hyper) {
  write_file_atomic(path, checkpoint_to_json(params, hyper).dump() + "\n");
}

ParamSet load_checkpoint(const std::filesystem::path &path, nlohmann::json *hyper) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::kCheckpointMissing, fmt::format("cannot open {}", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  nlohmann::json doc = nlohmann::json::parse(ss.str(), nullptr, false);
  if (doc.is_discarded())
    throw Error(ErrorCode::kBadCheckpoint, fmt::format("{} is not JSON", path.string()));
  return checkpoint_from_json(doc, hyper);
}

}  // namespace hamforge::diff
