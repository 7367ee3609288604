//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef HAMFORGE_DIFF_PARAMS_H_
#define HAMFORGE_DIFF_PARAMS_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "hamforge/diff/tape.h"
#include "hamforge/matrix.h"

namespace hamforge::diff {

enum class ParamKind {
  kWeight,  // Glorot-uniform, fan_in = rows, fan_out = cols
  kBias,    // zeros
};

struct ParamSpec {
  std::string name;
  Eigen::Index rows;
  Eigen::Index cols;
  ParamKind kind = ParamKind::kWeight;
  double gain = 1.0;  // multiplies the Glorot bound
};

// Named tensors with per-name trainable flags. Names are unique and kept in
// lexicographic order, so iteration order is stable. Shapes never change
// after insertion.
class ParamSet {
public:
  void add(const std::string &name, Matrix value, bool trainable = true);

  bool contains(std::string_view name) const;
  std::size_t index(std::string_view name) const;  // throws kShapeMismatch
  std::size_t size() const { return entries_.size(); }

  const std::string &name(std::size_t i) const { return entries_[i].name; }
  const Matrix &value(std::size_t i) const { return entries_[i].value; }
  const Matrix &value(std::string_view name) const { return value(index(name)); }
  bool trainable(std::size_t i) const { return entries_[i].trainable; }

  // Overwrites values; the shape must match.
  void set(std::size_t i, const Matrix &value);
  void set(std::string_view name, const Matrix &value) { set(index(name), value); }
  Matrix &mutable_value(std::size_t i) { return entries_[i].value; }
  void set_trainable(std::string_view name, bool trainable);

  std::size_t num_scalars() const;

private:
  struct Entry {
    std::string name;
    Matrix value;
    bool trainable;
  };
  std::vector<Entry> entries_;
};

// Deterministic per (seed, name): the same name gets the same values no
// matter which other parameters are in the spec.
ParamSet init_params(const std::vector<ParamSpec> &spec, std::uint64_t seed);

// Gradients indexed like a ParamSet. Empty matrices stand for zero.
struct Grads {
  explicit Grads(std::size_t n = 0): g(n) { }
  std::vector<Matrix> g;

  void add(const Grads &other);
  void scale(double factor);
  double norm() const;
};

// Exposes a ParamSet on one tape. Parameters are bound lazily and read in
// place; frozen parameters become constants.
class ParamBinding {
public:
  ParamBinding(Tape &tape, const ParamSet &params);

  Var operator[](std::string_view name);
  Tape &tape() { return tape_; }
  const ParamSet &params() const { return params_; }

  // Gradients of all bound trainable parameters after Tape::backward().
  Grads grads() const;

private:
  Tape &tape_;
  const ParamSet &params_;
  std::vector<Var> bound_;
};

// Checkpoint document: {format_version, hyperparameters, tensors: {name:
// {shape, data_b64}}}, the payload being little-endian float64.
inline constexpr int kCheckpointVersion = 1;

nlohmann::json checkpoint_to_json(const ParamSet &params, const nlohmann::json &hyper);
ParamSet checkpoint_from_json(const nlohmann::json &doc, nlohmann::json *hyper = nullptr);

// Writes to a temporary file next to `path` and renames it into place.
void save_checkpoint(const std::filesystem::path &path, const ParamSet &params,
                     const nlohmann::json &hyper);
ParamSet load_checkpoint(const std::filesystem::path &path, nlohmann::json *hyper = nullptr);

// Atomic text write used for every artifact the tools produce.
void write_file_atomic(const std::filesystem::path &path, std::string_view content);

}  // namespace hamforge::diff

#endif  // HAMFORGE_DIFF_PARAMS_H_
