//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef HAMFORGE_TRAINER_H_
#define HAMFORGE_TRAINER_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "hamforge/chem/io.h"
#include "hamforge/diff/params.h"
#include "hamforge/encoder.h"
#include "hamforge/engine.h"
#include "hamforge/fingerprint.h"
#include "hamforge/geoloss.h"

namespace hamforge {

// Data ----------------------------------------------------------------------

struct Split {
  std::vector<std::size_t> train, val, test;
};

// Seeded shuffle, then floor(0.8 n) / floor(0.1 n) / rest. Throws kTooSmall
// below 10 items.
Split split(std::size_t n, std::uint64_t seed);

// Pairs conformations with dataset rows: an SDF file (record k goes with data
// row k) or a directory of <row>.xyz files. Rows whose heavy-atom elements do
// not match are left without a conformation. Returns how many were attached.
// Throws kNoConformations when `path` does not exist.
std::size_t attach_conformations(chem::Dataset &data, const std::filesystem::path &path);

struct TargetStats {
  std::vector<double> mean, std;

  double normalize(double y, std::size_t task) const { return (y - mean[task]) / std[task]; }
  double denormalize(double z, std::size_t task) const { return z * std[task] + mean[task]; }
  nlohmann::json to_json() const;
  static TargetStats from_json(const nlohmann::json &j);
};

// Mean and population std over unmasked training targets. Throws
// kZeroVariance when a task is constant (or has fewer than two values).
TargetStats normalize_targets(const chem::Dataset &data, const std::vector<std::size_t> &train);

// Configuration ---------------------------------------------------------------

enum class Metric { kRmse, kMae, kRocAuc };

struct TrainConfig {
  std::string stage = "engine";  // engine | fingerprint
  int epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;   // 5e-4 is the stage-2 default
  double clip = 10.0;
  int patience = 10;
  std::uint64_t seed = 0;

  // encoder
  Eigen::Index bond_hidden = 64;
  int gcn_layers = 3;
  Eigen::Index gcn_width = 64;
  bool use_lstm = true;
  // engine
  Eigen::Index d_f = 32;
  double eta = 0.04;
  int steps = 20;
  double eps_r = 1e-6;
  bool freeze_phi = false;
  // geometry loss
  double lambda = 1.0;
  int adj_k = 3;
  bool weighted_kabsch = true;
  // fingerprint
  Eigen::Index hidden = 200;
  int layers = 2;
  int passes = 2;
  ConfSource conf = ConfSource::kEngine;
  bool leaky_attention = false;
  bool finetune_engine = false;
  Metric metric = Metric::kRmse;

  // Unknown keys and non-positive sizes throw kConfigError. Missing keys keep
  // their defaults (learning_rate defaults to 5e-4 for the fingerprint stage).
  static TrainConfig from_json(const nlohmann::json &j);
  nlohmann::json to_json() const;
  void validate() const;

  EncoderConfig encoder() const;
  EngineConfig engine() const;
  FpConfig fingerprint(std::size_t tasks) const;
};

TrainConfig load_config(const std::filesystem::path &path);

// Optimization ----------------------------------------------------------------

class Adam {
public:
  explicit Adam(const diff::ParamSet &params, double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  // Frozen parameters and empty gradient slots are skipped.
  void step(diff::ParamSet &params, const diff::Grads &grads);
  long steps() const { return t_; }

private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Matrix> m_, v_;
};

// Rescales so the global norm is at most `max_norm`; returns the norm before.
double clip_grad_norm(diff::Grads &grads, double max_norm);

// Runs `item(i)` for i in [0, n) on up to `workers` threads and hands every
// result to `reduce` strictly in index order, so the reduction is the same for
// any worker count. The first exception (lowest index) is rethrown.
template <typename T>
void ordered_map_reduce(std::size_t n, std::size_t workers,
                        const std::function<T(std::size_t)> &item,
                        const std::function<void(std::size_t, T &)> &reduce);

// History ---------------------------------------------------------------------

struct HistoryRow {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  std::vector<std::pair<std::string, double>> extra;
};

std::string history_csv(const std::vector<HistoryRow> &history);

// Stage 1: conformations -------------------------------------------------------

struct EngineRun {
  diff::ParamSet params;  // encoder + engine, best validation epoch
  std::vector<HistoryRow> history;
  int best_epoch = 0;
  Split split;
};

// Parameters for the encoder and engine of `config`, freshly initialized.
diff::ParamSet init_engine_params(const TrainConfig &config);

struct ConformerOutput {
  Matrix q, p;     // final implicit state
  Matrix coords;   // n x 3 projection of q
};
ConformerOutput run_engine(const diff::ParamSet &params, const TrainConfig &config,
                           const chem::MoleculeGraph &mol);
// All T + 1 projected frames.
std::vector<Matrix> engine_trajectory(const diff::ParamSet &params, const TrainConfig &config,
                                      const chem::MoleculeGraph &mol);

// Combined loss and its gradient for one molecule.
double engine_loss(const diff::ParamSet &params, const TrainConfig &config,
                   const chem::MoleculeGraph &mol, diff::Grads *grads);

// Throws kNoConformations if a training molecule lacks a reference and
// kNonFinite (detail = data row) when a rollout overflows.
EngineRun train_engine(const chem::Dataset &data, const TrainConfig &config,
                       std::size_t workers = 1);

// Mean losses over `indices`, in the units of the coordinates.
LossReport evaluate_engine(const diff::ParamSet &params, const TrainConfig &config,
                           const chem::Dataset &data, const std::vector<std::size_t> &indices,
                           std::size_t workers = 1);

// Stage 2: properties ----------------------------------------------------------

struct FingerprintRun {
  diff::ParamSet params;  // fingerprint (+ encoder/engine unless kNone)
  TargetStats stats;
  std::vector<HistoryRow> history;
  int best_epoch = 0;
  Split split;
};

// `engine` holds stage-1 parameters; it must be non-empty unless the config
// uses ConfSource::kNone (kCheckpointMissing otherwise). Frozen engine
// parameters are marked non-trainable.
FingerprintRun train_fingerprint(const chem::Dataset &data, const diff::ParamSet &engine,
                                 const TrainConfig &config, std::size_t workers = 1);

// Per-molecule fingerprint loss on normalized targets. With `cached` set, its
// (q, p) replace the engine rollout.
double fingerprint_loss(const diff::ParamSet &params, const TrainConfig &config,
                        std::size_t tasks, const chem::Record &record, const TargetStats &stats,
                        const ConformerOutput *cached, diff::Grads *grads);

// De-normalized predictions (probabilities for classification), 1 x tasks.
Matrix predict_properties(const diff::ParamSet &params, const TrainConfig &config,
                          std::size_t tasks, const chem::MoleculeGraph &mol,
                          const TargetStats &stats, const ConformerOutput *cached = nullptr);

// Metrics -----------------------------------------------------------------------

// Rank statistic with midranks for ties. Throws kUndefinedAuc when only one
// class is present.
double roc_auc(const std::vector<double> &scores, const std::vector<int> &labels);

struct Metrics {
  double mae = 0.0, rmse = 0.0, roc_auc = 0.0;  // unweighted task means
  // auc is NaN for skipped tasks: single-class, or targets other than 0/1
  std::vector<double> task_mae, task_rmse, task_auc;
  std::size_t auc_tasks = 0;
  nlohmann::json to_json() const;
};

// predictions[i] and data.records[indices[i]] line up; masked targets are
// ignored.
Metrics compute_metrics(const std::vector<Matrix> &predictions, const chem::Dataset &data,
                        const std::vector<std::size_t> &indices);

Metrics evaluate_fingerprint(const diff::ParamSet &params, const TrainConfig &config,
                             const TargetStats &stats, const chem::Dataset &data,
                             const std::vector<std::size_t> &indices, std::size_t workers = 1);

}  // namespace hamforge

#include "hamforge/detail/ordered_reduce.h"

#endif  // HAMFORGE_TRAINER_H_
