//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "hamforge/trainer.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "hamforge/diff/ops.h"
#include "hamforge/error.h"

namespace hamforge {
using chem::Dataset;
using chem::MoleculeGraph;
using diff::Grads;
using diff::ParamBinding;
using diff::ParamSet;
using diff::Tape;
using diff::Var;
namespace fs = std::filesystem;

// Data ----------------------------------------------------------------------

Split split(std::size_t n, std::uint64_t seed) {
  if (n < 10)
    throw Error(ErrorCode::kTooSmall, fmt::format("need at least 10 items to split, got {}", n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_train = n * 8 / 10, n_val = n / 10;
  Split s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
               order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return s;
}

std::size_t attach_conformations(Dataset &data, const fs::path &path) {
  std::error_code ec;
  if (!fs::exists(path, ec))
    throw Error(ErrorCode::kNoConformations,
                fmt::format("conformation source {} does not exist", path.string()));
  std::size_t attached = 0;
  if (fs::is_directory(path)) {
    for (auto &r: data.records) {
      const fs::path file = path / fmt::format("{}.xyz", r.row);
      if (!fs::exists(file))
        continue;
      const auto frames = chem::read_xyz(file);
      if (!frames.empty() && chem::attach_conformation(r.mol, frames.front()))
        ++attached;
    }
  } else {
    const auto sdf = chem::read_sdf(path);
    for (auto &r: data.records)
      if (r.row < sdf.size() && chem::attach_conformation(r.mol, sdf[r.row]))
        ++attached;
  }
  if (attached < data.records.size())
    spdlog::warn("{} of {} molecules have no matching conformation", data.records.size() - attached,
                 data.records.size());
  return attached;
}

nlohmann::json TargetStats::to_json() const { return { { "mean", mean }, { "std", std } }; }

TargetStats TargetStats::from_json(const nlohmann::json &j) {
  TargetStats s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.std = j.at("std").get<std::vector<double>>();
  return s;
}

TargetStats normalize_targets(const Dataset &data, const std::vector<std::size_t> &train) {
  const std::size_t tasks = data.target_names.size();
  TargetStats s;
  for (std::size_t t = 0; t < tasks; ++t) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i: train) {
      const auto &r = data.records[i];
      if (!r.masked[t]) {
        sum += r.targets[t];
        ++count;
      }
    }
    const double mean = count ? sum / static_cast<double>(count) : 0.0;
    double ss = 0.0;
    for (std::size_t i: train) {
      const auto &r = data.records[i];
      if (!r.masked[t])
        ss += (r.targets[t] - mean) * (r.targets[t] - mean);
    }
    const double sd = count ? std::sqrt(ss / static_cast<double>(count)) : 0.0;
    if (count < 2 || !(sd > 0.0))
      throw Error(ErrorCode::kZeroVariance,
                  fmt::format("target '{}' has no variance on the training split",
                              data.target_names[t]),
                  static_cast<std::int64_t>(t));
    s.mean.push_back(mean);
    s.std.push_back(sd);
  }
  return s;
}

// Configuration ---------------------------------------------------------------

namespace {
  const char *conf_name(ConfSource c) {
    switch (c) {
    case ConfSource::kEngine:
      return "engine";
    case ConfSource::kNone:
      return "none";
    case ConfSource::kReal:
      return "real";
    }
    return "engine";
  }

  const char *metric_name(Metric m) {
    switch (m) {
    case Metric::kRmse:
      return "rmse";
    case Metric::kMae:
      return "mae";
    case Metric::kRocAuc:
      return "roc";
    }
    return "rmse";
  }

  [[noreturn]] void config_error(const std::string &msg) {
    throw Error(ErrorCode::kConfigError, msg);
  }
}  // namespace

TrainConfig TrainConfig::from_json(const nlohmann::json &j) {
  if (!j.is_object())
    config_error("config must be a JSON object");
  TrainConfig c;
  try {
    if (j.contains("stage"))
      c.stage = j.at("stage").get<std::string>();
    if (c.stage == "fingerprint")
      c.learning_rate = 5e-4;
    for (const auto &[key, v]: j.items()) {
      if (key == "stage") continue;
      else if (key == "epochs") c.epochs = v.get<int>();
      else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
      else if (key == "learning_rate") c.learning_rate = v.get<double>();
      else if (key == "clip") c.clip = v.get<double>();
      else if (key == "patience") c.patience = v.get<int>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "bond_hidden") c.bond_hidden = v.get<Eigen::Index>();
      else if (key == "gcn_layers") c.gcn_layers = v.get<int>();
      else if (key == "gcn_width") c.gcn_width = v.get<Eigen::Index>();
      else if (key == "use_lstm") c.use_lstm = v.get<bool>();
      else if (key == "d_f") c.d_f = v.get<Eigen::Index>();
      else if (key == "eta") c.eta = v.get<double>();
      else if (key == "steps") c.steps = v.get<int>();
      else if (key == "eps_r") c.eps_r = v.get<double>();
      else if (key == "freeze_phi") c.freeze_phi = v.get<bool>();
      else if (key == "lambda") c.lambda = v.get<double>();
      else if (key == "adj_k") c.adj_k = v.get<int>();
      else if (key == "weighted_kabsch") c.weighted_kabsch = v.get<bool>();
      else if (key == "hidden") c.hidden = v.get<Eigen::Index>();
      else if (key == "layers") c.layers = v.get<int>();
      else if (key == "passes") c.passes = v.get<int>();
      else if (key == "leaky_attention") c.leaky_attention = v.get<bool>();
      else if (key == "finetune_engine") c.finetune_engine = v.get<bool>();
      else if (key == "conf") {
        const auto s = v.get<std::string>();
        if (s == "engine") c.conf = ConfSource::kEngine;
        else if (s == "none") c.conf = ConfSource::kNone;
        else if (s == "real") c.conf = ConfSource::kReal;
        else config_error(fmt::format("conf must be engine, none or real, got '{}'", s));
      } else if (key == "metric") {
        const auto s = v.get<std::string>();
        if (s == "rmse") c.metric = Metric::kRmse;
        else if (s == "mae") c.metric = Metric::kMae;
        else if (s == "roc") c.metric = Metric::kRocAuc;
        else config_error(fmt::format("metric must be rmse, mae or roc, got '{}'", s));
      } else {
        config_error(fmt::format("unknown config key '{}'", key));
      }
    }
  } catch (const nlohmann::json::exception &e) {
    config_error(fmt::format("bad config value: {}", e.what()));
  }
  c.validate();
  return c;
}

nlohmann::json TrainConfig::to_json() const {
  return {
    { "stage", stage },
    { "epochs", epochs },
    { "batch_size", batch_size },
    { "learning_rate", learning_rate },
    { "clip", clip },
    { "patience", patience },
    { "seed", seed },
    { "bond_hidden", bond_hidden },
    { "gcn_layers", gcn_layers },
    { "gcn_width", gcn_width },
    { "use_lstm", use_lstm },
    { "d_f", d_f },
    { "eta", eta },
    { "steps", steps },
    { "eps_r", eps_r },
    { "freeze_phi", freeze_phi },
    { "lambda", lambda },
    { "adj_k", adj_k },
    { "weighted_kabsch", weighted_kabsch },
    { "hidden", hidden },
    { "layers", layers },
    { "passes", passes },
    { "conf", conf_name(conf) },
    { "leaky_attention", leaky_attention },
    { "finetune_engine", finetune_engine },
    { "metric", metric_name(metric) },
  };
}

void TrainConfig::validate() const {
  if (stage != "engine" && stage != "fingerprint")
    config_error(fmt::format("stage must be engine or fingerprint, got '{}'", stage));
  if (epochs < 1 || batch_size < 1 || patience < 1)
    config_error("epochs, batch_size and patience must be positive");
  if (!(learning_rate > 0) || !(clip > 0))
    config_error("learning_rate and clip must be positive");
  if (bond_hidden < 1 || gcn_layers < 1 || gcn_width < 1 || d_f < 1 || hidden < 1)
    config_error("layer widths and counts must be positive");
  if (!(eta > 0) || steps < 0 || !(eps_r > 0))
    config_error("eta and eps_r must be positive, steps non-negative");
  if (!(lambda >= 0) || adj_k < 1)
    config_error("lambda must be non-negative and adj_k at least 1");
  if (layers < 0 || passes < 0)
    config_error("layers and passes must be non-negative");
}

EncoderConfig TrainConfig::encoder() const {
  EncoderConfig e;
  e.bond_hidden = bond_hidden;
  e.gcn_layers = gcn_layers;
  e.gcn_width = gcn_width;
  e.d_f = d_f;
  e.use_lstm = use_lstm;
  return e;
}

EngineConfig TrainConfig::engine() const { return { d_f, eta, steps, eps_r }; }

FpConfig TrainConfig::fingerprint(std::size_t tasks) const {
  FpConfig f;
  f.hidden = hidden;
  f.layers = layers;
  f.passes = passes;
  f.d_f = d_f;
  f.conf = conf;
  f.leaky_attention = leaky_attention;
  f.tasks = static_cast<Eigen::Index>(tasks);
  f.classification = metric == Metric::kRocAuc;
  return f;
}

TrainConfig load_config(const fs::path &path) {
  std::ifstream in(path);
  if (!in)
    config_error(fmt::format("cannot open config {}", path.string()));
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded())
    config_error(fmt::format("{} is not valid JSON", path.string()));
  return TrainConfig::from_json(j);
}

// Optimization ----------------------------------------------------------------

Adam::Adam(const ParamSet &params, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_.push_back(Matrix::Zero(params.value(i).rows(), params.value(i).cols()));
    v_.push_back(m_.back());
  }
}

void Adam::step(ParamSet &params, const Grads &grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params.trainable(i) || grads.g[i].size() == 0)
      continue;
    const Matrix &g = grads.g[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    Matrix &w = params.mutable_value(i);
    w.array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

double clip_grad_norm(Grads &grads, double max_norm) {
  const double norm = grads.norm();
  if (!std::isfinite(norm))
    throw Error(ErrorCode::kNonFiniteGradient, "gradient norm is not finite");
  if (norm > max_norm)
    grads.scale(max_norm / norm);
  return norm;
}

std::string history_csv(const std::vector<HistoryRow> &history) {
  std::string out = "epoch,train_loss,val_loss";
  if (!history.empty())
    for (const auto &[name, _]: history.front().extra)
      out += "," + name;
  out += "\n";
  for (const auto &row: history) {
    out += fmt::format("{},{:.17g},{:.17g}", row.epoch, row.train_loss, row.val_loss);
    for (const auto &[_, v]: row.extra)
      out += fmt::format(",{:.17g}", v);
    out += "\n";
  }
  return out;
}

namespace {
  struct LossAndGrads {
    double loss = 0.0;
    Grads grads;
  };

  // Shared minibatch loop. `item` returns the loss of one training index with
  // its gradient; `validate` returns (val loss, extra columns). Keeps the
  // parameters of the best validation epoch.
  struct LoopResult {
    ParamSet best;
    std::vector<HistoryRow> history;
    int best_epoch = 0;
  };

  LoopResult run_loop(ParamSet &params, const TrainConfig &config,
                      const std::vector<std::size_t> &train, std::size_t workers,
                      const std::function<LossAndGrads(std::size_t)> &item,
                      const std::function<HistoryRow()> &validate) {
    Adam adam(params, config.learning_rate);
    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    LoopResult out;
    out.best = params;
    double best_val = INFINITY;
    int bad = 0;
    std::vector<std::size_t> order = train;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      double total = 0.0;
      for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
        const std::size_t b = std::min(config.batch_size, order.size() - start);
        Grads sum(params.size());
        std::function<LossAndGrads(std::size_t)> one = [&](std::size_t k) {
          return item(order[start + k]);
        };
        std::function<void(std::size_t, LossAndGrads &)> add = [&](std::size_t, LossAndGrads &r) {
          total += r.loss;
          sum.add(r.grads);
        };
        ordered_map_reduce(b, workers, one, add);
        sum.scale(1.0 / static_cast<double>(b));
        clip_grad_norm(sum, config.clip);
        adam.step(params, sum);
      }
      HistoryRow row = validate();
      row.epoch = epoch;
      row.train_loss = order.empty() ? 0.0 : total / static_cast<double>(order.size());
      spdlog::info("epoch {:3d}  train {:.6f}  val {:.6f}", epoch, row.train_loss, row.val_loss);
      out.history.push_back(row);
      if (row.val_loss < best_val) {
        best_val = row.val_loss;
        out.best = params;
        out.best_epoch = epoch;
        bad = 0;
      } else if (++bad >= config.patience) {
        spdlog::info("early stop after epoch {}", epoch);
        break;
      }
    }
    return out;
  }

  template <typename T>
  std::vector<T> ordered_map(std::size_t n, std::size_t workers,
                             const std::function<T(std::size_t)> &f) {
    std::vector<T> out(n);
    std::function<void(std::size_t, T &)> put = [&](std::size_t i, T &v) { out[i] = std::move(v); };
    ordered_map_reduce(n, workers, f, put);
    return out;
  }

  // Encoder + rollout on a tape.
  std::vector<diff_engine::StateVars> forward_engine(ParamBinding &p, const TrainConfig &config,
                                                     const MoleculeGraph &mol) {
    EncoderOutput e = encode_initial(p, mol, config.encoder());
    return diff_engine::rollout(e.q0, e.p0, mol.masses(), diff_engine::Weights::bind(p),
                                config.engine());
  }

  // Adds the data row to errors raised inside the rollout.
  template <typename F>
  auto with_row(const chem::Record &r, F &&f) -> decltype(f()) {
    try {
      return f();
    } catch (const Error &e) {
      if (e.code() == ErrorCode::kNonFinite || e.code() == ErrorCode::kDegenerateOutput)
      {
        // drop the code prefix the inner error already carries
        std::string_view inner = e.what();
        inner.remove_prefix(std::min(inner.size(), error_code_name(e.code()).size() + 2));
        throw Error(e.code(), fmt::format("molecule at row {} ({}): {}", r.row, r.smiles, inner),
                    static_cast<std::int64_t>(r.row));
      }
      throw;
    }
  }

  std::vector<std::size_t> map_indices(const std::vector<std::size_t> &local,
                                       const std::vector<std::size_t> &usable) {
    std::vector<std::size_t> out;
    out.reserve(local.size());
    for (std::size_t i: local)
      out.push_back(usable[i]);
    return out;
  }
}  // namespace

// Stage 1 -----------------------------------------------------------------------

ParamSet init_engine_params(const TrainConfig &config) {
  std::vector<diff::ParamSpec> spec;
  add_encoder_spec(spec, config.encoder());
  add_engine_spec(spec, config.engine());
  ParamSet p = diff::init_params(spec, config.seed);
  if (config.freeze_phi) {
    p.set("eng.W_phi", Matrix::Zero(config.d_f, config.d_f));
    p.set_trainable("eng.W_phi", false);
  }
  return p;
}

ConformerOutput run_engine(const ParamSet &params, const TrainConfig &config,
                           const MoleculeGraph &mol) {
  Tape t;
  ParamBinding p(t, params);
  auto states = forward_engine(p, config, mol);
  ConformerOutput out;
  out.q = states.back().q.value();
  out.p = states.back().p.value();
  out.coords = project3d(out.q, params.value("eng.W_trans"));
  return out;
}

std::vector<Matrix> engine_trajectory(const ParamSet &params, const TrainConfig &config,
                                      const MoleculeGraph &mol) {
  Tape t;
  ParamBinding p(t, params);
  std::vector<Matrix> frames;
  for (const auto &s: forward_engine(p, config, mol))
    frames.push_back(project3d(s.q.value(), params.value("eng.W_trans")));
  return frames;
}

double engine_loss(const ParamSet &params, const TrainConfig &config, const MoleculeGraph &mol,
                   Grads *grads) {
  const ConformerRef ref = ConformerRef::from(mol, config.adj_k);
  Tape t;
  ParamBinding p(t, params);
  auto states = forward_engine(p, config, mol);
  Var coords = diff::matmul(states.back().q, p["eng.W_trans"]);
  Var loss = loss::combined_loss(coords, ref, config.lambda, config.weighted_kabsch);
  if (!std::isfinite(loss.item()))
    throw Error(ErrorCode::kNonFinite, "conformation loss is not finite");
  if (grads != nullptr) {
    t.backward(loss);
    *grads = p.grads();
  }
  return loss.item();
}

LossReport evaluate_engine(const ParamSet &params, const TrainConfig &config, const Dataset &data,
                           const std::vector<std::size_t> &indices, std::size_t workers) {
  std::function<LossReport(std::size_t)> one = [&](std::size_t k) {
    const auto &r = data.records[indices[k]];
    return with_row(r, [&] {
      const ConformerRef ref = ConformerRef::from(r.mol, config.adj_k);
      return evaluate_losses(run_engine(params, config, r.mol).coords, ref, config.lambda);
    });
  };
  LossReport mean;
  mean.lambda = config.lambda;
  std::function<void(std::size_t, LossReport &)> add = [&](std::size_t, LossReport &r) {
    mean.k_rmsd += r.k_rmsd;
    mean.dist += r.dist;
    mean.adj += r.adj;
    mean.combined += r.combined;
  };
  ordered_map_reduce(indices.size(), workers, one, add);
  const double n = std::max<double>(1.0, static_cast<double>(indices.size()));
  mean.k_rmsd /= n;
  mean.dist /= n;
  mean.adj /= n;
  mean.combined /= n;
  return mean;
}

EngineRun train_engine(const Dataset &data, const TrainConfig &config, std::size_t workers) {
  config.validate();
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < data.records.size(); ++i)
    if (data.records[i].mol.reference_conformation())
      usable.push_back(i);
  if (usable.empty())
    throw Error(ErrorCode::kNoConformations, "no molecule has a reference conformation");
  if (usable.size() < data.records.size())
    spdlog::warn("training on the {} of {} molecules that have conformations", usable.size(),
                 data.records.size());

  const Split local = split(usable.size(), config.seed);
  EngineRun run;
  run.split = { map_indices(local.train, usable), map_indices(local.val, usable),
                map_indices(local.test, usable) };
  ParamSet params = init_engine_params(config);

  auto item = [&](std::size_t i) {
    const auto &r = data.records[i];
    LossAndGrads out;
    out.loss = with_row(r, [&] { return engine_loss(params, config, r.mol, &out.grads); });
    return out;
  };
  auto validate = [&] {
    const LossReport v = evaluate_engine(params, config, data, run.split.val, workers);
    HistoryRow row;
    row.val_loss = v.combined;
    row.extra = { { "val_k_rmsd", v.k_rmsd }, { "val_dist", v.dist }, { "val_adj", v.adj } };
    return row;
  };
  LoopResult loop = run_loop(params, config, run.split.train, workers, item, validate);
  run.params = std::move(loop.best);
  run.history = std::move(loop.history);
  run.best_epoch = loop.best_epoch;
  return run;
}

// Stage 2 -----------------------------------------------------------------------

namespace {
  struct FpForward {
    double loss = 0.0;
    Matrix z;  // 1 x tasks, pre-sigmoid / normalized
  };

  FpForward fp_forward(const ParamSet &params, const TrainConfig &config, std::size_t tasks,
                       const chem::Record &record, const TargetStats &stats,
                       const ConformerOutput *cached, Grads *grads) {
    const FpConfig fc = config.fingerprint(tasks);
    Tape t;
    ParamBinding p(t, params);
    Var q, m;
    switch (config.conf) {
    case ConfSource::kEngine:
      if (cached != nullptr) {
        q = t.constant(cached->q);
        m = t.constant(cached->p);
      } else {
        auto states = forward_engine(p, config, record.mol);
        q = states.back().q;
        m = states.back().p;
      }
      break;
    case ConfSource::kReal: {
      const auto &ref = record.mol.reference_conformation();
      if (!ref)
        throw Error(ErrorCode::kNoConformations,
                    fmt::format("molecule at row {} has no conformation", record.row));
      std::tie(q, m) = lift_conformation(p, *ref);
      break;
    }
    case ConfSource::kNone:
      break;
    }
    Var z = head(p, fingerprint(p, record.mol, q, m, fc), fc);

    Matrix y = Matrix::Zero(1, static_cast<Eigen::Index>(tasks));
    Matrix mask = Matrix::Zero(1, static_cast<Eigen::Index>(tasks));
    double count = 0.0;
    for (std::size_t k = 0; k < tasks; ++k) {
      if (record.masked[k])
        continue;
      const auto c = static_cast<Eigen::Index>(k);
      mask(0, c) = 1.0;
      y(0, c) = fc.classification ? record.targets[k] : stats.normalize(record.targets[k], k);
      count += 1.0;
    }
    FpForward out;
    out.z = z.value();
    if (count == 0.0) {
      if (grads != nullptr)
        *grads = Grads(params.size());
      return out;
    }
    Var yv = t.constant(y), mv = t.constant(mask);
    Var per_task;
    switch (config.metric) {
    case Metric::kRmse:
      per_task = diff::square(z - yv);
      break;
    case Metric::kMae:
      per_task = diff::abs(z - yv);
      break;
    case Metric::kRocAuc:
      // relu(z) - y z + log(1 + exp(-|z|))
      per_task = diff::relu(z) - diff::mul(yv, z) +
                 diff::log(diff::add_scalar(diff::exp(-diff::abs(z)), 1.0));
      break;
    }
    Var loss = diff::scale(diff::sum(diff::mul(per_task, mv)), 1.0 / count);
    out.loss = loss.item();
    if (!std::isfinite(out.loss))
      throw Error(ErrorCode::kNonFinite,
                  fmt::format("property loss is not finite at row {}", record.row),
                  static_cast<std::int64_t>(record.row));
    if (grads != nullptr) {
      t.backward(loss);
      *grads = p.grads();
    }
    return out;
  }

  Matrix output_of(const Matrix &z, const TrainConfig &config, const TargetStats &stats) {
    Matrix out = z;
    for (Eigen::Index k = 0; k < z.cols(); ++k)
      out(0, k) = config.metric == Metric::kRocAuc
                      ? 1.0 / (1.0 + std::exp(-z(0, k)))
                      : stats.denormalize(z(0, k), static_cast<std::size_t>(k));
    return out;
  }

  TargetStats identity_stats(std::size_t tasks) {
    return { std::vector<double>(tasks, 0.0), std::vector<double>(tasks, 1.0) };
  }
}  // namespace

double fingerprint_loss(const ParamSet &params, const TrainConfig &config, std::size_t tasks,
                        const chem::Record &record, const TargetStats &stats,
                        const ConformerOutput *cached, Grads *grads) {
  return fp_forward(params, config, tasks, record, stats, cached, grads).loss;
}

Matrix predict_properties(const ParamSet &params, const TrainConfig &config, std::size_t tasks,
                          const MoleculeGraph &mol, const TargetStats &stats,
                          const ConformerOutput *cached) {
  chem::Record r;
  r.mol = mol;
  r.targets.assign(tasks, 0.0);
  r.masked.assign(tasks, true);
  return output_of(fp_forward(params, config, tasks, r, stats, cached, nullptr).z, config, stats);
}

FingerprintRun train_fingerprint(const Dataset &data, const ParamSet &engine,
                                 const TrainConfig &config, std::size_t workers) {
  config.validate();
  const std::size_t tasks = data.target_names.size();
  if (tasks == 0)
    throw Error(ErrorCode::kConfigError, "dataset has no target columns");

  FingerprintRun run;
  run.split = split(data.records.size(), config.seed);
  run.stats = config.metric == Metric::kRocAuc ? identity_stats(tasks)
                                               : normalize_targets(data, run.split.train);

  std::vector<diff::ParamSpec> spec;
  add_fingerprint_spec(spec, config.fingerprint(tasks));
  ParamSet params = diff::init_params(spec, config.seed);
  const bool use_engine = config.conf == ConfSource::kEngine;
  if (use_engine) {
    if (engine.size() == 0)
      throw Error(ErrorCode::kCheckpointMissing,
                  "an engine checkpoint is required unless conf is 'none' or 'real'");
    const ParamSet fresh = init_engine_params(config);
    for (std::size_t i = 0; i < fresh.size(); ++i) {
      const std::string &name = fresh.name(i);
      if (!engine.contains(name))
        throw Error(ErrorCode::kCheckpointMissing,
                    fmt::format("engine checkpoint lacks tensor {}", name));
      params.add(name, engine.value(name));
      const bool frozen_phi = config.freeze_phi && name == "eng.W_phi";
      params.set_trainable(name, config.finetune_engine && !frozen_phi);
    }
  }
  if (config.conf == ConfSource::kReal)
    for (std::size_t i: run.split.train)
      if (!data.records[i].mol.reference_conformation())
        throw Error(ErrorCode::kNoConformations,
                    fmt::format("molecule at row {} has no conformation", data.records[i].row));

  // A frozen engine is a fixed function of the molecule: roll it out once.
  std::vector<ConformerOutput> cache;
  const bool cached = use_engine && !config.finetune_engine;
  if (cached) {
    std::function<ConformerOutput(std::size_t)> one = [&](std::size_t i) {
      const auto &r = data.records[i];
      return with_row(r, [&] { return run_engine(params, config, r.mol); });
    };
    cache = ordered_map(data.records.size(), workers, one);
  }
  auto cache_of = [&](std::size_t i) { return cached ? &cache[i] : nullptr; };

  auto item = [&](std::size_t i) {
    const auto &r = data.records[i];
    LossAndGrads out;
    out.loss = with_row(r, [&] {
      return fp_forward(params, config, tasks, r, run.stats, cache_of(i), &out.grads).loss;
    });
    return out;
  };
  auto validate = [&] {
    std::function<FpForward(std::size_t)> one = [&](std::size_t k) {
      const std::size_t i = run.split.val[k];
      return with_row(data.records[i], [&] {
        return fp_forward(params, config, tasks, data.records[i], run.stats, cache_of(i), nullptr);
      });
    };
    const auto outs = ordered_map(run.split.val.size(), workers, one);
    HistoryRow row;
    std::vector<Matrix> preds;
    for (const auto &o: outs) {
      row.val_loss += o.loss;
      preds.push_back(output_of(o.z, config, run.stats));
    }
    row.val_loss /= std::max<double>(1.0, static_cast<double>(outs.size()));
    const Metrics m = compute_metrics(preds, data, run.split.val);
    const double v = config.metric == Metric::kRocAuc ? m.roc_auc
                     : config.metric == Metric::kMae  ? m.mae
                                                      : m.rmse;
    row.extra = { { fmt::format("val_{}", metric_name(config.metric)), v } };
    return row;
  };
  LoopResult loop = run_loop(params, config, run.split.train, workers, item, validate);
  run.params = std::move(loop.best);
  run.history = std::move(loop.history);
  run.best_epoch = loop.best_epoch;
  return run;
}

// Metrics -----------------------------------------------------------------------

double roc_auc(const std::vector<double> &scores, const std::vector<int> &labels) {
  if (scores.size() != labels.size())
    throw Error(ErrorCode::kShapeMismatch, "scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]])
      ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k)
      rank[order[k]] = mid;
    i = j + 1;
  }
  double pos = 0.0, neg = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i]) {
      pos += 1.0;
      rank_sum += rank[i];
    } else {
      neg += 1.0;
    }
  }
  if (pos == 0.0 || neg == 0.0)
    throw Error(ErrorCode::kUndefinedAuc, "ROC-AUC needs both classes");
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

nlohmann::json Metrics::to_json() const {
  auto nan_null = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); };
  nlohmann::json auc = nlohmann::json::array();
  for (double v: task_auc)
    auc.push_back(nan_null(v));
  return { { "mae", mae },
           { "rmse", rmse },
           { "roc", auc_tasks ? nlohmann::json(roc_auc) : nlohmann::json() },
           { "task_mae", task_mae },
           { "task_rmse", task_rmse },
           { "task_roc", auc } };
}

Metrics compute_metrics(const std::vector<Matrix> &predictions, const Dataset &data,
                        const std::vector<std::size_t> &indices) {
  if (predictions.size() != indices.size())
    throw Error(ErrorCode::kShapeMismatch, "one prediction per molecule expected");
  const std::size_t tasks = data.target_names.size();
  Metrics m;
  std::size_t scored = 0;
  for (std::size_t t = 0; t < tasks; ++t) {
    double abs_sum = 0.0, sq_sum = 0.0, count = 0.0;
    bool binary = true;  // ROC only for 0/1 targets
    std::vector<double> scores;
    std::vector<int> labels;
    for (std::size_t k = 0; k < indices.size(); ++k) {
      const auto &r = data.records[indices[k]];
      if (r.masked[t])
        continue;
      const double e = predictions[k](0, static_cast<Eigen::Index>(t)) - r.targets[t];
      abs_sum += std::abs(e);
      sq_sum += e * e;
      count += 1.0;
      scores.push_back(predictions[k](0, static_cast<Eigen::Index>(t)));
      labels.push_back(r.targets[t] > 0.5 ? 1 : 0);
      binary = binary && (r.targets[t] == 0.0 || r.targets[t] == 1.0);
    }
    m.task_mae.push_back(count ? abs_sum / count : NAN);
    m.task_rmse.push_back(count ? std::sqrt(sq_sum / count) : NAN);
    try {
      if (!binary)
        throw Error(ErrorCode::kUndefinedAuc, "targets are not 0/1");
      m.task_auc.push_back(roc_auc(scores, labels));
      m.roc_auc += m.task_auc.back();
      ++m.auc_tasks;
    } catch (const Error &e) {
      if (e.code() != ErrorCode::kUndefinedAuc)
        throw;
      m.task_auc.push_back(NAN);
    }
    if (count) {
      m.mae += m.task_mae.back();
      m.rmse += m.task_rmse.back();
      ++scored;
    }
  }
  if (scored) {
    m.mae /= static_cast<double>(scored);
    m.rmse /= static_cast<double>(scored);
  }
  m.roc_auc = m.auc_tasks ? m.roc_auc / static_cast<double>(m.auc_tasks) : NAN;
  return m;
}

Metrics evaluate_fingerprint(const ParamSet &params, const TrainConfig &config,
                             const TargetStats &stats, const Dataset &data,
                             const std::vector<std::size_t> &indices, std::size_t workers) {
  const std::size_t tasks = data.target_names.size();
  std::function<Matrix(std::size_t)> one = [&](std::size_t k) {
    const auto &r = data.records[indices[k]];
    return with_row(r, [&] { return predict_properties(params, config, tasks, r.mol, stats); });
  };
  return compute_metrics(ordered_map(indices.size(), workers, one), data, indices);
}

}  // namespace hamforge
