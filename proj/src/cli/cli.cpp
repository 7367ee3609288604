//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "hamforge/cli.h"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "hamforge/chem/io.h"
#include "hamforge/chem/smiles.h"
#include "hamforge/geoloss.h"
#include "hamforge/oracle.h"
#include "hamforge/trainer.h"

namespace hamforge::cli {
namespace fs = std::filesystem;
using nlohmann::json;

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfigError:
    case ErrorCode::kUnknownVariant:
    case ErrorCode::kWidthMismatch:
      return kExitConfig;
    case ErrorCode::kNonFinite:
    case ErrorCode::kNonFiniteGradient:
    case ErrorCode::kDegenerateOutput:
    case ErrorCode::kDegenerateGeometry:
    case ErrorCode::kNoConvergence:
      return kExitNumeric;
    default:
      return kExitData;
  }
}

namespace {
  [[noreturn]] void config_error(const std::string &msg) {
    throw Error(ErrorCode::kConfigError, msg);
  }

  // Flags shared by the training-style commands.
  struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
    bool quiet = false;
  };

  void add_common(CLI::App *cmd, Common &c) {
    cmd->add_option("--config", c.config, "TrainConfig JSON (defaults when omitted)");
    cmd->add_option("--seed", c.seed, "overrides the config seed and HAMFORGE_SEED");
    cmd->add_option("--workers", c.workers, "parallel molecules per batch; 1 is reproducible")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_flag("--quiet", c.quiet, "warnings and errors only");
  }

  TrainConfig load_train_config(const Common &c, const std::string &stage) {
    json j = json::object();
    if (!c.config.empty()) {
      std::ifstream in(c.config);
      if (!in)
        config_error(fmt::format("cannot open config {}", c.config));
      j = json::parse(in, nullptr, false);
      if (j.is_discarded() || !j.is_object())
        config_error(fmt::format("{} is not a JSON object", c.config));
    }
    if (!j.contains("stage"))
      j["stage"] = stage;
    TrainConfig cfg = TrainConfig::from_json(j);
    if (const char *env = std::getenv("HAMFORGE_SEED"); env != nullptr && *env != '\0') {
      char *end = nullptr;
      const unsigned long long v = std::strtoull(env, &end, 10);
      if (*end != '\0')
        config_error(fmt::format("HAMFORGE_SEED '{}' is not an unsigned integer", env));
      cfg.seed = v;
    }
    if (c.seed)
      cfg.seed = *c.seed;
    return cfg;
  }

  chem::Dataset load_data(const std::string &path, const std::string &conf) {
    chem::Dataset data = chem::read_dataset(path);
    if (data.skipped)
      spdlog::warn("{}: skipped {} unparseable rows", path, data.skipped);
    if (!conf.empty()) {
      const std::size_t n = attach_conformations(data, conf);
      spdlog::info("attached {} of {} conformations from {}", n, data.records.size(), conf);
    }
    return data;
  }

  std::string default_history(const std::string &out) {
    fs::path p(out);
    return p.replace_extension(".history.csv").string();
  }

  json split_json(const Split &s) {
    return { { "train", s.train }, { "val", s.val }, { "test", s.test } };
  }

  struct Loaded {
    diff::ParamSet params;
    json hyper;
    TrainConfig config;
    std::string stage;
  };

  Loaded load_model(const std::string &path) {
    Loaded m;
    m.params = diff::load_checkpoint(path, &m.hyper);
    if (!m.hyper.is_object() || !m.hyper.contains("stage") || !m.hyper.contains("config"))
      throw Error(ErrorCode::kBadCheckpoint,
                  fmt::format("{} was not written by train-engine or train-fp", path));
    m.stage = m.hyper.at("stage").get<std::string>();
    m.config = TrainConfig::from_json(m.hyper.at("config"));
    return m;
  }

  void require_engine(const Loaded &m) {
    if (!m.params.contains("eng.W_trans"))
      throw Error(ErrorCode::kCheckpointMissing, "checkpoint holds no engine parameters");
  }

  std::vector<std::size_t> pick(const std::string &which, const json &hyper, std::size_t n) {
    if (which == "all") {
      std::vector<std::size_t> all(n);
      std::iota(all.begin(), all.end(), 0u);
      return all;
    }
    const auto idx = hyper.at("split").at(which).get<std::vector<std::size_t>>();
    for (std::size_t i: idx)
      if (i >= n)
        throw Error(ErrorCode::kCountMismatch,
                    fmt::format("the stored {} split indexes row {} but the data has {} "
                                "molecules; use --split all",
                                which, i, n));
    return idx;
  }

  // Centered on the mass-weighted centroid, or superposed on the reference.
  Matrix place(const Matrix &coords, const chem::MoleculeGraph &mol, const Matrix *target) {
    const Vector m = mol.masses();
    if (target != nullptr)
      return kabsch_align(coords, *target, m);
    const Eigen::RowVectorXd c = (m.transpose() * coords) / m.sum();
    return coords.rowwise() - c;
  }

  std::vector<std::string> elements(const chem::MoleculeGraph &mol) {
    std::vector<std::string> e;
    for (const auto &a: mol.atoms())
      e.push_back(a.element);
    return e;
  }

  // Table 1 layout; distances in 1e-2 of the coordinate unit.
  void print_conformation_table(std::ostream &out, const std::string &model,
                                const LossReport &r) {
    out << "Model,Kabsch-RMSD (Å),Distance Loss (10⁻² Å)\n";
    out << fmt::format("{},{:.4f},{:.4f}\n", model, r.k_rmsd, 100.0 * r.dist);
  }

  // train-engine / ablate ------------------------------------------------------

  struct EngineArgs {
    Common common;
    std::string data, conf, out, history;
  };

  void add_engine_args(CLI::App *cmd, EngineArgs &a) {
    cmd->add_option("--data", a.data, "CSV with a smiles column")->required();
    cmd->add_option("--conf", a.conf, "SDF file or directory of <row>.xyz");
    cmd->add_option("--out", a.out, "checkpoint to write")->required();
    cmd->add_option("--history", a.history, "history CSV (default <out>.history.csv)");
    add_common(cmd, a.common);
  }

  void train_engine_command(const EngineArgs &a, TrainConfig cfg, const std::string &model,
                            std::ostream &out) {
    if (a.conf.empty())
      throw Error(ErrorCode::kNoConformations, "--conf is required to train the engine");
    chem::Dataset data = load_data(a.data, a.conf);
    EngineRun run = train_engine(data, cfg, a.common.workers);
    const json hyper = { { "stage", "engine" },
                         { "config", cfg.to_json() },
                         { "best_epoch", run.best_epoch },
                         { "split", split_json(run.split) } };
    diff::save_checkpoint(a.out, run.params, hyper);
    diff::write_file_atomic(a.history.empty() ? default_history(a.out) : a.history,
                            history_csv(run.history));
    const LossReport r = evaluate_engine(run.params, cfg, data, run.split.test, a.common.workers);
    print_conformation_table(out, model, r);
  }

  struct Variant {
    const char *name;
    const char *model;
    void (*apply)(TrainConfig &);
  };

  const Variant kVariants[] = {
    { "no-lstm", "Ham. Eng. (w/o LSTM)", [](TrainConfig &c) { c.use_lstm = false; } },
    { "no-dyn", "Ham. Eng. (w/o dyn.)", [](TrainConfig &c) { c.steps = 0; } },
    { "no-phi", "Ham. Eng. (w/o Φ)", [](TrainConfig &c) { c.freeze_phi = true; } },
    { "no-adj3", "Ham. Eng. (w/o ADJ-3)", [](TrainConfig &c) { c.lambda = 0.0; } },
  };

  const Variant &find_variant(const std::string &name) {
    for (const Variant &v: kVariants)
      if (name == v.name)
        return v;
    throw Error(ErrorCode::kUnknownVariant,
                fmt::format("unknown variant '{}' (no-lstm, no-dyn, no-phi, no-adj3)", name));
  }

  // train-fp / eval -------------------------------------------------------------

  struct FpArgs {
    Common common;
    std::string data, conf, engine, out, history;
  };

  // The stage-1 architecture comes from the engine checkpoint.
  void adopt_engine_config(TrainConfig &cfg, const TrainConfig &e) {
    cfg.bond_hidden = e.bond_hidden;
    cfg.gcn_layers = e.gcn_layers;
    cfg.gcn_width = e.gcn_width;
    cfg.use_lstm = e.use_lstm;
    cfg.d_f = e.d_f;
    cfg.eta = e.eta;
    cfg.steps = e.steps;
    cfg.eps_r = e.eps_r;
    cfg.freeze_phi = e.freeze_phi;
  }

  void train_fp_command(const FpArgs &a, std::ostream &out) {
    TrainConfig cfg = load_train_config(a.common, "fingerprint");
    chem::Dataset data = load_data(a.data, a.conf);
    diff::ParamSet engine;
    if (!a.engine.empty() && cfg.conf == ConfSource::kEngine) {
      Loaded e = load_model(a.engine);
      require_engine(e);
      adopt_engine_config(cfg, e.config);
      engine = std::move(e.params);
    } else if (!a.engine.empty()) {
      spdlog::warn("conf is not 'engine'; ignoring --engine");
    }
    FingerprintRun run = train_fingerprint(data, engine, cfg, a.common.workers);
    const json hyper = { { "stage", "fingerprint" },
                         { "config", cfg.to_json() },
                         { "targets", data.target_names },
                         { "stats", run.stats.to_json() },
                         { "best_epoch", run.best_epoch },
                         { "split", split_json(run.split) } };
    diff::save_checkpoint(a.out, run.params, hyper);
    diff::write_file_atomic(a.history.empty() ? default_history(a.out) : a.history,
                            history_csv(run.history));
    const Metrics m =
        evaluate_fingerprint(run.params, cfg, run.stats, data, run.split.test, a.common.workers);
    out << m.to_json().dump(2) << "\n";
  }

  struct EvalArgs {
    std::string checkpoint, data, conf, split = "test";
    std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  };

  void eval_command(const EvalArgs &a, std::ostream &out) {
    const Loaded m = load_model(a.checkpoint);
    chem::Dataset data = load_data(a.data, a.conf);
    const auto idx = pick(a.split, m.hyper, data.records.size());
    if (m.stage == "engine") {
      const LossReport r = evaluate_engine(m.params, m.config, data, idx, a.workers);
      out << json { { "k_rmsd", r.k_rmsd },
                    { "dist", r.dist },
                    { "adj", r.adj },
                    { "combined", r.combined } }
                 .dump(2)
          << "\n";
      return;
    }
    const auto names = m.hyper.at("targets").get<std::vector<std::string>>();
    if (names != data.target_names)
      throw Error(ErrorCode::kHeaderMismatch,
                  fmt::format("checkpoint predicts {} targets, data has {}", names.size(),
                              data.target_names.size()));
    const Metrics r = evaluate_fingerprint(m.params, m.config,
                                           TargetStats::from_json(m.hyper.at("stats")), data, idx,
                                           a.workers);
    out << r.to_json().dump(2) << "\n";
  }

  // predict-conf / export-traj ---------------------------------------------------

  struct PredictArgs {
    std::string checkpoint, data, conf, out, split = "all";
    std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  };

  void predict_conf_command(const PredictArgs &a, std::ostream &out) {
    const Loaded m = load_model(a.checkpoint);
    require_engine(m);
    chem::Dataset data = load_data(a.data, a.conf);
    const auto idx = pick(a.split, m.hyper, data.records.size());
    std::error_code ec;
    fs::create_directories(a.out, ec);
    if (ec)
      throw Error(ErrorCode::kIoError, fmt::format("cannot create {}: {}", a.out, ec.message()));

    std::size_t aligned = 0;
    std::function<chem::XyzFrame(std::size_t)> one = [&](std::size_t k) {
      const chem::Record &r = data.records[idx[k]];
      const Matrix coords = run_engine(m.params, m.config, r.mol).coords;
      const auto &ref = r.mol.reference_conformation();
      chem::XyzFrame f { elements(r.mol), place(coords, r.mol, ref ? &*ref : nullptr),
                         fmt::format("row {} {}", r.row, r.smiles) };
      if (ref)
        f.comment += fmt::format(" k_rmsd={:.6f}", k_rmsd(coords, *ref, r.mol.masses()));
      return f;
    };
    std::function<void(std::size_t, chem::XyzFrame &)> write = [&](std::size_t k,
                                                                   chem::XyzFrame &f) {
      chem::write_xyz(fs::path(a.out) / fmt::format("{}.xyz", data.records[idx[k]].row), { f });
      if (f.comment.find("k_rmsd=") != std::string::npos)
        ++aligned;
    };
    ordered_map_reduce<chem::XyzFrame>(idx.size(), a.workers, one, write);
    out << fmt::format("wrote {} conformations to {} ({} aligned to a reference)\n", idx.size(),
                       a.out, aligned);
  }

  struct TrajArgs {
    std::string checkpoint, smiles, data, conf, out;
    std::optional<std::size_t> row;
  };

  void export_traj_command(const TrajArgs &a, std::ostream &out) {
    const Loaded m = load_model(a.checkpoint);
    require_engine(m);
    chem::MoleculeGraph mol;
    if (!a.smiles.empty()) {
      if (!a.data.empty() || a.row)
        config_error("give either --smiles or --data with --row");
      mol = chem::parse_smiles(a.smiles);
    } else {
      if (a.data.empty() || !a.row)
        config_error("export-traj needs --smiles, or --data with --row");
      chem::Dataset data = load_data(a.data, a.conf);
      auto it = std::find_if(data.records.begin(), data.records.end(),
                             [&](const chem::Record &r) { return r.row == *a.row; });
      if (it == data.records.end())
        throw Error(ErrorCode::kCountMismatch, fmt::format("no molecule at row {}", *a.row));
      mol = it->mol;
    }
    const std::vector<Matrix> traj = engine_trajectory(m.params, m.config, mol);
    // superpose every frame on the reference, or on the last frame
    const auto &ref = mol.reference_conformation();
    const Matrix target = ref ? *ref : place(traj.back(), mol, nullptr);
    std::vector<chem::XyzFrame> frames;
    for (std::size_t t = 0; t < traj.size(); ++t) {
      Matrix x;
      try {
        x = place(traj[t], mol, &target);
      } catch (const Error &e) {
        if (e.code() != ErrorCode::kDegenerateGeometry)
          throw;
        x = place(traj[t], mol, nullptr);
      }
      frames.push_back({ elements(mol), x, fmt::format("step {} of {}", t, traj.size() - 1) });
    }
    chem::write_xyz(a.out, frames);
    out << fmt::format("wrote {} frames to {}\n", frames.size(), a.out);
  }

  // gradcheck / sweep -------------------------------------------------------------

  int gradcheck_command(std::uint64_t seed, int trials, std::ostream &out) {
    const auto checks = run_gradient_oracle(seed, trials);
    std::size_t failed = 0;
    out << "group,check,max_rel_error,tolerance,status\n";
    for (const OracleCheck &c: checks) {
      out << fmt::format("{},{},{:.3e},{:.0e},{}\n", c.group, c.name, c.max_rel_error,
                         c.tolerance, c.passed() ? "ok" : "FAIL");
      if (!c.passed()) {
        ++failed;
        spdlog::error("{} {}: worst probe {}", c.group, c.name, c.worst);
      }
    }
    out << fmt::format("{} of {} checks passed\n", checks.size() - failed, checks.size());
    return failed ? kExitNumeric : kExitOk;
  }

  struct SweepArgs {
    EngineArgs engine;
    std::string param, values;
  };

  std::vector<double> parse_values(const std::string &list) {
    std::vector<double> v;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
      std::size_t used = 0;
      double x = 0.0;
      try {
        x = std::stod(item, &used);
      } catch (const std::exception &) {
        used = 0;
      }
      if (used == 0 || used != item.size())
        config_error(fmt::format("--values: '{}' is not a number", item));
      v.push_back(x);
    }
    if (v.empty())
      config_error("--values is empty");
    return v;
  }

  int whole(double x, const std::string &param) {
    if (x != std::floor(x) || x < 0)
      config_error(fmt::format("{} takes non-negative integers, got {}", param, x));
    return static_cast<int>(x);
  }

  void sweep_command(const SweepArgs &a, std::ostream &out) {
    if (a.param != "T" && a.param != "df" && a.param != "eta")
      config_error(fmt::format("--param must be T, df or eta, got '{}'", a.param));
    const std::vector<double> values = parse_values(a.values);
    const TrainConfig base = load_train_config(a.engine.common, "engine");
    if (a.engine.conf.empty())
      throw Error(ErrorCode::kNoConformations, "--conf is required to sweep the engine");
    chem::Dataset data = load_data(a.engine.data, a.engine.conf);

    std::string csv = fmt::format("{},test_distance_loss,seconds,diverged\n", a.param);
    for (double v: values) {
      TrainConfig cfg = base;
      if (a.param == "T")
        cfg.steps = whole(v, "T");
      else if (a.param == "df")
        cfg.d_f = whole(v, "df");
      else
        cfg.eta = v;
      cfg.validate();
      const auto t0 = std::chrono::steady_clock::now();
      double dist = std::nan("");
      bool diverged = false;
      try {
        EngineRun run = train_engine(data, cfg, a.engine.common.workers);
        dist = evaluate_engine(run.params, cfg, data, run.split.test, a.engine.common.workers).dist;
      } catch (const Error &e) {
        if (e.code() != ErrorCode::kNonFinite && e.code() != ErrorCode::kNonFiniteGradient)
          throw;
        spdlog::warn("{}={}: {}", a.param, v, e.what());
        diverged = true;
      }
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      csv += fmt::format("{},{},{:.6f},{}\n", v, diverged ? "nan" : fmt::format("{:.17g}", dist),
                         secs, diverged ? 1 : 0);
    }
    if (!a.engine.out.empty())
      diff::write_file_atomic(a.engine.out, csv);
    out << csv;
  }
}  // namespace

int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
  CLI::App app { "hamforge: Hamiltonian conformation engine and fingerprints", "hamforge" };
  app.require_subcommand(1);

  EngineArgs train;
  auto *c_train = app.add_subcommand("train-engine", "stage 1: fit the engine to conformations");
  add_engine_args(c_train, train);

  EngineArgs abl;
  std::string variant;
  auto *c_abl = app.add_subcommand("ablate", "train-engine with one component removed");
  c_abl->add_option("--variant", variant, "no-lstm | no-dyn | no-phi | no-adj3")->required();
  add_engine_args(c_abl, abl);

  FpArgs fp;
  auto *c_fp = app.add_subcommand("train-fp", "stage 2: fingerprint and property head");
  c_fp->add_option("--data", fp.data, "CSV with smiles and target columns")->required();
  c_fp->add_option("--engine", fp.engine, "stage-1 checkpoint (needed when conf is engine)");
  c_fp->add_option("--conf", fp.conf, "conformations, for conf = real");
  c_fp->add_option("--out", fp.out, "checkpoint to write")->required();
  c_fp->add_option("--history", fp.history, "history CSV (default <out>.history.csv)");
  add_common(c_fp, fp.common);

  EvalArgs ev;
  auto *c_eval = app.add_subcommand("eval", "metrics of a checkpoint as JSON");
  c_eval->add_option("--checkpoint", ev.checkpoint, "train-engine or train-fp output")
      ->required();
  c_eval->add_option("--data", ev.data, "CSV to score")->required();
  c_eval->add_option("--conf", ev.conf, "conformations (engine checkpoints, conf = real)");
  c_eval->add_option("--split", ev.split, "stored split to score, or all")
      ->check(CLI::IsMember({ "train", "val", "test", "all" }))
      ->capture_default_str();
  c_eval->add_option("--workers", ev.workers, "parallel molecules")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  PredictArgs pc;
  auto *c_pc = app.add_subcommand("predict-conf", "one XYZ per molecule");
  c_pc->add_option("--checkpoint", pc.checkpoint, "checkpoint with engine parameters")
      ->required();
  c_pc->add_option("--data", pc.data, "CSV with a smiles column")->required();
  c_pc->add_option("--conf", pc.conf, "references to superpose on");
  c_pc->add_option("--out", pc.out, "output directory")->required();
  c_pc->add_option("--split", pc.split, "stored split to predict, or all")
      ->check(CLI::IsMember({ "train", "val", "test", "all" }))
      ->capture_default_str();
  c_pc->add_option("--workers", pc.workers, "parallel molecules")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  TrajArgs tr;
  auto *c_tr = app.add_subcommand("export-traj", "multi-frame XYZ of one rollout");
  c_tr->add_option("--checkpoint", tr.checkpoint, "checkpoint with engine parameters")
      ->required();
  c_tr->add_option("--smiles", tr.smiles, "molecule to roll out");
  c_tr->add_option("--data", tr.data, "CSV to take the molecule from");
  c_tr->add_option("--row", tr.row, "zero-based data row");
  c_tr->add_option("--conf", tr.conf, "reference to superpose on");
  c_tr->add_option("--out", tr.out, "XYZ file to write")->required();

  std::uint64_t gc_seed = 0;
  int gc_trials = 3;
  auto *c_gc = app.add_subcommand("gradcheck", "finite-difference oracle over every op");
  c_gc->add_option("--seed", gc_seed, "instance seed")->capture_default_str();
  c_gc->add_option("--trials", gc_trials, "random instances per check")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  SweepArgs sw;
  auto *c_sw = app.add_subcommand("sweep", "train-engine over values of one hyperparameter");
  c_sw->add_option("--param", sw.param, "T | df | eta")->required();
  c_sw->add_option("--values", sw.values, "comma-separated numbers")->required();
  c_sw->add_option("--data", sw.engine.data, "CSV with a smiles column")->required();
  c_sw->add_option("--conf", sw.engine.conf, "SDF file or directory of <row>.xyz");
  c_sw->add_option("--out", sw.engine.out, "CSV to write (also printed)");
  add_common(c_sw, sw.engine.common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError &e) {
    app.exit(e, out, err);
    return kExitConfig;
  }

  const auto level = spdlog::get_level();
  for (const Common *c: { &train.common, &abl.common, &fp.common, &sw.engine.common })
    if (c->quiet)
      spdlog::set_level(spdlog::level::warn);
  int code = kExitOk;
  try {
    if (*c_train) {
      train_engine_command(train, load_train_config(train.common, "engine"), "Ham. Eng.", out);
    } else if (*c_abl) {
      const Variant &v = find_variant(variant);
      TrainConfig cfg = load_train_config(abl.common, "engine");
      v.apply(cfg);
      cfg.validate();
      train_engine_command(abl, cfg, v.model, out);
    } else if (*c_fp) {
      train_fp_command(fp, out);
    } else if (*c_eval) {
      eval_command(ev, out);
    } else if (*c_pc) {
      predict_conf_command(pc, out);
    } else if (*c_tr) {
      export_traj_command(tr, out);
    } else if (*c_gc) {
      code = gradcheck_command(gc_seed, gc_trials, out);
    } else if (*c_sw) {
      sweep_command(sw, out);
    }
  } catch (const Error &e) {
    err << "error: " << e.what() << "\n";
    code = exit_code(e.code());
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    code = 1;
  }
  spdlog::set_level(level);
  return code;
}

}  // namespace hamforge::cli
