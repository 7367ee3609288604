//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>
#include <spdlog/spdlog.h>

#include "hamforge/chem/smiles.h"
#include "hamforge/diff/ops.h"
#include "hamforge/trainer.h"
#include "test_util.h"

namespace hamforge {
namespace {
  using chem::Dataset;
  using diff::Grads;
  using diff::ParamSet;
  using testing::code_of;

  const Dataset &qm9() {
    static const Dataset d = [] {
      spdlog::set_level(spdlog::level::warn);
      Dataset ds = chem::read_dataset(HAMFORGE_DATA_DIR "/qm9_500.csv");
      attach_conformations(ds, HAMFORGE_DATA_DIR "/qm9_500.sdf");
      return ds;
    }();
    return d;
  }

  Dataset head_of(const Dataset &d, std::size_t n) {
    Dataset out;
    out.target_names = d.target_names;
    out.records.assign(d.records.begin(), d.records.begin() + static_cast<std::ptrdiff_t>(n));
    return out;
  }

  // Keeps only target column `t`.
  Dataset one_task(Dataset d, std::size_t t) {
    for (auto &r: d.records) {
      r.targets = { r.targets[t] };
      r.masked = { r.masked[t] };
    }
    d.target_names = { d.target_names[t] };
    return d;
  }

  TrainConfig tiny_config() {
    TrainConfig c;
    c.bond_hidden = 8;
    c.gcn_layers = 2;
    c.gcn_width = 8;
    c.d_f = 6;
    c.steps = 4;
    c.hidden = 16;
    c.epochs = 1;
    c.batch_size = 8;
    return c;
  }

  Dataset synthetic(std::size_t n, std::uint64_t seed) {
    Dataset d;
    d.target_names = { "y" };
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    for (std::size_t i = 0; i < n; ++i) {
      chem::Record r;
      r.smiles = "CCO";
      r.mol = chem::parse_smiles(r.smiles);
      r.targets = { g(rng) };
      r.masked = { false };
      r.row = i;
      d.records.push_back(r);
    }
    return d;
  }

  TEST(Split, SizesDeterminismAndPartition) {
    Split s = split(10, 3);
    EXPECT_EQ(s.train.size(), 8u);
    EXPECT_EQ(s.val.size(), 1u);
    EXPECT_EQ(s.test.size(), 1u);
    for (std::size_t n: { 10u, 11u, 57u, 1128u }) {
      Split a = split(n, 42), b = split(n, 42);
      EXPECT_EQ(a.train, b.train);
      EXPECT_EQ(a.val, b.val);
      EXPECT_EQ(a.test, b.test);
      EXPECT_EQ(a.train.size(), n * 8 / 10);
      EXPECT_EQ(a.val.size(), n / 10);
      std::set<std::size_t> all;
      for (const auto *part: { &a.train, &a.val, &a.test })
        all.insert(part->begin(), part->end());
      EXPECT_EQ(all.size(), n);
      EXPECT_EQ(*all.rbegin(), n - 1);
    }
    EXPECT_NE(split(100, 1).train, split(100, 2).train);
    EXPECT_EQ(code_of([] { split(9, 0); }), ErrorCode::kTooSmall);
  }

  TEST(Targets, NormalizationRoundTripAndZeroVariance) {
    Dataset d = synthetic(40, 1);
    for (auto &r: d.records)
      r.targets[0] = 3.0 + 7.0 * r.targets[0];
    std::vector<std::size_t> idx(40);
    std::iota(idx.begin(), idx.end(), 0u);
    TargetStats s = normalize_targets(d, idx);
    double sum = 0.0, ss = 0.0;
    for (const auto &r: d.records) {
      const double z = s.normalize(r.targets[0], 0);
      sum += z;
      ss += z * z;
      EXPECT_NEAR(s.denormalize(z, 0), r.targets[0], 1e-12);
    }
    EXPECT_NEAR(sum / 40.0, 0.0, 1e-12);
    EXPECT_NEAR(ss / 40.0, 1.0, 1e-12);

    for (auto &r: d.records)
      r.targets[0] = 2.5;
    EXPECT_EQ(code_of([&] { normalize_targets(d, idx); }), ErrorCode::kZeroVariance);
  }

  TEST(Targets, MaskedValuesAreIgnored) {
    Dataset d = synthetic(20, 2);
    d.records[3].targets[0] = 1e9;
    d.records[3].masked[0] = true;
    std::vector<std::size_t> idx(20);
    std::iota(idx.begin(), idx.end(), 0u);
    EXPECT_LT(std::abs(normalize_targets(d, idx).mean[0]), 10.0);
  }

  TEST(Config, ParsingAndValidation) {
    TrainConfig c = TrainConfig::from_json(nlohmann::json::parse(R"({"stage":"fingerprint"})"));
    EXPECT_DOUBLE_EQ(c.learning_rate, 5e-4);
    EXPECT_DOUBLE_EQ(TrainConfig::from_json(nlohmann::json::object()).learning_rate, 1e-3);
    TrainConfig custom = tiny_config();
    custom.conf = ConfSource::kNone;
    custom.metric = Metric::kRocAuc;
    custom.lambda = 0.0;
    TrainConfig back = TrainConfig::from_json(custom.to_json());
    EXPECT_EQ(back.to_json(), custom.to_json());

    for (const char *bad: { R"({"epochz": 3})", R"({"epochs": 0})", R"({"eta": -1})",
                            R"({"epochs": "many"})", R"({"conf": "maybe"})", R"({"lambda": -0.5})",
                            R"([1, 2])" })
      EXPECT_EQ(code_of([&] { TrainConfig::from_json(nlohmann::json::parse(bad)); }),
                ErrorCode::kConfigError)
          << bad;
  }

  TEST(Adam, FirstStepMovesByLearningRateAndSkipsFrozen) {
    ParamSet p;
    p.add("a", Matrix::Constant(2, 2, 1.0));
    p.add("b", Matrix::Constant(1, 3, 1.0));
    p.set_trainable("b", false);
    Adam adam(p, 0.1);
    Grads g(2);
    g.g[0] = Matrix::Constant(2, 2, 5.0);
    g.g[1] = Matrix::Constant(1, 3, 5.0);
    adam.step(p, g);
    EXPECT_NEAR(p.value("a")(0, 0), 0.9, 1e-8);
    EXPECT_EQ(p.value("b"), Matrix::Constant(1, 3, 1.0));
    // minimizes a quadratic
    for (int k = 0; k < 300; ++k) {
      g.g[0] = 2.0 * (p.value("a").array() - 3.0).matrix();
      adam.step(p, g);
    }
    EXPECT_NEAR(p.value("a")(1, 1), 3.0, 1e-2);
  }

  TEST(Clip, GlobalNormIsCapped) {
    Grads g(2);
    g.g[0] = Matrix::Constant(1, 1, 30.0);
    g.g[1] = Matrix::Constant(1, 1, 40.0);
    EXPECT_DOUBLE_EQ(clip_grad_norm(g, 10.0), 50.0);
    EXPECT_NEAR(g.norm(), 10.0, 1e-12);
    EXPECT_NEAR(g.g[0](0, 0) / g.g[1](0, 0), 0.75, 1e-15);
    EXPECT_DOUBLE_EQ(clip_grad_norm(g, 100.0), g.norm());
    g.g[0](0, 0) = NAN;
    EXPECT_EQ(code_of([&] { clip_grad_norm(g, 1.0); }), ErrorCode::kNonFiniteGradient);
  }

  TEST(OrderedReduce, SameOrderForAnyWorkerCount) {
    std::function<double(std::size_t)> item = [](std::size_t i) {
      return 1.0 / (1.0 + static_cast<double>(i * i % 97));
    };
    auto run = [&](std::size_t workers) {
      std::vector<std::size_t> seen;
      double sum = 0.0;
      std::function<void(std::size_t, double &)> reduce = [&](std::size_t i, double &v) {
        seen.push_back(i);
        sum += v;
      };
      ordered_map_reduce(500, workers, item, reduce);
      return std::make_pair(seen, sum);
    };
    auto one = run(1);
    for (std::size_t w: { 2u, 3u, 8u }) {
      auto many = run(w);
      EXPECT_EQ(many.first, one.first);
      EXPECT_EQ(many.second, one.second);
    }
  }

  TEST(OrderedReduce, LowestFailingIndexWins) {
    std::atomic<int> calls { 0 };
    std::function<int(std::size_t)> item = [&](std::size_t i) -> int {
      ++calls;
      if (i == 7 || i == 30)
        throw Error(ErrorCode::kNonFinite, "boom", static_cast<std::int64_t>(i));
      return 0;
    };
    std::function<void(std::size_t, int &)> reduce = [](std::size_t, int &) { };
    for (std::size_t w: { 1u, 4u }) {
      try {
        ordered_map_reduce(64, w, item, reduce);
        FAIL();
      } catch (const Error &e) {
        EXPECT_EQ(e.detail(), 7);
      }
    }
  }

  TEST(RocAuc, ExamplesAndErrors) {
    EXPECT_DOUBLE_EQ(roc_auc({ 0.1, 0.2, 0.8, 0.9 }, { 0, 0, 1, 1 }), 1.0);
    EXPECT_DOUBLE_EQ(roc_auc({ 0.9, 0.8, 0.2, 0.1 }, { 0, 0, 1, 1 }), 0.0);
    EXPECT_DOUBLE_EQ(roc_auc({ 0.5, 0.5, 0.5, 0.5 }, { 0, 1, 0, 1 }), 0.5);
    EXPECT_EQ(code_of([] { roc_auc({ 0.1, 0.2 }, { 1, 1 }); }), ErrorCode::kUndefinedAuc);
    EXPECT_EQ(code_of([] { roc_auc({ 0.1, 0.2 }, { 0, 0 }); }), ErrorCode::kUndefinedAuc);
  }

  TEST(RocAuc, MatchesPairwiseOracle) {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t n = 2 + rng() % 199;
      std::vector<double> s(n);
      std::vector<int> y(n);
      for (std::size_t i = 0; i < n; ++i) {
        s[i] = static_cast<double>(rng() % 20) / 20.0;  // plenty of ties
        y[i] = static_cast<int>(rng() % 2);
      }
      y[0] = 0;
      y[1] = 1;
      double wins = 0.0, pairs = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          if (y[i] == 1 && y[j] == 0) {
            pairs += 1.0;
            wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
          }
      EXPECT_NEAR(roc_auc(s, y), wins / pairs, 1e-12);
    }
  }

  TEST(RocAuc, RandomScoresNearHalf) {
    std::mt19937_64 rng(14);
    std::uniform_real_distribution<double> u;
    std::vector<double> s(1000);
    std::vector<int> y(1000);
    for (std::size_t i = 0; i < 1000; ++i) {
      s[i] = u(rng);
      y[i] = i % 2 == 0;
    }
    const double auc = roc_auc(s, y);
    EXPECT_GE(auc, 0.45);
    EXPECT_LE(auc, 0.55);
  }

  TEST(Metrics, PerfectPredictionsAndSkippedTasks) {
    Dataset d;
    d.target_names = { "a", "b" };
    std::vector<Matrix> preds;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < 6; ++i) {
      chem::Record r;
      r.targets = { static_cast<double>(i % 2), 1.0 };  // task b has one class
      r.masked = { false, i == 2 };
      d.records.push_back(r);
      Matrix p(1, 2);
      p << r.targets[0], r.targets[1];
      preds.push_back(p);
      idx.push_back(i);
    }
    preds[2](0, 1) = 99.0;  // masked, ignored
    Metrics m = compute_metrics(preds, d, idx);
    EXPECT_EQ(m.mae, 0.0);
    EXPECT_EQ(m.rmse, 0.0);
    EXPECT_EQ(m.auc_tasks, 1u);
    EXPECT_DOUBLE_EQ(m.roc_auc, 1.0);
    EXPECT_TRUE(std::isnan(m.task_auc[1]));
    const auto j = m.to_json();
    EXPECT_TRUE(j.contains("mae") && j.contains("rmse") && j.contains("roc"));
  }

  TEST(TrainEngine, OneEpochHistoryAndCheckpointShapes) {
    Dataset d = head_of(qm9(), 10);
    TrainConfig c = tiny_config();
    EngineRun run = train_engine(d, c);
    ASSERT_EQ(run.history.size(), 1u);
    EXPECT_TRUE(std::isfinite(run.history[0].train_loss));
    EXPECT_TRUE(std::isfinite(run.history[0].val_loss));
    const std::string csv = history_csv(run.history);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,train_loss,val_loss,val_k_rmsd,val_dist,val_adj");

    // parameter shapes do not depend on the number of steps
    TrainConfig a = c, b = c;
    a.steps = 5;
    b.steps = 30;
    const ParamSet pa = init_engine_params(a), pb = init_engine_params(b);
    ASSERT_EQ(pa.size(), pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
      EXPECT_EQ(pa.name(i), pb.name(i));
      EXPECT_EQ(pa.value(i).rows(), pb.value(i).rows());
      EXPECT_EQ(pa.value(i).cols(), pb.value(i).cols());
    }
  }

  TEST(TrainEngine, LossEqualsKRmsdWithoutAdjacencyTerm) {
    const auto &mol = qm9().records[5].mol;
    TrainConfig c = tiny_config();
    c.lambda = 0.0;
    const ParamSet p = init_engine_params(c);
    const ConformerOutput out = run_engine(p, c, mol);
    const ConformerRef ref = ConformerRef::from(mol);
    EXPECT_NEAR(engine_loss(p, c, mol, nullptr), k_rmsd(out.coords, ref.q_ref, ref.masses),
                1e-12);
    c.lambda = 1.0;
    EXPECT_NEAR(engine_loss(p, c, mol, nullptr), evaluate_losses(out.coords, ref, 1.0).combined,
                1e-12);
  }

  TEST(TrainEngine, Errors) {
    Dataset bare = qm9();
    bare.records.resize(12);
    for (auto &r: bare.records)
      r.mol = chem::parse_smiles(r.smiles);  // drops the coordinates
    EXPECT_EQ(code_of([&] { train_engine(bare, tiny_config()); }), ErrorCode::kNoConformations);
    EXPECT_EQ(code_of([&] { attach_conformations(bare, "/nonexistent/conf.sdf"); }),
              ErrorCode::kNoConformations);

    TrainConfig wild = tiny_config();
    wild.eta = 1e6;
    try {
      train_engine(head_of(qm9(), 10), wild);
      FAIL() << "expected a numeric failure";
    } catch (const Error &e) {
      EXPECT_EQ(e.code(), ErrorCode::kNonFinite);
      EXPECT_GE(e.detail(), 0);
      EXPECT_NE(std::string(e.what()).find("row"), std::string::npos);
    }
  }

  TEST(TrainEngine, FrozenDissipationStaysZero) {
    TrainConfig c = tiny_config();
    c.freeze_phi = true;
    EngineRun run = train_engine(head_of(qm9(), 12), c);
    EXPECT_EQ(run.params.value("eng.W_phi"), Matrix::Zero(c.d_f, c.d_f));
    EXPECT_FALSE(run.params.trainable(run.params.index("eng.W_phi")));
  }

  TEST(TrainEngine, OverfitLossDecreases) {
    TrainConfig c = tiny_config();
    c.epochs = 5;
    c.batch_size = 40;  // one full batch per epoch
    c.learning_rate = 2e-3;
    Dataset d = head_of(qm9(), 50);
    EngineRun run = train_engine(d, c);
    ASSERT_EQ(run.history.size(), 5u);
    for (std::size_t e = 1; e < run.history.size(); ++e)
      EXPECT_LE(run.history[e].train_loss, run.history[e - 1].train_loss) << "epoch " << e + 1;
  }

  TEST(TrainEngine, BitReproducibleAcrossRunsAndWorkers) {
    TrainConfig c = tiny_config();
    c.epochs = 2;
    Dataset d = head_of(qm9(), 20);
    EngineRun a = train_engine(d, c, 1), b = train_engine(d, c, 1), w = train_engine(d, c, 3);
    const auto hyper = c.to_json();
    const std::string ja = diff::checkpoint_to_json(a.params, hyper).dump();
    EXPECT_EQ(ja, diff::checkpoint_to_json(b.params, hyper).dump());
    EXPECT_EQ(ja, diff::checkpoint_to_json(w.params, hyper).dump());
    EXPECT_EQ(history_csv(a.history), history_csv(b.history));
    EXPECT_EQ(history_csv(a.history), history_csv(w.history));
  }

  TEST(TrainFingerprint, NeedsEngineUnlessGeometryFree) {
    Dataset d = one_task(head_of(qm9(), 12), 0);
    TrainConfig c = tiny_config();
    c.stage = "fingerprint";
    EXPECT_EQ(code_of([&] { train_fingerprint(d, ParamSet(), c); }),
              ErrorCode::kCheckpointMissing);
    c.conf = ConfSource::kNone;
    FingerprintRun run = train_fingerprint(d, ParamSet(), c);
    EXPECT_EQ(run.history.size(), 1u);
    EXPECT_FALSE(run.params.contains("eng.W_U"));
  }

  TEST(TrainFingerprint, FrozenEngineGetsNoGradient) {
    Dataset d = one_task(head_of(qm9(), 12), 2);
    TrainConfig c = tiny_config();
    c.stage = "fingerprint";
    const ParamSet engine = init_engine_params(c);
    FingerprintRun run = train_fingerprint(d, engine, c);
    for (std::size_t i = 0; i < run.params.size(); ++i)
      if (run.params.name(i).rfind("fp.", 0) != 0) {
        EXPECT_FALSE(run.params.trainable(i)) << run.params.name(i);
        EXPECT_EQ(run.params.value(i), engine.value(run.params.name(i)));
      }
    // gradient through a live rollout, not the cache
    Grads g;
    fingerprint_loss(run.params, c, 1, d.records[0], run.stats, nullptr, &g);
    for (std::size_t i = 0; i < run.params.size(); ++i) {
      if (run.params.name(i).rfind("fp.", 0) == 0)
        continue;
      EXPECT_TRUE(g.g[i].size() == 0 || g.g[i].isZero(0.0)) << run.params.name(i);
    }
    std::size_t nonzero = 0;
    for (std::size_t i = 0; i < run.params.size(); ++i)
      nonzero += g.g[i].size() && !g.g[i].isZero(0.0);
    EXPECT_GT(nonzero, 0u);
  }

  TEST(TrainFingerprint, ZeroHeadOnZeroTargetsAndMasking) {
    TrainConfig c = tiny_config();
    c.conf = ConfSource::kNone;
    std::vector<diff::ParamSpec> spec;
    add_fingerprint_spec(spec, c.fingerprint(3));
    ParamSet p = diff::init_params(spec, 4);
    p.set("fp.head.W", Matrix::Zero(c.hidden, 3));
    chem::Record r;
    r.mol = chem::parse_smiles("CC(=O)N");
    r.targets = { 0.0, 0.0, 0.0 };
    r.masked = { false, false, false };
    const TargetStats id { { 0, 0, 0 }, { 1, 1, 1 } };
    EXPECT_EQ(fingerprint_loss(p, c, 3, r, id, nullptr, nullptr), 0.0);

    p = diff::init_params(spec, 4);
    r.targets = { 0.3, -1.0, 2.0 };
    r.masked = { false, true, false };
    const double base = fingerprint_loss(p, c, 3, r, id, nullptr, nullptr);
    r.targets[1] = 1e6;
    EXPECT_EQ(fingerprint_loss(p, c, 3, r, id, nullptr, nullptr), base);
    r.masked = { true, true, true };
    EXPECT_EQ(fingerprint_loss(p, c, 3, r, id, nullptr, nullptr), 0.0);
  }

  TEST(TrainFingerprint, LossMatchesMetric) {
    TrainConfig c = tiny_config();
    c.conf = ConfSource::kNone;
    std::vector<diff::ParamSpec> spec;
    add_fingerprint_spec(spec, c.fingerprint(1));
    const ParamSet p = diff::init_params(spec, 6);
    chem::Record r;
    r.mol = chem::parse_smiles("c1ccccc1O");
    r.targets = { 1.0 };
    r.masked = { false };
    const TargetStats id { { 0 }, { 1 } };
    const double z = predict_properties(p, c, 1, r.mol, id)(0, 0);
    EXPECT_NEAR(fingerprint_loss(p, c, 1, r, id, nullptr, nullptr), (z - 1) * (z - 1), 1e-12);
    c.metric = Metric::kMae;
    EXPECT_NEAR(fingerprint_loss(p, c, 1, r, id, nullptr, nullptr), std::abs(z - 1), 1e-12);
    c.metric = Metric::kRocAuc;
    const double prob = predict_properties(p, c, 1, r.mol, id)(0, 0);
    EXPECT_NEAR(prob, 1.0 / (1.0 + std::exp(-z)), 1e-12);
    EXPECT_NEAR(fingerprint_loss(p, c, 1, r, id, nullptr, nullptr), -std::log(prob), 1e-12);
  }

  TEST(TrainFingerprint, SeparableClassesReachPerfectTrainAuc) {
    // aromatic vs aliphatic rings: trivially separable from atom features
    Dataset d;
    d.target_names = { "aromatic" };
    const char *pos[] = { "c1ccccc1", "c1ccncc1", "Cc1ccccc1", "c1ccc(O)cc1", "c1ccoc1",
                          "c1ccsc1", "Nc1ccccc1", "c1ccc2ccccc2c1", "Clc1ccccc1", "c1cnccn1" };
    const char *neg[] = { "C1CCCCC1", "C1CCNCC1", "CC1CCCCC1", "OC1CCCCC1", "C1CCOC1",
                          "C1CCSC1", "NC1CCCCC1", "C1CCC2CCCCC2C1", "ClC1CCCCC1", "C1CNCCN1" };
    std::size_t row = 0;
    for (int rep = 0; rep < 2; ++rep)
      for (int k = 0; k < 10; ++k)
        for (const char *smi: { pos[k], neg[k] }) {
          chem::Record r;
          r.smiles = smi;
          r.mol = chem::parse_smiles(smi);
          r.targets = { smi == pos[k] ? 1.0 : 0.0 };
          r.masked = { false };
          r.row = row++;
          d.records.push_back(r);
        }
    TrainConfig c = tiny_config();
    c.stage = "fingerprint";
    c.conf = ConfSource::kNone;
    c.metric = Metric::kRocAuc;
    c.epochs = 30;
    c.patience = 30;
    c.learning_rate = 5e-3;
    FingerprintRun run = train_fingerprint(d, ParamSet(), c);
    const Metrics m = evaluate_fingerprint(run.params, c, run.stats, d, run.split.train);
    EXPECT_DOUBLE_EQ(m.roc_auc, 1.0);
  }
}  // namespace
}  // namespace hamforge
