//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "hamforge/oracle.h"

#include <cmath>
#include <functional>
#include <random>

#include <fmt/format.h>

#include "hamforge/chem/smiles.h"
#include "hamforge/diff/gradcheck.h"
#include "hamforge/diff/nn.h"
#include "hamforge/diff/ops.h"
#include "hamforge/diff/svd.h"
#include "hamforge/encoder.h"
#include "hamforge/engine.h"
#include "hamforge/fingerprint.h"
#include "hamforge/geoloss.h"

namespace hamforge {
namespace {
  using diff::Objective;
  using diff::ParamBinding;
  using diff::ParamSet;
  using diff::Var;
  using namespace diff;  // ops

  Matrix uniform(std::mt19937_64 &rng, Eigen::Index r, Eigen::Index c, double lo = -1.0,
                 double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i)
      m.data()[i] = u(rng);
    return m;
  }

  // keeps relu / abs / clamp probes off their kinks
  Matrix avoid_kinks(Matrix m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      double &v = m.data()[i];
      if (std::abs(v) < 0.1)
        v = v < 0 ? v - 0.1 : v + 0.1;
      if (std::abs(v - 0.05) < 0.02)
        v += 0.1;
    }
    return m;
  }

  struct Runner {
    std::vector<OracleCheck> out;

    void check(const std::string &group, const std::string &name, double tol, const Objective &f,
               const ParamSet &theta, const GradCheckOptions &opt = {}) {
      const GradCheckResult r = grad_check(f, theta, opt);
      for (OracleCheck &c: out)
        if (c.group == group && c.name == name) {
          if (r.max_rel_error > c.max_rel_error) {
            c.max_rel_error = r.max_rel_error;
            c.worst = fmt::format("{}[{}] {:.3e} vs {:.3e}", r.worst_param, r.worst_index,
                                  r.analytic, r.numeric);
          }
          return;
        }
      out.push_back({ group, name, tol, r.max_rel_error,
                      fmt::format("{}[{}] {:.3e} vs {:.3e}", r.worst_param, r.worst_index,
                                  r.analytic, r.numeric) });
    }
  };

  struct OpCase {
    std::string name;
    Eigen::Index xr, xc, yr, yc;
    double lo, hi;
    std::function<Var(Var, Var)> op;
  };

  std::vector<OpCase> op_cases() {
    static const std::vector<std::size_t> kIndex { 2, 0, 2, 1 };
    static const std::vector<std::size_t> kSeg { 0, 1, 0, 1, 1 };
    return {
      { "add", 3, 4, 1, 4, -1, 1, [](Var x, Var y) { return add(x, y); } },
      { "sub", 3, 4, 3, 1, -1, 1, [](Var x, Var y) { return sub(x, y); } },
      { "mul", 3, 4, 3, 4, -1, 1, [](Var x, Var y) { return mul(x, y); } },
      { "div", 3, 4, 3, 4, 0.5, 2, [](Var x, Var y) { return div(x, y); } },
      { "scale", 3, 4, 1, 1, -1, 1, [](Var x, Var) { return scale(x, -2.5); } },
      { "add_scalar", 3, 4, 1, 1, -1, 1, [](Var x, Var) { return add_scalar(x, 0.7); } },
      { "matmul", 3, 4, 4, 2, -1, 1, [](Var x, Var y) { return matmul(x, y); } },
      { "transpose", 3, 4, 1, 1, -1, 1, [](Var x, Var) { return transpose(x); } },
      { "concat", 3, 4, 3, 2, -1, 1, [](Var x, Var y) { return concat({ x, y, x }, 1); } },
      { "slice_rows", 4, 3, 1, 1, -1, 1, [](Var x, Var) { return slice_rows(x, 1, 2); } },
      { "slice_cols", 3, 4, 1, 1, -1, 1, [](Var x, Var) { return slice_cols(x, 2, 2); } },
      { "sum", 3, 4, 1, 1, -1, 1, [](Var x, Var) { return sum(x, 0); } },
      { "mean", 3, 4, 1, 1, -1, 1, [](Var x, Var) { return mean(x, 1); } },
      { "sigmoid", 3, 4, 1, 1, -3, 3, [](Var x, Var) { return sigmoid(x); } },
      { "tanh", 3, 4, 1, 1, -2, 2, [](Var x, Var) { return tanh(x); } },
      { "relu", 3, 4, 1, 1, -1, 1, [](Var x, Var) { return relu(x); } },
      { "abs", 3, 4, 1, 1, -1, 1, [](Var x, Var) { return abs(x); } },
      { "leaky_relu", 3, 4, 1, 1, -1, 1, [](Var x, Var) { return leaky_relu(x, 0.2); } },
      { "exp", 3, 4, 1, 1, -1, 1, [](Var x, Var) { return exp(x); } },
      { "log", 3, 4, 1, 1, 0.2, 2, [](Var x, Var) { return log(x); } },
      { "sqrt", 3, 4, 1, 1, 0.2, 2, [](Var x, Var) { return sqrt(x); } },
      { "square", 3, 4, 1, 1, -1, 1, [](Var x, Var) { return square(x); } },
      { "pow", 3, 4, 1, 1, 0.2, 2, [](Var x, Var) { return pow(x, -1.5); } },
      { "softmax", 3, 4, 1, 1, -2, 2, [](Var x, Var) { return softmax(x, 1); } },
      { "clamp_min", 3, 4, 1, 1, -1, 1, [](Var x, Var) { return clamp_min(x, 0.05); } },
      { "gather_rows", 3, 4, 1, 1, -1, 1, [](Var x, Var) { return gather_rows(x, kIndex); } },
      { "scatter_add_rows", 4, 3, 1, 1, -1, 1,
        [](Var x, Var) { return scatter_add_rows(x, kIndex, 3); } },
      { "segment_softmax", 5, 1, 1, 1, -2, 2,
        [](Var x, Var) { return segment_softmax(x, kSeg, 2); } },
    };
  }

  void core_ops(Runner &run, std::mt19937_64 &rng, int trials) {
    for (const OpCase &c: op_cases())
      for (int t = 0; t < trials; ++t) {
        ParamSet theta;
        theta.add("x", avoid_kinks(uniform(rng, c.xr, c.xc, c.lo, c.hi)));
        theta.add("y", avoid_kinks(uniform(rng, c.yr, c.yc, c.lo, c.hi)));
        diff::Tape probe;
        const Matrix shape =
            c.op(probe.constant(theta.value("x")), probe.constant(theta.value("y"))).value();
        const Matrix w = uniform(rng, shape.rows(), shape.cols());
        Objective f = [&](ParamBinding &p) {
          return sum(mul(c.op(p["x"], p["y"]), p.tape().constant(w)));
        };
        run.check("core", c.name, kCoreOpTolerance, f, theta);
      }
    for (int t = 0; t < trials; ++t) {
      ParamSet theta;
      theta.add("m", uniform(rng, 3, 3));
      const Matrix wr = uniform(rng, 3, 3), ws = uniform(rng, 1, 3);
      Objective f = [&](ParamBinding &p) {
        Svd3Vars s = svd3(p["m"]);
        Var r = matmul(s.v, transpose(s.u));
        return add(sum(mul(r, p.tape().constant(wr))), sum(mul(s.s, p.tape().constant(ws))));
      };
      run.check("core", "svd3", kCoreOpTolerance, f, theta);
    }
  }

  void blocks(Runner &run, std::mt19937_64 &rng, int trials) {
    std::vector<ParamSpec> spec;
    add_mlp_spec(spec, "mlp", { 4, 6, 3 });
    add_lstm_spec(spec, "lstm", 4, 5);
    add_gru_spec(spec, "gru", 3, 5);
    for (int t = 0; t < trials; ++t) {
      ParamSet theta = init_params(spec, rng());
      for (std::size_t i = 0; i < theta.size(); ++i)
        theta.set(i, theta.value(i) + 0.1 * uniform(rng, theta.value(i).rows(),
                                                     theta.value(i).cols()));
      theta.add("x", uniform(rng, 4, 4));
      const std::vector<std::size_t> order { 2, 0, 3, 1 };
      GradCheckOptions opt;
      opt.eps = 1e-5;
      const Matrix wm = uniform(rng, 4, 3), w = uniform(rng, 4, 5);
      run.check("block", "mlp", kCompositeTolerance, [&](ParamBinding &p) {
        return sum(mul(mlp(p, "mlp", p["x"], 2), p.tape().constant(wm)));
      }, theta, opt);
      run.check("block", "lstm", kCompositeTolerance, [&](ParamBinding &p) {
        return sum(mul(lstm_sequence(p, "lstm", p["x"], order), p.tape().constant(w)));
      }, theta, opt);
      run.check("block", "gru", kCompositeTolerance, [&](ParamBinding &p) {
        Var h = lstm_sequence(p, "lstm", p["x"], order);
        return sum(mul(gru_cell(p, "gru", slice_cols(p["x"], 0, 3), h), p.tape().constant(w)));
      }, theta, opt);
    }
  }

  ParamSet engine_theta(std::mt19937_64 &rng, Eigen::Index n, Eigen::Index d) {
    ParamSet theta;
    theta.add("eng.W_T", uniform(rng, d, d, -0.5, 0.5));
    theta.add("eng.W_phi", uniform(rng, d, d, -0.5, 0.5));
    theta.add("eng.W_U", uniform(rng, d, d, -0.5, 0.5));
    theta.add("eng.W_trans", uniform(rng, d, 3, -0.5, 0.5));
    theta.add("q", uniform(rng, n, d, -2, 2));
    theta.add("p", uniform(rng, n, d));
    return theta;
  }

  Vector random_masses(std::mt19937_64 &rng, Eigen::Index n) {
    std::uniform_real_distribution<double> u(0.2, 0.8);
    Vector m(n);
    for (Eigen::Index i = 0; i < n; ++i)
      m(i) = u(rng);
    return m;
  }

  void physics(Runner &run, std::mt19937_64 &rng, int trials) {
    const Eigen::Index n = 4, d = 5;
    for (int t = 0; t < trials; ++t) {
      ParamSet theta = engine_theta(rng, n, d);
      const Vector m = random_masses(rng, n);
      run.check("energy", "kinetic", kCompositeTolerance, [&](ParamBinding &p) {
        return diff_engine::kinetic_energy(p["p"], m, p["eng.W_T"]);
      }, theta);
      run.check("energy", "dissipation", kCompositeTolerance, [&](ParamBinding &p) {
        return diff_engine::dissipation_energy(p["p"], m, p["eng.W_phi"]);
      }, theta);
      run.check("energy", "potential", kCompositeTolerance, [&](ParamBinding &p) {
        return diff_engine::potential_energy(p["q"], p["eng.W_U"], 1e-6);
      }, theta);

      const Matrix wq = uniform(rng, n, d), wp = uniform(rng, n, d), wf = uniform(rng, n, d);
      run.check("force", "dH/dq", kCompositeTolerance, [&](ParamBinding &p) {
        auto f = diff_engine::forces(p["q"], p["p"], m, diff_engine::Weights::bind(p), 1e-6);
        return sum(mul(f.dh_dq, p.tape().constant(wq)));
      }, theta);
      run.check("force", "dH/dp", kCompositeTolerance, [&](ParamBinding &p) {
        auto f = diff_engine::forces(p["q"], p["p"], m, diff_engine::Weights::bind(p), 1e-6);
        return sum(mul(f.dh_dp, p.tape().constant(wp)));
      }, theta);
      run.check("force", "dPhi/dp", kCompositeTolerance, [&](ParamBinding &p) {
        auto f = diff_engine::forces(p["q"], p["p"], m, diff_engine::Weights::bind(p), 1e-6);
        return sum(mul(f.dphi_dp, p.tape().constant(wf)));
      }, theta);

      EngineConfig cfg;
      cfg.d_f = d;
      cfg.steps = 4;
      const Matrix target = uniform(rng, n, 3);
      run.check("dynamics", "rollout+projection", kCompositeTolerance, [&](ParamBinding &p) {
        auto w = diff_engine::Weights::bind(p);
        auto states = diff_engine::rollout(p["q"], p["p"], m, w, cfg);
        Var proj = matmul(states.back().q, w.w_trans);
        return sum(square(sub(proj, p.tape().constant(target))));
      }, theta);
    }
  }

  void losses(Runner &run, std::mt19937_64 &rng, int trials) {
    const chem::MoleculeGraph mol = chem::parse_smiles("CC(O)CC=O");
    for (int t = 0; t < trials; ++t) {
      chem::MoleculeGraph with = mol;
      with.set_reference_conformation(uniform(rng, 6, 3, -2, 2));
      const ConformerRef ref = ConformerRef::from(with);
      ParamSet theta;
      theta.add("q", uniform(rng, 6, 3, -3, 3));
      run.check("loss", "k_rmsd", kCompositeTolerance, [&](ParamBinding &p) {
        return loss::k_rmsd(p["q"], ref.q_ref, ref.masses);
      }, theta);
      run.check("loss", "dist", kCompositeTolerance, [&](ParamBinding &p) {
        return loss::dist_loss(p["q"], ref.q_ref);
      }, theta);
      run.check("loss", "adj_k", kCompositeTolerance, [&](ParamBinding &p) {
        return loss::adj_k_loss(p["q"], ref.q_ref, ref.adj_pow);
      }, theta);
      run.check("loss", "combined", kCompositeTolerance, [&](ParamBinding &p) {
        return loss::combined_loss(p["q"], ref, 1.0);
      }, theta);
    }
  }

  // 5 heavy atoms: SMILES -> encoder -> engine -> {geometry loss, property}.
  void pipeline(Runner &run, std::mt19937_64 &rng, int trials) {
    EncoderConfig ec;
    ec.bond_hidden = 6;
    ec.gcn_width = 5;
    ec.gcn_layers = 2;
    ec.d_f = 4;
    EngineConfig gc;
    gc.d_f = 4;
    gc.steps = 4;
    gc.eta = 0.05;
    FpConfig fc;
    fc.hidden = 12;
    fc.d_f = 4;
    std::vector<ParamSpec> spec;
    add_encoder_spec(spec, ec);
    add_engine_spec(spec, gc);
    add_fingerprint_spec(spec, fc);
    chem::MoleculeGraph mol = chem::parse_smiles("CC(O)C=O");
    mol.set_reference_conformation(uniform(rng, 5, 3, -2, 2));
    const ConformerRef ref = ConformerRef::from(mol);
    const Vector masses = mol.masses();
    for (int t = 0; t < trials; ++t) {
      const ParamSet theta = init_params(spec, rng());
      GradCheckOptions opt;
      // small steps: relu units with zero-init biases sit close to their kinks
      opt.eps = 1e-6;
      opt.max_probes_per_tensor = 6;
      opt.seed = rng();
      run.check("pipeline", "conformation", kCompositeTolerance, [&](ParamBinding &p) {
        EncoderOutput e = encode_initial(p, mol, ec);
        auto w = diff_engine::Weights::bind(p);
        auto states = diff_engine::rollout(e.q0, e.p0, masses, w, gc);
        return loss::combined_loss(matmul(states.back().q, w.w_trans), ref, 1.0);
      }, theta, opt);
      Objective property = [&](ParamBinding &p) {
        EncoderOutput e = encode_initial(p, mol, ec);
        auto states =
            diff_engine::rollout(e.q0, e.p0, masses, diff_engine::Weights::bind(p), gc);
        Var y = predict(p, fingerprint(p, mol, states.back().q, states.back().p, fc), fc);
        return square(add_scalar(y, -1.5));
      };
      run.check("pipeline", "property", kCompositeTolerance, property, theta, opt);
    }
  }
}  // namespace

std::vector<OracleCheck> run_gradient_oracle(std::uint64_t seed, int trials) {
  std::mt19937_64 rng(seed);
  Runner run;
  core_ops(run, rng, trials);
  blocks(run, rng, trials);
  physics(run, rng, trials);
  losses(run, rng, trials);
  pipeline(run, rng, trials);
  return run.out;
}

}  // namespace hamforge
