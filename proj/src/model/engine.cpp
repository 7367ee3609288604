//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "hamforge/engine.h"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "hamforge/diff/ops.h"
#include "hamforge/error.h"

namespace hamforge {
using diff::Var;

void add_engine_spec(std::vector<diff::ParamSpec> &spec, const EngineConfig &config) {
  spec.push_back({ "eng.W_T", config.d_f, config.d_f });
  spec.push_back({ "eng.W_phi", config.d_f, config.d_f });
  // Encoder outputs live in a small ball, so plain Glorot puts most pairs deep
  // inside the repulsive core (s ~ 1e-2) and the first rollouts blow up.
  spec.push_back({ "eng.W_U", config.d_f, config.d_f, diff::ParamKind::kWeight, kPotentialInitGain });
  spec.push_back({ "eng.W_trans", config.d_f, 3 });
}

EngineParams EngineParams::from(const diff::ParamSet &params, const EngineConfig &config) {
  return { params.value("eng.W_T"), params.value("eng.W_phi"), params.value("eng.W_U"),
           params.value("eng.W_trans"), config.eta, config.steps, config.eps_r };
}

namespace {
  // u(s) = s^-2 - s^-1 and du/ds
  double pair_energy(double s) { return 1.0 / (s * s) - 1.0 / s; }
  double pair_slope(double s) { return -2.0 / (s * s * s) + 1.0 / (s * s); }

  void check_state(const Matrix &q, const Matrix &p, int index) {
    const bool ok = q.allFinite() && p.allFinite() &&
                    (q.size() == 0 || q.cwiseAbs().maxCoeff() <= kStateMagnitudeLimit) &&
                    (p.size() == 0 || p.cwiseAbs().maxCoeff() <= kStateMagnitudeLimit);
    if (!ok)
      throw Error(ErrorCode::kNonFinite,
                  fmt::format("engine state overflowed at step {} (step size too large?)", index),
                  index);
  }
}  // namespace

double kinetic(const Vector &p, double m, const Matrix &w_t) {
  return (w_t * p).squaredNorm() / (2.0 * m);
}

double dissipation(const Vector &p, double m, const Matrix &w_phi) {
  return (w_phi * p).squaredNorm() / (2.0 * m * m);
}

Potential potential(const Matrix &q, const Matrix &w_u, double eps_r) {
  const Eigen::Index n = q.rows();
  Potential out { 0.0, Matrix::Zero(n, n) };
  // y_i = W_U q_i, stored as rows
  const Matrix y = q * w_u.transpose();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double s = std::max(eps_r, (y.row(i) - y.row(j)).squaredNorm());
      out.s(i, j) = out.s(j, i) = s;
      // u_ij = u_ji; both ordered pairs count
      out.u += 2.0 * pair_energy(s);
    }
  }
  return out;
}

Forces forces(const EngineState &state, const EngineParams &params) {
  const Eigen::Index n = state.q.rows();
  const Matrix y = state.q * params.w_u.transpose();
  const Matrix gu = params.w_u.transpose() * params.w_u;

  Matrix dq = Matrix::Zero(n, state.q.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double raw = (y.row(i) - y.row(j)).squaredNorm();
      if (raw <= params.eps_r)
        continue;  // floored: no gradient
      // U counts (i,j) and (j,i): dU/dq_i gets 2 u'(s) ds/dq_i = 4 u'(s) G (q_i - q_j)
      const Eigen::RowVectorXd f = 4.0 * pair_slope(raw) * (state.q.row(i) - state.q.row(j)) * gu;
      dq.row(i) += f;
      dq.row(j) -= f;
    }
  }

  const Matrix gt = params.w_t.transpose() * params.w_t;
  const Matrix gphi = params.w_phi.transpose() * params.w_phi;
  Forces out { std::move(dq), state.p * gt, state.p * gphi };
  for (Eigen::Index i = 0; i < n; ++i) {
    out.dh_dp.row(i) /= state.m(i);
    out.dphi_dp.row(i) /= state.m(i) * state.m(i);
  }
  return out;
}

EngineState step(const EngineState &state, const EngineParams &params) {
  const Forces f = forces(state, params);
  EngineState next { state.q + params.eta * f.dh_dp, state.p, state.m, state.t + 1 };
  Matrix damp = f.dphi_dp;
  for (Eigen::Index i = 0; i < damp.rows(); ++i)
    damp.row(i) *= state.m(i);
  next.p -= params.eta * (f.dh_dq + damp);
  check_state(next.q, next.p, next.t);
  return next;
}

Energies energies(const EngineState &state, const EngineParams &params) {
  Energies e;
  for (Eigen::Index i = 0; i < state.p.rows(); ++i) {
    const Vector p = state.p.row(i).transpose();
    e.kinetic += kinetic(p, state.m(i), params.w_t);
    e.dissipation += dissipation(p, state.m(i), params.w_phi);
  }
  e.potential = potential(state.q, params.w_u, params.eps_r).u;
  e.hamiltonian = e.kinetic + e.potential;
  return e;
}

Trajectory rollout(const Matrix &q0, const Matrix &p0, const Vector &m,
                   const EngineParams &params) {
  if (q0.rows() != p0.rows() || q0.cols() != p0.cols() || m.size() != q0.rows())
    throw Error(ErrorCode::kShapeMismatch, "rollout: q0, p0 and masses disagree in shape");
  Trajectory traj;
  traj.states.push_back({ q0, p0, m, 0 });
  traj.energies.push_back(energies(traj.states.back(), params));
  for (int t = 0; t < params.steps; ++t) {
    traj.states.push_back(step(traj.states.back(), params));
    traj.energies.push_back(energies(traj.states.back(), params));
  }
  return traj;
}

Matrix project3d(const Matrix &q, const Matrix &w_trans) { return q * w_trans; }

namespace diff_engine {
  using namespace diff;

  Weights Weights::bind(ParamBinding &p) {
    return { p["eng.W_T"], p["eng.W_phi"], p["eng.W_U"], p["eng.W_trans"] };
  }

  namespace {
    Var inverse_masses(Tape &t, const Vector &m, double power) {
      return t.constant(Matrix(m.array().pow(-power).matrix()));
    }
  }  // namespace

  Var kinetic_energy(Var p, const Vector &m, Var w_t) {
    Var wp = matmul(p, transpose(w_t));
    return scale(sum(mul(sum(square(wp), 1), inverse_masses(*p.tape(), m, 1.0))), 0.5);
  }

  Var dissipation_energy(Var p, const Vector &m, Var w_phi) {
    Var wp = matmul(p, transpose(w_phi));
    return scale(sum(mul(sum(square(wp), 1), inverse_masses(*p.tape(), m, 2.0))), 0.5);
  }

  namespace {
    struct PairTable {
      Var s;         // floored squared distances, 1 on the diagonal
      Matrix off;    // 1 off the diagonal
      Matrix active; // 1 where i != j and the pair is above the floor
    };

    PairTable pair_table(Var q, Var w_u, double eps_r) {
      Tape &t = *q.tape();
      const Eigen::Index n = q.rows();
      Var y = matmul(q, transpose(w_u));
      Var sq = sum(square(y), 1);
      Var raw = sub(add(sq, transpose(sq)), scale(matmul(y, transpose(y)), 2.0));
      // exact symmetry; the identity keeps the diagonal away from the floor
      raw = add(scale(add(raw, transpose(raw)), 0.5), t.constant(Matrix::Identity(n, n)));
      PairTable out { clamp_min(raw, eps_r), Matrix::Ones(n, n), Matrix() };
      out.off.diagonal().setZero();
      out.active = out.off.cwiseProduct(Matrix((raw.value().array() > eps_r).cast<double>()));
      return out;
    }
  }  // namespace

  Var potential_energy(Var q, Var w_u, double eps_r) {
    PairTable pt = pair_table(q, w_u, eps_r);
    Var u = sub(pow(pt.s, -2.0), pow(pt.s, -1.0));
    return sum(mul(u, q.tape()->constant(pt.off)));
  }

  Grams Grams::of(const Weights &w) {
    return { matmul(transpose(w.w_t), w.w_t), matmul(transpose(w.w_phi), w.w_phi),
             matmul(transpose(w.w_u), w.w_u) };
  }

  ForceVars forces(Var q, Var p, const Vector &m, const Weights &w, double eps_r) {
    return forces(q, p, m, w, Grams::of(w), eps_r);
  }

  ForceVars forces(Var q, Var p, const Vector &m, const Weights &w, const Grams &g,
                   double eps_r) {
    Tape &t = *q.tape();
    PairTable pt = pair_table(q, w.w_u, eps_r);
    // c_ij = 4 u'(s_ij) on active pairs
    Var slope = add(scale(pow(pt.s, -3.0), -2.0), pow(pt.s, -2.0));
    Var c = mul(scale(slope, 4.0), t.constant(pt.active));
    Var dq = matmul(sub(mul(sum(c, 1), q), matmul(c, q)), g.u);

    Var dp = mul(matmul(p, g.t), inverse_masses(t, m, 1.0));
    Var dphi = mul(matmul(p, g.phi), inverse_masses(t, m, 2.0));
    return { dq, dp, dphi };
  }

  StateVars step(const StateVars &s, const Vector &m, const Weights &w, double eta, double eps_r,
                 int index) {
    return step(s, m, w, Grams::of(w), eta, eps_r, index);
  }

  StateVars step(const StateVars &s, const Vector &m, const Weights &w, const Grams &g,
                 double eta, double eps_r, int index) {
    Tape &t = *s.q.tape();
    ForceVars f = forces(s.q, s.p, m, w, g, eps_r);
    Var damp = mul(f.dphi_dp, t.constant(Matrix(m)));
    StateVars next { add(s.q, scale(f.dh_dp, eta)), sub(s.p, scale(add(f.dh_dq, damp), eta)) };
    check_state(next.q.value(), next.p.value(), index);
    return next;
  }

  std::vector<StateVars> rollout(Var q0, Var p0, const Vector &m, const Weights &w,
                                 const EngineConfig &config) {
    std::vector<StateVars> states { { q0, p0 } };
    if (config.steps == 0)
      return states;
    const Grams g = Grams::of(w);
    for (int k = 1; k <= config.steps; ++k)
      states.push_back(step(states.back(), m, w, g, config.eta, config.eps_r, k));
    return states;
  }
}  // namespace diff_engine

}  // namespace hamforge
