//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef HAMFORGE_ENGINE_H_
#define HAMFORGE_ENGINE_H_

#include <vector>

#include "hamforge/diff/params.h"
#include "hamforge/matrix.h"

namespace hamforge {

struct EngineConfig {
  Eigen::Index d_f = 32;
  double eta = 0.04;
  int steps = 20;
  double eps_r = 1e-6;  // floor on squared implicit distances
};

// eng.W_T, eng.W_phi, eng.W_U (d_f x d_f) and eng.W_trans (d_f x 3). The
// count depends on d_f only.
void add_engine_spec(std::vector<diff::ParamSpec> &spec, const EngineConfig &config);

// Plain evaluation -------------------------------------------------------

struct EngineParams {
  Matrix w_t, w_phi, w_u, w_trans;
  double eta = 0.04;
  int steps = 20;
  double eps_r = 1e-6;

  static EngineParams from(const diff::ParamSet &params, const EngineConfig &config);
};

// Rows of q and p are atoms; m holds the normalized masses M_i / 50.
struct EngineState {
  Matrix q, p;
  Vector m;
  int t = 0;
};

// ||W_T p||^2 / (2 m) for one atom (p is a d_f column).
double kinetic(const Vector &p, double m, const Matrix &w_t);
// ||W_phi p||^2 / (2 m^2)
double dissipation(const Vector &p, double m, const Matrix &w_phi);

struct Potential {
  double u = 0.0;  // sum over ordered pairs i != j
  Matrix s;        // floored squared distances, zero diagonal
};
Potential potential(const Matrix &q, const Matrix &w_u, double eps_r);

struct Forces {
  Matrix dh_dq;    // dU/dq_i
  Matrix dh_dp;    // dT/dp_i = W_T^T W_T p_i / m_i
  Matrix dphi_dp;  // dPhi/dp_i = W_phi^T W_phi p_i / m_i^2
};
Forces forces(const EngineState &state, const EngineParams &params);

// One explicit Euler step, all forces taken from the input state. Throws
// kNonFinite (detail = step index) when the update overflows.
EngineState step(const EngineState &state, const EngineParams &params);

struct Energies {
  double kinetic = 0.0, potential = 0.0, hamiltonian = 0.0, dissipation = 0.0;
};
Energies energies(const EngineState &state, const EngineParams &params);

struct Trajectory {
  std::vector<EngineState> states;  // steps + 1 entries
  std::vector<Energies> energies;
};
Trajectory rollout(const Matrix &q0, const Matrix &p0, const Vector &m,
                   const EngineParams &params);

Matrix project3d(const Matrix &q, const Matrix &w_trans);

// Differentiable evaluation ----------------------------------------------

namespace diff_engine {
  struct Weights {
    diff::Var w_t, w_phi, w_u, w_trans;
    static Weights bind(diff::ParamBinding &p);
  };

  diff::Var kinetic_energy(diff::Var p, const Vector &m, diff::Var w_t);
  diff::Var dissipation_energy(diff::Var p, const Vector &m, diff::Var w_phi);
  diff::Var potential_energy(diff::Var q, diff::Var w_u, double eps_r);

  struct ForceVars {
    diff::Var dh_dq, dh_dp, dphi_dp;
  };
  // W^T W of W_T, W_phi and W_U. They do not change along a rollout, which
  // builds them once; otherwise they are O(d_f^3) per step.
  struct Grams {
    diff::Var t, phi, u;
    static Grams of(const Weights &w);
  };

  // Closed forms; the pair coefficients treat floored pairs as constant.
  ForceVars forces(diff::Var q, diff::Var p, const Vector &m, const Weights &w, double eps_r);
  ForceVars forces(diff::Var q, diff::Var p, const Vector &m, const Weights &w, const Grams &g,
                   double eps_r);

  struct StateVars {
    diff::Var q, p;
  };
  StateVars step(const StateVars &s, const Vector &m, const Weights &w, double eta, double eps_r,
                 int index);
  StateVars step(const StateVars &s, const Vector &m, const Weights &w, const Grams &g,
                 double eta, double eps_r, int index);
  // Returns all steps + 1 states.
  std::vector<StateVars> rollout(diff::Var q0, diff::Var p0, const Vector &m, const Weights &w,
                                 const EngineConfig &config);
}  // namespace diff_engine

// Largest magnitude an implicit coordinate or momentum may reach before a step
// counts as overflowed. Pair distances come from |y_i|^2 + |y_j|^2 - 2 y_i.y_j,
// so past 1/sqrt(machine eps) = 2^26 a unit separation is below rounding and
// the potential is noise. A rollout that gets there has blown up.
inline constexpr double kStateMagnitudeLimit = 67108864.0;

// Init scale of W_U relative to Glorot.
inline constexpr double kPotentialInitGain = 30.0;

}  // namespace hamforge

#endif  // HAMFORGE_ENGINE_H_
