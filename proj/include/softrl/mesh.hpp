#pragma once

#include <span>
#include <string>
#include <vector>

#include "softrl/agent.hpp"
#include "softrl/replay.hpp"

namespace softrl {

// How the learned coefficients enter the shaped reward:
//   offset_on_penalty: r - kappa_s * lambda_hat * c + kappa_o
//   scale_whole:       kappa_s * (r - lambda_hat * c) + kappa_o
enum class MeshFormulation { offset_on_penalty, scale_whole };

MeshFormulation mesh_formulation_from_string(const std::string& s);
std::string mesh_formulation_to_string(MeshFormulation f);

struct MeshConfig {
  double lambda_hat = 0.1;
  double upsilon_s = 10.0;  // scale head range (0, upsilon_s)
  double upsilon_o = 3.0;   // offset head range (-upsilon_o, upsilon_o)
  MeshFormulation formulation = MeshFormulation::offset_on_penalty;
  std::vector<int> phi_hidden = {32};
  double lr_meta = 1e-3;       // phi step size
  double lr_critic_in = 1e-4;  // critic trained on the meta-shaped reward
  double lr_critic_out = 1e-4; // critic trained on r - lambda c
};

// Two critics plus the shaping net. The actor (and its target) live in the
// ActorCritic passed alongside; its own critic slot is not used here.
struct MeshState {
  MlpShape phi_shape;  // input (s, a, r_sum, c_sum), two raw head outputs
  ParamVector phi;
  MlpShape critic_shape;
  ParamVector theta_c_in, theta_c_in_target;
  ParamVector theta_c_out, theta_c_out_target;
  double lambda = 0.0;
  MeshConfig cfg;
};

MeshState make_mesh_state(const CmdpSpec& env, const AgentConfig& cfg,
                          const MeshConfig& mcfg, Rng& rng);

struct Kappas {
  double kappa_s = 0.0;  // upsilon_s * sigmoid(raw0), in (0, upsilon_s)
  double kappa_o = 0.0;  // upsilon_o * tanh(raw1), in (-upsilon_o, upsilon_o)
};

Kappas mesh_kappas(const ParamVector& phi, const MlpShape& phi_shape,
                   std::span<const double> s, std::span<const double> a,
                   double r_sum, double c_sum, const MeshConfig& cfg);

double meta_shaped_reward(const ParamVector& phi, const MlpShape& phi_shape,
                          std::span<const double> s, std::span<const double> a,
                          double r_sum, double c_sum, const MeshConfig& cfg);

struct MeshScratch {
  BatchedWorkspace phi_ws, cin_ws, cout_ws, tin_ws, tout_ws, actor_ws,
      actor_target_ws, pi_cin_ws;
  Eigen::MatrixXd S, SA, Snext, SAnext, SApi, Xphi, cot, Gin;
  Eigen::VectorXd delta_in, delta_out;
  std::vector<double> grad_cin, grad_cout, grad_a;
};

struct MeshInnerResult {
  double lambda_prime = 0.0;
  double kappa_s_mean = 0.0;
  double kappa_o_mean = 0.0;
  double inner_loss = 0.0;        // mean squared meta-shaped TD error, pre-update
  double outer_critic_loss = 0.0; // same for the r - lambda c critic
};

// One learner iteration: lambda' by the plain Lagrange rule, both critics
// stepped on their own targets (gradients at the pre-update parameters),
// then the actor through the freshly UPDATED inner critic.
MeshInnerResult mesh_inner_update(MeshState& ms, ActorCritic& ac,
                                  std::span<const Transition> train, double J_C,
                                  double beta, double lr_lagrange,
                                  double lr_actor, MeshScratch& scratch);

// Hard copy of all three target pairs when ac.step_counter is a positive
// multiple of period.
void mesh_target_sync(MeshState& ms, ActorCritic& ac, int period);

// mean || grad_a Q_out(s, pi(s)) ||^2 over a split, through the outer critic;
// the numerical value of the stop-gradient outer objective.
double mesh_outer_loss(const MeshState& ms, const ActorCritic& ac,
                       std::span<const Transition> validate);

// Pre-update parameters needed to assemble the meta gradient afterwards.
struct MeshSnapshot {
  ParamVector theta_a;
  ParamVector theta_c_in;
};
MeshSnapshot mesh_snapshot(const MeshState& ms, const ActorCritic& ac);

// d mesh_outer_loss / d phi for one inner update, assembled exactly except
// for one central-difference Hessian-vector product per train item (the
// curvature of the inner critic over its action input). `after` holds the
// post-update state, `before` the snapshot taken just before the update.
std::vector<double> mesh_meta_gradient(const MeshState& after,
                                       const ActorCritic& ac_after,
                                       const MeshSnapshot& before,
                                       std::span<const Transition> train,
                                       std::span<const Transition> validate,
                                       double lr_actor);

// Central difference over every phi coordinate: replays the inner update at
// phi +- h and differences the outer loss against stop-gradient targets
// captured at the base point.
std::vector<double> fd_mesh_oracle(const MeshState& ms, const ActorCritic& ac,
                                   const Batch& batch, double J_C, double beta,
                                   double lr_lagrange, double lr_actor,
                                   double h = 1e-5);

}  // namespace softrl
