#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "softrl/env.hpp"
#include "softrl/mlp.hpp"
#include "softrl/replay.hpp"
#include "softrl/rng.hpp"

namespace softrl {

enum class AgentKind { d4pg, rs, rc, metal, mesh };

AgentKind agent_kind_from_string(const std::string& s);
std::string agent_kind_to_string(AgentKind k);

struct AgentConfig {
  double gamma = 0.99;
  int n_step = 5;
  double lr_actor = 1e-4;
  double lr_critic = 1e-4;
  double lr_lagrange = 1e-3;  // alpha_1
  int target_update_period = 100;
  double exploration_sigma = 0.1;
  int batch_size = 64;
  double split_fraction = 0.75;
  double fixed_lambda = 0.0;  // rs only
  double threshold_beta = 0.1;
  double lambda_init = 0.0;
  bool lagrange_update = true;  // rc: false freezes lambda at lambda_init
  std::vector<int> actor_hidden = {64, 64};
  std::vector<int> critic_hidden = {64, 64};
  bool layer_norm = false;
  int replay_capacity = 50000;
  int penalty_capacity = 100;
  int warmup_transitions = 1000;

  void validate() const;  // throws std::invalid_argument
};

struct ActorCritic {
  MlpShape actor_shape;
  MlpShape critic_shape;
  ParamVector theta_a, theta_c;
  ParamVector theta_a_target, theta_c_target;
  double lambda = 0.0;
  long step_counter = 0;
};

MlpShape make_actor_shape(const CmdpSpec& env, const AgentConfig& cfg);
MlpShape make_critic_shape(const CmdpSpec& env, const AgentConfig& cfg);
ActorCritic make_actor_critic(const CmdpSpec& env, const AgentConfig& cfg, Rng& rng);

// a = pi(obs) + explore * N(0, sigma^2), clipped to the action bounds.
std::vector<double> act(const ParamVector& theta_a, const MlpShape& actor_shape,
                        std::span<const double> obs, const CmdpSpec& env,
                        bool explore, double sigma, Rng& rng);

// Shaped n-step TD error at one item:
// delta = r_sum - lambda c_sum + discount_prod * Q_T(s', pi_T(s')) - Q(s, a)
double td_error(const ActorCritic& ac, const Transition& item, double lambda);

struct CriticLoss {
  double loss = 0.0;
  double delta = 0.0;
};
CriticLoss critic_loss(const ActorCritic& ac, const Transition& item, double lambda);

// Reusable buffers for the batched learner steps.
struct LearnerScratch {
  BatchedWorkspace actor_ws, critic_ws, actor_target_ws, critic_target_ws, pi_critic_ws;
  Eigen::MatrixXd S, SA, Snext, SAnext, SApi, cot, Gin;
  Eigen::VectorXd delta;
  std::vector<double> grad_c, grad_a;
};

// Gradient-descent step on the mean squared TD error over the train split:
// theta_c += (2 lr / n) * sum_i delta_i * grad Q(s_i, a_i).
void critic_step(ActorCritic& ac, std::span<const Transition> train, double lambda,
                 double lr, LearnerScratch& scratch);

// Gradient-ascent step through the deterministic policy:
// theta_a += (lr / n) * sum_i (d pi / d theta)^T grad_a Q(s_i, pi(s_i)).
void actor_step(ActorCritic& ac, std::span<const Transition> train, double lr,
                LearnerScratch& scratch);

// One learner iteration: critic and actor gradients both evaluated at the
// pre-update parameters, then applied together (the algorithmic pseudo-code
// accumulates both updates before application). Bumps step_counter.
void dual_step(ActorCritic& ac, std::span<const Transition> train, double lambda,
               double lr_actor, double lr_critic, LearnerScratch& scratch);

// Hard target copy when step_counter is a positive multiple of period.
void target_sync(ActorCritic& ac, int period);

// lambda' = max(0, lambda - alpha_1 (beta - J_C)): violation raises lambda.
double lagrange_step_rc(double lambda, double episode_penalty, double beta, double lr);

// Mean squared shaped TD error over a split at the current parameters.
double mean_td_loss(const ActorCritic& ac, std::span<const Transition> items,
                    double lambda, LearnerScratch& scratch);

}  // namespace softrl
