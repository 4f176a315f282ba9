#pragma once

#include <span>
#include <string>

#include "softrl/agent.hpp"
#include "softrl/replay.hpp"

namespace softrl {

// Meta-learned Lagrange learning rate: the effective rate is
// lr_lagrange_base * exp(alpha_lambda), always positive.
struct MetaState {
  double alpha_lambda = 0.0;
  double lambda = 0.0;
  double lr_meta = 1e-3;           // alpha_eta
  double lr_lagrange_base = 1e-3;  // alpha_1
};

enum class OuterLossKind { critic_only, actor_only, actor_plus_critic };

OuterLossKind outer_loss_kind_from_string(const std::string& s);
std::string outer_loss_kind_to_string(OuterLossKind k);

// lambda' = max(0, lambda - alpha_1 exp(alpha_lambda) (beta - J_C))
double lagrange_step_metal(const MetaState& meta, double J_C, double beta);

// One inner iteration: lambda update first, then critic/actor on the train
// split (both gradients at the pre-update parameters). Returns lambda'.
double inner_update(ActorCritic& ac, const MetaState& meta,
                    std::span<const Transition> train, double J_C, double beta,
                    double lr_actor, double lr_critic, LearnerScratch& scratch);

// critic_only: mean shaped squared TD error at (theta_c', lambda') over the
// validation split, TD target through the target networks.
// actor_only: mean squared norm of grad_a Q_{theta_c'}(s, pi_{theta_a'}(s)),
// the numerical value of the stop-gradient actor loss.
double outer_loss(const ActorCritic& ac_updated, double lambda_updated,
                  std::span<const Transition> validate, OuterLossKind kind,
                  LearnerScratch& scratch);

// Closed-form d outer_loss / d alpha_lambda, averaged over the validation
// split. Per item: g = -2 delta c alpha_1 e^{alpha_lambda} (J_C - beta) *
// (-2 lr_critic <grad Q at theta_c', grad Q at theta_c> + 1), with delta the
// shaped TD error at (theta_c', lambda'). Returns 0 when the lambda'
// projection at zero is active (clamp subgradient).
double metal_meta_gradient(const ActorCritic& ac_updated,
                           const ParamVector& theta_c_old, const MetaState& meta,
                           std::span<const Transition> validate, double J_C,
                           double beta, double lr_critic);

// Central difference of the full inner_update -> outer_loss pipeline with
// respect to alpha_lambda, replayed from the same pre-update state.
double fd_meta_gradient_oracle(const ActorCritic& ac_before, const MetaState& meta,
                               const Batch& batch, double J_C, double beta,
                               double lr_actor, double lr_critic,
                               OuterLossKind kind, double h = 1e-6);

}  // namespace softrl
