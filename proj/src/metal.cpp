#include "softrl/metal.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace softrl {

OuterLossKind outer_loss_kind_from_string(const std::string& s) {
  if (s == "critic_only") return OuterLossKind::critic_only;
  if (s == "actor_only") return OuterLossKind::actor_only;
  if (s == "actor_plus_critic") return OuterLossKind::actor_plus_critic;
  throw std::invalid_argument("unknown outer loss kind: " + s);
}

std::string outer_loss_kind_to_string(OuterLossKind k) {
  switch (k) {
    case OuterLossKind::critic_only: return "critic_only";
    case OuterLossKind::actor_only: return "actor_only";
    case OuterLossKind::actor_plus_critic: return "actor_plus_critic";
  }
  throw std::logic_error("bad OuterLossKind");
}

double lagrange_step_metal(const MetaState& meta, double J_C, double beta) {
  const double lr = meta.lr_lagrange_base * std::exp(meta.alpha_lambda);
  return std::max(0.0, meta.lambda - lr * (beta - J_C));
}

double inner_update(ActorCritic& ac, const MetaState& meta,
                    std::span<const Transition> train, double J_C, double beta,
                    double lr_actor, double lr_critic, LearnerScratch& scratch) {
  const double lambda_prime = lagrange_step_metal(meta, J_C, beta);
  ac.lambda = lambda_prime;
  dual_step(ac, train, lambda_prime, lr_actor, lr_critic, scratch);
  return lambda_prime;
}

namespace {

// Mean squared norm of grad_a Q(s, pi(s)) over items. Numerically equal to
// the stop-gradient actor loss mean || SG(grad_a Q + a) - a ||^2.
double actor_outer_term(const ActorCritic& ac,
                        std::span<const Transition> items) {
  const int act = ac.actor_shape.output_dim;
  const int obs = ac.critic_shape.input_dim - act;
  std::vector<double> a(static_cast<size_t>(act));
  std::vector<double> sa(static_cast<size_t>(obs + act));
  std::vector<double> gin(static_cast<size_t>(obs + act));
  MlpWorkspace aws, cws;
  const double one = 1.0;
  double total = 0.0;
  for (const Transition& t : items) {
    forward(ac.theta_a, ac.actor_shape, t.s, aws, a);
    for (int i = 0; i < obs; ++i) sa[static_cast<size_t>(i)] = t.s[static_cast<size_t>(i)];
    for (int i = 0; i < act; ++i) sa[static_cast<size_t>(obs + i)] = a[static_cast<size_t>(i)];
    grad_input(ac.theta_c, ac.critic_shape, sa, std::span<const double>(&one, 1),
               cws, gin);
    double sq = 0.0;
    for (int i = 0; i < act; ++i) {
      const double g = gin[static_cast<size_t>(obs + i)];
      sq += g * g;
    }
    total += sq;
  }
  return total / static_cast<double>(items.size());
}

}  // namespace

double outer_loss(const ActorCritic& ac_updated, double lambda_updated,
                  std::span<const Transition> validate, OuterLossKind kind,
                  LearnerScratch& scratch) {
  if (validate.empty()) throw std::invalid_argument("outer_loss: empty validation split");
  double loss = 0.0;
  if (kind == OuterLossKind::critic_only || kind == OuterLossKind::actor_plus_critic) {
    loss += mean_td_loss(ac_updated, validate, lambda_updated, scratch);
  }
  if (kind == OuterLossKind::actor_only || kind == OuterLossKind::actor_plus_critic) {
    loss += actor_outer_term(ac_updated, validate);
  }
  return loss;
}

double metal_meta_gradient(const ActorCritic& ac_updated,
                           const ParamVector& theta_c_old, const MetaState& meta,
                           std::span<const Transition> validate, double J_C,
                           double beta, double lr_critic) {
  if (validate.empty()) {
    throw std::invalid_argument("metal_meta_gradient: empty validation split");
  }
  const double lr = meta.lr_lagrange_base * std::exp(meta.alpha_lambda);
  const double lambda_raw = meta.lambda - lr * (beta - J_C);
  if (lambda_raw < 0.0) return 0.0;  // projection active, zero subgradient
  const double dlam = lr * (J_C - beta);  // d lambda' / d alpha_lambda
  const int obs = ac_updated.critic_shape.input_dim - ac_updated.actor_shape.output_dim;
  const int act = ac_updated.actor_shape.output_dim;
  std::vector<double> sa(static_cast<size_t>(obs + act));
  double total = 0.0;
  for (const Transition& t : validate) {
    for (int i = 0; i < obs; ++i) sa[static_cast<size_t>(i)] = t.s[static_cast<size_t>(i)];
    for (int i = 0; i < act; ++i) sa[static_cast<size_t>(obs + i)] = t.a[static_cast<size_t>(i)];
    const double delta = td_error(ac_updated, t, lambda_raw);
    const double ip = param_grad_inner_product(ac_updated.theta_c, theta_c_old,
                                               ac_updated.critic_shape, sa);
    total += -2.0 * delta * t.c_sum * dlam * (-2.0 * lr_critic * ip + 1.0);
  }
  return total / static_cast<double>(validate.size());
}

double fd_meta_gradient_oracle(const ActorCritic& ac_before, const MetaState& meta,
                               const Batch& batch, double J_C, double beta,
                               double lr_actor, double lr_critic,
                               OuterLossKind kind, double h) {
  LearnerScratch scratch;
  double vals[2];
  const double signs[2] = {1.0, -1.0};
  for (int k = 0; k < 2; ++k) {
    ActorCritic ac = ac_before;
    MetaState m = meta;
    m.alpha_lambda += signs[k] * h;
    const double lam = inner_update(ac, m, batch.train, J_C, beta, lr_actor,
                                    lr_critic, scratch);
    vals[k] = outer_loss(ac, lam, batch.validate, kind, scratch);
  }
  return (vals[0] - vals[1]) / (2.0 * h);
}

}  // namespace softrl
