#include "softrl/agent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace softrl {

AgentKind agent_kind_from_string(const std::string& s) {
  if (s == "d4pg") return AgentKind::d4pg;
  if (s == "rs") return AgentKind::rs;
  if (s == "rc") return AgentKind::rc;
  if (s == "metal") return AgentKind::metal;
  if (s == "mesh") return AgentKind::mesh;
  throw std::invalid_argument("unknown agent: " + s);
}

std::string agent_kind_to_string(AgentKind k) {
  switch (k) {
    case AgentKind::d4pg: return "d4pg";
    case AgentKind::rs: return "rs";
    case AgentKind::rc: return "rc";
    case AgentKind::metal: return "metal";
    case AgentKind::mesh: return "mesh";
  }
  return "rc";
}

void AgentConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must be in (0,1)");
  if (n_step < 1) throw std::invalid_argument("n_step must be >= 1");
  if (!(lr_actor > 0.0 && lr_critic > 0.0 && lr_lagrange > 0.0))
    throw std::invalid_argument("learning rates must be positive");
  if (target_update_period < 1) throw std::invalid_argument("target_update_period must be >= 1");
  if (exploration_sigma < 0.0) throw std::invalid_argument("exploration_sigma must be >= 0");
  if (batch_size < 2) throw std::invalid_argument("batch_size must be >= 2");
  if (!(split_fraction > 0.0 && split_fraction < 1.0))
    throw std::invalid_argument("split_fraction must be in (0,1)");
  if (fixed_lambda < 0.0) throw std::invalid_argument("fixed_lambda must be >= 0");
  if (threshold_beta < 0.0) throw std::invalid_argument("threshold_beta must be >= 0");
  if (lambda_init < 0.0) throw std::invalid_argument("lambda_init must be >= 0");
  if (replay_capacity < batch_size)
    throw std::invalid_argument("replay_capacity must hold at least one batch");
  if (penalty_capacity < 1) throw std::invalid_argument("penalty_capacity must be >= 1");
  if (warmup_transitions < batch_size)
    throw std::invalid_argument("warmup_transitions must cover at least one batch");
}

MlpShape make_actor_shape(const CmdpSpec& env, const AgentConfig& cfg) {
  MlpShape s;
  s.input_dim = env.obs_dim;
  s.hidden = cfg.actor_hidden;
  s.output_dim = env.act_dim;
  s.hidden_act = Act::elu;
  s.output_act = Act::scaled_tanh;
  // symmetric bounds assumed by the tanh output head
  s.output_scale = env.action_high.empty() ? 1.0 : env.action_high[0];
  s.layer_norm_first = cfg.layer_norm;
  return s;
}

MlpShape make_critic_shape(const CmdpSpec& env, const AgentConfig& cfg) {
  MlpShape s;
  s.input_dim = env.obs_dim + env.act_dim;
  s.hidden = cfg.critic_hidden;
  s.output_dim = 1;
  s.hidden_act = Act::elu;
  s.output_act = Act::identity;
  s.layer_norm_first = cfg.layer_norm;
  return s;
}

ActorCritic make_actor_critic(const CmdpSpec& env, const AgentConfig& cfg, Rng& rng) {
  ActorCritic ac;
  ac.actor_shape = make_actor_shape(env, cfg);
  ac.critic_shape = make_critic_shape(env, cfg);
  ac.theta_a = init_params(ac.actor_shape, rng);
  ac.theta_c = init_params(ac.critic_shape, rng);
  ac.theta_a_target = ac.theta_a;
  ac.theta_c_target = ac.theta_c;
  ac.lambda = cfg.lambda_init;
  return ac;
}

std::vector<double> act(const ParamVector& theta_a, const MlpShape& actor_shape,
                        std::span<const double> obs, const CmdpSpec& env,
                        bool explore, double sigma, Rng& rng) {
  std::vector<double> a = forward(theta_a, actor_shape, obs);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (explore) a[i] += sigma * rng.gaussian();
    a[i] = std::min(std::max(a[i], env.action_low[i]), env.action_high[i]);
  }
  return a;
}

namespace {

// delta = r_sum - lambda c_sum + disc * Q_T(s', pi_T(s')) - Q(s, a) for one item
double td_error_item(const ActorCritic& ac, const Transition& item, double lambda) {
  double boot = 0.0;
  if (item.discount_prod != 0.0) {
    const std::vector<double> a_next =
        forward(ac.theta_a_target, ac.actor_shape, item.s_next);
    std::vector<double> sa(item.s_next.begin(), item.s_next.end());
    sa.insert(sa.end(), a_next.begin(), a_next.end());
    boot = item.discount_prod * forward(ac.theta_c_target, ac.critic_shape, sa)[0];
  }
  std::vector<double> sa(item.s.begin(), item.s.end());
  sa.insert(sa.end(), item.a.begin(), item.a.end());
  const double q = forward(ac.theta_c, ac.critic_shape, sa)[0];
  return item.r_sum - lambda * item.c_sum + boot - q;
}

// Fills S, SA, Snext from the items and computes per-item deltas into
// scratch.delta using the batched nets.
void batched_deltas(const ActorCritic& ac, std::span<const Transition> items,
                    double lambda, LearnerScratch& sc) {
  const int n = static_cast<int>(items.size());
  const int obs = ac.actor_shape.input_dim;
  const int act = ac.actor_shape.output_dim;
  sc.S.resize(obs, n);
  sc.SA.resize(obs + act, n);
  sc.Snext.resize(obs, n);
  for (int j = 0; j < n; ++j) {
    const Transition& t = items[static_cast<std::size_t>(j)];
    for (int i = 0; i < obs; ++i) {
      sc.S(i, j) = t.s[static_cast<std::size_t>(i)];
      sc.SA(i, j) = t.s[static_cast<std::size_t>(i)];
      sc.Snext(i, j) = t.s_next[static_cast<std::size_t>(i)];
    }
    for (int i = 0; i < act; ++i)
      sc.SA(obs + i, j) = t.a[static_cast<std::size_t>(i)];
  }

  forward_batch(ac.theta_a_target, ac.actor_shape, sc.Snext, sc.actor_target_ws);
  sc.SAnext.resize(obs + act, n);
  sc.SAnext.topRows(obs) = sc.Snext;
  sc.SAnext.bottomRows(act) = sc.actor_target_ws.output();
  forward_batch(ac.theta_c_target, ac.critic_shape, sc.SAnext, sc.critic_target_ws);
  forward_batch(ac.theta_c, ac.critic_shape, sc.SA, sc.critic_ws);

  sc.delta.resize(n);
  for (int j = 0; j < n; ++j) {
    const Transition& t = items[static_cast<std::size_t>(j)];
    sc.delta(j) = t.r_sum - lambda * t.c_sum +
                  t.discount_prod * sc.critic_target_ws.output()(0, j) -
                  sc.critic_ws.output()(0, j);
  }
}

// Unscaled sum_i delta_i grad Q into sc.grad_c (requires batched_deltas first).
void critic_grad_sum(const ActorCritic& ac, LearnerScratch& sc) {
  const int n = static_cast<int>(sc.delta.size());
  sc.cot.resize(1, n);
  sc.cot.row(0) = sc.delta.transpose();
  sc.grad_c.resize(ac.theta_c.size());
  backward_batch(ac.theta_c, ac.critic_shape, sc.SA, sc.cot, sc.critic_ws, sc.grad_c);
}

// Unscaled sum_i (d pi / d theta)^T grad_a Q(s_i, pi(s_i)) into sc.grad_a.
// Uses the current theta_c; requires sc.S filled.
void actor_grad_sum(const ActorCritic& ac, LearnerScratch& sc) {
  const int n = static_cast<int>(sc.S.cols());
  const int obs = ac.actor_shape.input_dim;
  const int act = ac.actor_shape.output_dim;
  forward_batch(ac.theta_a, ac.actor_shape, sc.S, sc.actor_ws);
  sc.SApi.resize(obs + act, n);
  sc.SApi.topRows(obs) = sc.S;
  sc.SApi.bottomRows(act) = sc.actor_ws.output();
  forward_batch(ac.theta_c, ac.critic_shape, sc.SApi, sc.pi_critic_ws);
  sc.cot.resize(1, n);
  sc.cot.setOnes();
  backward_batch(ac.theta_c, ac.critic_shape, sc.SApi, sc.cot, sc.pi_critic_ws,
                 {}, &sc.Gin);
  sc.grad_a.resize(ac.theta_a.size());
  backward_batch(ac.theta_a, ac.actor_shape, sc.S, sc.Gin.bottomRows(act),
                 sc.actor_ws, sc.grad_a);
}

void fill_states_only(const ActorCritic& ac, std::span<const Transition> items,
                      LearnerScratch& sc) {
  const int n = static_cast<int>(items.size());
  const int obs = ac.actor_shape.input_dim;
  sc.S.resize(obs, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < obs; ++i)
      sc.S(i, j) = items[static_cast<std::size_t>(j)].s[static_cast<std::size_t>(i)];
}

void apply_scaled(ParamVector& p, const std::vector<double>& g, double scale) {
  for (std::size_t i = 0; i < p.values.size(); ++i) p.values[i] += scale * g[i];
}

}  // namespace

double td_error(const ActorCritic& ac, const Transition& item, double lambda) {
  return td_error_item(ac, item, lambda);
}

CriticLoss critic_loss(const ActorCritic& ac, const Transition& item, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("critic_loss: lambda must be >= 0");
  const double d = td_error_item(ac, item, lambda);
  return {d * d, d};
}

void critic_step(ActorCritic& ac, std::span<const Transition> train, double lambda,
                 double lr, LearnerScratch& scratch) {
  if (train.empty()) throw std::invalid_argument("critic_step: empty batch");
  batched_deltas(ac, train, lambda, scratch);
  critic_grad_sum(ac, scratch);
  apply_scaled(ac.theta_c, scratch.grad_c, 2.0 * lr / static_cast<double>(train.size()));
}

void actor_step(ActorCritic& ac, std::span<const Transition> train, double lr,
                LearnerScratch& scratch) {
  if (train.empty()) throw std::invalid_argument("actor_step: empty batch");
  fill_states_only(ac, train, scratch);
  actor_grad_sum(ac, scratch);
  apply_scaled(ac.theta_a, scratch.grad_a, lr / static_cast<double>(train.size()));
}

void dual_step(ActorCritic& ac, std::span<const Transition> train, double lambda,
               double lr_actor, double lr_critic, LearnerScratch& scratch) {
  if (train.empty()) throw std::invalid_argument("dual_step: empty batch");
  const double n = static_cast<double>(train.size());
  batched_deltas(ac, train, lambda, scratch);
  critic_grad_sum(ac, scratch);
  actor_grad_sum(ac, scratch);  // still the pre-update theta_c
  apply_scaled(ac.theta_c, scratch.grad_c, 2.0 * lr_critic / n);
  apply_scaled(ac.theta_a, scratch.grad_a, lr_actor / n);
  ++ac.step_counter;
}

void target_sync(ActorCritic& ac, int period) {
  if (period < 1) throw std::invalid_argument("target_sync: period must be >= 1");
  if (ac.step_counter > 0 && ac.step_counter % period == 0) {
    ac.theta_a_target = ac.theta_a;
    ac.theta_c_target = ac.theta_c;
  }
}

double lagrange_step_rc(double lambda, double episode_penalty, double beta, double lr) {
  if (lambda < 0.0) throw std::invalid_argument("lagrange_step_rc: lambda must be >= 0");
  return std::max(0.0, lambda - lr * (beta - episode_penalty));
}

double mean_td_loss(const ActorCritic& ac, std::span<const Transition> items,
                    double lambda, LearnerScratch& scratch) {
  if (items.empty()) throw std::invalid_argument("mean_td_loss: empty split");
  batched_deltas(ac, items, lambda, scratch);
  return scratch.delta.squaredNorm() / static_cast<double>(items.size());
}

}  // namespace softrl
