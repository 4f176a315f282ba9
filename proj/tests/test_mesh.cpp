#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "softrl/gradcheck.hpp"
#include "softrl/mesh.hpp"
#include "test_util.hpp"

using namespace softrl;
using testutil::close;
using testutil::norm_rel_err;

namespace {

bool near(double a, double b, double atol) { return std::abs(a - b) <= atol; }

MlpShape linear_shape(int in, int out, bool bias = false) {
  MlpShape s;
  s.input_dim = in;
  s.output_dim = out;
  s.output_act = Act::identity;
  s.bias = bias;
  return s;
}

// Shaping net for 1d obs / 1d act: identity map from (s, a, r_sum, c_sum)
// to the two raw heads. With bias the weight block is followed by (b0, b1).
MlpShape phi_linear_shape(bool bias = false) { return linear_shape(4, 2, bias); }

// Actor-only companion state; the critic slots exist but mesh never reads them.
ActorCritic mesh_ac(double actor_w, double actor_target_w) {
  ActorCritic ac;
  ac.actor_shape = linear_shape(1, 1);
  ac.critic_shape = linear_shape(2, 1);
  ac.theta_a = make_params(ac.actor_shape);
  ac.theta_a.values = {actor_w};
  ac.theta_a_target = make_params(ac.actor_shape);
  ac.theta_a_target.values = {actor_target_w};
  ac.theta_c = make_params(ac.critic_shape);
  ac.theta_c_target = make_params(ac.critic_shape);
  return ac;
}

MeshState linear_mesh(std::vector<double> c_in, std::vector<double> c_in_target,
                      std::vector<double> c_out, std::vector<double> c_out_target,
                      double lambda, const MeshConfig& cfg, bool phi_bias = false) {
  MeshState ms;
  ms.cfg = cfg;
  ms.phi_shape = phi_linear_shape(phi_bias);
  ms.phi = make_params(ms.phi_shape);
  ms.critic_shape = linear_shape(2, 1);
  ms.theta_c_in = make_params(ms.critic_shape);
  ms.theta_c_in.values = std::move(c_in);
  ms.theta_c_in_target = make_params(ms.critic_shape);
  ms.theta_c_in_target.values = std::move(c_in_target);
  ms.theta_c_out = make_params(ms.critic_shape);
  ms.theta_c_out.values = std::move(c_out);
  ms.theta_c_out_target = make_params(ms.critic_shape);
  ms.theta_c_out_target.values = std::move(c_out_target);
  ms.lambda = lambda;
  return ms;
}

Transition item_1d(double s, double a, double s_next, double r_sum, double c_sum,
                   double disc) {
  Transition t;
  t.s = {s};
  t.a = {a};
  t.s_next = {s_next};
  t.r_sum = r_sum;
  t.c_sum = c_sum;
  t.discount_prod = disc;
  return t;
}

MeshConfig hand_cfg() {
  MeshConfig cfg;
  cfg.lambda_hat = 0.1;
  cfg.upsilon_s = 10.0;
  cfg.upsilon_o = 3.0;
  cfg.lr_critic_in = 0.1;
  cfg.lr_critic_out = 0.1;
  return cfg;
}

// Single-transition instance with every net linear, solvable on paper:
// actor pi(s) = 0, targets 0; inner critic (0.5, 0.3) vs target (0.4, 0);
// outer critic (0.4, 0.3) vs target (0.4, 0); zero shaping net.
struct HandInstance {
  MeshState ms;
  ActorCritic ac;
  Batch batch;
  double jc = 0.3, beta = 0.1, lr_lagrange = 0.01, lr_actor = 0.1;
};

HandInstance hand_instance() {
  HandInstance h;
  h.ms = linear_mesh({0.5, 0.3}, {0.4, 0.0}, {0.4, 0.3}, {0.4, 0.0}, 0.2,
                     hand_cfg());
  h.ac = mesh_ac(0.0, 0.0);
  h.batch.train = {item_1d(1.0, 0.5, 1.0, 1.0, 1.0, 0.9)};
  h.batch.validate = h.batch.train;
  return h;
}

}  // namespace

TEST_CASE("mesh formulation names round trip") {
  for (const char* name : {"offset_on_penalty", "scale_whole"})
    CHECK(mesh_formulation_to_string(mesh_formulation_from_string(name)) == name);
  CHECK_THROWS_AS(mesh_formulation_from_string("additive"), std::invalid_argument);
}

TEST_CASE("kappa heads: worked values at zero raw outputs") {
  const MeshConfig cfg = hand_cfg();
  const MlpShape shape = phi_linear_shape();
  const ParamVector phi = make_params(shape);  // raw heads both 0
  const std::vector<double> s = {1.0}, a = {1.0};

  const Kappas kp = mesh_kappas(phi, shape, s, a, 1.0, 1.0, cfg);
  CHECK(kp.kappa_s == 5.0);  // upsilon_s * sigmoid(0)
  CHECK(kp.kappa_o == 0.0);  // upsilon_o * tanh(0)

  // r - kappa_s lambda_hat c + kappa_o = 1 - 5 * 0.1 * 1 = 0.5
  CHECK(near(meta_shaped_reward(phi, shape, s, a, 1.0, 1.0, cfg), 0.5, 1e-15));

  // Zero penalty and zero offset leave the reward untouched.
  for (const double r : {0.0, 1.0, -0.7, 3.25})
    CHECK(meta_shaped_reward(phi, shape, s, a, r, 0.0, cfg) == r);

  // scale_whole multiplies the whole shaped term: 5 * (1 - 0.1) = 4.5.
  MeshConfig whole = cfg;
  whole.formulation = MeshFormulation::scale_whole;
  CHECK(near(meta_shaped_reward(phi, shape, s, a, 1.0, 1.0, whole), 4.5, 1e-15));
}

TEST_CASE("kappa heads: strict ranges for random nets, saturation at the rim") {
  const MeshConfig cfg = hand_cfg();
  MlpShape shape;
  shape.input_dim = 4;
  shape.hidden = {6};
  shape.output_dim = 2;
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const ParamVector phi = init_params(shape, rng);
    const std::vector<double> s = {rng.uniform(-3.0, 3.0)};
    const std::vector<double> a = {rng.uniform(-3.0, 3.0)};
    const Kappas kp = mesh_kappas(phi, shape, s, a, rng.uniform(-5.0, 5.0),
                                  rng.uniform(0.0, 5.0), cfg);
    CHECK(kp.kappa_s > 0.0);
    CHECK(kp.kappa_s < cfg.upsilon_s);
    CHECK(kp.kappa_o > -cfg.upsilon_o);
    CHECK(kp.kappa_o < cfg.upsilon_o);
  }

  // Pushing the raw offset head far positive drives kappa_o to its bound.
  const MlpShape lin = phi_linear_shape(/*bias=*/true);
  ParamVector phi = make_params(lin);
  phi.b(0)[1] = 25.0;
  const std::vector<double> s = {0.0}, a = {0.0};
  Kappas kp = mesh_kappas(phi, lin, s, a, 0.0, 0.0, cfg);
  CHECK(kp.kappa_o <= cfg.upsilon_o);
  CHECK(near(kp.kappa_o, 3.0, 1e-15));
  phi.b(0)[1] = -25.0;
  kp = mesh_kappas(phi, lin, s, a, 0.0, 0.0, cfg);
  CHECK(kp.kappa_o >= -cfg.upsilon_o);
  CHECK(near(kp.kappa_o, -3.0, 1e-15));
}

TEST_CASE("make_mesh_state: shapes, target copies, lambda seed") {
  CmdpSpec spec;
  spec.obs_dim = 2;
  spec.act_dim = 1;
  spec.action_low = {-1.0};
  spec.action_high = {1.0};
  AgentConfig cfg;
  cfg.lambda_init = 0.25;
  MeshConfig mcfg;
  Rng rng(7);
  const MeshState ms = make_mesh_state(spec, cfg, mcfg, rng);

  CHECK(ms.phi_shape.input_dim == 5);  // (s, a, r_sum, c_sum)
  CHECK(ms.phi_shape.output_dim == 2);
  CHECK(ms.phi_shape.hidden == std::vector<int>{32});
  CHECK(ms.phi_shape.hidden_act == Act::elu);
  CHECK(ms.phi_shape.output_act == Act::identity);
  CHECK(ms.critic_shape == make_critic_shape(spec, cfg));
  CHECK(ms.phi.values.size() == ms.phi_shape.param_count());
  CHECK(ms.theta_c_in.values.size() == ms.critic_shape.param_count());
  CHECK(ms.theta_c_in_target.values == ms.theta_c_in.values);
  CHECK(ms.theta_c_out_target.values == ms.theta_c_out.values);
  CHECK(ms.theta_c_in.values != ms.theta_c_out.values);  // independent draws
  CHECK(ms.lambda == 0.25);

  bool any_nonzero = false;
  for (const double v : ms.phi.values) any_nonzero |= (v != 0.0);
  CHECK(any_nonzero);
}

TEST_CASE("inner update: every quantity of the linear hand instance") {
  HandInstance h = hand_instance();
  MeshScratch sc;
  const MeshInnerResult res = mesh_inner_update(
      h.ms, h.ac, h.batch.train, h.jc, h.beta, h.lr_lagrange, h.lr_actor, sc);

  // lambda' = max(0, 0.2 - 0.01 * (0.1 - 0.3)) = 0.202
  CHECK(near(res.lambda_prime, 0.202, 1e-15));
  CHECK(h.ms.lambda == res.lambda_prime);
  CHECK(h.ac.lambda == res.lambda_prime);
  CHECK(res.kappa_s_mean == 5.0);
  CHECK(res.kappa_o_mean == 0.0);

  // Inner: r_meta = 0.5, delta_in = 0.5 + 0.9*0.4 - (0.5 + 0.3*0.5) = 0.21.
  CHECK(near(res.inner_loss, 0.0441, 1e-12));
  // Outer: delta_out = (1 - 0.202) + 0.36 - 0.55 = 0.608.
  CHECK(near(res.outer_critic_loss, 0.369664, 1e-12));

  // theta_c += 2 lr delta (s, a) on each critic.
  CHECK(near(h.ms.theta_c_in.values[0], 0.542, 1e-12));
  CHECK(near(h.ms.theta_c_in.values[1], 0.321, 1e-12));
  CHECK(near(h.ms.theta_c_out.values[0], 0.5216, 1e-12));
  CHECK(near(h.ms.theta_c_out.values[1], 0.3608, 1e-12));

  // The actor must see the UPDATED inner critic: grad_a Q'_in = 0.321, so
  // theta_a = 0.1 * 0.321; the pre-update critic would give 0.030.
  CHECK(near(h.ac.theta_a.values[0], 0.0321, 1e-12));
  CHECK(h.ac.step_counter == 1);

  // Targets and the unused critic slots stay put.
  CHECK(h.ms.theta_c_in_target.values == std::vector<double>{0.4, 0.0});
  CHECK(h.ms.theta_c_out_target.values == std::vector<double>{0.4, 0.0});
  CHECK(h.ac.theta_a_target.values == std::vector<double>{0.0});
  CHECK(h.ac.theta_c.values == std::vector<double>{0.0, 0.0});

  // Post-update stop-gradient objective: ||grad_a Q'_out(s, pi'(s))||^2.
  CHECK(near(mesh_outer_loss(h.ms, h.ac, h.batch.validate), 0.3608 * 0.3608, 1e-12));
}

TEST_CASE("inner update: critics coincide when the shaped targets do") {
  std::vector<Transition> train = {item_1d(1.0, 0.5, 0.8, 1.0, 1.0, 0.9),
                                   item_1d(-0.4, 0.2, 0.3, 0.6, 2.0, 0.81),
                                   item_1d(0.7, -0.8, -0.2, -0.3, 0.5, 0.0)};
  MeshScratch sc;

  SUBCASE("kappa_s lambda_hat frozen at lambda_prime, kappa_o zero") {
    // J_C = beta keeps lambda at 0.3; bias-only phi puts kappa_s at exactly
    // 10 * sigmoid(logit(0.3)) so the inner penalty coefficient is 0.3 too.
    MeshConfig cfg = hand_cfg();
    cfg.lr_critic_in = 0.05;
    cfg.lr_critic_out = 0.05;
    MeshState ms = linear_mesh({0.6, 0.25}, {0.5, 0.1}, {0.6, 0.25}, {0.5, 0.1},
                               0.3, cfg, /*phi_bias=*/true);
    ms.phi.b(0)[0] = std::log(0.3 / 0.7);
    ActorCritic ac = mesh_ac(0.2, 0.15);
    mesh_inner_update(ms, ac, train, 0.1, 0.1, 0.01, 0.1, sc);
    CHECK(ms.lambda == 0.3);
    for (std::size_t k = 0; k < ms.theta_c_in.values.size(); ++k)
      CHECK(near(ms.theta_c_in.values[k], ms.theta_c_out.values[k], 1e-12));
  }

  SUBCASE("zero penalty sums and zero offset head: bitwise agreement") {
    std::vector<Transition> clean = train;
    for (Transition& t : clean) t.c_sum = 0.0;
    MeshConfig cfg = hand_cfg();
    cfg.lr_critic_in = 0.05;
    cfg.lr_critic_out = 0.05;
    MeshState ms = linear_mesh({0.6, 0.25}, {0.5, 0.1}, {0.6, 0.25}, {0.5, 0.1},
                               0.37, cfg);
    ActorCritic ac = mesh_ac(0.2, 0.15);
    mesh_inner_update(ms, ac, clean, 0.4, 0.1, 0.01, 0.1, sc);
    CHECK(ms.theta_c_in.values == ms.theta_c_out.values);
  }
}

TEST_CASE("inner update: reduces to the plain shaped critic step") {
  // With the offset head silent and kappa_s lambda_hat = 5 * 0.1 = 0.5
  // exactly, the inner critic must follow the fixed-lambda rule at 0.5,
  // and the outer critic the rule at lambda', both down to the last bit.
  std::vector<Transition> train = {item_1d(0.9, 0.5, 0.7, 1.0, 1.0, 0.9),
                                   item_1d(-0.3, -0.6, 0.2, 0.4, 2.0, 0.81),
                                   item_1d(0.1, 0.8, -0.5, -0.2, 0.7, 0.9),
                                   item_1d(0.5, -0.1, 0.6, 0.8, 0.0, 0.0)};
  MeshConfig cfg = hand_cfg();
  cfg.lr_critic_in = 0.07;
  cfg.lr_critic_out = 0.07;
  MeshState ms = linear_mesh({0.7, 0.2}, {0.4, 0.1}, {0.55, -0.2}, {0.3, 0.05},
                             0.21, cfg);
  ActorCritic ac = mesh_ac(0.3, 0.25);
  MeshScratch sc;
  mesh_inner_update(ms, ac, train, 0.35, 0.1, 0.02, 0.1, sc);

  ActorCritic rs = mesh_ac(0.3, 0.25);
  rs.theta_c.values = {0.7, 0.2};
  rs.theta_c_target.values = {0.4, 0.1};
  LearnerScratch ls;
  critic_step(rs, train, 0.5, 0.07, ls);
  CHECK(ms.theta_c_in.values == rs.theta_c.values);

  ActorCritic rc = mesh_ac(0.3, 0.25);
  rc.theta_c.values = {0.55, -0.2};
  rc.theta_c_target.values = {0.3, 0.05};
  const double lambda_prime = lagrange_step_rc(0.21, 0.35, 0.1, 0.02);
  CHECK(ms.lambda == lambda_prime);
  critic_step(rc, train, lambda_prime, 0.07, ls);
  CHECK(ms.theta_c_out.values == rc.theta_c.values);
}

TEST_CASE("outer loss: hand values, bias invariance, throws on empty") {
  const MeshConfig cfg = hand_cfg();

  // grad_a Q_out = 0.2 everywhere, pi(1) = 0.3: the stop-gradient residual
  // ||(a + 0.2) - a||^2 = 0.04 regardless of the actor.
  MeshState ms = linear_mesh({0.5, 0.3}, {0.4, 0.0}, {0.0, 0.2}, {0.0, 0.2},
                             0.0, cfg);
  ActorCritic ac = mesh_ac(0.3, 0.3);
  std::vector<Transition> validate = {item_1d(1.0, 0.0, 1.0, 0.0, 0.0, 0.9),
                                      item_1d(-0.5, 0.0, 0.2, 0.0, 0.0, 0.9)};
  CHECK(near(mesh_outer_loss(ms, ac, validate), 0.04, 1e-15));

  // A critic with zero action weight scores zero.
  ms.theta_c_out.values = {0.8, 0.0};
  CHECK(mesh_outer_loss(ms, ac, validate) == 0.0);

  // Adding a constant to Q_out cannot move an action-gradient objective.
  MeshState biased = linear_mesh({0.5, 0.3}, {0.4, 0.0}, {}, {}, 0.0, cfg);
  biased.critic_shape = linear_shape(2, 1, /*bias=*/true);
  biased.theta_c_out = make_params(biased.critic_shape);
  biased.theta_c_out.values = {0.1, 0.7, 0.0};
  biased.theta_c_out_target = biased.theta_c_out;
  const double base = mesh_outer_loss(biased, ac, validate);
  biased.theta_c_out.values[2] = 123.0;
  CHECK(mesh_outer_loss(biased, ac, validate) == base);

  CHECK_THROWS_AS(mesh_outer_loss(ms, ac, std::span<const Transition>()),
                  std::invalid_argument);
}

TEST_CASE("outer critic never feels the shaping net within one iteration") {
  MlpShape critic;
  critic.input_dim = 2;
  critic.hidden = {3};
  critic.output_dim = 1;
  critic.hidden_act = Act::tanh_fn;
  MlpShape phi;
  phi.input_dim = 4;
  phi.hidden = {2};
  phi.output_dim = 2;

  Rng rng(77);
  MeshConfig cfg = hand_cfg();
  MeshState a, b;
  a.cfg = cfg;
  a.phi_shape = phi;
  a.phi = init_params(phi, rng);
  a.critic_shape = critic;
  a.theta_c_in = init_params(critic, rng);
  a.theta_c_in_target = init_params(critic, rng);
  a.theta_c_out = init_params(critic, rng);
  a.theta_c_out_target = init_params(critic, rng);
  a.lambda = 0.4;
  b = a;
  for (double& v : b.phi.values) v += 0.3;

  ActorCritic ac_a = mesh_ac(0.2, 0.1);
  ActorCritic ac_b = mesh_ac(0.2, 0.1);
  std::vector<Transition> train = {item_1d(0.4, -0.3, 0.1, 0.7, 1.0, 0.9),
                                   item_1d(-0.8, 0.5, 0.6, 0.2, 0.0, 0.81)};
  MeshScratch sc;
  const MeshInnerResult ra =
      mesh_inner_update(a, ac_a, train, 0.3, 0.1, 0.05, 0.1, sc);
  const MeshInnerResult rb =
      mesh_inner_update(b, ac_b, train, 0.3, 0.1, 0.05, 0.1, sc);

  CHECK(ra.lambda_prime == rb.lambda_prime);
  CHECK(ra.outer_critic_loss == rb.outer_critic_loss);
  CHECK(a.theta_c_out.values == b.theta_c_out.values);
  CHECK(a.theta_c_in.values != b.theta_c_in.values);
  CHECK(ac_a.theta_a.values != ac_b.theta_a.values);  // actor rides the inner critic
}

TEST_CASE("target sync copies all three pairs on the period") {
  MeshConfig cfg = hand_cfg();
  MeshState ms = linear_mesh({0.5, 0.3}, {0.4, 0.0}, {0.6, 0.1}, {0.2, 0.2},
                             0.0, cfg);
  ActorCritic ac = mesh_ac(0.7, 0.1);

  CHECK_THROWS_AS(mesh_target_sync(ms, ac, 0), std::invalid_argument);

  ac.step_counter = 0;  // never on the zeroth step
  mesh_target_sync(ms, ac, 1);
  CHECK(ms.theta_c_in_target.values == std::vector<double>{0.4, 0.0});

  ac.step_counter = 99;
  mesh_target_sync(ms, ac, 100);
  CHECK(ms.theta_c_in_target.values == std::vector<double>{0.4, 0.0});

  ac.step_counter = 100;
  mesh_target_sync(ms, ac, 100);
  CHECK(ms.theta_c_in_target.values == ms.theta_c_in.values);
  CHECK(ms.theta_c_out_target.values == ms.theta_c_out.values);
  CHECK(ac.theta_a_target.values == ac.theta_a.values);
  mesh_target_sync(ms, ac, 100);  // idempotent
  CHECK(ms.theta_c_out_target.values == ms.theta_c_out.values);
}

TEST_CASE("meta gradient: full hand derivation of the chain") {
  // Same linear instance as the inner-update test, so every link is exact:
  //   b  = -2 * grad_a Q'_out * dpi/dtheta = -2 * 0.3608 = -0.7216
  //   u  = s * b                           = -0.7216
  //   w  = lr_actor * (0, u)               = (0, -0.07216)
  //   s1 = 2 lr_in <w, (s, a)>             = 0.2 * (-0.03608) = -0.0072160
  //   e  = (dks * 10 sig'(0) x, dko * 3 tanh'(0) x), x = (1, 0.5, 1, 1)
  // with dks = -0.1, dko = 1, sig'(0) = 0.25.
  HandInstance h = hand_instance();
  const std::vector<double> fd = fd_mesh_oracle(h.ms, h.ac, h.batch, h.jc, h.beta,
                                                h.lr_lagrange, h.lr_actor);
  const MeshSnapshot snap = mesh_snapshot(h.ms, h.ac);
  MeshScratch sc;
  mesh_inner_update(h.ms, h.ac, h.batch.train, h.jc, h.beta, h.lr_lagrange,
                    h.lr_actor, sc);
  const std::vector<double> grad = mesh_meta_gradient(
      h.ms, h.ac, snap, h.batch.train, h.batch.validate, h.lr_actor);

  const double s1 = 2.0 * 0.1 * (0.1 * (-0.7216) * 0.5);
  const std::vector<double> x = {1.0, 0.5, 1.0, 1.0};
  std::vector<double> want(8);
  for (int j = 0; j < 4; ++j) {
    want[static_cast<size_t>(j)] = s1 * (-0.1 * 1.0) * 10.0 * 0.25 * x[static_cast<size_t>(j)];
    want[static_cast<size_t>(4 + j)] = s1 * 1.0 * 3.0 * 1.0 * x[static_cast<size_t>(j)];
  }
  REQUIRE(grad.size() == 8);
  REQUIRE(fd.size() == 8);
  for (int k = 0; k < 8; ++k) {
    CHECK(near(grad[static_cast<size_t>(k)], want[static_cast<size_t>(k)], 1e-10));
    CHECK(near(fd[static_cast<size_t>(k)], want[static_cast<size_t>(k)], 1e-8));
  }
  CHECK(norm_rel_err(grad, fd) < 1e-6);
}

TEST_CASE("meta gradient: structural zeros") {
  SUBCASE("zero actor step size") {
    HandInstance h = hand_instance();
    h.lr_actor = 0.0;
    const std::vector<double> fd = fd_mesh_oracle(h.ms, h.ac, h.batch, h.jc,
                                                  h.beta, h.lr_lagrange, 0.0);
    const MeshSnapshot snap = mesh_snapshot(h.ms, h.ac);
    MeshScratch sc;
    mesh_inner_update(h.ms, h.ac, h.batch.train, h.jc, h.beta, h.lr_lagrange,
                      0.0, sc);
    const std::vector<double> grad = mesh_meta_gradient(
        h.ms, h.ac, snap, h.batch.train, h.batch.validate, 0.0);
    for (const double g : grad) CHECK(g == 0.0);
    for (const double g : fd) CHECK(g == 0.0);
  }

  SUBCASE("zero inner critic step size") {
    HandInstance h = hand_instance();
    h.ms.cfg.lr_critic_in = 0.0;
    const std::vector<double> fd = fd_mesh_oracle(h.ms, h.ac, h.batch, h.jc,
                                                  h.beta, h.lr_lagrange, h.lr_actor);
    const MeshSnapshot snap = mesh_snapshot(h.ms, h.ac);
    MeshScratch sc;
    mesh_inner_update(h.ms, h.ac, h.batch.train, h.jc, h.beta, h.lr_lagrange,
                      h.lr_actor, sc);
    const std::vector<double> grad = mesh_meta_gradient(
        h.ms, h.ac, snap, h.batch.train, h.batch.validate, h.lr_actor);
    for (const double g : grad) CHECK(g == 0.0);
    for (const double g : fd) CHECK(g == 0.0);
  }

  SUBCASE("zero penalty sums and a saturated offset head") {
    // c_sum = 0 silences the scale path; tanh(25) rounds to 1 in doubles,
    // so the offset head is exactly flat and the whole gradient vanishes.
    HandInstance h = hand_instance();
    h.ms = linear_mesh({0.5, 0.3}, {0.4, 0.0}, {0.4, 0.3}, {0.4, 0.0}, 0.2,
                       hand_cfg(), /*phi_bias=*/true);
    h.ms.phi.b(0)[0] = 0.3;
    h.ms.phi.b(0)[1] = 25.0;
    h.batch.train = {item_1d(1.0, 0.5, 1.0, 1.0, 0.0, 0.9)};
    h.batch.validate = h.batch.train;
    const std::vector<double> fd = fd_mesh_oracle(h.ms, h.ac, h.batch, h.jc,
                                                  h.beta, h.lr_lagrange, h.lr_actor);
    const MeshSnapshot snap = mesh_snapshot(h.ms, h.ac);
    MeshScratch sc;
    mesh_inner_update(h.ms, h.ac, h.batch.train, h.jc, h.beta, h.lr_lagrange,
                      h.lr_actor, sc);
    const std::vector<double> grad = mesh_meta_gradient(
        h.ms, h.ac, snap, h.batch.train, h.batch.validate, h.lr_actor);
    for (const double g : grad) CHECK(g == 0.0);
    for (const double g : fd) CHECK(g == 0.0);
  }
}

TEST_CASE("meta gradient: lambda_hat zero leaves only the offset path") {
  HandInstance h = hand_instance();
  h.ms.cfg.lambda_hat = 0.0;
  Rng rng(5);
  for (double& v : h.ms.phi.values) v = rng.uniform(-0.4, 0.4);

  const std::vector<double> fd = fd_mesh_oracle(h.ms, h.ac, h.batch, h.jc, h.beta,
                                                h.lr_lagrange, h.lr_actor);
  const MeshSnapshot snap = mesh_snapshot(h.ms, h.ac);
  MeshScratch sc;
  mesh_inner_update(h.ms, h.ac, h.batch.train, h.jc, h.beta, h.lr_lagrange,
                    h.lr_actor, sc);
  const std::vector<double> grad = mesh_meta_gradient(
      h.ms, h.ac, snap, h.batch.train, h.batch.validate, h.lr_actor);

  // Weights feeding the scale head (row 0 of the 2x4 block) get nothing.
  double offset_mass = 0.0;
  for (int k = 0; k < 4; ++k) {
    CHECK(grad[static_cast<size_t>(k)] == 0.0);
    CHECK(fd[static_cast<size_t>(k)] == 0.0);
    CHECK(near(grad[static_cast<size_t>(4 + k)], fd[static_cast<size_t>(4 + k)], 1e-8));
    offset_mass += std::abs(grad[static_cast<size_t>(4 + k)]);
  }
  CHECK(offset_mass > 1e-6);
}

TEST_CASE("meta gradient: randomized agreement with the replay oracle") {
  const GradcheckReport rep = run_gradcheck("mesh", 10, 4242, 1e-4);
  CHECK(rep.passed());
  CHECK(rep.instances == 10);
  CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("mesh contract violations throw") {
  HandInstance h = hand_instance();
  MeshScratch sc;
  CHECK_THROWS_AS(mesh_inner_update(h.ms, h.ac, std::span<const Transition>(),
                                    h.jc, h.beta, h.lr_lagrange, h.lr_actor, sc),
                  std::invalid_argument);
  const MeshSnapshot snap = mesh_snapshot(h.ms, h.ac);
  CHECK_THROWS_AS(mesh_meta_gradient(h.ms, h.ac, snap,
                                     std::span<const Transition>(),
                                     h.batch.validate, h.lr_actor),
                  std::invalid_argument);
  CHECK_THROWS_AS(mesh_meta_gradient(h.ms, h.ac, snap, h.batch.train,
                                     std::span<const Transition>(), h.lr_actor),
                  std::invalid_argument);
}
