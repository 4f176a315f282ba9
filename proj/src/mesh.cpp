#include "softrl/mesh.hpp"

#include <cmath>
#include <stdexcept>

namespace softrl {

MeshFormulation mesh_formulation_from_string(const std::string& s) {
  if (s == "offset_on_penalty") return MeshFormulation::offset_on_penalty;
  if (s == "scale_whole") return MeshFormulation::scale_whole;
  throw std::invalid_argument("unknown mesh formulation: " + s);
}

std::string mesh_formulation_to_string(MeshFormulation f) {
  return f == MeshFormulation::offset_on_penalty ? "offset_on_penalty"
                                                 : "scale_whole";
}

MeshState make_mesh_state(const CmdpSpec& env, const AgentConfig& cfg,
                          const MeshConfig& mcfg, Rng& rng) {
  MeshState ms;
  ms.cfg = mcfg;
  ms.phi_shape.input_dim = env.obs_dim + env.act_dim + 2;  // (s, a, r_sum, c_sum)
  ms.phi_shape.hidden = mcfg.phi_hidden;
  ms.phi_shape.output_dim = 2;  // raw scale / offset heads, squashed outside
  ms.phi_shape.hidden_act = Act::elu;
  ms.phi_shape.output_act = Act::identity;
  ms.critic_shape = make_critic_shape(env, cfg);
  ms.phi = init_params(ms.phi_shape, rng);
  ms.theta_c_in = init_params(ms.critic_shape, rng);
  ms.theta_c_out = init_params(ms.critic_shape, rng);
  ms.theta_c_in_target = ms.theta_c_in;
  ms.theta_c_out_target = ms.theta_c_out;
  ms.lambda = cfg.lambda_init;
  return ms;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void fill_phi_input(std::span<const double> s, std::span<const double> a,
                    double r_sum, double c_sum, std::vector<double>& x) {
  x.resize(s.size() + a.size() + 2);
  std::size_t k = 0;
  for (const double v : s) x[k++] = v;
  for (const double v : a) x[k++] = v;
  x[k++] = r_sum;
  x[k] = c_sum;
}

double shaped(MeshFormulation f, double lambda_hat, double r, double c,
              const Kappas& kp) {
  if (f == MeshFormulation::offset_on_penalty)
    return r - kp.kappa_s * lambda_hat * c + kp.kappa_o;
  return kp.kappa_s * (r - lambda_hat * c) + kp.kappa_o;
}

}  // namespace

Kappas mesh_kappas(const ParamVector& phi, const MlpShape& phi_shape,
                   std::span<const double> s, std::span<const double> a,
                   double r_sum, double c_sum, const MeshConfig& cfg) {
  std::vector<double> x;
  fill_phi_input(s, a, r_sum, c_sum, x);
  const std::vector<double> raw = forward(phi, phi_shape, x);
  Kappas kp;
  kp.kappa_s = cfg.upsilon_s * sigmoid(raw[0]);
  kp.kappa_o = cfg.upsilon_o * std::tanh(raw[1]);
  return kp;
}

double meta_shaped_reward(const ParamVector& phi, const MlpShape& phi_shape,
                          std::span<const double> s, std::span<const double> a,
                          double r_sum, double c_sum, const MeshConfig& cfg) {
  const Kappas kp = mesh_kappas(phi, phi_shape, s, a, r_sum, c_sum, cfg);
  return shaped(cfg.formulation, cfg.lambda_hat, r_sum, c_sum, kp);
}

MeshInnerResult mesh_inner_update(MeshState& ms, ActorCritic& ac,
                                  std::span<const Transition> train, double J_C,
                                  double beta, double lr_lagrange,
                                  double lr_actor, MeshScratch& sc) {
  if (train.empty()) throw std::invalid_argument("mesh_inner_update: empty train split");
  const int n = static_cast<int>(train.size());
  const int obs = ac.actor_shape.input_dim;
  const int act = ac.actor_shape.output_dim;

  MeshInnerResult res;
  res.lambda_prime = std::max(0.0, ms.lambda - lr_lagrange * (beta - J_C));
  ms.lambda = res.lambda_prime;

  sc.S.resize(obs, n);
  sc.SA.resize(obs + act, n);
  sc.Snext.resize(obs, n);
  sc.Xphi.resize(obs + act + 2, n);
  for (int i = 0; i < n; ++i) {
    const Transition& t = train[static_cast<size_t>(i)];
    for (int d = 0; d < obs; ++d) {
      sc.S(d, i) = t.s[static_cast<size_t>(d)];
      sc.Snext(d, i) = t.s_next[static_cast<size_t>(d)];
      sc.SA(d, i) = t.s[static_cast<size_t>(d)];
      sc.Xphi(d, i) = t.s[static_cast<size_t>(d)];
    }
    for (int d = 0; d < act; ++d) {
      sc.SA(obs + d, i) = t.a[static_cast<size_t>(d)];
      sc.Xphi(obs + d, i) = t.a[static_cast<size_t>(d)];
    }
    sc.Xphi(obs + act, i) = t.r_sum;
    sc.Xphi(obs + act + 1, i) = t.c_sum;
  }

  forward_batch(ac.theta_a_target, ac.actor_shape, sc.Snext, sc.actor_target_ws);
  sc.SAnext.resize(obs + act, n);
  sc.SAnext.topRows(obs) = sc.Snext;
  sc.SAnext.bottomRows(act) = sc.actor_target_ws.output();
  forward_batch(ms.theta_c_in_target, ms.critic_shape, sc.SAnext, sc.tin_ws);
  forward_batch(ms.theta_c_out_target, ms.critic_shape, sc.SAnext, sc.tout_ws);
  forward_batch(ms.phi, ms.phi_shape, sc.Xphi, sc.phi_ws);
  forward_batch(ms.theta_c_in, ms.critic_shape, sc.SA, sc.cin_ws);
  forward_batch(ms.theta_c_out, ms.critic_shape, sc.SA, sc.cout_ws);

  sc.delta_in.resize(n);
  sc.delta_out.resize(n);
  for (int i = 0; i < n; ++i) {
    const Transition& t = train[static_cast<size_t>(i)];
    Kappas kp;
    kp.kappa_s = ms.cfg.upsilon_s * sigmoid(sc.phi_ws.output()(0, i));
    kp.kappa_o = ms.cfg.upsilon_o * std::tanh(sc.phi_ws.output()(1, i));
    res.kappa_s_mean += kp.kappa_s;
    res.kappa_o_mean += kp.kappa_o;
    const double r_meta =
        shaped(ms.cfg.formulation, ms.cfg.lambda_hat, t.r_sum, t.c_sum, kp);
    sc.delta_in(i) =
        r_meta + t.discount_prod * sc.tin_ws.output()(0, i) - sc.cin_ws.output()(0, i);
    sc.delta_out(i) = t.r_sum - res.lambda_prime * t.c_sum +
                      t.discount_prod * sc.tout_ws.output()(0, i) -
                      sc.cout_ws.output()(0, i);
  }
  res.kappa_s_mean /= n;
  res.kappa_o_mean /= n;
  res.inner_loss = sc.delta_in.squaredNorm() / n;
  res.outer_critic_loss = sc.delta_out.squaredNorm() / n;

  sc.grad_cin.assign(ms.theta_c_in.values.size(), 0.0);
  sc.grad_cout.assign(ms.theta_c_out.values.size(), 0.0);
  sc.cot.resize(1, n);
  sc.cot.row(0) = sc.delta_in.transpose();
  backward_batch(ms.theta_c_in, ms.critic_shape, sc.SA, sc.cot, sc.cin_ws,
                 sc.grad_cin);
  sc.cot.row(0) = sc.delta_out.transpose();
  backward_batch(ms.theta_c_out, ms.critic_shape, sc.SA, sc.cot, sc.cout_ws,
                 sc.grad_cout);
  const double k_in = 2.0 * ms.cfg.lr_critic_in / n;
  const double k_out = 2.0 * ms.cfg.lr_critic_out / n;
  for (std::size_t k = 0; k < ms.theta_c_in.values.size(); ++k)
    ms.theta_c_in.values[k] += k_in * sc.grad_cin[k];
  for (std::size_t k = 0; k < ms.theta_c_out.values.size(); ++k)
    ms.theta_c_out.values[k] += k_out * sc.grad_cout[k];

  // Actor ascent through the freshly updated inner critic. Unlike the other
  // learners this deliberately reads the post-update critic; the meta
  // gradient over phi is exactly the sensitivity of this coupling.
  forward_batch(ac.theta_a, ac.actor_shape, sc.S, sc.actor_ws);
  sc.SApi.resize(obs + act, n);
  sc.SApi.topRows(obs) = sc.S;
  sc.SApi.bottomRows(act) = sc.actor_ws.output();
  forward_batch(ms.theta_c_in, ms.critic_shape, sc.SApi, sc.pi_cin_ws);
  sc.cot.setOnes(1, n);
  sc.grad_a.assign(ac.theta_a.values.size(), 0.0);
  backward_batch(ms.theta_c_in, ms.critic_shape, sc.SApi, sc.cot, sc.pi_cin_ws,
                 std::span<double>(), &sc.Gin);
  backward_batch(ac.theta_a, ac.actor_shape, sc.S,
                 Eigen::MatrixXd(sc.Gin.bottomRows(act)), sc.actor_ws, sc.grad_a);
  const double k_a = lr_actor / n;
  for (std::size_t k = 0; k < ac.theta_a.values.size(); ++k)
    ac.theta_a.values[k] += k_a * sc.grad_a[k];
  ac.lambda = res.lambda_prime;
  ac.step_counter += 1;
  return res;
}

void mesh_target_sync(MeshState& ms, ActorCritic& ac, int period) {
  if (period < 1) throw std::invalid_argument("mesh_target_sync: period must be >= 1");
  if (ac.step_counter > 0 && ac.step_counter % period == 0) {
    ac.theta_a_target = ac.theta_a;
    ms.theta_c_in_target = ms.theta_c_in;
    ms.theta_c_out_target = ms.theta_c_out;
  }
}

double mesh_outer_loss(const MeshState& ms, const ActorCritic& ac,
                       std::span<const Transition> validate) {
  if (validate.empty()) throw std::invalid_argument("mesh_outer_loss: empty split");
  const int act = ac.actor_shape.output_dim;
  const int obs = ac.actor_shape.input_dim;
  std::vector<double> a(static_cast<size_t>(act));
  std::vector<double> sa(static_cast<size_t>(obs + act));
  std::vector<double> gin(static_cast<size_t>(obs + act));
  MlpWorkspace aws, cws;
  const double one = 1.0;
  double total = 0.0;
  for (const Transition& t : validate) {
    forward(ac.theta_a, ac.actor_shape, t.s, aws, a);
    for (int i = 0; i < obs; ++i) sa[static_cast<size_t>(i)] = t.s[static_cast<size_t>(i)];
    for (int i = 0; i < act; ++i) sa[static_cast<size_t>(obs + i)] = a[static_cast<size_t>(i)];
    grad_input(ms.theta_c_out, ms.critic_shape, sa,
               std::span<const double>(&one, 1), cws, gin);
    double sq = 0.0;
    for (int i = 0; i < act; ++i) {
      const double g = gin[static_cast<size_t>(obs + i)];
      sq += g * g;
    }
    total += sq;
  }
  return total / static_cast<double>(validate.size());
}

MeshSnapshot mesh_snapshot(const MeshState& ms, const ActorCritic& ac) {
  return MeshSnapshot{ac.theta_a, ms.theta_c_in};
}

std::vector<double> mesh_meta_gradient(const MeshState& after,
                                       const ActorCritic& ac_after,
                                       const MeshSnapshot& before,
                                       std::span<const Transition> train,
                                       std::span<const Transition> validate,
                                       double lr_actor) {
  if (train.empty() || validate.empty())
    throw std::invalid_argument("mesh_meta_gradient: empty split");
  const int obs = ac_after.actor_shape.input_dim;
  const int act = ac_after.actor_shape.output_dim;
  const std::size_t na = ac_after.theta_a.values.size();
  const std::size_t nc = after.theta_c_in.values.size();
  const std::size_t np = after.phi.values.size();
  MlpWorkspace wa, wc;
  std::vector<double> a(static_cast<size_t>(act));
  std::vector<double> sa(static_cast<size_t>(obs + act));
  std::vector<double> gin(static_cast<size_t>(obs + act));
  std::vector<double> ga(static_cast<size_t>(act));
  const double one = 1.0;

  // b = d outer / d theta_a' = -(2/|V|) sum_j (d pi / d theta)^T grad_a Q_out
  std::vector<double> b(na, 0.0);
  for (const Transition& t : validate) {
    forward(ac_after.theta_a, ac_after.actor_shape, t.s, wa, a);
    for (int i = 0; i < obs; ++i) sa[static_cast<size_t>(i)] = t.s[static_cast<size_t>(i)];
    for (int i = 0; i < act; ++i) sa[static_cast<size_t>(obs + i)] = a[static_cast<size_t>(i)];
    grad_input(after.theta_c_out, after.critic_shape, sa,
               std::span<const double>(&one, 1), wc, gin);
    for (int i = 0; i < act; ++i) ga[static_cast<size_t>(i)] = gin[static_cast<size_t>(obs + i)];
    grad_params(ac_after.theta_a, ac_after.actor_shape, t.s, ga, wa, b,
                /*accumulate=*/true);
  }
  const double bscale = -2.0 / static_cast<double>(validate.size());
  for (double& v : b) v *= bscale;

  // w = (lr_actor/|T|) sum_i H_i^T u_i with u_i the actor JVP along b and
  // H_i the mixed action/parameter curvature of the updated inner critic,
  // taken by central difference over the action at a* = pi_old(s_i).
  std::vector<double> u(static_cast<size_t>(act));
  std::vector<double> w(nc, 0.0);
  std::vector<double> gp(nc), gm(nc);
  const double eps = 1e-6;
  for (const Transition& t : train) {
    jvp_params(before.theta_a, ac_after.actor_shape, t.s, b, wa, u);
    double norm = 0.0;
    for (const double v : u) norm += v * v;
    norm = std::sqrt(norm);
    if (norm < 1e-300) continue;
    forward(before.theta_a, ac_after.actor_shape, t.s, wa, a);
    for (int i = 0; i < obs; ++i) sa[static_cast<size_t>(i)] = t.s[static_cast<size_t>(i)];
    for (int i = 0; i < act; ++i)
      sa[static_cast<size_t>(obs + i)] =
          a[static_cast<size_t>(i)] + eps * u[static_cast<size_t>(i)] / norm;
    grad_params(after.theta_c_in, after.critic_shape, sa,
                std::span<const double>(&one, 1), wc, gp);
    for (int i = 0; i < act; ++i)
      sa[static_cast<size_t>(obs + i)] =
          a[static_cast<size_t>(i)] - eps * u[static_cast<size_t>(i)] / norm;
    grad_params(after.theta_c_in, after.critic_shape, sa,
                std::span<const double>(&one, 1), wc, gm);
    const double hs = norm / (2.0 * eps);
    for (std::size_t k = 0; k < nc; ++k) w[k] += hs * (gp[k] - gm[k]);
  }
  const double wscale = lr_actor / static_cast<double>(train.size());
  for (double& v : w) v *= wscale;

  // Per train item: s_k = (2 lr_in/|T|) <w, grad Q_in at the OLD inner
  // critic>, then e_k through the shaping net heads in one reverse pass.
  std::vector<double> grad(np, 0.0);
  std::vector<double> d(nc);
  std::vector<double> xphi;
  std::vector<double> raw(2), cot2(2);
  std::vector<double> e(np);
  const double sfac_base = 2.0 * after.cfg.lr_critic_in / static_cast<double>(train.size());
  for (const Transition& t : train) {
    for (int i = 0; i < obs; ++i) sa[static_cast<size_t>(i)] = t.s[static_cast<size_t>(i)];
    for (int i = 0; i < act; ++i) sa[static_cast<size_t>(obs + i)] = t.a[static_cast<size_t>(i)];
    grad_params(before.theta_c_in, after.critic_shape, sa,
                std::span<const double>(&one, 1), wc, d);
    double ip = 0.0;
    for (std::size_t k = 0; k < nc; ++k) ip += w[k] * d[k];
    const double s_k = sfac_base * ip;
    if (s_k == 0.0) continue;
    fill_phi_input(t.s, t.a, t.r_sum, t.c_sum, xphi);
    forward(after.phi, after.phi_shape, xphi, wa, raw);
    const double sig = sigmoid(raw[0]);
    const double th = std::tanh(raw[1]);
    double dks, dko;
    if (after.cfg.formulation == MeshFormulation::offset_on_penalty) {
      dks = -after.cfg.lambda_hat * t.c_sum;
      dko = 1.0;
    } else {
      dks = t.r_sum - after.cfg.lambda_hat * t.c_sum;
      dko = 1.0;
    }
    cot2[0] = dks * after.cfg.upsilon_s * sig * (1.0 - sig);
    cot2[1] = dko * after.cfg.upsilon_o * (1.0 - th * th);
    grad_params(after.phi, after.phi_shape, xphi, cot2, wa, e);
    for (std::size_t p = 0; p < np; ++p) grad[p] += s_k * e[p];
  }
  return grad;
}

std::vector<double> fd_mesh_oracle(const MeshState& ms, const ActorCritic& ac,
                                   const Batch& batch, double J_C, double beta,
                                   double lr_lagrange, double lr_actor,
                                   double h) {
  MeshScratch scratch;
  const int obs = ac.actor_shape.input_dim;
  const int act = ac.actor_shape.output_dim;
  const double one = 1.0;
  MlpWorkspace wa, wc;

  // Base inner update, then freeze the stop-gradient targets t_j.
  MeshState ms0 = ms;
  ActorCritic ac0 = ac;
  mesh_inner_update(ms0, ac0, batch.train, J_C, beta, lr_lagrange, lr_actor,
                    scratch);
  std::vector<std::vector<double>> targets;
  targets.reserve(batch.validate.size());
  std::vector<double> a(static_cast<size_t>(act));
  std::vector<double> sa(static_cast<size_t>(obs + act));
  std::vector<double> gin(static_cast<size_t>(obs + act));
  for (const Transition& t : batch.validate) {
    forward(ac0.theta_a, ac0.actor_shape, t.s, wa, a);
    for (int i = 0; i < obs; ++i) sa[static_cast<size_t>(i)] = t.s[static_cast<size_t>(i)];
    for (int i = 0; i < act; ++i) sa[static_cast<size_t>(obs + i)] = a[static_cast<size_t>(i)];
    grad_input(ms0.theta_c_out, ms0.critic_shape, sa,
               std::span<const double>(&one, 1), wc, gin);
    std::vector<double> tj(static_cast<size_t>(act));
    for (int i = 0; i < act; ++i)
      tj[static_cast<size_t>(i)] = gin[static_cast<size_t>(obs + i)] + a[static_cast<size_t>(i)];
    targets.push_back(std::move(tj));
  }

  const std::size_t np = ms.phi.values.size();
  std::vector<double> grad(np, 0.0);
  const double signs[2] = {1.0, -1.0};
  for (std::size_t p = 0; p < np; ++p) {
    double vals[2] = {0.0, 0.0};
    for (int k = 0; k < 2; ++k) {
      MeshState msP = ms;
      ActorCritic acP = ac;
      msP.phi.values[p] += signs[k] * h;
      mesh_inner_update(msP, acP, batch.train, J_C, beta, lr_lagrange, lr_actor,
                        scratch);
      double J = 0.0;
      for (std::size_t j = 0; j < batch.validate.size(); ++j) {
        forward(acP.theta_a, acP.actor_shape, batch.validate[j].s, wa, a);
        double sq = 0.0;
        for (int i = 0; i < act; ++i) {
          const double diff = targets[j][static_cast<size_t>(i)] - a[static_cast<size_t>(i)];
          sq += diff * diff;
        }
        J += sq;
      }
      vals[k] = J / static_cast<double>(batch.validate.size());
    }
    grad[p] = (vals[0] - vals[1]) / (2.0 * h);
  }
  return grad;
}

}  // namespace softrl
