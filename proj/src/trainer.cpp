#include "softrl/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "softrl/mesh.hpp"
#include "softrl/metal.hpp"

namespace softrl {

namespace {

// Fixed purpose ids for the per-seed random streams. Keeping every purpose on
// its own stream is what lets two agents whose update rules coincide consume
// identical randomness even when one of them skips a draw-free computation.
enum : std::uint64_t {
  kStreamInit = 1,
  kStreamAction = 2,
  kStreamBatch = 3,
  kStreamLagrange = 4,
  kStreamTelemetry = 5,
  kStreamEnv = 6,
};

struct PendingStep {
  std::vector<double> s;
  std::vector<double> a;
  double r = 0.0;
  double c = 0.0;
};

// Windowed n-step aggregate starting at `begin`: r_sum = sum gamma^k r.
Transition assemble(const std::vector<PendingStep>& pending, std::size_t begin,
                    double gamma, const std::vector<double>& s_next,
                    double discount_prod) {
  Transition t;
  t.s = pending[begin].s;
  t.a = pending[begin].a;
  double g = 1.0;
  for (std::size_t k = begin; k < pending.size(); ++k) {
    t.r_sum += g * pending[k].r;
    t.c_sum += g * pending[k].c;
    g *= gamma;
  }
  t.s_next = s_next;
  t.discount_prod = discount_prod;
  return t;
}

AgentConfig resolve_agent_config(const ExperimentConfig& cfg) {
  AgentConfig a = cfg.agent_cfg;
  a.threshold_beta = cfg.threshold_beta;
  switch (cfg.agent) {
    case AgentKind::d4pg:
      a.lambda_init = 0.0;
      a.lagrange_update = false;
      break;
    case AgentKind::rs:
      a.fixed_lambda = cfg.rs_lambda;
      a.lambda_init = cfg.rs_lambda;
      a.lagrange_update = false;
      break;
    default:
      break;  // rc keeps its flags; metal/mesh always run the Lagrange rule
  }
  return a;
}

bool does_lagrange(const ExperimentConfig& cfg) {
  switch (cfg.agent) {
    case AgentKind::d4pg:
    case AgentKind::rs:
      return false;
    case AgentKind::rc:
      return cfg.agent_cfg.lagrange_update;
    case AgentKind::metal:
    case AgentKind::mesh:
      return true;
  }
  return false;
}

std::string run_tag(const ExperimentConfig& cfg, std::uint64_t seed) {
  return agent_kind_to_string(cfg.agent) + "_" + cfg.env_name + "_seed" +
         std::to_string(seed);
}

}  // namespace

std::string telemetry_csv_header() {
  return "episode,return,jc_episode,jc_running,lambda,alpha_lambda,scaled_lr,"
         "outer_loss,kappa_s,kappa_o";
}

std::string telemetry_csv_row(const TelemetryRow& r) {
  char buf[400];
  std::snprintf(buf, sizeof(buf),
                "%d,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g",
                r.episode, r.episode_return, r.jc_episode, r.jc_running,
                r.lambda, r.alpha_lambda, r.scaled_lr, r.outer_loss, r.kappa_s,
                r.kappa_o);
  return buf;
}

void write_telemetry_csv(const std::string& path,
                         const std::vector<TelemetryRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write telemetry: " + path);
  out << telemetry_csv_header() << "\n";
  for (const TelemetryRow& r : rows) out << telemetry_csv_row(r) << "\n";
}

std::vector<TelemetryRow> read_telemetry_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read telemetry: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty telemetry: " + path);
  if (line != telemetry_csv_header())
    throw std::runtime_error("bad telemetry header in " + path);
  std::vector<TelemetryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    TelemetryRow r;
    const int got = std::sscanf(
        line.c_str(), "%d,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf", &r.episode,
        &r.episode_return, &r.jc_episode, &r.jc_running, &r.lambda,
        &r.alpha_lambda, &r.scaled_lr, &r.outer_loss, &r.kappa_s, &r.kappa_o);
    if (got != 10) throw std::runtime_error("bad telemetry row in " + path);
    rows.push_back(r);
  }
  return rows;
}

RunArtifacts run_training_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                               bool write_files) {
  const AgentConfig acfg = resolve_agent_config(cfg);
  const auto env = make_env(cfg.env_name,
                            {cfg.safety_coefficient, cfg.threshold_beta},
                            cfg.episode_len);
  const CmdpSpec& spec = env->spec();

  Rng rng_init(mix_seed(seed, kStreamInit));
  Rng rng_action(mix_seed(seed, kStreamAction));
  Rng rng_batch(mix_seed(seed, kStreamBatch));
  Rng rng_lagrange(mix_seed(seed, kStreamLagrange));
  Rng rng_telemetry(mix_seed(seed, kStreamTelemetry));
  const std::uint64_t env_stream = mix_seed(seed, kStreamEnv);

  ActorCritic ac = make_actor_critic(spec, acfg, rng_init);
  MetaState meta;
  meta.alpha_lambda = cfg.metal_alpha_lambda_init;
  meta.lambda = ac.lambda;
  meta.lr_meta = cfg.metal_lr_meta;
  meta.lr_lagrange_base = acfg.lr_lagrange;
  MeshState ms;
  if (cfg.agent == AgentKind::mesh)
    ms = make_mesh_state(spec, acfg, cfg.mesh, rng_init);

  ReplayBuffer replay(static_cast<std::size_t>(acfg.replay_capacity));
  PenaltyBuffer penalties(static_cast<std::size_t>(acfg.penalty_capacity));
  LearnerScratch scratch;
  MeshScratch mscratch;
  Batch batch;

  const bool lagrange_on = does_lagrange(cfg);
  const int n_step = acfg.n_step;
  const double gamma = acfg.gamma;
  double gamma_n = 1.0;
  for (int k = 0; k < n_step; ++k) gamma_n *= gamma;

  double last_kappa_s = 0.0, last_kappa_o = 0.0;
  ParamVector theta_c_old;  // metal snapshot, reused across iterations

  auto current_lambda = [&]() {
    return cfg.agent == AgentKind::mesh ? ms.lambda : ac.lambda;
  };

  auto learn_once = [&]() {
    const bool have_penalty = penalties.size() > 0;
    double jc = cfg.threshold_beta;  // neutral: leaves lambda untouched
    if (lagrange_on && have_penalty) jc = penalties.sample_penalty(rng_lagrange);

    if (cfg.agent == AgentKind::mesh) {
      replay.sample_batch(static_cast<std::size_t>(acfg.batch_size),
                          acfg.split_fraction, rng_batch, batch);
      const bool meta_on = cfg.mesh.lr_meta != 0.0;
      MeshSnapshot snap;
      if (meta_on) snap = mesh_snapshot(ms, ac);
      const MeshInnerResult res = mesh_inner_update(
          ms, ac, batch.train, jc, cfg.threshold_beta, acfg.lr_lagrange,
          acfg.lr_actor, mscratch);
      if (meta_on) {
        const std::vector<double> g = mesh_meta_gradient(
            ms, ac, snap, batch.train, batch.validate, acfg.lr_actor);
        for (std::size_t p = 0; p < ms.phi.values.size(); ++p)
          ms.phi.values[p] -= cfg.mesh.lr_meta * g[p];
      }
      mesh_target_sync(ms, ac, acfg.target_update_period);
      last_kappa_s = res.kappa_s_mean;
      last_kappa_o = res.kappa_o_mean;
      return;
    }

    if (lagrange_on && have_penalty) {
      if (cfg.agent == AgentKind::metal) {
        meta.lambda = ac.lambda;
        ac.lambda = lagrange_step_metal(meta, jc, cfg.threshold_beta);
      } else {
        ac.lambda = lagrange_step_rc(ac.lambda, jc, cfg.threshold_beta,
                                     acfg.lr_lagrange);
      }
    }
    const bool meta_on = cfg.agent == AgentKind::metal &&
                         cfg.metal_lr_meta != 0.0 && lagrange_on && have_penalty;
    if (meta_on) theta_c_old = ac.theta_c;
    replay.sample_batch(static_cast<std::size_t>(acfg.batch_size),
                        acfg.split_fraction, rng_batch, batch);
    dual_step(ac, batch.train, ac.lambda, acfg.lr_actor, acfg.lr_critic,
              scratch);
    target_sync(ac, acfg.target_update_period);
    if (meta_on) {
      const double g =
          metal_meta_gradient(ac, theta_c_old, meta, batch.validate, jc,
                              cfg.threshold_beta, acfg.lr_critic);
      meta.alpha_lambda -= cfg.metal_lr_meta * g;
    }
  };

  RunArtifacts art;
  art.telemetry.reserve(static_cast<std::size_t>(cfg.episodes));
  std::vector<PendingStep> pending;
  std::vector<double> jc_window;
  const int W = cfg.effective_window();

  for (int episode = 0; episode < cfg.episodes; ++episode) {
    std::vector<double> obs =
        env->reset(mix_seed(env_stream, static_cast<std::uint64_t>(episode) + 1));
    double ep_return = 0.0, ep_penalty = 0.0;
    pending.clear();
    for (int t = 0; t < cfg.episode_len; ++t) {
      std::vector<double> a = act(ac.theta_a, ac.actor_shape, obs, spec, true,
                                  acfg.exploration_sigma, rng_action);
      const StepResult sr = env->step(a);
      ep_return += sr.reward;
      ep_penalty += sr.penalty;
      pending.push_back({std::move(obs), std::move(a), sr.reward, sr.penalty});
      if (static_cast<int>(pending.size()) == n_step) {
        replay.push_transition(assemble(pending, 0, gamma, sr.obs, gamma_n));
        pending.erase(pending.begin());
      }
      obs = sr.obs;
      if (static_cast<std::size_t>(replay.size()) >=
          static_cast<std::size_t>(acfg.warmup_transitions))
        learn_once();
      if (sr.done) break;
    }
    // Episode over: remaining windows are truncated tails, bootstrap off.
    for (std::size_t i = 0; i < pending.size(); ++i)
      replay.push_transition(assemble(pending, i, gamma, obs, 0.0));

    const double jc_episode = ep_penalty / static_cast<double>(cfg.episode_len);
    penalties.push_episode_penalty(jc_episode);
    jc_window.push_back(jc_episode);
    const int w_now = static_cast<int>(jc_window.size()) < W
                          ? static_cast<int>(jc_window.size())
                          : W;
    double jc_running = 0.0;
    for (std::size_t i = jc_window.size() - static_cast<std::size_t>(w_now);
         i < jc_window.size(); ++i)
      jc_running += jc_window[i];
    jc_running /= w_now;

    TelemetryRow row;
    row.episode = episode;
    row.episode_return = ep_return;
    row.jc_episode = jc_episode;
    row.jc_running = jc_running;
    row.lambda = current_lambda();
    row.alpha_lambda = cfg.agent == AgentKind::metal ? meta.alpha_lambda : 0.0;
    row.scaled_lr = cfg.agent == AgentKind::metal
                        ? acfg.lr_lagrange * std::exp(meta.alpha_lambda)
                        : acfg.lr_lagrange;
    if (replay.size() >= static_cast<std::size_t>(acfg.batch_size)) {
      replay.sample_batch(static_cast<std::size_t>(acfg.batch_size),
                          acfg.split_fraction, rng_telemetry, batch);
      row.outer_loss =
          cfg.agent == AgentKind::mesh
              ? mesh_outer_loss(ms, ac, batch.validate)
              : outer_loss(ac, current_lambda(), batch.validate,
                           cfg.outer_loss_kind, scratch);
    }
    row.kappa_s = last_kappa_s;
    row.kappa_o = last_kappa_o;
    art.telemetry.push_back(row);
  }

  art.summary = summarize(art.telemetry, W, cfg.effective_kappa(),
                          cfg.threshold_beta);
  art.summary.agent = agent_kind_to_string(cfg.agent);
  art.summary.env = cfg.env_name;
  art.summary.seed = seed;
  art.summary.safety_coefficient = cfg.safety_coefficient;
  art.summary.threshold_beta = cfg.threshold_beta;

  if (write_files) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.output_path);
    const std::string tag = run_tag(cfg, seed);
    art.telemetry_path = cfg.output_path + "/telemetry_" + tag + ".csv";
    write_telemetry_csv(art.telemetry_path, art.telemetry);
    save_params(cfg.output_path + "/" + tag + "_actor.ckpt", ac.theta_a);
    save_params(cfg.output_path + "/" + tag + "_critic.ckpt", ac.theta_c);
    if (cfg.agent == AgentKind::mesh) {
      save_params(cfg.output_path + "/" + tag + "_phi.ckpt", ms.phi);
      save_params(cfg.output_path + "/" + tag + "_critic_in.ckpt", ms.theta_c_in);
      save_params(cfg.output_path + "/" + tag + "_critic_out.ckpt", ms.theta_c_out);
    }
  }
  return art;
}

std::vector<RunSummary> run_training(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<RunSummary> out;
  for (const std::uint64_t seed : cfg.seeds)
    out.push_back(run_training_seed(cfg, seed, /*write_files=*/true).summary);
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_path);
  std::ofstream sf(cfg.output_path + "/summary.csv", std::ios::binary);
  if (!sf) throw std::runtime_error("cannot write summary.csv");
  sf << summary_csv_header() << "\n";
  for (const RunSummary& s : out) sf << summary_csv_row(s) << "\n";
  return out;
}

}  // namespace softrl
