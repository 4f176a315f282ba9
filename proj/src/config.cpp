#include "softrl/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace softrl {

namespace {

std::string trim(const std::string& s) {
  const char* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& s) {
  std::size_t pos = 0;
  double v;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("not a number: '" + s + "'");
  }
  if (pos != s.size()) throw std::invalid_argument("trailing junk in number: '" + s + "'");
  return v;
}

long parse_int(const std::string& s) {
  std::size_t pos = 0;
  long v;
  try {
    v = std::stol(s, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("not an integer: '" + s + "'");
  }
  if (pos != s.size()) throw std::invalid_argument("trailing junk in integer: '" + s + "'");
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("not a boolean: '" + s + "'");
}

template <typename T, typename F>
std::vector<T> parse_list(const std::string& s, F item) {
  std::vector<T> out;
  std::string cur;
  std::stringstream ss(s);
  while (std::getline(ss, cur, ',')) {
    cur = trim(cur);
    if (cur.empty()) throw std::invalid_argument("empty list element in '" + s + "'");
    out.push_back(item(cur));
  }
  if (out.empty()) throw std::invalid_argument("empty list: '" + s + "'");
  return out;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_int_list(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

std::string fmt_seed_list(const std::vector<std::uint64_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

struct Entry {
  const char* key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

const std::vector<Entry>& registry() {
  static const std::vector<Entry> table = {
      {"agent",
       [](ExperimentConfig& c, const std::string& v) { c.agent = agent_kind_from_string(v); },
       [](const ExperimentConfig& c) { return agent_kind_to_string(c.agent); }},
      {"env",
       [](ExperimentConfig& c, const std::string& v) {
         if (v != "pointmass1d" && v != "lqr")
           throw std::invalid_argument("unknown env: " + v);
         c.env_name = v;
       },
       [](const ExperimentConfig& c) { return c.env_name; }},
      {"safety_coefficient",
       [](ExperimentConfig& c, const std::string& v) { c.safety_coefficient = parse_double(v); },
       [](const ExperimentConfig& c) { return fmt_double(c.safety_coefficient); }},
      {"threshold_beta",
       [](ExperimentConfig& c, const std::string& v) { c.threshold_beta = parse_double(v); },
       [](const ExperimentConfig& c) { return fmt_double(c.threshold_beta); }},
      {"seeds",
       [](ExperimentConfig& c, const std::string& v) {
         c.seeds = parse_list<std::uint64_t>(v, [](const std::string& s) {
           const long x = parse_int(s);
           if (x < 0) throw std::invalid_argument("seed must be >= 0");
           return static_cast<std::uint64_t>(x);
         });
       },
       [](const ExperimentConfig& c) { return fmt_seed_list(c.seeds); }},
      {"episodes",
       [](ExperimentConfig& c, const std::string& v) { c.episodes = static_cast<int>(parse_int(v)); },
       [](const ExperimentConfig& c) { return std::to_string(c.episodes); }},
      {"episode_len",
       [](ExperimentConfig& c, const std::string& v) { c.episode_len = static_cast<int>(parse_int(v)); },
       [](const ExperimentConfig& c) { return std::to_string(c.episode_len); }},
      {"kappa",
       [](ExperimentConfig& c, const std::string& v) { c.kappa = parse_double(v); },
       [](const ExperimentConfig& c) { return fmt_double(c.kappa); }},
      {"window",
       [](ExperimentConfig& c, const std::string& v) { c.window = static_cast<int>(parse_int(v)); },
       [](const ExperimentConfig& c) { return std::to_string(c.window); }},
      {"output_path",
       [](ExperimentConfig& c, const std::string& v) { c.output_path = v; },
       [](const ExperimentConfig& c) { return c.output_path; }},
      {"agent.gamma",
       [](ExperimentConfig& c, const std::string& v) { c.agent_cfg.gamma = parse_double(v); },
       [](const ExperimentConfig& c) { return fmt_double(c.agent_cfg.gamma); }},
      {"agent.n_step",
       [](ExperimentConfig& c, const std::string& v) { c.agent_cfg.n_step = static_cast<int>(parse_int(v)); },
       [](const ExperimentConfig& c) { return std::to_string(c.agent_cfg.n_step); }},
      {"agent.lr_actor",
       [](ExperimentConfig& c, const std::string& v) { c.agent_cfg.lr_actor = parse_double(v); },
       [](const ExperimentConfig& c) { return fmt_double(c.agent_cfg.lr_actor); }},
      {"agent.lr_critic",
       [](ExperimentConfig& c, const std::string& v) { c.agent_cfg.lr_critic = parse_double(v); },
       [](const ExperimentConfig& c) { return fmt_double(c.agent_cfg.lr_critic); }},
      {"agent.lr_lagrange",
       [](ExperimentConfig& c, const std::string& v) { c.agent_cfg.lr_lagrange = parse_double(v); },
       [](const ExperimentConfig& c) { return fmt_double(c.agent_cfg.lr_lagrange); }},
      {"agent.target_update_period",
       [](ExperimentConfig& c, const std::string& v) {
         c.agent_cfg.target_update_period = static_cast<int>(parse_int(v));
       },
       [](const ExperimentConfig& c) { return std::to_string(c.agent_cfg.target_update_period); }},
      {"agent.exploration_sigma",
       [](ExperimentConfig& c, const std::string& v) { c.agent_cfg.exploration_sigma = parse_double(v); },
       [](const ExperimentConfig& c) { return fmt_double(c.agent_cfg.exploration_sigma); }},
      {"agent.batch_size",
       [](ExperimentConfig& c, const std::string& v) { c.agent_cfg.batch_size = static_cast<int>(parse_int(v)); },
       [](const ExperimentConfig& c) { return std::to_string(c.agent_cfg.batch_size); }},
      {"agent.split_fraction",
       [](ExperimentConfig& c, const std::string& v) { c.agent_cfg.split_fraction = parse_double(v); },
       [](const ExperimentConfig& c) { return fmt_double(c.agent_cfg.split_fraction); }},
      {"agent.lambda_init",
       [](ExperimentConfig& c, const std::string& v) { c.agent_cfg.lambda_init = parse_double(v); },
       [](const ExperimentConfig& c) { return fmt_double(c.agent_cfg.lambda_init); }},
      {"agent.lagrange_update",
       [](ExperimentConfig& c, const std::string& v) { c.agent_cfg.lagrange_update = parse_bool(v); },
       [](const ExperimentConfig& c) { return c.agent_cfg.lagrange_update ? "true" : "false"; }},
      {"agent.actor_hidden",
       [](ExperimentConfig& c, const std::string& v) {
         c.agent_cfg.actor_hidden = parse_list<int>(v, [](const std::string& s) {
           return static_cast<int>(parse_int(s));
         });
       },
       [](const ExperimentConfig& c) { return fmt_int_list(c.agent_cfg.actor_hidden); }},
      {"agent.critic_hidden",
       [](ExperimentConfig& c, const std::string& v) {
         c.agent_cfg.critic_hidden = parse_list<int>(v, [](const std::string& s) {
           return static_cast<int>(parse_int(s));
         });
       },
       [](const ExperimentConfig& c) { return fmt_int_list(c.agent_cfg.critic_hidden); }},
      {"agent.layer_norm",
       [](ExperimentConfig& c, const std::string& v) { c.agent_cfg.layer_norm = parse_bool(v); },
       [](const ExperimentConfig& c) { return c.agent_cfg.layer_norm ? "true" : "false"; }},
      {"agent.replay_capacity",
       [](ExperimentConfig& c, const std::string& v) { c.agent_cfg.replay_capacity = static_cast<int>(parse_int(v)); },
       [](const ExperimentConfig& c) { return std::to_string(c.agent_cfg.replay_capacity); }},
      {"agent.penalty_capacity",
       [](ExperimentConfig& c, const std::string& v) { c.agent_cfg.penalty_capacity = static_cast<int>(parse_int(v)); },
       [](const ExperimentConfig& c) { return std::to_string(c.agent_cfg.penalty_capacity); }},
      {"agent.warmup_transitions",
       [](ExperimentConfig& c, const std::string& v) { c.agent_cfg.warmup_transitions = static_cast<int>(parse_int(v)); },
       [](const ExperimentConfig& c) { return std::to_string(c.agent_cfg.warmup_transitions); }},
      {"metal.lr_meta",
       [](ExperimentConfig& c, const std::string& v) { c.metal_lr_meta = parse_double(v); },
       [](const ExperimentConfig& c) { return fmt_double(c.metal_lr_meta); }},
      {"metal.alpha_lambda_init",
       [](ExperimentConfig& c, const std::string& v) { c.metal_alpha_lambda_init = parse_double(v); },
       [](const ExperimentConfig& c) { return fmt_double(c.metal_alpha_lambda_init); }},
      {"metal.outer_loss_kind",
       [](ExperimentConfig& c, const std::string& v) { c.outer_loss_kind = outer_loss_kind_from_string(v); },
       [](const ExperimentConfig& c) { return outer_loss_kind_to_string(c.outer_loss_kind); }},
      {"rs.lambda",
       [](ExperimentConfig& c, const std::string& v) { c.rs_lambda = parse_double(v); },
       [](const ExperimentConfig& c) { return fmt_double(c.rs_lambda); }},
      {"mesh.lambda_hat",
       [](ExperimentConfig& c, const std::string& v) { c.mesh.lambda_hat = parse_double(v); },
       [](const ExperimentConfig& c) { return fmt_double(c.mesh.lambda_hat); }},
      {"mesh.upsilon_s",
       [](ExperimentConfig& c, const std::string& v) { c.mesh.upsilon_s = parse_double(v); },
       [](const ExperimentConfig& c) { return fmt_double(c.mesh.upsilon_s); }},
      {"mesh.upsilon_o",
       [](ExperimentConfig& c, const std::string& v) { c.mesh.upsilon_o = parse_double(v); },
       [](const ExperimentConfig& c) { return fmt_double(c.mesh.upsilon_o); }},
      {"mesh.formulation",
       [](ExperimentConfig& c, const std::string& v) { c.mesh.formulation = mesh_formulation_from_string(v); },
       [](const ExperimentConfig& c) { return mesh_formulation_to_string(c.mesh.formulation); }},
      {"mesh.phi_hidden",
       [](ExperimentConfig& c, const std::string& v) {
         c.mesh.phi_hidden = parse_list<int>(v, [](const std::string& s) {
           return static_cast<int>(parse_int(s));
         });
       },
       [](const ExperimentConfig& c) { return fmt_int_list(c.mesh.phi_hidden); }},
      {"mesh.lr_meta",
       [](ExperimentConfig& c, const std::string& v) { c.mesh.lr_meta = parse_double(v); },
       [](const ExperimentConfig& c) { return fmt_double(c.mesh.lr_meta); }},
      {"mesh.lr_critic_in",
       [](ExperimentConfig& c, const std::string& v) { c.mesh.lr_critic_in = parse_double(v); },
       [](const ExperimentConfig& c) { return fmt_double(c.mesh.lr_critic_in); }},
      {"mesh.lr_critic_out",
       [](ExperimentConfig& c, const std::string& v) { c.mesh.lr_critic_out = parse_double(v); },
       [](const ExperimentConfig& c) { return fmt_double(c.mesh.lr_critic_out); }},
  };
  return table;
}

}  // namespace

void apply_override(ExperimentConfig& cfg, const std::string& key,
                    const std::string& value) {
  for (const Entry& e : registry()) {
    if (key == e.key) {
      e.set(cfg, value);
      return;
    }
  }
  throw std::invalid_argument("unknown config key: '" + key + "'");
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const Entry& e : registry()) {
    out += e.key;
    out += " = ";
    out += e.get(cfg);
    out += "\n";
  }
  return out;
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw std::invalid_argument("line " + std::to_string(lineno) + ": empty key");
    try {
      apply_override(cfg, key, value);
    } catch (const std::invalid_argument& ex) {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const Entry& e : registry()) keys.push_back(e.key);
  return keys;
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw std::invalid_argument("seeds must be nonempty");
  if (episodes < 1) throw std::invalid_argument("episodes must be >= 1");
  if (episode_len < 1) throw std::invalid_argument("episode_len must be >= 1");
  if (window < 1) throw std::invalid_argument("window must be >= 1");
  if (kappa < 0.0) throw std::invalid_argument("kappa must be >= 0");
  if (threshold_beta < 0.0) throw std::invalid_argument("threshold_beta must be >= 0");
  if (!(safety_coefficient > 0.0 && safety_coefficient <= 1.0))
    throw std::invalid_argument("safety_coefficient must be in (0, 1]");
  if (rs_lambda < 0.0) throw std::invalid_argument("rs.lambda must be >= 0");
  if (metal_lr_meta < 0.0) throw std::invalid_argument("metal.lr_meta must be >= 0");
  if (!(mesh.lambda_hat >= 0.0 && mesh.upsilon_s > 0.0 && mesh.upsilon_o > 0.0))
    throw std::invalid_argument("mesh bounds must be positive, lambda_hat >= 0");
  if (mesh.lr_meta < 0.0 || mesh.lr_critic_in <= 0.0 || mesh.lr_critic_out <= 0.0)
    throw std::invalid_argument("mesh learning rates must be positive (lr_meta >= 0)");
  agent_cfg.validate();
  // The reference hyperparameter table pairs alpha_1 = 1e-3 with net rates of
  // 1e-4, which breaks its own stated ordering; surface it rather than fail.
  if (!(agent_cfg.lr_lagrange < agent_cfg.lr_actor &&
        agent_cfg.lr_actor <= agent_cfg.lr_critic)) {
    std::fprintf(stderr,
                 "warning: learning rates violate lr_lagrange < lr_actor <= "
                 "lr_critic (%g, %g, %g)\n",
                 agent_cfg.lr_lagrange, agent_cfg.lr_actor, agent_cfg.lr_critic);
  }
}

}  // namespace softrl
