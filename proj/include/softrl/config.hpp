#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "softrl/agent.hpp"
#include "softrl/mesh.hpp"
#include "softrl/metal.hpp"

namespace softrl {

// Everything a run needs, settable from `key = value` lines or CLI flags.
// Dotted keys address the nested groups (agent.gamma, metal.lr_meta, ...).
struct ExperimentConfig {
  AgentKind agent = AgentKind::rc;
  std::string env_name = "pointmass1d";
  double safety_coefficient = 0.3;
  double threshold_beta = 0.1;
  std::vector<std::uint64_t> seeds = {0};
  int episodes = 600;
  int episode_len = 200;
  AgentConfig agent_cfg;
  double metal_lr_meta = 1e-3;          // alpha_eta
  double metal_alpha_lambda_init = 0.0;
  OuterLossKind outer_loss_kind = OuterLossKind::critic_only;
  double rs_lambda = 0.1;
  MeshConfig mesh;
  double kappa = 0.0;  // 0 means "use episode_len"
  int window = 100;    // convergence window W, clamped to episodes
  std::string output_path = "out";

  double effective_kappa() const { return kappa > 0.0 ? kappa : episode_len; }
  int effective_window() const { return window < episodes ? window : episodes; }

  // Cross-field checks; throws std::invalid_argument. Prints the learning-rate
  // ordering warning (lr_lagrange < lr_actor <= lr_critic expected) to stderr.
  void validate() const;
};

// Strict: unknown keys and malformed values throw std::invalid_argument.
void apply_override(ExperimentConfig& cfg, const std::string& key,
                    const std::string& value);

// One line per registry key, `key = value`, fixed order, doubles at full
// precision so that parse(serialize(c)) serializes identically.
std::string serialize_config(const ExperimentConfig& cfg);

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

std::vector<std::string> config_keys();

}  // namespace softrl
