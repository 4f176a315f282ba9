#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace softrl {

// One telemetry row per completed episode. lambda / alpha_lambda / scaled_lr
// are end-of-episode snapshots; outer_loss and the kappa means are episode
// aggregates of the learner-side quantities.
struct TelemetryRow {
  int episode = 0;
  double episode_return = 0.0;
  double jc_episode = 0.0;   // mean penalty of this episode
  double jc_running = 0.0;   // trailing-window mean penalty
  double lambda = 0.0;
  double alpha_lambda = 0.0;
  double scaled_lr = 0.0;    // alpha_1 * exp(alpha_lambda)
  double outer_loss = 0.0;
  double kappa_s = 0.0;
  double kappa_o = 0.0;
};

struct RunSummary {
  std::string agent;
  std::string env;
  std::uint64_t seed = 0;
  double safety_coefficient = 0.0;
  double threshold_beta = 0.0;
  double kappa = 0.0;
  double R = 0.0;          // mean return over the final W episodes
  double J_C_conv = 0.0;   // mean episode penalty over the final W episodes
  double overshoot = 0.0;  // max(0, J_C_conv - beta)
  double R_penalized = 0.0;
};

double overshoot(double J_C, double beta);
double penalized_return(double R, double psi, double kappa);

// Trailing-W summary; throws if telemetry holds fewer than W episodes.
RunSummary summarize(const std::vector<TelemetryRow>& telemetry, int W,
                     double kappa, double beta);

std::string summary_csv_header();
std::string summary_csv_row(const RunSummary& s);

}  // namespace softrl
