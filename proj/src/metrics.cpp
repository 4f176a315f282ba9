#include "softrl/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace softrl {

double overshoot(double J_C, double beta) { return std::max(0.0, J_C - beta); }

double penalized_return(double R, double psi, double kappa) { return R - kappa * psi; }

RunSummary summarize(const std::vector<TelemetryRow>& telemetry, int W,
                     double kappa, double beta) {
  if (W < 1) throw std::invalid_argument("summarize: W must be >= 1");
  if (static_cast<int>(telemetry.size()) < W)
    throw std::invalid_argument("summarize: telemetry shorter than W episodes");
  RunSummary s;
  s.kappa = kappa;
  s.threshold_beta = beta;
  double ret = 0.0, jc = 0.0;
  const std::size_t start = telemetry.size() - static_cast<std::size_t>(W);
  for (std::size_t i = start; i < telemetry.size(); ++i) {
    ret += telemetry[i].episode_return;
    jc += telemetry[i].jc_episode;
  }
  s.R = ret / W;
  s.J_C_conv = jc / W;
  s.overshoot = overshoot(s.J_C_conv, beta);
  s.R_penalized = penalized_return(s.R, s.overshoot, kappa);
  return s;
}

std::string summary_csv_header() {
  return "agent,env,seed,safety_coeff,beta,kappa,R,J_C,overshoot,R_penalized";
}

std::string summary_csv_row(const RunSummary& s) {
  char buf[320];
  std::snprintf(buf, sizeof(buf), "%s,%s,%llu,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g",
                s.agent.c_str(), s.env.c_str(),
                static_cast<unsigned long long>(s.seed), s.safety_coefficient,
                s.threshold_beta, s.kappa, s.R, s.J_C_conv, s.overshoot,
                s.R_penalized);
  return buf;
}

}  // namespace softrl
