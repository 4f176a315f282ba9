#include "softrl/plotdata.hpp"

#include <cstdio>

#include "softrl/trainer.hpp"

namespace softrl {

std::string plotdata_text(const std::vector<TelemetryRow>& rows) {
  std::string out = "# episode return J_C_running lambda alpha_lambda scaled_lr\n";
  char buf[240];
  for (const TelemetryRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d %.12g %.12g %.12g %.12g %.12g\n",
                  r.episode, r.episode_return, r.jc_running, r.lambda,
                  r.alpha_lambda, r.scaled_lr);
    out += buf;
  }
  return out;
}

void emit_plotdata(const std::vector<std::string>& telemetry_paths,
                   std::ostream& out) {
  for (const std::string& path : telemetry_paths) {
    const std::vector<TelemetryRow> rows = read_telemetry_csv(path);
    out << "# file: " << path << "\n";
    out << plotdata_text(rows);
  }
}

}  // namespace softrl
