#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "softrl/metrics.hpp"

namespace softrl {

// Six space-separated columns per episode, gnuplot-style '#' header:
// episode return J_C_running lambda alpha_lambda scaled_lr
std::string plotdata_text(const std::vector<TelemetryRow>& rows);

// Reads each telemetry CSV and writes its plot columns to `out`, files
// separated by a "# file: <path>" line. Throws on missing/corrupt input.
void emit_plotdata(const std::vector<std::string>& telemetry_paths,
                   std::ostream& out);

}  // namespace softrl
