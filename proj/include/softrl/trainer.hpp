#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "softrl/config.hpp"
#include "softrl/metrics.hpp"

namespace softrl {

struct RunArtifacts {
  RunSummary summary;
  std::vector<TelemetryRow> telemetry;
  std::string telemetry_path;  // empty when nothing was written
};

// One seed, fully deterministic: every random draw comes from a stream mixed
// from (seed, purpose), so two configs whose update rules coincide produce
// identical bytes. When write_files is set, the telemetry CSV and final
// parameter checkpoints land under cfg.output_path.
RunArtifacts run_training_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                               bool write_files);

// All seeds in order; validates the config once, writes telemetry,
// checkpoints, and a summary CSV under cfg.output_path.
std::vector<RunSummary> run_training(const ExperimentConfig& cfg);

std::string telemetry_csv_header();
std::string telemetry_csv_row(const TelemetryRow& row);
void write_telemetry_csv(const std::string& path,
                         const std::vector<TelemetryRow>& rows);
std::vector<TelemetryRow> read_telemetry_csv(const std::string& path);

}  // namespace softrl
