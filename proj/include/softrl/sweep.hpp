#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "softrl/config.hpp"
#include "softrl/metrics.hpp"

namespace softrl {

// One agent column of the sweep; rs variants carry their fixed lambda.
struct SweepAgent {
  AgentKind kind = AgentKind::rc;
  double rs_lambda = 0.0;
  std::string label() const;
};

// Cartesian grid, iterated agent-major, then safety, then beta, then seed.
struct SweepGrid {
  std::vector<SweepAgent> agents;
  std::vector<double> safety_coefficients;
  std::vector<double> threshold_betas;
  std::vector<std::uint64_t> seeds;

  std::size_t size() const {
    return agents.size() * safety_coefficients.size() * threshold_betas.size() *
           seeds.size();
  }
};

// Desk defaults: {d4pg, rs-0.1, rs-1, rs-10, rs-100, rc, metal} agents,
// safety {0.05, 0.3}, beta {0.1}, seeds 0..4.
SweepGrid default_sweep_grid();

struct AgentAggregate {
  std::string agent;
  int runs = 0;
  double r_mean = 0.0, r_stderr = 0.0;
  double jc_mean = 0.0, jc_stderr = 0.0;
  double overshoot_mean = 0.0, overshoot_stderr = 0.0;
  double rpen_mean = 0.0, rpen_stderr = 0.0;
};

struct SweepResult {
  std::vector<RunSummary> rows;            // grid order
  std::vector<AgentAggregate> aggregates;  // grid agent order, per-run-first means
};

// Runs every grid point (optionally on `workers` threads, each run internally
// single-threaded), merging rows in grid order. On any run failure the
// completed rows are flushed to csv_path (if given) before rethrowing.
SweepResult run_sweep(const SweepGrid& grid, const ExperimentConfig& base,
                      int workers = 1, const std::string& csv_path = "");

std::string sweep_csv(const SweepResult& result);

}  // namespace softrl
