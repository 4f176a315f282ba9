#include "softrl/sweep.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>
#include <thread>

#include "softrl/trainer.hpp"

namespace softrl {

std::string SweepAgent::label() const {
  if (kind == AgentKind::rs) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "rs-%g", rs_lambda);
    return buf;
  }
  return agent_kind_to_string(kind);
}

SweepGrid default_sweep_grid() {
  SweepGrid g;
  g.agents = {{AgentKind::d4pg, 0.0}, {AgentKind::rs, 0.1},
              {AgentKind::rs, 1.0},   {AgentKind::rs, 10.0},
              {AgentKind::rs, 100.0}, {AgentKind::rc, 0.0},
              {AgentKind::metal, 0.0}};
  g.safety_coefficients = {0.05, 0.3};
  g.threshold_betas = {0.1};
  g.seeds = {0, 1, 2, 3, 4};
  return g;
}

namespace {

struct GridPoint {
  SweepAgent agent;
  double safety = 0.0;
  double beta = 0.0;
  std::uint64_t seed = 0;
};

std::vector<GridPoint> enumerate(const SweepGrid& grid) {
  std::vector<GridPoint> pts;
  pts.reserve(grid.size());
  for (const SweepAgent& a : grid.agents)
    for (const double s : grid.safety_coefficients)
      for (const double b : grid.threshold_betas)
        for (const std::uint64_t seed : grid.seeds)
          pts.push_back({a, s, b, seed});
  return pts;
}

RunSummary run_point(const ExperimentConfig& base, const GridPoint& pt) {
  ExperimentConfig cfg = base;
  cfg.agent = pt.agent.kind;
  if (pt.agent.kind == AgentKind::rs) cfg.rs_lambda = pt.agent.rs_lambda;
  cfg.safety_coefficient = pt.safety;
  cfg.threshold_beta = pt.beta;
  cfg.seeds = {pt.seed};
  RunSummary s = run_training_seed(cfg, pt.seed, /*write_files=*/false).summary;
  s.agent = pt.agent.label();
  return s;
}

void accumulate(std::vector<AgentAggregate>& out,
                const std::vector<SweepAgent>& agents,
                const std::vector<RunSummary>& rows) {
  for (const SweepAgent& a : agents) {
    const std::string label = a.label();
    bool seen = false;
    for (const AgentAggregate& existing : out)
      if (existing.agent == label) seen = true;
    if (seen) continue;
    std::vector<const RunSummary*> mine;
    for (const RunSummary& r : rows)
      if (r.agent == label) mine.push_back(&r);
    if (mine.empty()) continue;
    AgentAggregate agg;
    agg.agent = label;
    agg.runs = static_cast<int>(mine.size());
    const double n = static_cast<double>(mine.size());
    auto stats = [&](auto field, double& mean, double& stderr_out) {
      double sum = 0.0;
      for (const RunSummary* r : mine) sum += field(*r);
      mean = sum / n;
      double var = 0.0;
      for (const RunSummary* r : mine) {
        const double d = field(*r) - mean;
        var += d * d;
      }
      stderr_out = mine.size() > 1 ? std::sqrt(var / (n - 1.0) / n) : 0.0;
    };
    stats([](const RunSummary& r) { return r.R; }, agg.r_mean, agg.r_stderr);
    stats([](const RunSummary& r) { return r.J_C_conv; }, agg.jc_mean, agg.jc_stderr);
    stats([](const RunSummary& r) { return r.overshoot; }, agg.overshoot_mean,
          agg.overshoot_stderr);
    stats([](const RunSummary& r) { return r.R_penalized; }, agg.rpen_mean,
          agg.rpen_stderr);
    out.push_back(agg);
  }
}

std::string partial_csv(const std::vector<RunSummary>& rows) {
  std::string out = summary_csv_header() + "\n";
  for (const RunSummary& r : rows) out += summary_csv_row(r) + "\n";
  return out;
}

}  // namespace

std::string sweep_csv(const SweepResult& result) {
  std::string out = partial_csv(result.rows);
  out += "\n";
  out +=
      "agent,runs,R_mean,R_stderr,J_C_mean,J_C_stderr,overshoot_mean,"
      "overshoot_stderr,R_penalized_mean,R_penalized_stderr\n";
  for (const AgentAggregate& a : result.aggregates) {
    char buf[400];
    std::snprintf(buf, sizeof(buf),
                  "%s,%d,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                  a.agent.c_str(), a.runs, a.r_mean, a.r_stderr, a.jc_mean,
                  a.jc_stderr, a.overshoot_mean, a.overshoot_stderr,
                  a.rpen_mean, a.rpen_stderr);
    out += buf;
  }
  return out;
}

SweepResult run_sweep(const SweepGrid& grid, const ExperimentConfig& base,
                      int workers, const std::string& csv_path) {
  if (grid.size() == 0) throw std::invalid_argument("run_sweep: empty grid");
  {
    ExperimentConfig probe = base;  // surface config errors before any run
    probe.validate();
  }
  const std::vector<GridPoint> pts = enumerate(grid);
  std::vector<RunSummary> rows(pts.size());
  std::vector<char> done(pts.size(), 0);
  std::atomic<std::size_t> next{0};
  std::vector<std::string> errors(pts.size());
  std::atomic<bool> failed{false};

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= pts.size()) return;
      try {
        rows[i] = run_point(base, pts[i]);
        done[i] = 1;
      } catch (const std::exception& ex) {
        errors[i] = ex.what();
        failed.store(true);
      }
    }
  };

  const int nw = workers < 1 ? 1 : workers;
  if (nw == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < nw; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  if (failed.load()) {
    std::vector<RunSummary> completed;
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (done[i]) completed.push_back(rows[i]);
    if (!csv_path.empty()) {
      std::ofstream out(csv_path, std::ios::binary);
      if (out) out << partial_csv(completed);
    }
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (!errors[i].empty())
        throw std::runtime_error("sweep point " + std::to_string(i) +
                                 " failed: " + errors[i]);
  }

  SweepResult result;
  result.rows = std::move(rows);
  accumulate(result.aggregates, grid.agents, result.rows);
  if (!csv_path.empty()) {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write sweep csv: " + csv_path);
    out << sweep_csv(result);
  }
  return result;
}

}  // namespace softrl
