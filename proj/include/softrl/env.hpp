#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace softrl {

struct CmdpSpec {
  int obs_dim = 1;
  int act_dim = 1;
  int episode_len = 200;
  std::vector<double> action_low;
  std::vector<double> action_high;
};

struct SafetyConfig {
  double safety_coefficient = 0.3;  // in (0, 1]
  double threshold_beta = 0.1;
};

struct StepResult {
  std::vector<double> obs;
  double reward = 0.0;
  double penalty = 0.0;  // binary
  bool done = false;
};

class Env {
 public:
  virtual ~Env() = default;
  virtual std::vector<double> reset(std::uint64_t seed) = 0;
  virtual StepResult step(std::span<const double> action) = 0;
  virtual const CmdpSpec& spec() const = 0;
};

// Point mass on a line: reach x = 1 under a velocity-limit constraint.
// v' = clip(v + 0.1 a, -1, 1); x' = clip(x + 0.1 v', -2, 2)
// reward = max(0, 1 - |x' - 1|); penalty = 1 if |v'| > safety_coefficient.
class PointMass1d : public Env {
 public:
  PointMass1d(const SafetyConfig& safety, int episode_len = 200);
  std::vector<double> reset(std::uint64_t seed) override;
  StepResult step(std::span<const double> action) override;
  const CmdpSpec& spec() const override { return spec_; }

 protected:
  virtual double reward_fn(double x, double u) const;

  CmdpSpec spec_;
  SafetyConfig safety_;
  double x_ = -1.0, v_ = 0.0;
  int t_ = 0;
  bool armed_ = false;  // reset called, episode not done
};

// Same dynamics and constraint, quadratic regulator reward about the origin:
// reward = 1 - min(1, x'^2 + 0.1 u^2).
class LqrConstrained : public PointMass1d {
 public:
  LqrConstrained(const SafetyConfig& safety, int episode_len = 200)
      : PointMass1d(safety, episode_len) {}

 private:
  double reward_fn(double x, double u) const override;
};

std::unique_ptr<Env> make_env(const std::string& name, const SafetyConfig& safety,
                              int episode_len = 200);

}  // namespace softrl
