#include "softrl/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "softrl/rng.hpp"

namespace softrl {

namespace {

double clip(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

}  // namespace

PointMass1d::PointMass1d(const SafetyConfig& safety, int episode_len)
    : safety_(safety) {
  if (!(safety.safety_coefficient > 0.0 && safety.safety_coefficient <= 1.0))
    throw std::invalid_argument("safety_coefficient must be in (0, 1]");
  if (safety.threshold_beta < 0.0)
    throw std::invalid_argument("threshold_beta must be >= 0");
  if (episode_len < 1) throw std::invalid_argument("episode_len must be >= 1");
  spec_.obs_dim = 2;
  spec_.act_dim = 1;
  spec_.episode_len = episode_len;
  spec_.action_low = {-1.0};
  spec_.action_high = {1.0};
}

std::vector<double> PointMass1d::reset(std::uint64_t seed) {
  // seed perturbs the start position only; seed 0 keeps the exact [-1, 0] start
  double offset = 0.0;
  if (seed != 0) {
    Rng rng(seed);
    offset = rng.uniform(-0.05, 0.05);
  }
  x_ = -1.0 + offset;
  v_ = 0.0;
  t_ = 0;
  armed_ = true;
  return {x_, v_};
}

double PointMass1d::reward_fn(double x, double /*u*/) const {
  return std::max(0.0, 1.0 - std::abs(x - 1.0));
}

StepResult PointMass1d::step(std::span<const double> action) {
  if (!armed_) throw std::logic_error("step called on a done or unreset episode");
  if (action.size() != 1) throw std::invalid_argument("action must have 1 element");
  const double u = clip(action[0], spec_.action_low[0], spec_.action_high[0]);
  v_ = clip(v_ + 0.1 * u, -1.0, 1.0);
  x_ = clip(x_ + 0.1 * v_, -2.0, 2.0);
  ++t_;

  StepResult r;
  r.obs = {x_, v_};
  r.reward = reward_fn(x_, u);
  r.penalty = std::abs(v_) > safety_.safety_coefficient * 1.0 ? 1.0 : 0.0;
  r.done = t_ >= spec_.episode_len;
  if (r.done) armed_ = false;
  return r;
}

double LqrConstrained::reward_fn(double x, double u) const {
  return 1.0 - std::min(1.0, x * x + 0.1 * u * u);
}

std::unique_ptr<Env> make_env(const std::string& name, const SafetyConfig& safety,
                              int episode_len) {
  if (name == "pointmass1d") return std::make_unique<PointMass1d>(safety, episode_len);
  if (name == "lqr") return std::make_unique<LqrConstrained>(safety, episode_len);
  throw std::invalid_argument("unknown environment: " + name);
}

}  // namespace softrl
