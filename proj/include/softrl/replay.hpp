#pragma once

#include <cstddef>
#include <vector>

#include "softrl/rng.hpp"

namespace softrl {

// One n-step transition. r_sum / c_sum are the discounted aggregates
// sum_k gamma^k r_{t+k} over the window; keeping them separate keeps the
// shaped target exact for any lambda: sum gamma^k (r - lambda c) =
// r_sum - lambda * c_sum.
struct Transition {
  std::vector<double> s;
  std::vector<double> a;
  double r_sum = 0.0;
  double c_sum = 0.0;
  std::vector<double> s_next;
  double discount_prod = 0.0;  // gamma^n, or 0 if the episode ended inside the window
};

struct Batch {
  std::vector<Transition> train;
  std::vector<Transition> validate;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push_transition(Transition t);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const;  // 0 = oldest surviving

  // n uniform draws without replacement; the first ceil(split_fraction * n)
  // form the train split, the rest validate. Deterministic given the rng state.
  Batch sample_batch(std::size_t n, double split_fraction, Rng& rng) const;
  void sample_batch(std::size_t n, double split_fraction, Rng& rng, Batch& out) const;

 private:
  std::size_t capacity_;
  std::vector<Transition> items_;
  std::size_t head_ = 0;  // next write position
  std::size_t size_ = 0;
};

// Ring of per-episode mean penalties (empirical J_C), feeding Lagrange updates.
class PenaltyBuffer {
 public:
  explicit PenaltyBuffer(std::size_t capacity = 100);

  void push_episode_penalty(double p);
  double sample_penalty(Rng& rng) const;
  std::size_t size() const { return size_; }

 private:
  std::size_t capacity_;
  std::vector<double> items_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
};

}  // namespace softrl
