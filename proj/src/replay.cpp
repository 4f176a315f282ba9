#include "softrl/replay.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace softrl {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity < 1) throw std::invalid_argument("replay capacity must be >= 1");
  items_.resize(capacity);
}

void ReplayBuffer::push_transition(Transition t) {
  items_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
  if (size_ < capacity_) ++size_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw std::out_of_range("replay index out of range");
  // oldest element sits at head_ once the ring has wrapped
  const std::size_t base = size_ < capacity_ ? 0 : head_;
  return items_[(base + i) % capacity_];
}

void ReplayBuffer::sample_batch(std::size_t n, double split_fraction, Rng& rng,
                                Batch& out) const {
  if (n > size_) throw std::invalid_argument("sample_batch: not enough stored transitions");
  if (!(split_fraction > 0.0 && split_fraction < 1.0))
    throw std::invalid_argument("sample_batch: split_fraction must be in (0, 1)");

  // Floyd's algorithm: n distinct indices in [0, size)
  std::vector<std::size_t> idx;
  idx.reserve(n);
  for (std::size_t j = size_ - n; j < size_; ++j) {
    const std::size_t t = rng.uniform_index(j + 1);
    if (std::find(idx.begin(), idx.end(), t) != idx.end())
      idx.push_back(j);
    else
      idx.push_back(t);
  }

  const std::size_t n_train =
      static_cast<std::size_t>(std::ceil(split_fraction * static_cast<double>(n)));
  out.train.resize(n_train);
  out.validate.resize(n - n_train);
  for (std::size_t i = 0; i < n_train; ++i) out.train[i] = at(idx[i]);
  for (std::size_t i = n_train; i < n; ++i) out.validate[i - n_train] = at(idx[i]);
}

Batch ReplayBuffer::sample_batch(std::size_t n, double split_fraction, Rng& rng) const {
  Batch b;
  sample_batch(n, split_fraction, rng, b);
  return b;
}

PenaltyBuffer::PenaltyBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity < 1) throw std::invalid_argument("penalty capacity must be >= 1");
  items_.resize(capacity);
}

void PenaltyBuffer::push_episode_penalty(double p) {
  if (p < 0.0 || p > 1.0)
    throw std::invalid_argument("episode penalty must be in [0, 1]");
  items_[head_] = p;
  head_ = (head_ + 1) % capacity_;
  if (size_ < capacity_) ++size_;
}

double PenaltyBuffer::sample_penalty(Rng& rng) const {
  if (size_ == 0) throw std::logic_error("sample_penalty: empty buffer");
  return items_[rng.uniform_index(size_)];
}

}  // namespace softrl
