#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "cbdrl/rng.hpp"

namespace cbdrl {

/// Fixed-capacity FIFO ring. Index 0 is the oldest stored entry.
template <class T>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
    data_.reserve(capacity_);
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  void push(T item) {
    if (data_.size() < capacity_) {
      data_.push_back(std::move(item));
    } else {
      data_[head_] = std::move(item);
      head_ = (head_ + 1) % capacity_;
    }
  }

  const T& operator[](std::size_t i) const {
    if (i >= data_.size()) throw std::out_of_range("ReplayBuffer: index out of range");
    return data_[(head_ + i) % data_.size()];
  }

  /// Uniform draws with replacement.
  std::vector<std::size_t> sample_indices(Rng& rng, std::size_t n) const {
    if (data_.empty()) throw std::logic_error("ReplayBuffer: sampling from an empty buffer");
    std::vector<std::size_t> out(n);
    for (auto& i : out) i = uniform_index(rng, data_.size());
    return out;
  }

  void clear() {
    data_.clear();
    head_ = 0;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // oldest entry once full
  std::vector<T> data_;
};

}  // namespace cbdrl
