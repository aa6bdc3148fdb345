#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <vector>

namespace traffic {

// Bounded multi-producer/multi-consumer queue. push blocks while full,
// pop blocks while empty. close() lets consumers drain the remaining items;
// abort() wakes everyone immediately and fails all further operations.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("BoundedQueue: capacity must be >= 1");
  }

  bool push(T item) {
    std::unique_lock lk(mu_);
    not_full_.wait(lk, [&] { return aborted_ || items_.size() < capacity_; });
    if (aborted_) return false;
    if (closed_) throw std::logic_error("BoundedQueue: push after close");
    items_.push_back(std::move(item));
    if (items_.size() > high_water_) high_water_ = items_.size();
    not_empty_.notify_one();
    return true;
  }

  std::optional<T> pop() {
    std::unique_lock lk(mu_);
    not_empty_.wait(lk, [&] { return aborted_ || closed_ || !items_.empty(); });
    if (aborted_ || items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }

  // Pops up to n items atomically, waiting until n are available or the
  // queue is closed (then whatever remains is returned as the final,
  // possibly partial, batch). Empty result means end of stream.
  std::vector<T> pop_batch(std::size_t n) {
    std::unique_lock lk(mu_);
    not_empty_.wait(lk, [&] { return aborted_ || closed_ || items_.size() >= n; });
    std::vector<T> batch;
    if (aborted_) return batch;
    const std::size_t take = std::min(n, items_.size());
    batch.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
      batch.push_back(std::move(items_.front()));
      items_.pop_front();
    }
    if (take > 0) not_full_.notify_all();
    return batch;
  }

  void close() {
    std::lock_guard lk(mu_);
    closed_ = true;
    not_empty_.notify_all();
  }

  void abort() {
    std::lock_guard lk(mu_);
    aborted_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

  std::size_t capacity() const { return capacity_; }

  std::size_t high_water() const {
    std::lock_guard lk(mu_);
    return high_water_;
  }

  std::size_t size() const {
    std::lock_guard lk(mu_);
    return items_.size();
  }

 private:
  const std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable not_full_;
  std::condition_variable not_empty_;
  std::deque<T> items_;
  std::size_t high_water_ = 0;
  bool closed_ = false;
  bool aborted_ = false;
};

}  // namespace traffic
