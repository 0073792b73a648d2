#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>

namespace dcomposer {

// Bounded append-only sequence with any number of independent readers.
// Items get consecutive sequence numbers from 0; once `capacity` is exceeded
// the oldest items are dropped and slow readers skip ahead.
template <typename T>
class RingStream {
 public:
  explicit RingStream(std::size_t capacity) : capacity_(capacity) {}

  // Returns the sequence number assigned to the item.
  std::uint64_t push(T item) {
    std::uint64_t seq;
    {
      std::lock_guard lock(mutex_);
      seq = first_ + items_.size();
      items_.push_back(std::move(item));
      if (items_.size() > capacity_) {
        items_.pop_front();
        ++first_;
      }
    }
    cv_.notify_all();
    return seq;
  }

  // After close() readers drain what is retained and then see end-of-stream.
  void close() {
    {
      std::lock_guard lock(mutex_);
      closed_ = true;
    }
    cv_.notify_all();
  }

  [[nodiscard]] bool closed() const {
    std::lock_guard lock(mutex_);
    return closed_;
  }

  [[nodiscard]] std::uint64_t end() const {
    std::lock_guard lock(mutex_);
    return first_ + items_.size();
  }

  enum class Status { Item, Timeout, End };

  // Reads the item at `cursor` (or the oldest retained one if it was
  // dropped) and advances the cursor past it.
  Status next(std::uint64_t& cursor, T& out, std::chrono::milliseconds timeout) {
    std::unique_lock lock(mutex_);
    const bool ready = cv_.wait_for(lock, timeout, [&] {
      return cursor < first_ + items_.size() || closed_;
    });
    if (cursor < first_ + items_.size()) {
      if (cursor < first_) cursor = first_;
      out = items_[cursor - first_];
      ++cursor;
      return Status::Item;
    }
    return ready ? Status::End : Status::Timeout;
  }

 private:
  const std::size_t capacity_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<T> items_;
  std::uint64_t first_ = 0;
  bool closed_ = false;
};

}  // namespace dcomposer
