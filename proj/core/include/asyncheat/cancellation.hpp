#pragma once

#include <atomic>
#include <stdexcept>

namespace asyncheat {

class Cancelled : public std::runtime_error {
 public:
  Cancelled() : std::runtime_error("operation cancelled") {}
};

/// Cooperative cancellation flag polled by long-running solves.
class CancellationToken {
 public:
  void cancel() noexcept { flag_.store(true, std::memory_order_relaxed); }
  bool cancelled() const noexcept { return flag_.load(std::memory_order_relaxed); }

 private:
  std::atomic<bool> flag_{false};
};

inline void throw_if_cancelled(const CancellationToken* token) {
  if (token != nullptr && token->cancelled()) throw Cancelled();
}

}  // namespace asyncheat
