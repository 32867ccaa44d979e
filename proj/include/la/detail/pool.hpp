#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

#include "la/plan.hpp"

namespace la::detail {

// Executes every work item and joins before returning (the phase barrier).
// Deterministic mode assigns items to workers by fixed round-robin; otherwise
// workers pull from a shared counter. Item outputs must be disjoint, so the
// assignment policy never changes results, only load balance.
inline void run_work_items(std::span<const WorkItem> items, int workers, bool deterministic,
                           const std::function<void(const WorkItem&)>& fn) {
  const std::size_t count = items.size();
  if (count == 0) return;
  const int n_threads = static_cast<int>(
      std::min<std::size_t>(static_cast<std::size_t>(workers < 1 ? 1 : workers), count));
  if (n_threads <= 1) {
    for (const WorkItem& item : items) fn(item);
    return;
  }

  std::mutex error_mutex;
  std::exception_ptr first_error;
  std::size_t first_error_item = count;
  std::atomic<std::size_t> next{0};

  auto record_error = [&](std::size_t item_index) {
    std::lock_guard<std::mutex> lock(error_mutex);
    if (item_index < first_error_item) {
      first_error_item = item_index;
      first_error = std::current_exception();
    }
  };

  auto body = [&](int worker) {
    if (deterministic) {
      for (std::size_t idx = static_cast<std::size_t>(worker); idx < count;
           idx += static_cast<std::size_t>(n_threads)) {
        try {
          fn(items[idx]);
        } catch (...) {
          record_error(idx);
        }
      }
    } else {
      for (std::size_t idx = next.fetch_add(1); idx < count; idx = next.fetch_add(1)) {
        try {
          fn(items[idx]);
        } catch (...) {
          record_error(idx);
        }
      }
    }
  };

  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(n_threads - 1));
  for (int w = 1; w < n_threads; ++w) {
    threads.emplace_back(body, w);
  }
  body(0);
  for (std::thread& th : threads) th.join();

  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace la::detail
