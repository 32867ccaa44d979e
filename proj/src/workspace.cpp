#include "la/workspace.hpp"

#include <atomic>
#include <mutex>

namespace la {

namespace {

// One process-wide tracker. Arena allocations happen on the orchestrating
// thread between phase barriers, but oracles may allocate from anywhere, so
// the counters stay atomic.
struct Tracker {
  std::atomic<bool> armed{false};
  std::atomic<std::size_t> current{0};
  std::atomic<std::size_t> peak{0};
  std::atomic<std::size_t> retained{0};

  std::mutex phase_mutex;
  std::vector<std::pair<std::string, std::size_t>> phases;
  std::atomic<int> phase_index{-1};

  void bump_peak(std::size_t now) {
    std::size_t prev = peak.load(std::memory_order_relaxed);
    while (now > prev && !peak.compare_exchange_weak(prev, now)) {
    }
    const int idx = phase_index.load(std::memory_order_relaxed);
    if (idx >= 0) {
      std::lock_guard<std::mutex> lock(phase_mutex);
      if (idx < static_cast<int>(phases.size()) && now > phases[idx].second) {
        phases[idx].second = now;
      }
    }
  }
};

Tracker& tracker() {
  static Tracker t;
  return t;
}

}  // namespace

namespace ws {

bool measuring() { return tracker().armed.load(std::memory_order_relaxed); }

void on_alloc(std::size_t scalars) {
  Tracker& t = tracker();
  if (!t.armed.load(std::memory_order_relaxed) || scalars == 0) return;
  const std::size_t now = t.current.fetch_add(scalars) + scalars;
  t.bump_peak(now);
}

void on_free(std::size_t scalars) {
  Tracker& t = tracker();
  if (!t.armed.load(std::memory_order_relaxed) || scalars == 0) return;
  t.current.fetch_sub(scalars);
}

void note_retained(std::size_t scalars) {
  Tracker& t = tracker();
  if (!t.armed.load(std::memory_order_relaxed)) return;
  t.retained.fetch_add(scalars);
}

void set_phase(const char* name) {
  Tracker& t = tracker();
  if (!t.armed.load(std::memory_order_relaxed)) return;
  std::lock_guard<std::mutex> lock(t.phase_mutex);
  t.phases.emplace_back(name, t.current.load(std::memory_order_relaxed));
  t.phase_index.store(static_cast<int>(t.phases.size()) - 1, std::memory_order_relaxed);
}

}  // namespace ws

WorkspaceReport measure_workspace(const std::function<void()>& run) {
  Tracker& t = tracker();
  bool expected = false;
  if (!t.armed.compare_exchange_strong(expected, true)) {
    throw MeasurementNested("a workspace measurement is already active");
  }
  t.current.store(0);
  t.peak.store(0);
  t.retained.store(0);
  {
    std::lock_guard<std::mutex> lock(t.phase_mutex);
    t.phases.clear();
  }
  t.phase_index.store(-1);

  try {
    run();
  } catch (...) {
    t.armed.store(false);
    throw;
  }

  WorkspaceReport report;
  report.peak_transient_scalars = t.peak.load();
  report.retained_scalars = t.retained.load();
  {
    std::lock_guard<std::mutex> lock(t.phase_mutex);
    report.phase_peaks = t.phases;
  }
  t.phase_index.store(-1);
  t.armed.store(false);
  return report;
}

}  // namespace la
