#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "la/error.hpp"

namespace la {

// Scalar-count accounting for one measured kernel invocation.
// peak_transient_scalars covers scratch that is freed before the invocation
// returns (prefix/suffix state arenas, staging rows); retained_scalars covers
// buffers the invocation hands back to the caller (outputs, denominators).
struct WorkspaceReport {
  std::size_t peak_transient_scalars = 0;
  std::size_t retained_scalars = 0;
  std::vector<std::pair<std::string, std::size_t>> phase_peaks;
};

// Runs the closure with the scalar tracker armed and reports what it used.
// Only one measurement may be active per process.
WorkspaceReport measure_workspace(const std::function<void()>& run);

namespace ws {

bool measuring();
void on_alloc(std::size_t scalars);
void on_free(std::size_t scalars);
void note_retained(std::size_t scalars);
void set_phase(const char* name);

// Tracked scratch buffer. Registers its element count with the active
// measurement for its whole lifetime; behaves like a plain zeroed vector
// otherwise.
template <typename T>
class Buffer {
 public:
  Buffer() = default;
  explicit Buffer(std::size_t n) : v_(n, T(0)) { on_alloc(v_.size()); }
  ~Buffer() { on_free(v_.size()); }

  Buffer(const Buffer&) = delete;
  Buffer& operator=(const Buffer&) = delete;
  Buffer(Buffer&& other) noexcept : v_(std::move(other.v_)) { other.v_.clear(); }

  T* data() { return v_.data(); }
  const T* data() const { return v_.data(); }
  std::size_t size() const { return v_.size(); }
  T& operator[](std::size_t i) { return v_[i]; }
  const T& operator[](std::size_t i) const { return v_[i]; }

 private:
  std::vector<T> v_;
};

}  // namespace ws
}  // namespace la
