#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "la/error.hpp"

namespace la {

// Storage order of a head slice. FeatureMajor keeps a fixed feature index j
// contiguous over the sequence (element (g,i,j) at g*N*D + j*N + i);
// SequenceMajor keeps a row i contiguous over features (g*N*D + i*D + j).
enum class Layout { FeatureMajor, SequenceMajor };

const char* layout_name(Layout layout);

// Batch/head/sequence/dimension sizes of an attention head stack.
struct Shape {
  std::int64_t batch = 0;
  std::int64_t heads = 0;
  std::int64_t seq_len = 0;
  std::int64_t dim = 0;

  std::int64_t groups() const { return batch * heads; }
};

// Coefficients of the linear attention kernel f(x) = a + b*x.
struct LinearKernelCoeffs {
  double a = 1.0;
  double b = 1.0;

  bool valid() const { return a != 0.0 || b != 0.0; }
};

struct FillSpec {
  enum class Kind { Zeros, Ones, SeededUniform };

  Kind kind = Kind::Zeros;
  std::uint64_t seed = 0;
  double lo = -1.0;
  double hi = 1.0;

  static FillSpec zeros() { return {}; }
  static FillSpec ones() { return {Kind::Ones, 0, 0.0, 0.0}; }
  static FillSpec seeded_uniform(std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    return {Kind::SeededUniform, seed, lo, hi};
  }
};

// A (groups, seq_len, dim) stack of real head slices with a declared storage
// layout. Immutable after construction; copies share the underlying buffer,
// so passing tensors by value is cheap and safe across threads.
class HeadTensor {
 public:
  HeadTensor() = default;

  std::int64_t groups() const { return groups_; }
  std::int64_t seq_len() const { return seq_len_; }
  std::int64_t dim() const { return dim_; }
  Layout layout() const { return layout_; }
  bool empty() const { return data_ == nullptr; }
  std::int64_t size() const { return groups_ * seq_len_ * dim_; }

  bool same_shape(const HeadTensor& other) const {
    return groups_ == other.groups_ && seq_len_ == other.seq_len_ && dim_ == other.dim_;
  }

  // Logical element access, independent of layout.
  double at(std::int64_t g, std::int64_t i, std::int64_t j) const {
    return (*data_)[flat_index(g, i, j)];
  }

  std::size_t flat_index(std::int64_t g, std::int64_t i, std::int64_t j) const;

  std::span<const double> flat() const {
    return data_ ? std::span<const double>(data_->data(), data_->size())
                 : std::span<const double>();
  }

 private:
  HeadTensor(std::int64_t groups, std::int64_t seq_len, std::int64_t dim, Layout layout,
             std::shared_ptr<const std::vector<double>> data)
      : groups_(groups), seq_len_(seq_len), dim_(dim), layout_(layout), data_(std::move(data)) {}

  friend HeadTensor make_tensor(const Shape&, Layout, const FillSpec&);
  friend HeadTensor tensor_from_data(const Shape&, Layout, std::vector<double>);
  friend HeadTensor relayout(const HeadTensor&, Layout);
  friend HeadTensor wrap_unchecked(std::int64_t, std::int64_t, std::int64_t, Layout,
                                   std::vector<double>&&);

  std::int64_t groups_ = 0;
  std::int64_t seq_len_ = 0;
  std::int64_t dim_ = 0;
  Layout layout_ = Layout::FeatureMajor;
  std::shared_ptr<const std::vector<double>> data_;
};

// Creates a tensor with the requested fill. SeededUniform fills are
// reproducible: identical (seed, shape, layout) yields identical data, and
// the logical values do not depend on the storage layout.
HeadTensor make_tensor(const Shape& shape, Layout layout, const FillSpec& fill);

// Adopts user-provided flat data (in the given layout). Rejects wrong length
// and non-finite elements.
HeadTensor tensor_from_data(const Shape& shape, Layout layout, std::vector<double> data);

// Returns the same logical tensor stored in the target layout.
HeadTensor relayout(const HeadTensor& t, Layout target);

// Max over all (g,i,j) of |x - y|. Layouts may differ; shapes must match.
double max_abs_diff(const HeadTensor& x, const HeadTensor& y);

// Construction for values produced by the kernels themselves: skips the
// finiteness scan applied to user input.
HeadTensor wrap_unchecked(std::int64_t groups, std::int64_t seq_len, std::int64_t dim,
                          Layout layout, std::vector<double>&& data);

}  // namespace la
