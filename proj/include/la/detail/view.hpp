#pragma once

#include <cstddef>
#include <cstdint>

#include "la/tensor.hpp"

namespace la::detail {

// Strided read view over a (groups, n, d) buffer of T. Strides encode the
// storage layout so kernels are layout-agnostic.
template <typename T>
struct ConstView {
  const T* data = nullptr;
  std::int64_t groups = 0;
  std::int64_t n = 0;
  std::int64_t d = 0;
  std::size_t istride = 0;
  std::size_t jstride = 0;

  const T* grp(std::int64_t g) const {
    return data + static_cast<std::size_t>(g) * n * d;
  }
  T at(std::int64_t g, std::int64_t i, std::int64_t j) const {
    return grp(g)[static_cast<std::size_t>(i) * istride + static_cast<std::size_t>(j) * jstride];
  }
};

template <typename T>
struct MutView {
  T* data = nullptr;
  std::int64_t groups = 0;
  std::int64_t n = 0;
  std::int64_t d = 0;
  std::size_t istride = 0;
  std::size_t jstride = 0;

  T* grp(std::int64_t g) const {
    return data + static_cast<std::size_t>(g) * n * d;
  }
  T& at(std::int64_t g, std::int64_t i, std::int64_t j) const {
    return grp(g)[static_cast<std::size_t>(i) * istride + static_cast<std::size_t>(j) * jstride];
  }
};

inline void layout_strides(Layout layout, std::int64_t n, std::int64_t d, std::size_t& istride,
                           std::size_t& jstride) {
  if (layout == Layout::FeatureMajor) {
    istride = 1;
    jstride = static_cast<std::size_t>(n);
  } else {
    istride = static_cast<std::size_t>(d);
    jstride = 1;
  }
}

template <typename T>
ConstView<T> make_const_view(const T* data, std::int64_t groups, std::int64_t n, std::int64_t d,
                             Layout layout) {
  ConstView<T> v{data, groups, n, d, 0, 0};
  layout_strides(layout, n, d, v.istride, v.jstride);
  return v;
}

template <typename T>
MutView<T> make_mut_view(T* data, std::int64_t groups, std::int64_t n, std::int64_t d,
                         Layout layout) {
  MutView<T> v{data, groups, n, d, 0, 0};
  layout_strides(layout, n, d, v.istride, v.jstride);
  return v;
}

inline ConstView<double> view_of(const HeadTensor& t) {
  return make_const_view(t.flat().data(), t.groups(), t.seq_len(), t.dim(), t.layout());
}

}  // namespace la::detail
