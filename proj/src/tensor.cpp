#include "la/tensor.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <utility>

namespace la {

namespace {

// Maps a raw 64-bit draw to [0, 1) with 53 bits of precision. Written out
// explicitly so fills are bit-stable across standard library versions.
double uniform_unit(std::uint64_t draw) {
  return static_cast<double>(draw >> 11) * 0x1.0p-53;
}

void validate_shape(const Shape& shape) {
  if (shape.batch <= 0 || shape.heads <= 0 || shape.seq_len <= 0 || shape.dim <= 0) {
    throw InvalidShape("tensor dimensions must be strictly positive");
  }
  const unsigned __int128 total = static_cast<unsigned __int128>(shape.batch) * shape.heads *
                                  shape.seq_len * shape.dim;
  if (total > static_cast<unsigned __int128>(std::numeric_limits<std::int64_t>::max() / 8)) {
    throw InvalidShape("tensor size exceeds the platform index range");
  }
}

}  // namespace

const char* layout_name(Layout layout) {
  return layout == Layout::FeatureMajor ? "feature-major" : "sequence-major";
}

std::size_t HeadTensor::flat_index(std::int64_t g, std::int64_t i, std::int64_t j) const {
  const std::size_t base = static_cast<std::size_t>(g) * seq_len_ * dim_;
  if (layout_ == Layout::FeatureMajor) {
    return base + static_cast<std::size_t>(j) * seq_len_ + i;
  }
  return base + static_cast<std::size_t>(i) * dim_ + j;
}

HeadTensor make_tensor(const Shape& shape, Layout layout, const FillSpec& fill) {
  validate_shape(shape);
  const std::int64_t groups = shape.groups();
  const std::int64_t n = shape.seq_len;
  const std::int64_t d = shape.dim;
  std::vector<double> data(static_cast<std::size_t>(groups) * n * d, 0.0);

  switch (fill.kind) {
    case FillSpec::Kind::Zeros:
      break;
    case FillSpec::Kind::Ones:
      data.assign(data.size(), 1.0);
      break;
    case FillSpec::Kind::SeededUniform: {
      if (!(fill.lo < fill.hi)) {
        throw InvalidArgument("seeded uniform fill requires lo < hi");
      }
      std::mt19937_64 rng(fill.seed);
      HeadTensor index_helper(groups, n, d, layout, nullptr);
      const double width = fill.hi - fill.lo;
      // Draw in logical (g,i,j) order so the values are layout-independent.
      for (std::int64_t g = 0; g < groups; ++g) {
        for (std::int64_t i = 0; i < n; ++i) {
          for (std::int64_t j = 0; j < d; ++j) {
            data[index_helper.flat_index(g, i, j)] = fill.lo + width * uniform_unit(rng());
          }
        }
      }
      break;
    }
  }

  return HeadTensor(groups, n, d, layout,
                    std::make_shared<const std::vector<double>>(std::move(data)));
}

HeadTensor tensor_from_data(const Shape& shape, Layout layout, std::vector<double> data) {
  validate_shape(shape);
  const std::size_t expected =
      static_cast<std::size_t>(shape.groups()) * shape.seq_len * shape.dim;
  if (data.size() != expected) {
    throw InvalidShape("flat data length does not match groups*seq_len*dim");
  }
  for (double x : data) {
    if (!std::isfinite(x)) {
      throw InvalidArgument("tensor data must be finite (no NaN/Inf)");
    }
  }
  return HeadTensor(shape.groups(), shape.seq_len, shape.dim, layout,
                    std::make_shared<const std::vector<double>>(std::move(data)));
}

HeadTensor wrap_unchecked(std::int64_t groups, std::int64_t seq_len, std::int64_t dim,
                          Layout layout, std::vector<double>&& data) {
  return HeadTensor(groups, seq_len, dim, layout,
                    std::make_shared<const std::vector<double>>(std::move(data)));
}

HeadTensor relayout(const HeadTensor& t, Layout target) {
  if (t.empty()) {
    throw InvalidShape("relayout of an empty tensor");
  }
  if (t.layout() == target) {
    return t;  // shares the buffer
  }
  std::vector<double> data(t.flat().size());
  HeadTensor shell(t.groups(), t.seq_len(), t.dim(), target, nullptr);
  for (std::int64_t g = 0; g < t.groups(); ++g) {
    for (std::int64_t i = 0; i < t.seq_len(); ++i) {
      for (std::int64_t j = 0; j < t.dim(); ++j) {
        data[shell.flat_index(g, i, j)] = t.at(g, i, j);
      }
    }
  }
  return HeadTensor(t.groups(), t.seq_len(), t.dim(), target,
                    std::make_shared<const std::vector<double>>(std::move(data)));
}

double max_abs_diff(const HeadTensor& x, const HeadTensor& y) {
  if (!x.same_shape(y)) {
    throw ShapeMismatch("max_abs_diff requires identical shapes");
  }
  double worst = 0.0;
  for (std::int64_t g = 0; g < x.groups(); ++g) {
    for (std::int64_t i = 0; i < x.seq_len(); ++i) {
      for (std::int64_t j = 0; j < x.dim(); ++j) {
        const double d = std::fabs(x.at(g, i, j) - y.at(g, i, j));
        if (d > worst) worst = d;
      }
    }
  }
  return worst;
}

}  // namespace la
