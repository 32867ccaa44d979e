#pragma once

namespace la {

// Denominators with |g_i| below this are treated as degenerate and reported
// as an error rather than silently regularized.
template <typename T>
struct DenominatorEpsilon;

template <>
struct DenominatorEpsilon<double> {
  static constexpr double value = 1e-8;
};

template <>
struct DenominatorEpsilon<float> {
  static constexpr float value = 1e-4f;
};

template <typename T>
inline constexpr T kDenominatorEpsilon = DenominatorEpsilon<T>::value;

}  // namespace la
