#pragma once

#include <cmath>
#include <cstdint>

#include "la/constants.hpp"
#include "la/detail/pool.hpp"
#include "la/detail/view.hpp"
#include "la/error.hpp"
#include "la/fault.hpp"
#include "la/plan.hpp"
#include "la/tensor.hpp"
#include "la/workspace.hpp"

namespace la::detail {

// All cores write the numerator accumulator f in feature-major order
// (f_grp[j*N + i]); the output tensor shares that storage and holds f/g once
// a denominator vector is supplied.

// f_ij = a * sum_{n<=i} v_nj, one running register per feature lane.
template <typename T>
void constant_causal_core(const ConstView<T>& v, T a, std::int64_t g, T* f_grp) {
  const std::int64_t n = v.n, d = v.d;
  for (std::int64_t j = 0; j < d; ++j) {
    T acc = T(0);
    T* f_col = f_grp + static_cast<std::size_t>(j) * n;
    const T* vg = v.grp(g);
    for (std::int64_t i = 0; i < n; ++i) {
      acc += a * vg[static_cast<std::size_t>(i) * v.istride + static_cast<std::size_t>(j) * v.jstride];
      f_col[i] = acc;
    }
  }
}

// g_i = a*i + sum_m q_im * y2_im with y2 the running b-weighted key sums.
// Throws on |g_i| below the precision's epsilon.
template <typename T>
void denominator_causal_core(const ConstView<T>& q, const ConstView<T>& k, T a, T b,
                             std::int64_t g, T* y2, T* g_out) {
  const std::int64_t n = q.n, d = q.d;
  const T eps = kDenominatorEpsilon<T>;
  const T* qg = q.grp(g);
  const T* kg = k.grp(g);
  for (std::int64_t i = 0; i < n; ++i) {
    const T* qrow = qg + static_cast<std::size_t>(i) * q.istride;
    const T* krow = kg + static_cast<std::size_t>(i) * k.istride;
    T acc = a * static_cast<T>(i + 1);
    for (std::int64_t m = 0; m < d; ++m) {
      y2[m] += b * krow[static_cast<std::size_t>(m) * k.jstride];
      acc += qrow[static_cast<std::size_t>(m) * q.jstride] * y2[m];
    }
    if (std::fabs(acc) < eps) throw DegenerateDenominator(g, i);
    g_out[i] = acc;
  }
}

// Linear term for the causal mask. The item owns output features
// [j0, j1): it keeps the running k(x)v state rows for those features and
// contracts them against the full query row, so results do not depend on the
// block partition or on scheduling. When g_vec is non-null the finished
// f_ij is divided through immediately (the item owns that element).
template <typename T>
void linear_causal_core(const ConstView<T>& q, const ConstView<T>& k, const ConstView<T>& v,
                        T b, std::int64_t g, std::int64_t j0, std::int64_t j1, T* x2, T* qs,
                        T* ks, const T* g_vec, T* f_grp, Fault fault) {
  const std::int64_t n = q.n, d = q.d;
  const T* qg = q.grp(g);
  const T* kg = k.grp(g);
  const T* vg = v.grp(g);

  auto absorb = [&](std::int64_t row) {
    const T* krow = kg + static_cast<std::size_t>(row) * k.istride;
    for (std::int64_t m = 0; m < d; ++m) {
      ks[m] = b * krow[static_cast<std::size_t>(m) * k.jstride];
    }
    for (std::int64_t j = j0; j < j1; ++j) {
      const T vij = vg[static_cast<std::size_t>(row) * v.istride + static_cast<std::size_t>(j) * v.jstride];
      T* state = x2 + static_cast<std::size_t>(j - j0) * d;
      for (std::int64_t m = 0; m < d; ++m) {
        state[m] += ks[m] * vij;
      }
    }
  };

  if (fault == Fault::CausalPrefixOffByOne) {
    // Deliberately wrong prefix window: row i sees rows 1..i+1.
    std::int64_t absorbed = 0;
    for (std::int64_t i = 0; i < n; ++i) {
      const std::int64_t want = i + 1 < n ? i + 1 : n - 1;
      while (absorbed <= want) absorb(absorbed++);
      const T* qrow = qg + static_cast<std::size_t>(i) * q.istride;
      for (std::int64_t m = 0; m < d; ++m) {
        qs[m] = qrow[static_cast<std::size_t>(m) * q.jstride];
      }
      for (std::int64_t j = j0; j < j1; ++j) {
        const T* state = x2 + static_cast<std::size_t>(j - j0) * d;
        T acc = T(0);
        for (std::int64_t m = 0; m < d; ++m) acc += qs[m] * state[m];
        T* slot = f_grp + static_cast<std::size_t>(j) * n + i;
        const T val = *slot + acc;
        *slot = g_vec ? val / g_vec[i] : val;
      }
    }
    return;
  }

  for (std::int64_t i = 0; i < n; ++i) {
    const T* qrow = qg + static_cast<std::size_t>(i) * q.istride;
    const T* krow = kg + static_cast<std::size_t>(i) * k.istride;
    for (std::int64_t m = 0; m < d; ++m) {
      qs[m] = qrow[static_cast<std::size_t>(m) * q.jstride];
      ks[m] = b * krow[static_cast<std::size_t>(m) * k.jstride];
    }
    for (std::int64_t j = j0; j < j1; ++j) {
      const T vij = vg[static_cast<std::size_t>(i) * v.istride + static_cast<std::size_t>(j) * v.jstride];
      T* state = x2 + static_cast<std::size_t>(j - j0) * d;
      T acc = T(0);
      for (std::int64_t m = 0; m < d; ++m) {
        state[m] += ks[m] * vij;  // fold row i into the running state
        acc += qs[m] * state[m];
      }
      T* slot = f_grp + static_cast<std::size_t>(j) * n + i;
      const T val = *slot + acc;
      *slot = g_vec ? val / g_vec[i] : val;
    }
  }
}

// Unmasked variants: one state built from the whole sequence, then applied
// to every query row.

template <typename T>
void constant_full_core(const ConstView<T>& v, T a, std::int64_t g, T* x1, T* f_grp) {
  const std::int64_t n = v.n, d = v.d;
  const T* vg = v.grp(g);
  for (std::int64_t j = 0; j < d; ++j) {
    T acc = T(0);
    for (std::int64_t i = 0; i < n; ++i) {
      acc += a * vg[static_cast<std::size_t>(i) * v.istride + static_cast<std::size_t>(j) * v.jstride];
    }
    x1[j] = acc;
    T* f_col = f_grp + static_cast<std::size_t>(j) * n;
    for (std::int64_t i = 0; i < n; ++i) f_col[i] = acc;
  }
}

template <typename T>
void denominator_full_core(const ConstView<T>& q, const ConstView<T>& k, T a, T b,
                           std::int64_t g, T* y2, T* g_out) {
  const std::int64_t n = q.n, d = q.d;
  const T eps = kDenominatorEpsilon<T>;
  const T* qg = q.grp(g);
  const T* kg = k.grp(g);
  for (std::int64_t i = 0; i < n; ++i) {
    const T* krow = kg + static_cast<std::size_t>(i) * k.istride;
    for (std::int64_t m = 0; m < d; ++m) {
      y2[m] += b * krow[static_cast<std::size_t>(m) * k.jstride];
    }
  }
  const T base = a * static_cast<T>(n);
  for (std::int64_t i = 0; i < n; ++i) {
    const T* qrow = qg + static_cast<std::size_t>(i) * q.istride;
    T acc = base;
    for (std::int64_t m = 0; m < d; ++m) {
      acc += qrow[static_cast<std::size_t>(m) * q.jstride] * y2[m];
    }
    if (std::fabs(acc) < eps) throw DegenerateDenominator(g, i);
    g_out[i] = acc;
  }
}

template <typename T>
void linear_full_core(const ConstView<T>& q, const ConstView<T>& k, const ConstView<T>& v, T b,
                      std::int64_t g, std::int64_t j0, std::int64_t j1, T* x2, T* qs, T* ks,
                      const T* g_vec, T* f_grp) {
  const std::int64_t n = q.n, d = q.d;
  const T* qg = q.grp(g);
  const T* kg = k.grp(g);
  const T* vg = v.grp(g);
  for (std::int64_t i = 0; i < n; ++i) {
    const T* krow = kg + static_cast<std::size_t>(i) * k.istride;
    for (std::int64_t m = 0; m < d; ++m) {
      ks[m] = b * krow[static_cast<std::size_t>(m) * k.jstride];
    }
    for (std::int64_t j = j0; j < j1; ++j) {
      const T vij = vg[static_cast<std::size_t>(i) * v.istride + static_cast<std::size_t>(j) * v.jstride];
      T* state = x2 + static_cast<std::size_t>(j - j0) * d;
      for (std::int64_t m = 0; m < d; ++m) state[m] += ks[m] * vij;
    }
  }
  for (std::int64_t i = 0; i < n; ++i) {
    const T* qrow = qg + static_cast<std::size_t>(i) * q.istride;
    for (std::int64_t m = 0; m < d; ++m) {
      qs[m] = qrow[static_cast<std::size_t>(m) * q.jstride];
    }
    for (std::int64_t j = j0; j < j1; ++j) {
      const T* state = x2 + static_cast<std::size_t>(j - j0) * d;
      T acc = T(0);
      for (std::int64_t m = 0; m < d; ++m) acc += qs[m] * state[m];
      T* slot = f_grp + static_cast<std::size_t>(j) * n + i;
      const T val = *slot + acc;
      *slot = g_vec ? val / g_vec[i] : val;
    }
  }
}

// Full fast forward: constant and denominator phase, barrier, linear phase
// with the division folded in. out must be a feature-major view.
template <typename T>
void run_forward(const ConstView<T>& q, const ConstView<T>& k, const ConstView<T>& v,
                 const LinearKernelCoeffs& c, const BlockPlan& plan, bool causal, Fault fault,
                 const MutView<T>& out, T* g_vec) {
  const std::int64_t groups = q.groups, n = q.n, d = q.d;
  const T a = static_cast<T>(c.a);
  const T b = static_cast<T>(c.b);

  ws::set_phase("forward.constant");
  {
    ws::Buffer<T> group_state(static_cast<std::size_t>(groups) * (causal ? d : 2 * d));
    const auto items = enumerate_work(plan, Phase::ConstantFwd);
    run_work_items(items, plan.workers, plan.deterministic, [&](const WorkItem& it) {
      T* f_grp = out.grp(it.group);
      T* g_row = g_vec + static_cast<std::size_t>(it.group) * n;
      if (causal) {
        T* y2 = group_state.data() + static_cast<std::size_t>(it.group) * d;
        constant_causal_core(v, a, it.group, f_grp);
        denominator_causal_core(q, k, a, b, it.group, y2, g_row);
      } else {
        T* x1 = group_state.data() + static_cast<std::size_t>(it.group) * 2 * d;
        T* y2 = x1 + d;
        constant_full_core(v, a, it.group, x1, f_grp);
        denominator_full_core(q, k, a, b, it.group, y2, g_row);
      }
    });
  }

  ws::set_phase("forward.linear");
  {
    const auto items = enumerate_work(plan, Phase::LinearFwd);
    ws::Buffer<T> x2_arena(static_cast<std::size_t>(groups) * d * d);
    ws::Buffer<T> staging(items.size() * 2 * static_cast<std::size_t>(d));
    run_work_items(items, plan.workers, plan.deterministic, [&](const WorkItem& it) {
      const std::size_t item_index =
          static_cast<std::size_t>(it.group) * plan.reduction_blocks + it.block;
      T* x2 = x2_arena.data() + (static_cast<std::size_t>(it.group) * d + it.m_begin) * d;
      T* qs = staging.data() + item_index * 2 * d;
      T* ks = qs + d;
      T* f_grp = out.grp(it.group);
      const T* g_row = g_vec + static_cast<std::size_t>(it.group) * n;
      if (causal) {
        linear_causal_core(q, k, v, b, it.group, it.m_begin, it.m_end, x2, qs, ks, g_row, f_grp,
                           fault);
      } else {
        linear_full_core(q, k, v, b, it.group, it.m_begin, it.m_end, x2, qs, ks, g_row, f_grp);
      }
    });
  }
}

}  // namespace la::detail
