#pragma once

#include <cstdint>

#include "la/detail/pool.hpp"
#include "la/detail/view.hpp"
#include "la/fault.hpp"
#include "la/plan.hpp"
#include "la/tensor.hpp"
#include "la/workspace.hpp"

namespace la::detail {

// Backward cores. Incoming cotangent rows are rescaled by 1/g_i on the fly
// (wh = omega_ij / g_i); passing an all-ones denominator turns omega into a
// pre-divided omega-hat input, which is how the standalone alpha/beta term
// passes are exposed.

// dQ prefix sweep: dq_ir = sum_j alphaQ_jr * wh_ij - betaQ_r * (sum_j o_ij * wh_ij),
// alphaQ_rj = b * sum_{l<=i} k_lr * v_lj, betaQ_r = b * sum_{l<=i} k_lr.
template <typename T>
void grad_q_causal_core(const ConstView<T>& k, const ConstView<T>& v, const ConstView<T>& o,
                        const ConstView<T>& omega, const T* g_vec, T b, std::int64_t g,
                        std::int64_t r0, std::int64_t r1, T* alpha, T* beta, T* vrow, T* whrow,
                        T* kb, const MutView<T>& dq) {
  const std::int64_t n = k.n, d = k.d;
  const std::int64_t w = r1 - r0;
  const T* kg = k.grp(g);
  const T* vg = v.grp(g);
  const T* og = o.grp(g);
  const T* wg = omega.grp(g);
  for (std::int64_t i = 0; i < n; ++i) {
    const T gi = g_vec[i];
    const T* krow = kg + static_cast<std::size_t>(i) * k.istride;
    T s = T(0);
    for (std::int64_t j = 0; j < d; ++j) {
      vrow[j] = vg[static_cast<std::size_t>(i) * v.istride + static_cast<std::size_t>(j) * v.jstride];
      whrow[j] = wg[static_cast<std::size_t>(i) * omega.istride + static_cast<std::size_t>(j) * omega.jstride] / gi;
      s += og[static_cast<std::size_t>(i) * o.istride + static_cast<std::size_t>(j) * o.jstride] * whrow[j];
    }
    for (std::int64_t rl = 0; rl < w; ++rl) {
      kb[rl] = b * krow[static_cast<std::size_t>(r0 + rl) * k.jstride];
    }
    for (std::int64_t rl = 0; rl < w; ++rl) {
      const T kr = kb[rl];
      T* arow = alpha + static_cast<std::size_t>(rl) * d;
      for (std::int64_t j = 0; j < d; ++j) arow[j] += kr * vrow[j];
      beta[rl] += kr;
    }
    for (std::int64_t rl = 0; rl < w; ++rl) {
      const T* arow = alpha + static_cast<std::size_t>(rl) * d;
      T acc = T(0);
      for (std::int64_t j = 0; j < d; ++j) acc += arow[j] * whrow[j];
      dq.at(g, i, r0 + rl) = acc - beta[rl] * s;
    }
  }
}

// dK alpha term, suffix sweep from the last row:
// alphaK_rj = b * sum_{t>=i} q_tr * wh_tj, dk_ir = sum_j alphaK_rj * v_ij.
template <typename T>
void grad_k_alpha_core(const ConstView<T>& q, const ConstView<T>& v, const ConstView<T>& omega,
                       const T* g_vec, T b, std::int64_t g, std::int64_t r0, std::int64_t r1,
                       T* alpha, T* vrow, T* whrow, T* qb, const MutView<T>& dk) {
  const std::int64_t n = q.n, d = q.d;
  const std::int64_t w = r1 - r0;
  const T* qg = q.grp(g);
  const T* vg = v.grp(g);
  const T* wg = omega.grp(g);
  for (std::int64_t i = n - 1; i >= 0; --i) {
    const T gi = g_vec[i];
    const T* qrow = qg + static_cast<std::size_t>(i) * q.istride;
    for (std::int64_t j = 0; j < d; ++j) {
      vrow[j] = vg[static_cast<std::size_t>(i) * v.istride + static_cast<std::size_t>(j) * v.jstride];
      whrow[j] = wg[static_cast<std::size_t>(i) * omega.istride + static_cast<std::size_t>(j) * omega.jstride] / gi;
    }
    for (std::int64_t rl = 0; rl < w; ++rl) {
      qb[rl] = b * qrow[static_cast<std::size_t>(r0 + rl) * q.jstride];
    }
    for (std::int64_t rl = 0; rl < w; ++rl) {
      const T qr = qb[rl];
      T* arow = alpha + static_cast<std::size_t>(rl) * d;
      T acc = T(0);
      for (std::int64_t j = 0; j < d; ++j) {
        arow[j] += qr * whrow[j];
        acc += arow[j] * vrow[j];
      }
      dk.at(g, i, r0 + rl) = acc;
    }
  }
}

// dK beta term, suffix sweep: betaK_rj = b * sum_{t>=i} q_tr * o_tj * wh_tj,
// dk_ir -= sum_j betaK_rj.
template <typename T>
void grad_k_beta_core(const ConstView<T>& q, const ConstView<T>& o, const ConstView<T>& omega,
                      const T* g_vec, T b, std::int64_t g, std::int64_t r0, std::int64_t r1,
                      T* beta, T* powrow, T* qb, const MutView<T>& dk, Fault fault) {
  const std::int64_t n = q.n, d = q.d;
  const std::int64_t w = r1 - r0;
  const T* qg = q.grp(g);
  const T* og = o.grp(g);
  const T* wg = omega.grp(g);
  const bool flip = fault == Fault::FlipBetaKSign;
  for (std::int64_t i = n - 1; i >= 0; --i) {
    const T gi = g_vec[i];
    const T* qrow = qg + static_cast<std::size_t>(i) * q.istride;
    for (std::int64_t j = 0; j < d; ++j) {
      const T wh = wg[static_cast<std::size_t>(i) * omega.istride + static_cast<std::size_t>(j) * omega.jstride] / gi;
      powrow[j] = og[static_cast<std::size_t>(i) * o.istride + static_cast<std::size_t>(j) * o.jstride] * wh;
    }
    for (std::int64_t rl = 0; rl < w; ++rl) {
      qb[rl] = b * qrow[static_cast<std::size_t>(r0 + rl) * q.jstride];
    }
    for (std::int64_t rl = 0; rl < w; ++rl) {
      const T qr = qb[rl];
      T* brow = beta + static_cast<std::size_t>(rl) * d;
      T acc = T(0);
      for (std::int64_t j = 0; j < d; ++j) {
        brow[j] += qr * powrow[j];
        acc += brow[j];
      }
      if (flip) {
        dk.at(g, i, r0 + rl) += acc;
      } else {
        dk.at(g, i, r0 + rl) -= acc;
      }
    }
  }
}

// dV suffix sweep, constant and key-weighted terms fused:
// dv_ij = a * sum_{t>=i} wh_tj + sum_r k_ir * (b * sum_{t>=i} q_tr * wh_tj).
template <typename T>
void grad_v_causal_core(const ConstView<T>& q, const ConstView<T>& k, const ConstView<T>& omega,
                        const T* g_vec, T a, T b, std::int64_t g, std::int64_t j0,
                        std::int64_t j1, T* alpha_v, T* beta_v, T* qb, T* krow, T* whs,
                        const MutView<T>& dv, Fault fault) {
  const std::int64_t n = q.n, d = q.d;
  const std::int64_t w = j1 - j0;
  const T* qg = q.grp(g);
  const T* kg = k.grp(g);
  const T* wg = omega.grp(g);
  const bool drop_constant = fault == Fault::DropGradVConstantTerm;
  for (std::int64_t i = n - 1; i >= 0; --i) {
    const T gi = g_vec[i];
    const T* qr = qg + static_cast<std::size_t>(i) * q.istride;
    const T* kr = kg + static_cast<std::size_t>(i) * k.istride;
    for (std::int64_t r = 0; r < d; ++r) {
      qb[r] = b * qr[static_cast<std::size_t>(r) * q.jstride];
      krow[r] = kr[static_cast<std::size_t>(r) * k.jstride];
    }
    for (std::int64_t jl = 0; jl < w; ++jl) {
      whs[jl] = wg[static_cast<std::size_t>(i) * omega.istride + static_cast<std::size_t>(j0 + jl) * omega.jstride] / gi;
    }
    for (std::int64_t jl = 0; jl < w; ++jl) {
      const T wh = whs[jl];
      alpha_v[jl] += a * wh;
      T* brow = beta_v + static_cast<std::size_t>(jl) * d;
      T acc = T(0);
      for (std::int64_t r = 0; r < d; ++r) {
        brow[r] += qb[r] * wh;
        acc += krow[r] * brow[r];
      }
      dv.at(g, i, j0 + jl) = drop_constant ? acc : alpha_v[jl] + acc;
    }
  }
}

// Unmasked gradients: every prefix/suffix sum becomes one full-sequence
// state, built once per item and applied to every row.

template <typename T>
void grad_q_full_core(const ConstView<T>& k, const ConstView<T>& v, const ConstView<T>& o,
                      const ConstView<T>& omega, const T* g_vec, T b, std::int64_t g,
                      std::int64_t r0, std::int64_t r1, T* alpha, T* beta, T* vrow, T* whrow,
                      T* kb, const MutView<T>& dq) {
  const std::int64_t n = k.n, d = k.d;
  const std::int64_t w = r1 - r0;
  const T* kg = k.grp(g);
  const T* vg = v.grp(g);
  const T* og = o.grp(g);
  const T* wg = omega.grp(g);
  for (std::int64_t l = 0; l < n; ++l) {
    const T* krow = kg + static_cast<std::size_t>(l) * k.istride;
    for (std::int64_t j = 0; j < d; ++j) {
      vrow[j] = vg[static_cast<std::size_t>(l) * v.istride + static_cast<std::size_t>(j) * v.jstride];
    }
    for (std::int64_t rl = 0; rl < w; ++rl) {
      const T kr = b * krow[static_cast<std::size_t>(r0 + rl) * k.jstride];
      T* arow = alpha + static_cast<std::size_t>(rl) * d;
      for (std::int64_t j = 0; j < d; ++j) arow[j] += kr * vrow[j];
      beta[rl] += kr;
    }
  }
  (void)kb;
  for (std::int64_t i = 0; i < n; ++i) {
    const T gi = g_vec[i];
    T s = T(0);
    for (std::int64_t j = 0; j < d; ++j) {
      whrow[j] = wg[static_cast<std::size_t>(i) * omega.istride + static_cast<std::size_t>(j) * omega.jstride] / gi;
      s += og[static_cast<std::size_t>(i) * o.istride + static_cast<std::size_t>(j) * o.jstride] * whrow[j];
    }
    for (std::int64_t rl = 0; rl < w; ++rl) {
      const T* arow = alpha + static_cast<std::size_t>(rl) * d;
      T acc = T(0);
      for (std::int64_t j = 0; j < d; ++j) acc += arow[j] * whrow[j];
      dq.at(g, i, r0 + rl) = acc - beta[rl] * s;
    }
  }
}

template <typename T>
void grad_k_full_core(const ConstView<T>& q, const ConstView<T>& v, const ConstView<T>& o,
                      const ConstView<T>& omega, const T* g_vec, T b, std::int64_t g,
                      std::int64_t r0, std::int64_t r1, T* alpha, T* beta_sum, T* vrow,
                      T* whrow, const MutView<T>& dk, Fault fault) {
  const std::int64_t n = q.n, d = q.d;
  const std::int64_t w = r1 - r0;
  const T* qg = q.grp(g);
  const T* vg = v.grp(g);
  const T* og = o.grp(g);
  const T* wg = omega.grp(g);
  const bool flip = fault == Fault::FlipBetaKSign;
  for (std::int64_t i = 0; i < n; ++i) {
    const T gi = g_vec[i];
    const T* qrow = qg + static_cast<std::size_t>(i) * q.istride;
    T s = T(0);
    for (std::int64_t j = 0; j < d; ++j) {
      whrow[j] = wg[static_cast<std::size_t>(i) * omega.istride + static_cast<std::size_t>(j) * omega.jstride] / gi;
      s += og[static_cast<std::size_t>(i) * o.istride + static_cast<std::size_t>(j) * o.jstride] * whrow[j];
    }
    for (std::int64_t rl = 0; rl < w; ++rl) {
      const T qr = b * qrow[static_cast<std::size_t>(r0 + rl) * q.jstride];
      T* arow = alpha + static_cast<std::size_t>(rl) * d;
      for (std::int64_t j = 0; j < d; ++j) arow[j] += qr * whrow[j];
      beta_sum[rl] += qr * s;
    }
  }
  for (std::int64_t p = 0; p < n; ++p) {
    for (std::int64_t j = 0; j < d; ++j) {
      vrow[j] = vg[static_cast<std::size_t>(p) * v.istride + static_cast<std::size_t>(j) * v.jstride];
    }
    for (std::int64_t rl = 0; rl < w; ++rl) {
      const T* arow = alpha + static_cast<std::size_t>(rl) * d;
      T acc = T(0);
      for (std::int64_t j = 0; j < d; ++j) acc += arow[j] * vrow[j];
      dk.at(g, p, r0 + rl) = flip ? acc + beta_sum[rl] : acc - beta_sum[rl];
    }
  }
}

template <typename T>
void grad_v_full_core(const ConstView<T>& q, const ConstView<T>& k, const ConstView<T>& omega,
                      const T* g_vec, T a, T b, std::int64_t g, std::int64_t j0, std::int64_t j1,
                      T* alpha_v, T* beta_v, T* qb, T* krow, const MutView<T>& dv, Fault fault) {
  const std::int64_t n = q.n, d = q.d;
  const std::int64_t w = j1 - j0;
  const T* qg = q.grp(g);
  const T* kg = k.grp(g);
  const T* wg = omega.grp(g);
  const bool drop_constant = fault == Fault::DropGradVConstantTerm;
  for (std::int64_t i = 0; i < n; ++i) {
    const T gi = g_vec[i];
    const T* qr = qg + static_cast<std::size_t>(i) * q.istride;
    for (std::int64_t r = 0; r < d; ++r) {
      qb[r] = b * qr[static_cast<std::size_t>(r) * q.jstride];
    }
    for (std::int64_t jl = 0; jl < w; ++jl) {
      const T wh = wg[static_cast<std::size_t>(i) * omega.istride + static_cast<std::size_t>(j0 + jl) * omega.jstride] / gi;
      alpha_v[jl] += a * wh;
      T* brow = beta_v + static_cast<std::size_t>(jl) * d;
      for (std::int64_t r = 0; r < d; ++r) brow[r] += qb[r] * wh;
    }
  }
  for (std::int64_t p = 0; p < n; ++p) {
    const T* kr = kg + static_cast<std::size_t>(p) * k.istride;
    for (std::int64_t r = 0; r < d; ++r) {
      krow[r] = kr[static_cast<std::size_t>(r) * k.jstride];
    }
    for (std::int64_t jl = 0; jl < w; ++jl) {
      const T* brow = beta_v + static_cast<std::size_t>(jl) * d;
      T acc = T(0);
      for (std::int64_t r = 0; r < d; ++r) acc += krow[r] * brow[r];
      dv.at(g, p, j0 + jl) = drop_constant ? acc : alpha_v[jl] + acc;
    }
  }
}

// Full fast backward. Phase order: Q prefix sweep, dK alpha, dK beta,
// dV suffix, with a barrier between each.
template <typename T>
void run_backward(const ConstView<T>& q, const ConstView<T>& k, const ConstView<T>& v,
                  const ConstView<T>& o, const ConstView<T>& omega, const T* g_vec,
                  const LinearKernelCoeffs& c, const BlockPlan& plan, bool causal, Fault fault,
                  const MutView<T>& dq, const MutView<T>& dk, const MutView<T>& dv) {
  const std::int64_t groups = q.groups, n = q.n, d = q.d;
  const T a = static_cast<T>(c.a);
  const T b = static_cast<T>(c.b);
  const std::int64_t l = plan.reduction_blocks;
  const std::size_t slice = static_cast<std::size_t>(d / l);

  ws::set_phase(causal ? "backward.q_prefix" : "backward.q_full");
  {
    const auto items = enumerate_work(plan, Phase::QPrefixBwd);
    ws::Buffer<T> alpha_arena(static_cast<std::size_t>(groups) * d * d);
    ws::Buffer<T> beta_arena(static_cast<std::size_t>(groups) * d);
    ws::Buffer<T> staging(items.size() * 3 * static_cast<std::size_t>(d));
    run_work_items(items, plan.workers, plan.deterministic, [&](const WorkItem& it) {
      const std::size_t idx = static_cast<std::size_t>(it.group) * l + it.block;
      T* alpha = alpha_arena.data() + (static_cast<std::size_t>(it.group) * d + it.m_begin) * d;
      T* beta = beta_arena.data() + static_cast<std::size_t>(it.group) * d + it.m_begin;
      T* vrow = staging.data() + idx * 3 * d;
      T* whrow = vrow + d;
      T* kb = whrow + d;
      const T* g_row = g_vec + static_cast<std::size_t>(it.group) * n;
      if (causal) {
        grad_q_causal_core(k, v, o, omega, g_row, b, it.group, it.m_begin, it.m_end, alpha, beta,
                           vrow, whrow, kb, dq);
      } else {
        grad_q_full_core(k, v, o, omega, g_row, b, it.group, it.m_begin, it.m_end, alpha, beta,
                         vrow, whrow, kb, dq);
      }
    });
  }

  ws::set_phase(causal ? "backward.alpha" : "backward.k_full");
  if (causal) {
    const auto items = enumerate_work(plan, Phase::AlphaBwd);
    ws::Buffer<T> alpha_arena(static_cast<std::size_t>(groups) * d * d);
    ws::Buffer<T> staging(items.size() * 2 * static_cast<std::size_t>(d) + items.size() * slice);
    run_work_items(items, plan.workers, plan.deterministic, [&](const WorkItem& it) {
      const std::size_t idx = static_cast<std::size_t>(it.group) * l + it.block;
      T* alpha = alpha_arena.data() + (static_cast<std::size_t>(it.group) * d + it.m_begin) * d;
      T* vrow = staging.data() + idx * (2 * d + slice);
      T* whrow = vrow + d;
      T* qb = whrow + d;
      const T* g_row = g_vec + static_cast<std::size_t>(it.group) * n;
      grad_k_alpha_core(q, v, omega, g_row, b, it.group, it.m_begin, it.m_end, alpha, vrow,
                        whrow, qb, dk);
    });

    ws::set_phase("backward.beta");
    ws::Buffer<T> beta_arena(static_cast<std::size_t>(groups) * d * d);
    ws::Buffer<T> staging2(items.size() * static_cast<std::size_t>(d) + items.size() * slice);
    run_work_items(items, plan.workers, plan.deterministic, [&](const WorkItem& it) {
      const std::size_t idx = static_cast<std::size_t>(it.group) * l + it.block;
      T* beta = beta_arena.data() + (static_cast<std::size_t>(it.group) * d + it.m_begin) * d;
      T* powrow = staging2.data() + idx * (d + slice);
      T* qb = powrow + d;
      const T* g_row = g_vec + static_cast<std::size_t>(it.group) * n;
      grad_k_beta_core(q, o, omega, g_row, b, it.group, it.m_begin, it.m_end, beta, powrow, qb,
                       dk, fault);
    });
  } else {
    const auto items = enumerate_work(plan, Phase::AlphaBwd);
    ws::Buffer<T> alpha_arena(static_cast<std::size_t>(groups) * d * d);
    ws::Buffer<T> beta_arena(static_cast<std::size_t>(groups) * d);
    ws::Buffer<T> staging(items.size() * 2 * static_cast<std::size_t>(d));
    run_work_items(items, plan.workers, plan.deterministic, [&](const WorkItem& it) {
      const std::size_t idx = static_cast<std::size_t>(it.group) * l + it.block;
      T* alpha = alpha_arena.data() + (static_cast<std::size_t>(it.group) * d + it.m_begin) * d;
      T* beta_sum = beta_arena.data() + static_cast<std::size_t>(it.group) * d + it.m_begin;
      T* vrow = staging.data() + idx * 2 * d;
      T* whrow = vrow + d;
      const T* g_row = g_vec + static_cast<std::size_t>(it.group) * n;
      grad_k_full_core(q, v, o, omega, g_row, b, it.group, it.m_begin, it.m_end, alpha, beta_sum,
                       vrow, whrow, dk, fault);
    });
  }

  ws::set_phase(causal ? "backward.v_suffix" : "backward.v_full");
  {
    const auto items = enumerate_work(plan, Phase::VSuffixBwd);
    ws::Buffer<T> beta_arena(static_cast<std::size_t>(groups) * d * d);
    ws::Buffer<T> alpha_arena(static_cast<std::size_t>(groups) * d);
    ws::Buffer<T> staging(items.size() * (2 * static_cast<std::size_t>(d) + slice));
    run_work_items(items, plan.workers, plan.deterministic, [&](const WorkItem& it) {
      const std::size_t idx = static_cast<std::size_t>(it.group) * l + it.block;
      T* beta_v = beta_arena.data() + (static_cast<std::size_t>(it.group) * d + it.m_begin) * d;
      T* alpha_v = alpha_arena.data() + static_cast<std::size_t>(it.group) * d + it.m_begin;
      T* qb = staging.data() + idx * (2 * d + slice);
      T* krow = qb + d;
      T* whs = krow + d;
      const T* g_row = g_vec + static_cast<std::size_t>(it.group) * n;
      if (causal) {
        grad_v_causal_core(q, k, omega, g_row, a, b, it.group, it.m_begin, it.m_end, alpha_v,
                           beta_v, qb, krow, whs, dv, fault);
      } else {
        (void)whs;
        grad_v_full_core(q, k, omega, g_row, a, b, it.group, it.m_begin, it.m_end, alpha_v,
                         beta_v, qb, krow, dv, fault);
      }
    });
  }
}

}  // namespace la::detail
