#include "la/forward.hpp"

#include <utility>

#include "la/detail/forward_kernels.hpp"
#include "la/detail/view.hpp"
#include "la/workspace.hpp"

namespace la {

namespace {

void check_forward_inputs(const HeadTensor& q, const HeadTensor& k, const HeadTensor& v,
                          const LinearKernelCoeffs& c, const BlockPlan& plan) {
  if (q.empty() || k.empty() || v.empty()) {
    throw InvalidShape("forward requires non-empty Q, K, V");
  }
  if (!q.same_shape(k) || !q.same_shape(v)) {
    throw ShapeMismatch("Q, K, V shapes must agree");
  }
  if (!c.valid()) {
    throw InvalidArgument("kernel coefficients (a, b) must not both be zero");
  }
  validate_plan(plan, q.groups(), q.dim());
}

ForwardArtifacts run_public_forward(const HeadTensor& q, const HeadTensor& k,
                                    const HeadTensor& v, const LinearKernelCoeffs& c,
                                    const BlockPlan& plan, bool causal, Fault fault) {
  check_forward_inputs(q, k, v, c, plan);
  const std::int64_t groups = q.groups(), n = q.seq_len(), d = q.dim();

  std::vector<double> out_data(static_cast<std::size_t>(groups) * n * d, 0.0);
  std::vector<double> g(static_cast<std::size_t>(groups) * n, 0.0);
  ws::note_retained(out_data.size() + g.size());

  auto out_view = detail::make_mut_view(out_data.data(), groups, n, d, Layout::FeatureMajor);
  detail::run_forward<double>(detail::view_of(q), detail::view_of(k), detail::view_of(v), c,
                              plan, causal, fault, out_view, g.data());

  ForwardArtifacts art;
  art.out = wrap_unchecked(groups, n, d, Layout::FeatureMajor, std::move(out_data));
  art.g = std::move(g);
  art.q = q;
  art.k = k;
  art.v = v;
  return art;
}

}  // namespace

PrefixState make_prefix_state(std::int64_t dim) {
  if (dim <= 0) throw InvalidShape("prefix state dimension must be positive");
  PrefixState s;
  s.dim = dim;
  s.x1.assign(static_cast<std::size_t>(dim), 0.0);
  s.x2.assign(static_cast<std::size_t>(dim) * dim, 0.0);
  s.y1 = 0.0;
  s.y2.assign(static_cast<std::size_t>(dim), 0.0);
  return s;
}

PrefixState prefix_advance(const PrefixState& state, std::span<const double> k_row,
                           std::span<const double> v_row, const LinearKernelCoeffs& c) {
  const std::int64_t d = state.dim;
  if (static_cast<std::int64_t>(k_row.size()) != d ||
      static_cast<std::int64_t>(v_row.size()) != d) {
    throw ShapeMismatch("prefix_advance rows must match the state dimension");
  }
  PrefixState next = state;
  for (std::int64_t j = 0; j < d; ++j) {
    next.x1[j] += c.a * v_row[j];
    double* row = next.x2.data() + static_cast<std::size_t>(j) * d;
    for (std::int64_t m = 0; m < d; ++m) {
      row[m] += c.b * k_row[m] * v_row[j];
    }
  }
  next.y1 += c.a;
  for (std::int64_t m = 0; m < d; ++m) {
    next.y2[m] += c.b * k_row[m];
  }
  return next;
}

TermAccumulator make_accumulator(std::int64_t groups, std::int64_t seq_len, std::int64_t dim) {
  if (groups <= 0 || seq_len <= 0 || dim <= 0) {
    throw InvalidShape("accumulator dimensions must be strictly positive");
  }
  TermAccumulator acc;
  acc.groups = groups;
  acc.seq_len = seq_len;
  acc.dim = dim;
  acc.data.assign(static_cast<std::size_t>(groups) * seq_len * dim, 0.0);
  return acc;
}

void constant_term_pass(const HeadTensor& v, const LinearKernelCoeffs& c, TermAccumulator& f) {
  if (v.empty()) throw InvalidShape("constant_term_pass requires a non-empty V");
  if (f.groups != v.groups() || f.seq_len != v.seq_len() || f.dim != v.dim()) {
    throw ShapeMismatch("accumulator shape must match V");
  }
  const auto view = detail::view_of(v);
  for (std::int64_t g = 0; g < v.groups(); ++g) {
    double* f_grp = f.data.data() + static_cast<std::size_t>(g) * v.seq_len() * v.dim();
    detail::constant_causal_core<double>(view, c.a, g, f_grp);
  }
}

void linear_term_pass(const HeadTensor& q, const HeadTensor& k, const HeadTensor& v,
                      const LinearKernelCoeffs& c, const BlockPlan& plan, TermAccumulator& f) {
  check_forward_inputs(q, k, v, c, plan);
  if (f.groups != q.groups() || f.seq_len != q.seq_len() || f.dim != q.dim()) {
    throw ShapeMismatch("accumulator shape must match the inputs");
  }
  const std::int64_t groups = q.groups(), n = q.seq_len(), d = q.dim();
  const auto qv = detail::view_of(q);
  const auto kv = detail::view_of(k);
  const auto vv = detail::view_of(v);
  const auto items = enumerate_work(plan, Phase::LinearFwd);
  ws::Buffer<double> x2_arena(static_cast<std::size_t>(groups) * d * d);
  ws::Buffer<double> staging(items.size() * 2 * static_cast<std::size_t>(d));
  detail::run_work_items(items, plan.workers, plan.deterministic, [&](const WorkItem& it) {
    const std::size_t idx = static_cast<std::size_t>(it.group) * plan.reduction_blocks + it.block;
    double* x2 = x2_arena.data() + (static_cast<std::size_t>(it.group) * d + it.m_begin) * d;
    double* qs = staging.data() + idx * 2 * d;
    double* ks = qs + d;
    double* f_grp = f.data.data() + static_cast<std::size_t>(it.group) * n * d;
    detail::linear_causal_core<double>(qv, kv, vv, c.b, it.group, it.m_begin, it.m_end, x2, qs,
                                       ks, /*g_vec=*/nullptr, f_grp, Fault::None);
  });
}

ForwardArtifacts forward_causal(const HeadTensor& q, const HeadTensor& k, const HeadTensor& v,
                                const LinearKernelCoeffs& c, const BlockPlan& plan,
                                Fault fault) {
  return run_public_forward(q, k, v, c, plan, /*causal=*/true, fault);
}

ForwardArtifacts forward_full(const HeadTensor& q, const HeadTensor& k, const HeadTensor& v,
                              const LinearKernelCoeffs& c, const BlockPlan& plan, Fault fault) {
  return run_public_forward(q, k, v, c, plan, /*causal=*/false, fault);
}

}  // namespace la
