#include "la/backward.hpp"

#include <utility>

#include "la/detail/backward_kernels.hpp"
#include "la/detail/view.hpp"
#include "la/workspace.hpp"

namespace la {

namespace {

void check_backward_inputs(const ForwardArtifacts& art, const HeadTensor& omega,
                           const LinearKernelCoeffs& c, const BlockPlan& plan) {
  if (art.out.empty() || art.q.empty() || art.k.empty() || art.v.empty()) {
    throw MissingForwardState("backward requires the forward artifacts (Q, K, V, O)");
  }
  if (art.g.size() != static_cast<std::size_t>(art.out.groups() * art.out.seq_len())) {
    throw MissingForwardState("backward requires the retained denominator vector g");
  }
  if (omega.empty() || !omega.same_shape(art.out)) {
    throw ShapeMismatch("cotangent shape must match the forward output");
  }
  if (!c.valid()) {
    throw InvalidArgument("kernel coefficients (a, b) must not both be zero");
  }
  validate_plan(plan, art.out.groups(), art.out.dim());
}

Gradients run_public_backward(const ForwardArtifacts& art, const HeadTensor& omega,
                              const LinearKernelCoeffs& c, const BlockPlan& plan, bool causal,
                              Fault fault) {
  check_backward_inputs(art, omega, c, plan);
  const std::int64_t groups = art.out.groups(), n = art.out.seq_len(), d = art.out.dim();
  const std::size_t count = static_cast<std::size_t>(groups) * n * d;

  std::vector<double> dq_data(count, 0.0);
  std::vector<double> dk_data(count, 0.0);
  std::vector<double> dv_data(count, 0.0);
  ws::note_retained(3 * count);

  auto dq = detail::make_mut_view(dq_data.data(), groups, n, d, Layout::SequenceMajor);
  auto dk = detail::make_mut_view(dk_data.data(), groups, n, d, Layout::FeatureMajor);
  auto dv = detail::make_mut_view(dv_data.data(), groups, n, d, Layout::FeatureMajor);

  detail::run_backward<double>(detail::view_of(art.q), detail::view_of(art.k),
                               detail::view_of(art.v), detail::view_of(art.out),
                               detail::view_of(omega), art.g.data(), c, plan, causal, fault, dq,
                               dk, dv);

  Gradients grads;
  grads.dq = wrap_unchecked(groups, n, d, Layout::SequenceMajor, std::move(dq_data));
  grads.dk = wrap_unchecked(groups, n, d, Layout::FeatureMajor, std::move(dk_data));
  grads.dv = wrap_unchecked(groups, n, d, Layout::FeatureMajor, std::move(dv_data));
  return grads;
}

void check_pass_inputs(const HeadTensor& a, const HeadTensor& b, const HeadTensor& omega_hat,
                       const BlockPlan& plan, const TermAccumulator& dk) {
  if (a.empty() || b.empty() || omega_hat.empty()) {
    throw InvalidShape("term passes require non-empty inputs");
  }
  if (!a.same_shape(b) || !a.same_shape(omega_hat)) {
    throw ShapeMismatch("term pass input shapes must agree");
  }
  if (dk.groups != a.groups() || dk.seq_len != a.seq_len() || dk.dim != a.dim()) {
    throw ShapeMismatch("accumulator shape must match the inputs");
  }
  validate_plan(plan, a.groups(), a.dim());
}

}  // namespace

HeadTensor make_omega_hat(const HeadTensor& omega, const std::vector<double>& g) {
  if (omega.empty()) throw InvalidShape("make_omega_hat requires a non-empty cotangent");
  if (g.size() != static_cast<std::size_t>(omega.groups() * omega.seq_len())) {
    throw MissingForwardState("denominator vector length must equal groups*seq_len");
  }
  const std::int64_t groups = omega.groups(), n = omega.seq_len(), d = omega.dim();
  std::vector<double> data(static_cast<std::size_t>(groups) * n * d, 0.0);
  for (std::int64_t g_idx = 0; g_idx < groups; ++g_idx) {
    for (std::int64_t i = 0; i < n; ++i) {
      const double gi = g[static_cast<std::size_t>(g_idx) * n + i];
      for (std::int64_t j = 0; j < d; ++j) {
        data[static_cast<std::size_t>(g_idx) * n * d + static_cast<std::size_t>(j) * n + i] =
            omega.at(g_idx, i, j) / gi;
      }
    }
  }
  return wrap_unchecked(groups, n, d, Layout::FeatureMajor, std::move(data));
}

Gradients backward_causal(const ForwardArtifacts& art, const HeadTensor& omega,
                          const LinearKernelCoeffs& c, const BlockPlan& plan, Fault fault) {
  return run_public_backward(art, omega, c, plan, /*causal=*/true, fault);
}

Gradients backward_full(const ForwardArtifacts& art, const HeadTensor& omega,
                        const LinearKernelCoeffs& c, const BlockPlan& plan, Fault fault) {
  return run_public_backward(art, omega, c, plan, /*causal=*/false, fault);
}

void alpha_term_pass(const HeadTensor& q, const HeadTensor& v, const HeadTensor& omega_hat,
                     const BlockPlan& plan, TermAccumulator& dk, double b) {
  check_pass_inputs(q, v, omega_hat, plan, dk);
  const std::int64_t groups = q.groups(), n = q.seq_len(), d = q.dim();
  const std::int64_t l = plan.reduction_blocks;
  const std::size_t slice = static_cast<std::size_t>(d / l);
  // Pre-divided cotangent: run the core against unit denominators.
  std::vector<double> ones(static_cast<std::size_t>(groups) * n, 1.0);
  auto dk_view = detail::make_mut_view(dk.data.data(), groups, n, d, Layout::FeatureMajor);
  const auto qv = detail::view_of(q);
  const auto vv = detail::view_of(v);
  const auto wv = detail::view_of(omega_hat);
  const auto items = enumerate_work(plan, Phase::AlphaBwd);
  ws::Buffer<double> alpha_arena(static_cast<std::size_t>(groups) * d * d);
  ws::Buffer<double> staging(items.size() * (2 * static_cast<std::size_t>(d) + slice));
  detail::run_work_items(items, plan.workers, plan.deterministic, [&](const WorkItem& it) {
    const std::size_t idx = static_cast<std::size_t>(it.group) * l + it.block;
    double* alpha = alpha_arena.data() + (static_cast<std::size_t>(it.group) * d + it.m_begin) * d;
    double* vrow = staging.data() + idx * (2 * d + slice);
    double* whrow = vrow + d;
    double* qb = whrow + d;
    const double* g_row = ones.data() + static_cast<std::size_t>(it.group) * n;
    detail::grad_k_alpha_core<double>(qv, vv, wv, g_row, b, it.group, it.m_begin, it.m_end,
                                      alpha, vrow, whrow, qb, dk_view);
  });
}

void beta_term_pass(const HeadTensor& q, const HeadTensor& o, const HeadTensor& omega_hat,
                    const BlockPlan& plan, TermAccumulator& dk, double b) {
  check_pass_inputs(q, o, omega_hat, plan, dk);
  const std::int64_t groups = q.groups(), n = q.seq_len(), d = q.dim();
  const std::int64_t l = plan.reduction_blocks;
  const std::size_t slice = static_cast<std::size_t>(d / l);
  std::vector<double> ones(static_cast<std::size_t>(groups) * n, 1.0);
  auto dk_view = detail::make_mut_view(dk.data.data(), groups, n, d, Layout::FeatureMajor);
  const auto qv = detail::view_of(q);
  const auto ov = detail::view_of(o);
  const auto wv = detail::view_of(omega_hat);
  const auto items = enumerate_work(plan, Phase::BetaBwd);
  ws::Buffer<double> beta_arena(static_cast<std::size_t>(groups) * d * d);
  ws::Buffer<double> staging(items.size() * (static_cast<std::size_t>(d) + slice));
  detail::run_work_items(items, plan.workers, plan.deterministic, [&](const WorkItem& it) {
    const std::size_t idx = static_cast<std::size_t>(it.group) * l + it.block;
    double* beta = beta_arena.data() + (static_cast<std::size_t>(it.group) * d + it.m_begin) * d;
    double* powrow = staging.data() + idx * (d + slice);
    double* qb = powrow + d;
    const double* g_row = ones.data() + static_cast<std::size_t>(it.group) * n;
    detail::grad_k_beta_core<double>(qv, ov, wv, g_row, b, it.group, it.m_begin, it.m_end, beta,
                                     powrow, qb, dk_view, Fault::None);
  });
}

}  // namespace la
