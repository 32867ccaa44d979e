#include "la/reference.hpp"

#include <cmath>
#include <utility>

#include "la/constants.hpp"
#include "la/workspace.hpp"

namespace la {

namespace {

void check_inputs(const HeadTensor& q, const HeadTensor& k, const HeadTensor& v,
                  bool same_dim = true) {
  if (q.empty() || k.empty() || v.empty()) {
    throw InvalidShape("attention oracles require non-empty Q, K, V");
  }
  if (q.groups() != k.groups() || q.groups() != v.groups() || q.seq_len() != k.seq_len() ||
      q.seq_len() != v.seq_len() || q.dim() != k.dim()) {
    throw ShapeMismatch("Q, K, V shapes must agree");
  }
  if (same_dim && q.dim() != v.dim()) {
    throw ShapeMismatch("Q, K, V shapes must agree");
  }
}

}  // namespace

HeadTensor softmax_attention(const HeadTensor& q, const HeadTensor& k, const HeadTensor& v,
                             AttentionMask mask) {
  check_inputs(q, k, v);
  const std::int64_t groups = q.groups(), n = q.seq_len(), d = q.dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<double> out(static_cast<std::size_t>(groups) * n * d, 0.0);

  ws::Buffer<double> logits(static_cast<std::size_t>(n));
  for (std::int64_t g = 0; g < groups; ++g) {
    for (std::int64_t i = 0; i < n; ++i) {
      const std::int64_t limit = mask == AttentionMask::Causal ? i + 1 : n;
      double max_logit = -HUGE_VAL;
      for (std::int64_t t = 0; t < limit; ++t) {
        double dot = 0.0;
        for (std::int64_t m = 0; m < d; ++m) dot += q.at(g, i, m) * k.at(g, t, m);
        logits[static_cast<std::size_t>(t)] = dot * scale;
        if (logits[static_cast<std::size_t>(t)] > max_logit) {
          max_logit = logits[static_cast<std::size_t>(t)];
        }
      }
      double denom = 0.0;
      for (std::int64_t t = 0; t < limit; ++t) {
        logits[static_cast<std::size_t>(t)] = std::exp(logits[static_cast<std::size_t>(t)] - max_logit);
        denom += logits[static_cast<std::size_t>(t)];
      }
      for (std::int64_t j = 0; j < d; ++j) {
        double acc = 0.0;
        for (std::int64_t t = 0; t < limit; ++t) {
          acc += logits[static_cast<std::size_t>(t)] * v.at(g, t, j);
        }
        out[static_cast<std::size_t>(g) * n * d + static_cast<std::size_t>(i) * d + j] =
            acc / denom;
      }
    }
  }
  return wrap_unchecked(groups, n, d, Layout::SequenceMajor, std::move(out));
}

QuadraticResult quadratic_la(const HeadTensor& q, const HeadTensor& k, const HeadTensor& v,
                             const LinearKernelCoeffs& c, AttentionMask mask) {
  check_inputs(q, k, v);
  if (!c.valid()) {
    throw InvalidArgument("kernel coefficients (a, b) must not both be zero");
  }
  const std::int64_t groups = q.groups(), n = q.seq_len(), d = q.dim();
  std::vector<double> out(static_cast<std::size_t>(groups) * n * d, 0.0);
  std::vector<double> g_vec(static_cast<std::size_t>(groups) * n, 0.0);

  ws::Buffer<double> row_acc(static_cast<std::size_t>(d));
  for (std::int64_t g = 0; g < groups; ++g) {
    for (std::int64_t i = 0; i < n; ++i) {
      const std::int64_t limit = mask == AttentionMask::Causal ? i + 1 : n;
      for (std::int64_t j = 0; j < d; ++j) row_acc[static_cast<std::size_t>(j)] = 0.0;
      double denom = 0.0;
      for (std::int64_t t = 0; t < limit; ++t) {
        double dot = 0.0;
        for (std::int64_t m = 0; m < d; ++m) dot += q.at(g, i, m) * k.at(g, t, m);
        const double weight = c.a + c.b * dot;
        denom += weight;
        for (std::int64_t j = 0; j < d; ++j) {
          row_acc[static_cast<std::size_t>(j)] += weight * v.at(g, t, j);
        }
      }
      if (std::fabs(denom) < kDenominatorEpsilon<double>) {
        throw DegenerateDenominator(g, i);
      }
      g_vec[static_cast<std::size_t>(g) * n + i] = denom;
      for (std::int64_t j = 0; j < d; ++j) {
        out[static_cast<std::size_t>(g) * n * d + static_cast<std::size_t>(i) * d + j] =
            row_acc[static_cast<std::size_t>(j)] / denom;
      }
    }
  }
  QuadraticResult result;
  result.out = wrap_unchecked(groups, n, d, Layout::SequenceMajor, std::move(out));
  result.g = std::move(g_vec);
  return result;
}

RecurrentState make_recurrent_state(std::int64_t dim_v, std::int64_t dim_k) {
  if (dim_v <= 0 || dim_k <= 0) {
    throw InvalidShape("recurrent state dimensions must be positive");
  }
  RecurrentState state;
  state.dim_v = dim_v;
  state.dim_k = dim_k;
  state.s.assign(static_cast<std::size_t>(dim_v) * dim_k, 0.0);
  state.z.assign(static_cast<std::size_t>(dim_k), 0.0);
  return state;
}

void RecurrentState::advance(std::span<const double> k_row, std::span<const double> v_row) {
  if (static_cast<std::int64_t>(k_row.size()) != dim_k ||
      static_cast<std::int64_t>(v_row.size()) != dim_v) {
    throw ShapeMismatch("recurrent state rows must match its dimensions");
  }
  for (std::int64_t j = 0; j < dim_v; ++j) {
    double* row = s.data() + static_cast<std::size_t>(j) * dim_k;
    for (std::int64_t m = 0; m < dim_k; ++m) {
      row[m] += v_row[j] * k_row[m];
    }
  }
  for (std::int64_t m = 0; m < dim_k; ++m) z[m] += k_row[m];
}

HeadTensor recurrent_la(const HeadTensor& q, const HeadTensor& k, const HeadTensor& v,
                        bool normalize) {
  check_inputs(q, k, v, /*same_dim=*/false);
  const std::int64_t groups = q.groups(), n = q.seq_len();
  const std::int64_t dk = q.dim(), dv = v.dim();
  std::vector<double> out(static_cast<std::size_t>(groups) * n * dv, 0.0);

  std::vector<double> k_row(static_cast<std::size_t>(dk));
  std::vector<double> v_row(static_cast<std::size_t>(dv));
  for (std::int64_t g = 0; g < groups; ++g) {
    RecurrentState state = make_recurrent_state(dv, dk);
    for (std::int64_t t = 0; t < n; ++t) {
      for (std::int64_t m = 0; m < dk; ++m) k_row[static_cast<std::size_t>(m)] = k.at(g, t, m);
      for (std::int64_t j = 0; j < dv; ++j) v_row[static_cast<std::size_t>(j)] = v.at(g, t, j);
      state.advance(k_row, v_row);

      double denom = 1.0;
      if (normalize) {
        denom = 0.0;
        for (std::int64_t m = 0; m < dk; ++m) denom += q.at(g, t, m) * state.z[m];
        if (std::fabs(denom) < kDenominatorEpsilon<double>) {
          throw DegenerateDenominator(g, t);
        }
      }
      for (std::int64_t j = 0; j < dv; ++j) {
        double acc = 0.0;
        const double* row = state.s.data() + static_cast<std::size_t>(j) * dk;
        for (std::int64_t m = 0; m < dk; ++m) acc += q.at(g, t, m) * row[m];
        out[static_cast<std::size_t>(g) * n * dv + static_cast<std::size_t>(t) * dv + j] =
            normalize ? acc / denom : acc;
      }
    }
  }
  return wrap_unchecked(groups, n, dv, Layout::SequenceMajor, std::move(out));
}

std::pair<HeadTensor, HeadTensor> augment_constant_feature(const HeadTensor& q,
                                                           const HeadTensor& k) {
  auto augment = [](const HeadTensor& t) {
    const std::int64_t groups = t.groups(), n = t.seq_len(), d = t.dim();
    std::vector<double> data(static_cast<std::size_t>(groups) * n * (d + 1), 0.0);
    for (std::int64_t g = 0; g < groups; ++g) {
      for (std::int64_t i = 0; i < n; ++i) {
        const std::size_t base =
            static_cast<std::size_t>(g) * n * (d + 1) + static_cast<std::size_t>(i) * (d + 1);
        for (std::int64_t j = 0; j < d; ++j) data[base + j] = t.at(g, i, j);
        data[base + d] = 1.0;
      }
    }
    return wrap_unchecked(groups, n, d + 1, Layout::SequenceMajor, std::move(data));
  };
  return {augment(q), augment(k)};
}

Gradients finite_diff_grads(const HeadTensor& q, const HeadTensor& k, const HeadTensor& v,
                            const HeadTensor& omega, const LinearKernelCoeffs& c,
                            AttentionMask mask, double h) {
  check_inputs(q, k, v);
  if (!omega.same_shape(q)) {
    throw ShapeMismatch("cotangent shape must match the output shape");
  }
  if (!(h > 0.0)) {
    throw InvalidArgument("finite difference step must be positive");
  }
  const std::int64_t groups = q.groups(), n = q.seq_len(), d = q.dim();
  const Shape shape{1, groups, n, d};

  auto loss = [&](const HeadTensor& qq, const HeadTensor& kk, const HeadTensor& vv) {
    const QuadraticResult r = quadratic_la(qq, kk, vv, c, mask);
    double psi = 0.0;
    for (std::int64_t g = 0; g < groups; ++g) {
      for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t j = 0; j < d; ++j) {
          psi += omega.at(g, i, j) * r.out.at(g, i, j);
        }
      }
    }
    return psi;
  };

  auto differentiate = [&](const HeadTensor& base, auto rebuild) {
    std::vector<double> grad(base.flat().size(), 0.0);
    std::vector<double> bumped(base.flat().begin(), base.flat().end());
    for (std::size_t e = 0; e < bumped.size(); ++e) {
      const double saved = bumped[e];
      bumped[e] = saved + h;
      const double up = rebuild(bumped);
      bumped[e] = saved - h;
      const double down = rebuild(bumped);
      bumped[e] = saved;
      grad[e] = (up - down) / (2.0 * h);
    }
    return wrap_unchecked(groups, n, d, base.layout(), std::move(grad));
  };

  Gradients grads;
  grads.dq = differentiate(q, [&](const std::vector<double>& data) {
    return loss(tensor_from_data(shape, q.layout(), data), k, v);
  });
  grads.dk = differentiate(k, [&](const std::vector<double>& data) {
    return loss(q, tensor_from_data(shape, k.layout(), data), v);
  });
  grads.dv = differentiate(v, [&](const std::vector<double>& data) {
    return loss(q, k, tensor_from_data(shape, v.layout(), data));
  });
  return grads;
}

}  // namespace la
