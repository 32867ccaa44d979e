#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "la/fault.hpp"
#include "la/plan.hpp"
#include "la/tensor.hpp"

namespace la {

// Rolling prefix accumulators of the factorized forward pass. After
// consuming rows 1..i:
//   x1_j  = a * sum_{n<=i} v_nj
//   x2_jm = b * sum_{n<=i} k_nm * v_nj
//   y1    = a * i
//   y2_m  = b * sum_{n<=i} k_nm
struct PrefixState {
  std::int64_t dim = 0;
  std::vector<double> x1;  // D
  std::vector<double> x2;  // D x D, row j, column m
  double y1 = 0.0;
  std::vector<double> y2;  // D
};

PrefixState make_prefix_state(std::int64_t dim);

// Pure one-row update of the prefix state, O(D^2).
PrefixState prefix_advance(const PrefixState& state, std::span<const double> k_row,
                           std::span<const double> v_row, const LinearKernelCoeffs& c);

// Everything the backward pass needs from forward: outputs, per-row
// denominators, and the inputs that produced them (shared, not copied).
struct ForwardArtifacts {
  HeadTensor out;         // feature-major
  std::vector<double> g;  // groups * seq_len
  HeadTensor q;
  HeadTensor k;
  HeadTensor v;
};

// Feature-major numerator accumulator used by the standalone term passes.
struct TermAccumulator {
  std::int64_t groups = 0;
  std::int64_t seq_len = 0;
  std::int64_t dim = 0;
  std::vector<double> data;  // zero-initialized, feature-major
};

TermAccumulator make_accumulator(std::int64_t groups, std::int64_t seq_len, std::int64_t dim);

// Constant term (causal): f_ij = a * prefix sum of V. Overwrites every
// element of the accumulator.
void constant_term_pass(const HeadTensor& v, const LinearKernelCoeffs& c, TermAccumulator& f);

// Linear term (causal): f_ij += sum_m q_im * x2_ijm, scheduled as
// groups x L work items. Run the constant pass first.
void linear_term_pass(const HeadTensor& q, const HeadTensor& k, const HeadTensor& v,
                      const LinearKernelCoeffs& c, const BlockPlan& plan, TermAccumulator& f);

// Factorized causal forward: O(N D^2) time, O(D^2) rolling state per group.
ForwardArtifacts forward_causal(const HeadTensor& q, const HeadTensor& k, const HeadTensor& v,
                                const LinearKernelCoeffs& c, const BlockPlan& plan,
                                Fault fault = Fault::None);

// Unmasked forward: the same factorization with full-sequence sums.
ForwardArtifacts forward_full(const HeadTensor& q, const HeadTensor& k, const HeadTensor& v,
                              const LinearKernelCoeffs& c, const BlockPlan& plan,
                              Fault fault = Fault::None);

}  // namespace la
