#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "la/gradients.hpp"
#include "la/tensor.hpp"

namespace la {

enum class AttentionMask { Causal, None };

// Brute-force oracles. Written as naive, independent loops; they share no
// computation with the fast kernels and define ground truth for them.

// Softmax attention with kernel exp(x / sqrt(D)).
HeadTensor softmax_attention(const HeadTensor& q, const HeadTensor& k, const HeadTensor& v,
                             AttentionMask mask);

struct QuadraticResult {
  HeadTensor out;
  std::vector<double> g;  // groups * seq_len denominators
};

// Direct O(N^2 D) linear attention, the primary forward oracle.
QuadraticResult quadratic_la(const HeadTensor& q, const HeadTensor& k, const HeadTensor& v,
                             const LinearKernelCoeffs& c, AttentionMask mask);

// Hidden state of the recurrent formulation: after t rows,
// S = sum_{i<=t} outer(v_i, k_i) and z = sum_{i<=t} k_i.
struct RecurrentState {
  std::int64_t dim_v = 0;
  std::int64_t dim_k = 0;
  std::vector<double> s;  // dim_v x dim_k, row-major
  std::vector<double> z;  // dim_k

  void advance(std::span<const double> k_row, std::span<const double> v_row);
};

RecurrentState make_recurrent_state(std::int64_t dim_v, std::int64_t dim_k);

// Sequential recurrent linear attention (causal by construction, identity
// feature map). Q and K may carry a different feature count than V, which is
// how the constant-feature augmentation bridges to the a + b*x kernel.
HeadTensor recurrent_la(const HeadTensor& q, const HeadTensor& k, const HeadTensor& v,
                        bool normalize);

// Appends a constant 1 feature to every row of Q and K, so that
// [q;1].[k;1] = 1 + q.k.
std::pair<HeadTensor, HeadTensor> augment_constant_feature(const HeadTensor& q,
                                                           const HeadTensor& k);

// Central-difference gradient oracle for the loss
// psi = sum_{i,j} omega_ij * o_ij, with quadratic_la as the forward.
Gradients finite_diff_grads(const HeadTensor& q, const HeadTensor& k, const HeadTensor& v,
                            const HeadTensor& omega, const LinearKernelCoeffs& c,
                            AttentionMask mask, double h = 1e-6);

}  // namespace la
