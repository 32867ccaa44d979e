#pragma once

#include <vector>

#include "la/fault.hpp"
#include "la/forward.hpp"
#include "la/gradients.hpp"
#include "la/plan.hpp"
#include "la/tensor.hpp"

namespace la {

// Cotangent rows rescaled by the retained denominators:
// omega_hat_ij = omega_ij / g_i. Returned feature-major.
HeadTensor make_omega_hat(const HeadTensor& omega, const std::vector<double>& g);

// Analytic causal backward from retained forward artifacts: O(N D^2) time,
// O(D^2) rolling state per group. dq is emitted sequence-major, dk and dv
// feature-major.
Gradients backward_causal(const ForwardArtifacts& art, const HeadTensor& omega,
                          const LinearKernelCoeffs& c, const BlockPlan& plan,
                          Fault fault = Fault::None);

// Unmasked analytic backward (full-sequence sums in place of prefix/suffix).
Gradients backward_full(const ForwardArtifacts& art, const HeadTensor& omega,
                        const LinearKernelCoeffs& c, const BlockPlan& plan,
                        Fault fault = Fault::None);

// Standalone dK term passes over a pre-divided cotangent, as scheduled in the
// suffix sweep (i = N down to 1). The alpha pass assigns
// sum_m alphaK_ijm * v_im into the accumulator; the beta pass then subtracts
// sum_m betaK_ijm. Run alpha before beta.
void alpha_term_pass(const HeadTensor& q, const HeadTensor& v, const HeadTensor& omega_hat,
                     const BlockPlan& plan, TermAccumulator& dk, double b = 1.0);
void beta_term_pass(const HeadTensor& q, const HeadTensor& o, const HeadTensor& omega_hat,
                    const BlockPlan& plan, TermAccumulator& dk, double b = 1.0);

}  // namespace la
