#pragma once

namespace la {

// Deliberate kernel defects, injectable so the verification suite's
// sensitivity can itself be tested. Production callers leave this at None.
enum class Fault {
  None,
  // Backward beta term added to dK instead of subtracted.
  FlipBetaKSign,
  // Causal prefix state absorbs row i+1 before emitting row i.
  CausalPrefixOffByOne,
  // dV drops its constant (a-weighted) suffix term.
  DropGradVConstantTerm,
};

const char* fault_name(Fault fault);

}  // namespace la
