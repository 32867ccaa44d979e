#pragma once

#include "la/tensor.hpp"

namespace la {

// Gradients of the attention loss with respect to the three inputs.
struct Gradients {
  HeadTensor dq;
  HeadTensor dk;
  HeadTensor dv;
};

}  // namespace la
