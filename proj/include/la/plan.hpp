#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "la/tensor.hpp"

namespace la {

// CPU execution schedule: one outer work item per (group, reduction block),
// with each block owning a D/L slice of the per-head dimension range. The
// lanes field mirrors the per-block thread width of the source schedule and
// always equals D.
struct BlockPlan {
  std::int64_t groups = 1;
  std::int64_t reduction_blocks = 1;  // L; must divide lanes
  std::int64_t lanes = 1;             // D
  int workers = 1;
  bool deterministic = true;
};

enum class Phase { ConstantFwd, LinearFwd, AlphaBwd, BetaBwd, QPrefixBwd, VSuffixBwd };

// One schedulable unit. m_begin/m_end delimit the item's owned slice of the
// per-head dimension range [l*D/L, (l+1)*D/L).
struct WorkItem {
  std::int64_t group = 0;
  std::int64_t block = 0;
  std::int64_t m_begin = 0;
  std::int64_t m_end = 0;
};

// Default schedule: L = D/32 rounded down to the largest divisor of D, never
// below 1; deterministic mode on.
BlockPlan default_plan(const Shape& shape, int workers);

// Ordered work items for one phase. The constant forward phase has no inner
// blocks: one item per group owning the full dimension range.
std::vector<WorkItem> enumerate_work(const BlockPlan& plan, Phase phase);

// Throws InvalidPlan unless the plan is internally consistent and matches
// the given group count and head dimension.
void validate_plan(const BlockPlan& plan, std::int64_t groups, std::int64_t dim);

// Row-wise Euclidean normalization of queries and keys. Zero rows pass
// through unchanged.
std::pair<HeadTensor, HeadTensor> normalize_qk(const HeadTensor& q, const HeadTensor& k);

}  // namespace la
