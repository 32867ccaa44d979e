#include "la/plan.hpp"

#include <cmath>
#include <thread>

#include "la/fault.hpp"

namespace la {

const char* fault_name(Fault fault) {
  switch (fault) {
    case Fault::None:
      return "none";
    case Fault::FlipBetaKSign:
      return "beta-k-sign";
    case Fault::CausalPrefixOffByOne:
      return "causal-off-by-one";
    case Fault::DropGradVConstantTerm:
      return "drop-v-a-term";
  }
  return "unknown";
}

BlockPlan default_plan(const Shape& shape, int workers) {
  if (shape.batch <= 0 || shape.heads <= 0 || shape.seq_len <= 0 || shape.dim <= 0) {
    throw InvalidShape("default_plan requires a valid shape");
  }
  const std::int64_t d = shape.dim;
  std::int64_t target = d / 32;
  if (target < 1) target = 1;
  // Largest divisor of D not exceeding the D/32 target.
  std::int64_t l = 1;
  for (std::int64_t c = target; c >= 1; --c) {
    if (d % c == 0) {
      l = c;
      break;
    }
  }
  BlockPlan plan;
  plan.groups = shape.groups();
  plan.reduction_blocks = l;
  plan.lanes = d;
  plan.workers = workers > 0 ? workers
                             : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  plan.deterministic = true;
  return plan;
}

void validate_plan(const BlockPlan& plan, std::int64_t groups, std::int64_t dim) {
  if (plan.groups != groups) {
    throw InvalidPlan("plan group count does not match the tensors");
  }
  if (plan.lanes != dim) {
    throw InvalidPlan("plan lane count does not match the head dimension");
  }
  if (plan.reduction_blocks < 1 || plan.lanes % plan.reduction_blocks != 0) {
    throw InvalidPlan("reduction block count must be >= 1 and divide the head dimension");
  }
  if (plan.workers < 1) {
    throw InvalidPlan("worker count must be >= 1");
  }
}

std::vector<WorkItem> enumerate_work(const BlockPlan& plan, Phase phase) {
  if (plan.reduction_blocks < 1 || plan.lanes < 1 ||
      plan.lanes % plan.reduction_blocks != 0) {
    throw InvalidPlan("enumerate_work requires L >= 1 dividing D");
  }
  std::int64_t blocks;
  switch (phase) {
    case Phase::ConstantFwd:
      blocks = 1;  // no inner reduction blocks in the constant term
      break;
    case Phase::LinearFwd:
    case Phase::AlphaBwd:
    case Phase::BetaBwd:
    case Phase::QPrefixBwd:
    case Phase::VSuffixBwd:
      blocks = plan.reduction_blocks;
      break;
    default:
      throw InvalidPhase("unknown execution phase");
  }
  const std::int64_t slice = plan.lanes / blocks;
  std::vector<WorkItem> items;
  items.reserve(static_cast<std::size_t>(plan.groups * blocks));
  for (std::int64_t g = 0; g < plan.groups; ++g) {
    for (std::int64_t l = 0; l < blocks; ++l) {
      items.push_back({g, l, l * slice, (l + 1) * slice});
    }
  }
  return items;
}

std::pair<HeadTensor, HeadTensor> normalize_qk(const HeadTensor& q, const HeadTensor& k) {
  auto normalize_rows = [](const HeadTensor& t) {
    std::vector<double> data(t.flat().begin(), t.flat().end());
    for (std::int64_t g = 0; g < t.groups(); ++g) {
      for (std::int64_t i = 0; i < t.seq_len(); ++i) {
        double sq = 0.0;
        for (std::int64_t j = 0; j < t.dim(); ++j) {
          const double x = t.at(g, i, j);
          sq += x * x;
        }
        if (sq == 0.0) continue;  // zero rows (padding) stay zero
        const double inv = 1.0 / std::sqrt(sq);
        for (std::int64_t j = 0; j < t.dim(); ++j) {
          data[t.flat_index(g, i, j)] = t.at(g, i, j) * inv;
        }
      }
    }
    return wrap_unchecked(t.groups(), t.seq_len(), t.dim(), t.layout(), std::move(data));
  };
  return {normalize_rows(q), normalize_rows(k)};
}

}  // namespace la
