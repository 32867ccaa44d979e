#include <doctest.h>

#include <cmath>
#include <vector>

#include "la/forward.hpp"
#include "la/plan.hpp"
#include "la/tensor.hpp"
#include "la/workspace.hpp"

using namespace la;

TEST_CASE("default plan follows the D/32 rule with divisor rounding") {
  CHECK(default_plan({4, 16, 128, 128}, 2).reduction_blocks == 4);
  CHECK(default_plan({1, 1, 8, 32}, 2).reduction_blocks == 1);
  CHECK(default_plan({1, 1, 8, 96}, 2).reduction_blocks == 3);
  CHECK(default_plan({1, 1, 8, 80}, 2).reduction_blocks == 2);  // 80/32 rounds to divisor 2

  const BlockPlan plan = default_plan({2, 4, 8, 6}, 2);
  CHECK(plan.groups == 8);
  CHECK(plan.reduction_blocks == 1);  // 6/32 < 1
  CHECK(plan.deterministic);
}

TEST_CASE("figure-style schedule is reproducible by explicit override") {
  BlockPlan plan = default_plan({2, 4, 8, 6}, 2);
  plan.reduction_blocks = 2;
  const auto items = enumerate_work(plan, Phase::LinearFwd);
  CHECK(items.size() == 16);  // 8 groups x 2 blocks
  for (const WorkItem& item : items) {
    CHECK(item.m_end - item.m_begin == 3);
  }
}

TEST_CASE("enumerate_work partitions the dimension range") {
  BlockPlan plan;
  plan.groups = 3;
  plan.reduction_blocks = 4;
  plan.lanes = 8;
  for (const Phase phase : {Phase::LinearFwd, Phase::AlphaBwd, Phase::BetaBwd,
                            Phase::QPrefixBwd, Phase::VSuffixBwd}) {
    const auto items = enumerate_work(plan, phase);
    CHECK(items.size() == 12);
    std::vector<bool> owned(8, false);
    for (const WorkItem& item : items) {
      if (item.group != 0) continue;
      for (std::int64_t m = item.m_begin; m < item.m_end; ++m) {
        CHECK(!owned[static_cast<std::size_t>(m)]);
        owned[static_cast<std::size_t>(m)] = true;
      }
    }
    for (const bool b : owned) CHECK(b);
  }
}

TEST_CASE("constant phase ignores the reduction blocks") {
  BlockPlan plan;
  plan.groups = 5;
  plan.reduction_blocks = 4;
  plan.lanes = 8;
  const auto items = enumerate_work(plan, Phase::ConstantFwd);
  CHECK(items.size() == 5);
  for (const WorkItem& item : items) {
    CHECK(item.m_begin == 0);
    CHECK(item.m_end == 8);
  }
}

TEST_CASE("L=1 items own the whole dimension range") {
  BlockPlan plan;
  plan.groups = 2;
  plan.reduction_blocks = 1;
  plan.lanes = 6;
  const auto items = enumerate_work(plan, Phase::LinearFwd);
  CHECK(items.size() == 2);
  CHECK(items[0].m_begin == 0);
  CHECK(items[0].m_end == 6);
}

TEST_CASE("plan validation") {
  BlockPlan plan = default_plan({1, 2, 4, 8}, 2);
  CHECK_NOTHROW(validate_plan(plan, 2, 8));
  CHECK_THROWS_AS(validate_plan(plan, 3, 8), InvalidPlan);
  CHECK_THROWS_AS(validate_plan(plan, 2, 16), InvalidPlan);
  plan.reduction_blocks = 3;  // does not divide 8
  CHECK_THROWS_AS(validate_plan(plan, 2, 8), InvalidPlan);
  plan.reduction_blocks = 2;
  plan.workers = 0;
  CHECK_THROWS_AS(validate_plan(plan, 2, 8), InvalidPlan);
}

TEST_CASE("normalize_qk") {
  const Shape shape{1, 1, 3, 2};
  const HeadTensor q = tensor_from_data(shape, Layout::SequenceMajor,
                                        {3.0, 4.0,    // row 0: the 3-4-5 triangle
                                         1.0, 0.0,    // row 1: already unit
                                         0.0, 0.0});  // row 2: padding
  const HeadTensor k = make_tensor(shape, Layout::FeatureMajor, FillSpec::seeded_uniform(2));
  const auto [qn, kn] = normalize_qk(q, k);

  CHECK(qn.at(0, 0, 0) == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(qn.at(0, 0, 1) == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(qn.at(0, 1, 0) == 1.0);
  CHECK(qn.at(0, 1, 1) == 0.0);
  CHECK(qn.at(0, 2, 0) == 0.0);
  CHECK(qn.at(0, 2, 1) == 0.0);

  for (std::int64_t i = 0; i < kn.seq_len(); ++i) {
    double sq = 0.0;
    for (std::int64_t j = 0; j < kn.dim(); ++j) sq += kn.at(0, i, j) * kn.at(0, i, j);
    CHECK(std::sqrt(sq) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("normalize_qk is idempotent to within an ulp") {
  const Shape shape{1, 2, 8, 5};
  const HeadTensor q = make_tensor(shape, Layout::SequenceMajor, FillSpec::seeded_uniform(21));
  const HeadTensor k = make_tensor(shape, Layout::SequenceMajor, FillSpec::seeded_uniform(22));
  const auto [q1, k1] = normalize_qk(q, k);
  const auto [q2, k2] = normalize_qk(q1, k1);
  CHECK(max_abs_diff(q1, q2) <= 4.0 * std::numeric_limits<double>::epsilon());
  CHECK(max_abs_diff(k1, k2) <= 4.0 * std::numeric_limits<double>::epsilon());
}

TEST_CASE("measure_workspace") {
  const WorkspaceReport empty = measure_workspace([] {});
  CHECK(empty.peak_transient_scalars == 0);
  CHECK(empty.retained_scalars == 0);

  const WorkspaceReport tracked = measure_workspace([] {
    ws::Buffer<double> a(100);
    {
      ws::Buffer<double> b(50);
      ws::Buffer<float> c(25);
    }
    ws::Buffer<double> d(10);
    ws::note_retained(7);
  });
  CHECK(tracked.peak_transient_scalars == 175);
  CHECK(tracked.retained_scalars == 7);

  CHECK_THROWS_AS(measure_workspace([] { (void)measure_workspace([] {}); }),
                  MeasurementNested);
}

TEST_CASE("forward workspace is flat in N and quadratic in D") {
  const LinearKernelCoeffs c{1.0, 1.0};
  auto peak = [&](std::int64_t n, std::int64_t d) {
    const Shape shape{1, 1, n, d};
    const HeadTensor q = make_tensor(shape, Layout::SequenceMajor, FillSpec::seeded_uniform(31));
    const HeadTensor k = make_tensor(shape, Layout::SequenceMajor, FillSpec::seeded_uniform(32));
    const HeadTensor v = make_tensor(shape, Layout::FeatureMajor, FillSpec::seeded_uniform(33));
    const BlockPlan plan = default_plan(shape, 2);
    return measure_workspace([&] { (void)forward_causal(q, k, v, c, plan); })
        .peak_transient_scalars;
  };

  const std::size_t n1024 = peak(1024, 64);
  const std::size_t n4096 = peak(4096, 64);
  CHECK(n1024 == n4096);

  const std::size_t d32 = peak(1024, 32);
  const std::size_t d64 = peak(1024, 64);
  const double ratio = static_cast<double>(d64) / static_cast<double>(d32);
  CHECK(ratio > 3.4);
  CHECK(ratio < 4.6);
}
