#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "la/bench.hpp"
#include "la/error.hpp"

using namespace la;

namespace {

BenchRecord synthetic(double axis_n, double wall_time) {
  BenchRecord r;
  r.impl = Impl::Fast;
  r.pass = PassKind::Forward;
  r.batch = 1;
  r.heads = 1;
  r.seq_len = static_cast<std::int64_t>(axis_n);
  r.dim = 8;
  r.reduction_blocks = 1;
  r.workers = 1;
  r.precision = Precision::F64;
  r.wall_time_s = wall_time;
  r.repeats = 3;
  return r;
}

SweepConfig tiny_config() {
  SweepConfig config;
  config.impls = {Impl::Fast};
  config.forward_pass = true;
  config.backward_pass = false;
  config.batch = 1;
  config.heads = 1;
  config.seq_lens = {64, 128};
  config.dims = {16};
  config.precision = Precision::F64;
  config.repeats = 3;
  config.workers = 1;
  return config;
}

}  // namespace

TEST_CASE("fit_slope recovers exact lines") {
  const std::vector<BenchRecord> linear = {synthetic(1, 1.0), synthetic(10, 10.0),
                                           synthetic(100, 100.0)};
  const SlopeFit f1 = fit_slope(linear, SweepAxis::N);
  CHECK(f1.slope == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(f1.r2 == doctest::Approx(1.0).epsilon(1e-12));

  const std::vector<BenchRecord> quadratic = {synthetic(1, 1.0), synthetic(10, 100.0),
                                              synthetic(100, 10000.0)};
  const SlopeFit f2 = fit_slope(quadratic, SweepAxis::N);
  CHECK(f2.slope == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(f2.r2 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fit_slope requires three distinct axis values") {
  const std::vector<BenchRecord> two = {synthetic(1, 1.0), synthetic(10, 10.0)};
  CHECK_THROWS_AS(fit_slope(two, SweepAxis::N), InsufficientData);
  const std::vector<BenchRecord> repeated = {synthetic(1, 1.0), synthetic(1, 1.1),
                                             synthetic(10, 10.0)};
  CHECK_THROWS_AS(fit_slope(repeated, SweepAxis::N), InsufficientData);
}

TEST_CASE("csv: zero records emit a header-only file") {
  std::ostringstream out;
  emit_csv({}, out);
  CHECK(out.str() == std::string(kCsvHeader) + "\n");
}

TEST_CASE("csv: three records make four lines and round-trip") {
  const std::vector<BenchRecord> records = {synthetic(1, 0.25), synthetic(2, 0.5),
                                            synthetic(4, 1.0)};
  std::ostringstream out;
  emit_csv(records, out);
  const std::string text = out.str();
  std::size_t lines = 0;
  for (const char ch : text) lines += ch == '\n';
  CHECK(lines == 4);

  std::istringstream in(text);
  const std::vector<BenchRecord> parsed = read_csv(in);
  REQUIRE(parsed.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(parsed[i].seq_len == records[i].seq_len);
    CHECK(parsed[i].wall_time_s == doctest::Approx(records[i].wall_time_s).epsilon(1e-9));
  }
}

TEST_CASE("csv header is pinned") {
  CHECK(std::string(kCsvHeader) ==
        "impl,pass,mask,B,H,N,D,L,workers,precision,wall_time_s,peak_transient_scalars,"
        "checksum");
}

TEST_CASE("read_csv rejects malformed input") {
  std::istringstream bad_header("impl,pass\nx,y\n");
  CHECK_THROWS_AS(read_csv(bad_header), IoError);
  std::istringstream bad_row(std::string(kCsvHeader) + "\nfast,fwd\n");
  CHECK_THROWS_AS(read_csv(bad_row), IoError);
}

TEST_CASE("empty sweep produces no records") {
  SweepConfig config = tiny_config();
  config.seq_lens = {};
  const SweepOutcome outcome = run_sweep(config);
  CHECK(outcome.records.empty());
}

TEST_CASE("sweep rejects too few repeats") {
  SweepConfig config = tiny_config();
  config.repeats = 2;
  CHECK_THROWS_AS(run_sweep(config), InvalidArgument);
}

TEST_CASE("sweep guards the quadratic oracle above N=4096") {
  SweepConfig config = tiny_config();
  config.impls = {Impl::Quadratic};
  config.seq_lens = {8192};
  const SweepOutcome outcome = run_sweep(config);
  CHECK(outcome.records.empty());
  REQUIRE(outcome.notes.size() == 1);
  CHECK(outcome.notes[0].find("guard") != std::string::npos);
}

TEST_CASE("sweep skips points over the scalar budget") {
  SweepConfig config = tiny_config();
  config.mem_budget_scalars = 10;
  const SweepOutcome outcome = run_sweep(config);
  CHECK(outcome.records.empty());
  REQUIRE(outcome.notes.size() == 2);
  CHECK(outcome.notes[0].find("OOM-skipped") != std::string::npos);
}

TEST_CASE("sweep records are deterministic for a fixed seed") {
  const SweepConfig config = tiny_config();
  const SweepOutcome first = run_sweep(config);
  const SweepOutcome second = run_sweep(config);
  REQUIRE(first.records.size() == second.records.size());
  REQUIRE(!first.records.empty());
  for (std::size_t i = 0; i < first.records.size(); ++i) {
    CHECK(first.records[i].checksum == second.records[i].checksum);
    CHECK(first.records[i].peak_transient_scalars == second.records[i].peak_transient_scalars);
  }
}

TEST_CASE("fast f32 and f64 sweeps agree on the checksum to float precision") {
  SweepConfig config = tiny_config();
  const SweepOutcome f64 = run_sweep(config);
  config.precision = Precision::F32;
  const SweepOutcome f32 = run_sweep(config);
  REQUIRE(f64.records.size() == f32.records.size());
  for (std::size_t i = 0; i < f64.records.size(); ++i) {
    const double scale = std::max(1.0, std::fabs(f64.records[i].checksum));
    CHECK(std::fabs(f64.records[i].checksum - f32.records[i].checksum) / scale < 1e-3);
  }
}

TEST_CASE("sweep wall times are monotone in N with slack") {
  SweepConfig config = tiny_config();
  config.seq_lens = {1024, 2048, 4096};
  config.dims = {32};
  const SweepOutcome outcome = run_sweep(config);
  REQUIRE(outcome.records.size() == 3);
  for (std::size_t i = 1; i < outcome.records.size(); ++i) {
    CHECK(outcome.records[i].wall_time_s >= 0.9 * outcome.records[i - 1].wall_time_s);
  }
}

TEST_CASE("fast and quadratic checksums coincide on shared points") {
  SweepConfig config = tiny_config();
  config.impls = {Impl::Fast, Impl::Quadratic};
  config.seq_lens = {96};
  config.dims = {8};
  const SweepOutcome outcome = run_sweep(config);
  REQUIRE(outcome.records.size() == 2);
  CHECK(outcome.records[0].checksum ==
        doctest::Approx(outcome.records[1].checksum).epsilon(1e-9));
}
