#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "la/reference.hpp"
#include "la/tensor.hpp"

namespace la {

enum class Impl { Fast, Quadratic, Softmax, Recurrent };
enum class PassKind { Forward, Backward };
enum class Precision { F32, F64 };
enum class SweepAxis { N, D };

const char* impl_name(Impl impl);
const char* pass_name(PassKind pass);
const char* mask_name(AttentionMask mask);
const char* precision_name(Precision precision);

// One timed measurement point. repeats is recorded but not serialized.
struct BenchRecord {
  Impl impl = Impl::Fast;
  PassKind pass = PassKind::Forward;
  AttentionMask mask = AttentionMask::Causal;
  std::int64_t batch = 0;
  std::int64_t heads = 0;
  std::int64_t seq_len = 0;
  std::int64_t dim = 0;
  std::int64_t reduction_blocks = 0;
  int workers = 0;
  Precision precision = Precision::F64;
  double wall_time_s = 0.0;
  std::size_t peak_transient_scalars = 0;
  double checksum = 0.0;
  int repeats = 0;
};

struct SweepConfig {
  std::vector<Impl> impls = {Impl::Fast};
  bool forward_pass = true;
  bool backward_pass = false;
  AttentionMask mask = AttentionMask::Causal;
  std::int64_t batch = 4;
  std::int64_t heads = 16;
  std::vector<std::int64_t> seq_lens = {1024, 2048, 4096, 8192};
  std::vector<std::int64_t> dims = {128};
  SweepAxis axis = SweepAxis::N;
  std::int64_t reduction_blocks = 0;  // 0 = D/32 default rule
  int workers = 0;                    // 0 = hardware concurrency
  Precision precision = Precision::F32;
  int repeats = 5;  // median of R, after one warm-up
  std::uint64_t seed = 0;
  bool normalize = true;
  LinearKernelCoeffs coeffs = {1.0, 1.0};
  std::size_t mem_budget_scalars = 1ull << 30;
  bool deterministic = true;
  // Times canonical vs swapped input layouts for the fast kernels and
  // reports the delta as a note (a CPU stand-in for data-movement counters).
  bool layout_proxy = false;
};

struct SweepOutcome {
  std::vector<BenchRecord> records;
  std::vector<std::string> notes;  // guard skips, OOM skips, layout proxy lines
};

SweepOutcome run_sweep(const SweepConfig& config);

// Least-squares fit of log(wall_time_s) against log(axis value).
struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::vector<std::pair<double, double>> points;  // (log x, log y)
};

SlopeFit fit_slope(std::span<const BenchRecord> records, SweepAxis axis);

extern const char* kCsvHeader;

void emit_csv(std::span<const BenchRecord> records, std::ostream& out);
void write_csv(std::span<const BenchRecord> records, const std::string& path);
std::vector<BenchRecord> read_csv(std::istream& in);
std::vector<BenchRecord> read_csv_file(const std::string& path);

}  // namespace la
