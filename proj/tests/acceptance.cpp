// Acceptance gate: one pass/fail line per criterion, nonzero exit on any
// failure. Criterion 9 drives the installed CLI binary (path via --cli).

#include <sys/wait.h>

#include <algorithm>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "la/bench.hpp"
#include "la/verify.hpp"

namespace {

int g_failures = 0;

void report(int criterion, bool passed, const std::string& what) {
  std::printf("[criterion %d] %s %s\n", criterion, passed ? "PASS" : "FAIL", what.c_str());
  std::fflush(stdout);
  if (!passed) ++g_failures;
}

std::string fmt(const char* pattern, ...) {
  char buf[512];
  va_list args;
  va_start(args, pattern);
  std::vsnprintf(buf, sizeof(buf), pattern, args);
  va_end(args);
  return buf;
}

la::SuiteResult run_suite(const char* name, std::size_t cases) {
  la::VerifyOptions options;
  options.seed = 0;
  options.workers = 2;
  options.forward_cases = cases;
  options.backward_cases = cases;
  options.recurrent_cases = cases;
  options.normalize_cases = cases;
  options.suites = {name};
  return la::run_verify(options).front();
}

// Criteria 1-3: oracle equivalence suites at the spec case counts.
void criteria_oracles() {
  const la::SuiteResult fwd = run_suite("forward", 200);
  report(1, fwd.passed,
         fmt("forward oracle equivalence: %zu cases, %s (tol 1e-10)", fwd.cases,
             fwd.detail.c_str()));

  const la::SuiteResult bwd = run_suite("backward", 100);
  report(2, bwd.passed,
         fmt("backward gradient correctness vs central differences: %zu cases, %s", bwd.cases,
             bwd.detail.c_str()));

  const la::SuiteResult rec = run_suite("recurrent", 50);
  report(3, rec.passed,
         fmt("recurrent formulation equivalence: %zu cases, %s (tol 1e-10)", rec.cases,
             rec.detail.c_str()));
}

la::SlopeFit fit_for(const std::vector<la::BenchRecord>& records, la::Impl impl,
                     la::PassKind pass, la::SweepAxis axis) {
  std::vector<la::BenchRecord> filtered;
  for (const la::BenchRecord& r : records) {
    if (r.impl == impl && r.pass == pass) filtered.push_back(r);
  }
  return la::fit_slope(filtered, axis);
}

// Criterion 4: linear time scaling in N for the fast kernels, quadratic for
// the brute-force oracle. Single-worker timing keeps the medians stable.
void criterion_time_scaling() {
  la::SweepConfig fast;
  fast.impls = {la::Impl::Fast};
  fast.forward_pass = true;
  fast.backward_pass = true;
  fast.batch = 1;
  fast.heads = 2;
  fast.dims = {128};
  fast.seq_lens = {4096, 8192, 16384, 32768, 65536};
  fast.precision = la::Precision::F32;
  fast.workers = 1;
  fast.repeats = 3;
  const la::SweepOutcome fast_out = la::run_sweep(fast);

  la::SweepConfig quad;
  quad.impls = {la::Impl::Quadratic};
  quad.forward_pass = true;
  quad.batch = 1;
  quad.heads = 2;
  quad.dims = {64};
  quad.seq_lens = {1024, 2048, 4096};
  quad.workers = 1;
  quad.repeats = 3;
  const la::SweepOutcome quad_out = la::run_sweep(quad);

  const la::SlopeFit f = fit_for(fast_out.records, la::Impl::Fast, la::PassKind::Forward,
                                 la::SweepAxis::N);
  const la::SlopeFit b = fit_for(fast_out.records, la::Impl::Fast, la::PassKind::Backward,
                                 la::SweepAxis::N);
  const la::SlopeFit q = fit_for(quad_out.records, la::Impl::Quadratic, la::PassKind::Forward,
                                 la::SweepAxis::N);

  double worst_ratio = 0.0;
  for (const la::BenchRecord& rec : fast_out.records) {
    if (rec.pass != la::PassKind::Backward) continue;
    for (const la::BenchRecord& fwd : fast_out.records) {
      if (fwd.pass == la::PassKind::Forward && fwd.seq_len == rec.seq_len) {
        worst_ratio = std::max(worst_ratio, rec.wall_time_s / fwd.wall_time_s);
      }
    }
  }

  const bool ok = f.slope >= 0.85 && f.slope <= 1.15 && f.r2 >= 0.98 && b.slope >= 0.85 &&
                  b.slope <= 1.15 && b.r2 >= 0.98 && q.slope >= 1.8 && q.slope <= 2.2 &&
                  q.r2 >= 0.98 && worst_ratio <= 6.0;
  report(4, ok,
         fmt("time scaling vs N: fast fwd slope %.3f (r2 %.4f), fast bwd slope %.3f (r2 %.4f),"
             " quadratic slope %.3f (r2 %.4f), max bwd/fwd ratio %.2f (<= 6)",
             f.slope, f.r2, b.slope, b.r2, q.slope, q.r2, worst_ratio));
}

// Criterion 5: quadratic scaling in the head dimension at fixed N.
void criterion_dim_scaling() {
  la::SweepConfig config;
  config.impls = {la::Impl::Fast};
  config.forward_pass = true;
  config.batch = 1;
  config.heads = 2;
  config.seq_lens = {4096};
  config.dims = {32, 64, 128, 256};
  config.axis = la::SweepAxis::D;
  config.precision = la::Precision::F32;
  config.workers = 1;
  config.repeats = 3;
  const la::SweepOutcome outcome = la::run_sweep(config);
  const la::SlopeFit fit = fit_for(outcome.records, la::Impl::Fast, la::PassKind::Forward,
                                   la::SweepAxis::D);
  const bool ok = fit.slope >= 1.7 && fit.slope <= 2.3;
  report(5, ok, fmt("dimension scaling at N=4096: fast fwd slope vs D %.3f (r2 %.4f)",
                    fit.slope, fit.r2));
}

// Criterion 6: transient workspace flat in N, certifying the rolling-state
// memory behavior.
void criterion_memory() {
  const la::SuiteResult ws = run_suite("workspace", 0);
  report(6, ws.passed, fmt("memory bound: %s", ws.detail.c_str()));
}

// Criterion 7: plan/worker bitwise invariance plus CSV checksum stability.
void criterion_determinism() {
  const la::SuiteResult plan = run_suite("plan", 0);

  la::SweepConfig config;
  config.impls = {la::Impl::Fast};
  config.forward_pass = true;
  config.backward_pass = true;
  config.batch = 1;
  config.heads = 2;
  config.seq_lens = {256, 512};
  config.dims = {64};
  config.precision = la::Precision::F64;
  config.workers = 2;
  config.repeats = 3;
  config.seed = 12345;
  const la::SweepOutcome first = la::run_sweep(config);
  const la::SweepOutcome second = la::run_sweep(config);
  bool csv_identical = first.records.size() == second.records.size() && !first.records.empty();
  if (csv_identical) {
    for (std::size_t i = 0; i < first.records.size(); ++i) {
      csv_identical = csv_identical &&
                      first.records[i].checksum == second.records[i].checksum;
    }
  }

  report(7, plan.passed && csv_identical,
         fmt("determinism: %s; repeated seeded sweep checksums %s", plan.detail.c_str(),
             csv_identical ? "identical" : "DIFFER"));
}

// Criterion 8: normalization makes degenerate denominators a non-event.
void criterion_normalization() {
  const la::SuiteResult norm = run_suite("normalize", 10000);
  report(8, norm.passed, fmt("normalization safety over %zu causal cases: %s", norm.cases,
                             norm.detail.c_str()));
}

// Criterion 9: the verify suite must catch each injected defect (exit 1) and
// pass cleanly (exit 0), end to end through the CLI.
void criterion_mutations(const std::string& cli) {
  if (cli.empty()) {
    report(9, false, "mutation sensitivity: no --cli path provided");
    return;
  }
  const std::string base = cli +
      " verify --fwd-cases 25 --bwd-cases 10 --rec-cases 5 --norm-cases 50";
  auto exit_code = [](const std::string& command) {
    const int status = std::system((command + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
  };

  const int clean = exit_code(base);
  const int beta = exit_code(base + " --inject-defect beta-k-sign");
  const int shift = exit_code(base + " --inject-defect causal-off-by-one");
  const int drop = exit_code(base + " --inject-defect drop-v-a-term");

  const bool ok = clean == 0 && beta == 1 && shift == 1 && drop == 1;
  report(9, ok,
         fmt("mutation sensitivity via CLI: clean exit %d, beta-k-sign exit %d,"
             " causal-off-by-one exit %d, drop-v-a-term exit %d",
             clean, beta, shift, drop));
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--cli") cli = argv[i + 1];
  }

  criteria_oracles();
  criterion_time_scaling();
  criterion_dim_scaling();
  criterion_memory();
  criterion_determinism();
  criterion_normalization();
  criterion_mutations(cli);

  std::printf("acceptance: %d/9 criteria passed\n", 9 - g_failures);
  return g_failures == 0 ? 0 : 1;
}
