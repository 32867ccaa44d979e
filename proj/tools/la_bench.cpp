// Command-line harness for the linear attention engine: scaling sweeps,
// oracle verification, and log-log slope fits over emitted CSV data.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "la/bench.hpp"
#include "la/error.hpp"
#include "la/fault.hpp"
#include "la/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailure = 1;
constexpr int kExitConfigOrIo = 2;

la::Impl impl_from_flag(const std::string& s) {
  if (s == "fast") return la::Impl::Fast;
  if (s == "quad") return la::Impl::Quadratic;
  if (s == "softmax") return la::Impl::Softmax;
  if (s == "recurrent") return la::Impl::Recurrent;
  throw la::InvalidArgument("unknown --impl value: " + s);
}

la::Fault fault_from_flag(const std::string& s) {
  if (s == "none") return la::Fault::None;
  if (s == "beta-k-sign") return la::Fault::FlipBetaKSign;
  if (s == "causal-off-by-one") return la::Fault::CausalPrefixOffByOne;
  if (s == "drop-v-a-term") return la::Fault::DropGradVConstantTerm;
  throw la::InvalidArgument("unknown --inject-defect value: " + s);
}

bool on_off(const std::string& s, const char* flag) {
  if (s == "on") return true;
  if (s == "off") return false;
  throw la::InvalidArgument(std::string(flag) + " expects on|off");
}

struct SweepFlags {
  std::vector<std::string> impls = {"fast"};
  std::string pass = "fwd";
  std::string mask = "causal";
  std::int64_t batch = 4;
  std::int64_t heads = 16;
  std::vector<std::int64_t> seq_lens = {1024, 2048, 4096, 8192};
  std::vector<std::int64_t> dims = {128};
  std::string axis = "N";
  std::int64_t reduction_blocks = 0;
  int workers = 0;
  std::string precision = "f32";
  int repeats = 5;
  std::uint64_t seed = 0;
  std::string normalize = "on";
  double a = 1.0;
  double b = 1.0;
  std::string out = "sweep.csv";
  std::size_t mem_budget = 1ull << 30;
  std::string deterministic = "on";
  bool layout_proxy = false;
};

la::SweepConfig to_config(const SweepFlags& flags) {
  la::SweepConfig config;
  config.impls.clear();
  for (const std::string& name : flags.impls) {
    const la::Impl impl = impl_from_flag(name);
    if (std::find(config.impls.begin(), config.impls.end(), impl) == config.impls.end()) {
      config.impls.push_back(impl);
    }
  }
  if (flags.pass == "fwd") {
    config.forward_pass = true;
    config.backward_pass = false;
  } else if (flags.pass == "bwd") {
    config.forward_pass = false;
    config.backward_pass = true;
  } else if (flags.pass == "both") {
    config.forward_pass = true;
    config.backward_pass = true;
  } else {
    throw la::InvalidArgument("--pass expects fwd|bwd|both");
  }
  if (flags.mask == "causal") {
    config.mask = la::AttentionMask::Causal;
  } else if (flags.mask == "none") {
    config.mask = la::AttentionMask::None;
  } else {
    throw la::InvalidArgument("--mask expects causal|none");
  }
  config.batch = flags.batch;
  config.heads = flags.heads;
  config.seq_lens = flags.seq_lens;
  config.dims = flags.dims;
  if (flags.axis == "N") {
    config.axis = la::SweepAxis::N;
  } else if (flags.axis == "D") {
    config.axis = la::SweepAxis::D;
  } else {
    throw la::InvalidArgument("--sweep-axis expects N|D");
  }
  config.reduction_blocks = flags.reduction_blocks;
  config.workers = flags.workers;
  if (flags.precision == "f32") {
    config.precision = la::Precision::F32;
  } else if (flags.precision == "f64") {
    config.precision = la::Precision::F64;
  } else {
    throw la::InvalidArgument("--precision expects f32|f64");
  }
  config.repeats = flags.repeats;
  config.seed = flags.seed;
  config.normalize = on_off(flags.normalize, "--normalize");
  config.coeffs = {flags.a, flags.b};
  config.mem_budget_scalars = flags.mem_budget;
  config.deterministic = on_off(flags.deterministic, "--deterministic");
  config.layout_proxy = flags.layout_proxy;
  return config;
}

int run_sweep_command(const SweepFlags& flags, bool n_given) {
  SweepFlags adjusted = flags;
  if (flags.axis == "D" && !n_given) {
    adjusted.seq_lens = {4096};  // D-sweep default
  }
  const la::SweepConfig config = to_config(adjusted);
  const la::SweepOutcome outcome = la::run_sweep(config);
  for (const std::string& note : outcome.notes) {
    std::cout << "note: " << note << "\n";
  }
  la::write_csv(outcome.records, adjusted.out);
  std::cout << "wrote " << outcome.records.size() << " records to " << adjusted.out << "\n";
  return kExitOk;
}

struct VerifyFlags {
  std::string suite = "all";
  std::uint64_t seed = 0;
  int workers = 0;
  std::size_t fwd_cases = 200;
  std::size_t bwd_cases = 100;
  std::size_t rec_cases = 50;
  std::size_t norm_cases = 10000;
  std::string defect = "none";
};

int run_verify_command(const VerifyFlags& flags) {
  la::VerifyOptions options;
  options.seed = flags.seed;
  options.workers = flags.workers;
  options.forward_cases = flags.fwd_cases;
  options.backward_cases = flags.bwd_cases;
  options.recurrent_cases = flags.rec_cases;
  options.normalize_cases = flags.norm_cases;
  options.fault = fault_from_flag(flags.defect);
  if (flags.suite != "all") {
    options.suites = {flags.suite};
  }
  if (options.fault != la::Fault::None) {
    std::cout << "injected defect: " << la::fault_name(options.fault) << "\n";
  }

  const std::vector<la::SuiteResult> results = la::run_verify(options);
  for (const la::SuiteResult& r : results) {
    std::printf("[verify] %-10s %s  cases=%zu  %s\n", r.name.c_str(),
                r.passed ? "pass" : "FAIL", r.cases, r.detail.c_str());
  }
  for (const la::SuiteResult& r : results) {
    std::printf("suite=%s status=%s cases=%zu max_dev=%.6e tolerance=%.6e\n", r.name.c_str(),
                r.passed ? "pass" : "fail", r.cases, r.max_dev, r.tolerance);
  }
  const bool ok = la::all_passed(results);
  std::printf("verify: %s\n", ok ? "all suites passed" : "FAILURES detected");
  return ok ? kExitOk : kExitVerifyFailure;
}

struct FitFlags {
  std::string csv;
  std::string impl = "fast";
  std::string pass = "fwd";
  std::string axis = "N";
  std::string mask;
};

int run_fit_command(const FitFlags& flags) {
  const std::vector<la::BenchRecord> all = la::read_csv_file(flags.csv);
  const la::Impl impl = impl_from_flag(flags.impl);
  const la::PassKind pass =
      flags.pass == "bwd" ? la::PassKind::Backward : la::PassKind::Forward;
  const la::SweepAxis axis = flags.axis == "D" ? la::SweepAxis::D : la::SweepAxis::N;

  std::vector<la::BenchRecord> filtered;
  for (const la::BenchRecord& r : all) {
    if (r.impl != impl || r.pass != pass) continue;
    if (!flags.mask.empty() && flags.mask != la::mask_name(r.mask)) continue;
    filtered.push_back(r);
  }
  const la::SlopeFit fit = la::fit_slope(filtered, axis);
  std::printf("impl=%s pass=%s axis=%s points=%zu\n", impl_name(impl), pass_name(pass),
              flags.axis.c_str(), fit.points.size());
  std::printf("slope=%.6f intercept=%.6f r2=%.6f\n", fit.slope, fit.intercept, fit.r2);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"linear attention kernel engine benchmark and verification harness"};
  app.require_subcommand(1);

  SweepFlags sweep_flags;
  CLI::App* sweep = app.add_subcommand("sweep", "time/memory scaling sweeps, CSV output");
  sweep->set_config("--config");
  sweep->add_option("--impl", sweep_flags.impls,
                    "implementations: fast, quad, softmax, recurrent (repeatable)");
  sweep->add_option("--pass", sweep_flags.pass, "fwd|bwd|both");
  sweep->add_option("--mask", sweep_flags.mask, "causal|none");
  sweep->add_option("--B", sweep_flags.batch, "batch size");
  sweep->add_option("--H", sweep_flags.heads, "heads");
  CLI::Option* n_option =
      sweep->add_option("--N", sweep_flags.seq_lens, "sequence lengths (comma list)")
          ->delimiter(',');
  sweep->add_option("--D", sweep_flags.dims, "head dimensions (comma list)")->delimiter(',');
  sweep->add_option("--sweep-axis", sweep_flags.axis, "N|D");
  sweep->add_option("--L", sweep_flags.reduction_blocks,
                    "reduction blocks override (must divide D; 0 = D/32 rule)");
  sweep->add_option("--workers", sweep_flags.workers, "worker pool size (0 = hardware)");
  sweep->add_option("--precision", sweep_flags.precision, "f32|f64 (fast kernels only)");
  sweep->add_option("--repeats", sweep_flags.repeats, "timed repeats per point (median)");
  sweep->add_option("--seed", sweep_flags.seed, "fill seed");
  sweep->add_option("--normalize", sweep_flags.normalize, "on|off row-normalize Q,K");
  sweep->add_option("--a", sweep_flags.a, "kernel coefficient a");
  sweep->add_option("--b", sweep_flags.b, "kernel coefficient b");
  sweep->add_option("--out", sweep_flags.out, "CSV output path");
  sweep->add_option("--mem-budget-scalars", sweep_flags.mem_budget,
                    "skip points whose estimated scalar footprint exceeds this");
  sweep->add_option("--deterministic", sweep_flags.deterministic, "on|off");
  sweep->add_flag("--layout-proxy", sweep_flags.layout_proxy,
                  "also time swapped input layouts and report the delta");

  VerifyFlags verify_flags;
  CLI::App* verify = app.add_subcommand("verify", "run the oracle verification suites");
  verify->set_config("--config");
  verify->add_option("--suite", verify_flags.suite,
                     "all|forward|backward|recurrent|plan|workspace|normalize");
  verify->add_option("--seed", verify_flags.seed, "case seed");
  verify->add_option("--workers", verify_flags.workers, "worker pool size (0 = hardware)");
  verify->add_option("--fwd-cases", verify_flags.fwd_cases, "forward equivalence cases");
  verify->add_option("--bwd-cases", verify_flags.bwd_cases, "gradient check cases");
  verify->add_option("--rec-cases", verify_flags.rec_cases, "recurrent equivalence cases");
  verify->add_option("--norm-cases", verify_flags.norm_cases, "normalization safety cases");
  verify->add_option("--inject-defect", verify_flags.defect,
                     "none|beta-k-sign|causal-off-by-one|drop-v-a-term");

  FitFlags fit_flags;
  CLI::App* fit = app.add_subcommand("fit", "log-log slope fit over sweep CSV records");
  fit->add_option("--csv", fit_flags.csv, "input CSV path")->required();
  fit->add_option("--impl", fit_flags.impl, "implementation to fit");
  fit->add_option("--pass", fit_flags.pass, "fwd|bwd");
  fit->add_option("--axis", fit_flags.axis, "N|D");
  fit->add_option("--mask", fit_flags.mask, "optional mask filter: causal|none");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigOrIo;
  }

  try {
    if (sweep->parsed()) return run_sweep_command(sweep_flags, n_option->count() > 0);
    if (verify->parsed()) return run_verify_command(verify_flags);
    if (fit->parsed()) return run_fit_command(fit_flags);
  } catch (const la::InsufficientData& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigOrIo;
  } catch (const la::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigOrIo;
  } catch (const la::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigOrIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigOrIo;
  }
  return kExitOk;
}
