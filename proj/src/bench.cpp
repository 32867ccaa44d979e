#include "la/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <thread>

#include "la/backward.hpp"
#include "la/detail/backward_kernels.hpp"
#include "la/detail/forward_kernels.hpp"
#include "la/detail/view.hpp"
#include "la/forward.hpp"
#include "la/plan.hpp"
#include "la/workspace.hpp"

namespace la {

namespace {

using Clock = std::chrono::steady_clock;

double time_once(const std::function<void()>& fn) {
  const auto start = Clock::now();
  fn();
  const std::chrono::duration<double> elapsed = Clock::now() - start;
  return std::max(elapsed.count(), 1e-9);
}

// One warm-up run, then the median of `repeats` timed runs.
double median_time(const std::function<void()>& fn, int repeats) {
  fn();
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(repeats));
  for (int r = 0; r < repeats; ++r) times.push_back(time_once(fn));
  std::sort(times.begin(), times.end());
  const std::size_t mid = times.size() / 2;
  if (times.size() % 2 == 1) return times[mid];
  return 0.5 * (times[mid - 1] + times[mid]);
}

template <typename T>
std::vector<T> cast_flat(const HeadTensor& t) {
  const auto src = t.flat();
  std::vector<T> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = static_cast<T>(src[i]);
  return out;
}

double sum_all(std::span<const double> v) {
  double s = 0.0;
  for (const double x : v) s += x;
  return s;
}

template <typename T>
double sum_all_t(const std::vector<T>& v) {
  double s = 0.0;
  for (const T x : v) s += static_cast<double>(x);
  return s;
}

struct PointInputs {
  Shape shape;
  HeadTensor q;
  HeadTensor k;
  HeadTensor v;
  HeadTensor omega;
};

PointInputs make_inputs(const SweepConfig& config, std::int64_t n, std::int64_t d,
                        bool need_omega) {
  PointInputs in;
  in.shape = Shape{config.batch, config.heads, n, d};
  HeadTensor q = make_tensor(in.shape, Layout::SequenceMajor,
                             FillSpec::seeded_uniform(config.seed + 1));
  HeadTensor k = make_tensor(in.shape, Layout::SequenceMajor,
                             FillSpec::seeded_uniform(config.seed + 2));
  in.v = make_tensor(in.shape, Layout::FeatureMajor, FillSpec::seeded_uniform(config.seed + 3));
  if (config.normalize) {
    auto [qn, kn] = normalize_qk(q, k);
    in.q = std::move(qn);
    in.k = std::move(kn);
  } else {
    in.q = std::move(q);
    in.k = std::move(k);
  }
  if (need_omega) {
    in.omega =
        make_tensor(in.shape, Layout::FeatureMajor, FillSpec::seeded_uniform(config.seed + 4));
  }
  return in;
}

BlockPlan plan_for(const SweepConfig& config, const Shape& shape) {
  BlockPlan plan = default_plan(shape, config.workers);
  if (config.reduction_blocks > 0) {
    plan.reduction_blocks = config.reduction_blocks;
  }
  plan.deterministic = config.deterministic;
  validate_plan(plan, shape.groups(), shape.dim);
  return plan;
}

// Timed fast-kernel point at a given scalar width. Layouts may be swapped to
// probe layout sensitivity; records are always emitted for the canonical run.
template <typename T>
void bench_fast_point(const SweepConfig& config, const PointInputs& in, const BlockPlan& plan,
                      bool swapped_layouts, std::vector<BenchRecord>* records,
                      double* forward_time_out) {
  const std::int64_t groups = in.shape.groups();
  const std::int64_t n = in.shape.seq_len;
  const std::int64_t d = in.shape.dim;
  const bool causal = config.mask == AttentionMask::Causal;
  const std::size_t count = static_cast<std::size_t>(groups) * n * d;

  const HeadTensor q_t = swapped_layouts ? relayout(in.q, Layout::FeatureMajor) : in.q;
  const HeadTensor k_t = swapped_layouts ? relayout(in.k, Layout::FeatureMajor) : in.k;
  const HeadTensor v_t = swapped_layouts ? relayout(in.v, Layout::SequenceMajor) : in.v;

  const std::vector<T> q_data = cast_flat<T>(q_t);
  const std::vector<T> k_data = cast_flat<T>(k_t);
  const std::vector<T> v_data = cast_flat<T>(v_t);
  const auto qv = detail::make_const_view(q_data.data(), groups, n, d, q_t.layout());
  const auto kv = detail::make_const_view(k_data.data(), groups, n, d, k_t.layout());
  const auto vv = detail::make_const_view(v_data.data(), groups, n, d, v_t.layout());

  std::vector<T> out(count, T(0));
  std::vector<T> g(static_cast<std::size_t>(groups) * n, T(0));
  const auto out_view = detail::make_mut_view(out.data(), groups, n, d, Layout::FeatureMajor);

  const LinearKernelCoeffs c = config.coeffs;
  auto forward_run = [&] {
    detail::run_forward<T>(qv, kv, vv, c, plan, causal, Fault::None, out_view, g.data());
  };

  BenchRecord base;
  base.mask = config.mask;
  base.batch = config.batch;
  base.heads = config.heads;
  base.seq_len = n;
  base.dim = d;
  base.reduction_blocks = plan.reduction_blocks;
  base.workers = plan.workers;
  base.precision = std::is_same_v<T, float> ? Precision::F32 : Precision::F64;
  base.repeats = config.repeats;
  base.impl = Impl::Fast;

  if (config.forward_pass || config.backward_pass) {
    const WorkspaceReport report = measure_workspace(forward_run);
    const double t = median_time(forward_run, config.repeats);
    if (forward_time_out != nullptr) *forward_time_out = t;
    if (config.forward_pass && records != nullptr) {
      BenchRecord rec = base;
      rec.pass = PassKind::Forward;
      rec.wall_time_s = t;
      rec.peak_transient_scalars = report.peak_transient_scalars;
      rec.checksum = sum_all_t(out);
      records->push_back(rec);
    }
  }

  if (config.backward_pass) {
    const std::vector<T> omega_data = cast_flat<T>(in.omega);
    const auto ov = detail::make_const_view(out.data(), groups, n, d, Layout::FeatureMajor);
    const auto wv =
        detail::make_const_view(omega_data.data(), groups, n, d, in.omega.layout());
    std::vector<T> dq(count, T(0)), dk(count, T(0)), dv(count, T(0));
    const auto dq_view = detail::make_mut_view(dq.data(), groups, n, d, Layout::SequenceMajor);
    const auto dk_view = detail::make_mut_view(dk.data(), groups, n, d, Layout::FeatureMajor);
    const auto dv_view = detail::make_mut_view(dv.data(), groups, n, d, Layout::FeatureMajor);
    auto backward_run = [&] {
      detail::run_backward<T>(qv, kv, vv, ov, wv, g.data(), c, plan, causal, Fault::None,
                              dq_view, dk_view, dv_view);
    };
    const WorkspaceReport report = measure_workspace(backward_run);
    const double t = median_time(backward_run, config.repeats);
    if (records != nullptr) {
      BenchRecord rec = base;
      rec.pass = PassKind::Backward;
      rec.wall_time_s = t;
      rec.peak_transient_scalars = report.peak_transient_scalars;
      rec.checksum = sum_all_t(dq) + sum_all_t(dk) + sum_all_t(dv);
      records->push_back(rec);
    }
  }
}

void bench_oracle_point(const SweepConfig& config, Impl impl, const PointInputs& in,
                        const BlockPlan& plan, std::vector<BenchRecord>* records) {
  HeadTensor out;
  std::vector<double> g;
  auto run = [&] {
    switch (impl) {
      case Impl::Quadratic: {
        QuadraticResult r = quadratic_la(in.q, in.k, in.v, config.coeffs, config.mask);
        out = std::move(r.out);
        g = std::move(r.g);
        break;
      }
      case Impl::Softmax:
        out = softmax_attention(in.q, in.k, in.v, config.mask);
        break;
      case Impl::Recurrent:
        // Timing reference for the recurrent formulation; the normalizer is
        // omitted here as is common practice for it.
        out = recurrent_la(in.q, in.k, in.v, /*normalize=*/false);
        break;
      default:
        throw InvalidArgument("not an oracle implementation");
    }
  };

  const WorkspaceReport report = measure_workspace(run);
  const double t = median_time(run, config.repeats);

  BenchRecord rec;
  rec.impl = impl;
  rec.pass = PassKind::Forward;
  rec.mask = config.mask;
  rec.batch = config.batch;
  rec.heads = config.heads;
  rec.seq_len = in.shape.seq_len;
  rec.dim = in.shape.dim;
  rec.reduction_blocks = plan.reduction_blocks;
  rec.workers = 1;  // oracles are single-threaded by design
  rec.precision = Precision::F64;
  rec.repeats = config.repeats;
  rec.wall_time_s = t;
  rec.peak_transient_scalars = report.peak_transient_scalars;
  rec.checksum = sum_all(out.flat());
  records->push_back(rec);
}

std::size_t estimate_scalars(Impl impl, std::int64_t groups, std::int64_t n, std::int64_t d,
                             bool backward) {
  const std::size_t gnd = static_cast<std::size_t>(groups) * n * d;
  const std::size_t gn = static_cast<std::size_t>(groups) * n;
  if (impl == Impl::Fast) {
    std::size_t total = 8 * gnd + static_cast<std::size_t>(groups) * d * d + 2 * gn;
    if (backward) total += 9 * gnd + static_cast<std::size_t>(groups) * d * d;
    return total;
  }
  return 5 * gnd + gn + static_cast<std::size_t>(n);
}

constexpr std::int64_t kQuadraticGuardN = 4096;

}  // namespace

const char* impl_name(Impl impl) {
  switch (impl) {
    case Impl::Fast:
      return "fast";
    case Impl::Quadratic:
      return "quad";
    case Impl::Softmax:
      return "softmax";
    case Impl::Recurrent:
      return "recurrent";
  }
  return "unknown";
}

const char* pass_name(PassKind pass) { return pass == PassKind::Forward ? "fwd" : "bwd"; }

const char* mask_name(AttentionMask mask) {
  return mask == AttentionMask::Causal ? "causal" : "none";
}

const char* precision_name(Precision precision) {
  return precision == Precision::F32 ? "f32" : "f64";
}

SweepOutcome run_sweep(const SweepConfig& config) {
  SweepOutcome outcome;
  if (config.repeats < 3) {
    throw InvalidArgument("repeats must be at least 3");
  }
  if (config.batch <= 0 || config.heads <= 0) {
    throw InvalidArgument("batch and heads must be positive");
  }

  const std::vector<std::int64_t>& axis_values =
      config.axis == SweepAxis::N ? config.seq_lens : config.dims;
  if (axis_values.empty()) return outcome;
  if (config.axis == SweepAxis::N && config.dims.empty()) {
    throw InvalidArgument("an N sweep needs a head dimension");
  }
  if (config.axis == SweepAxis::D && config.seq_lens.empty()) {
    throw InvalidArgument("a D sweep needs a sequence length");
  }

  for (const std::int64_t axis_value : axis_values) {
    const std::int64_t n = config.axis == SweepAxis::N ? axis_value : config.seq_lens.front();
    const std::int64_t d = config.axis == SweepAxis::D ? axis_value : config.dims.front();
    if (n <= 0 || d <= 0) throw InvalidArgument("sweep sizes must be positive");

    const bool need_omega = config.backward_pass;
    const PointInputs inputs = make_inputs(config, n, d, need_omega);
    const BlockPlan plan = plan_for(config, inputs.shape);
    const std::int64_t groups = inputs.shape.groups();

    for (const Impl impl : config.impls) {
      std::ostringstream tag;
      tag << impl_name(impl) << " N=" << n << " D=" << d;

      if (impl != Impl::Fast && config.backward_pass && !config.forward_pass) {
        outcome.notes.push_back(tag.str() + ": backward pass not supported, skipped");
        continue;
      }
      if ((impl == Impl::Quadratic || impl == Impl::Softmax) && n > kQuadraticGuardN) {
        outcome.notes.push_back(tag.str() + ": guard, quadratic-cost oracle capped at N=" +
                                std::to_string(kQuadraticGuardN) + ", skipped");
        continue;
      }
      const std::size_t need =
          estimate_scalars(impl, groups, n, d, config.backward_pass && impl == Impl::Fast);
      if (need > config.mem_budget_scalars) {
        outcome.notes.push_back(tag.str() + ": OOM-skipped (needs ~" + std::to_string(need) +
                                " scalars, budget " +
                                std::to_string(config.mem_budget_scalars) + ")");
        continue;
      }

      if (impl == Impl::Fast) {
        double fwd_time = 0.0;
        if (config.precision == Precision::F32) {
          bench_fast_point<float>(config, inputs, plan, false, &outcome.records, &fwd_time);
        } else {
          bench_fast_point<double>(config, inputs, plan, false, &outcome.records, &fwd_time);
        }
        if (config.layout_proxy) {
          SweepConfig probe = config;
          probe.backward_pass = false;
          double swapped_time = 0.0;
          if (config.precision == Precision::F32) {
            bench_fast_point<float>(probe, inputs, plan, true, nullptr, &swapped_time);
          } else {
            bench_fast_point<double>(probe, inputs, plan, true, nullptr, &swapped_time);
          }
          std::ostringstream note;
          note << "layout proxy (data-movement stand-in) " << tag.str()
               << ": canonical=" << fwd_time << "s swapped=" << swapped_time
               << "s ratio=" << swapped_time / fwd_time;
          outcome.notes.push_back(note.str());
        }
      } else {
        if (config.forward_pass) {
          bench_oracle_point(config, impl, inputs, plan, &outcome.records);
        }
        if (config.backward_pass) {
          outcome.notes.push_back(tag.str() + ": backward pass not supported, skipped");
        }
      }
    }
  }
  return outcome;
}

SlopeFit fit_slope(std::span<const BenchRecord> records, SweepAxis axis) {
  std::vector<std::pair<double, double>> points;
  std::vector<std::int64_t> distinct;
  for (const BenchRecord& rec : records) {
    const std::int64_t x = axis == SweepAxis::N ? rec.seq_len : rec.dim;
    if (x <= 0 || rec.wall_time_s <= 0.0) continue;
    points.emplace_back(std::log(static_cast<double>(x)), std::log(rec.wall_time_s));
    if (std::find(distinct.begin(), distinct.end(), x) == distinct.end()) {
      distinct.push_back(x);
    }
  }
  if (points.size() < 3 || distinct.size() < 3) {
    throw InsufficientData("slope fitting needs at least 3 points with distinct axis values");
  }

  const double n = static_cast<double>(points.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : points) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = n * sxx - sx * sx;
  SlopeFit fit;
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;

  const double mean_y = sy / n;
  double ss_res = 0.0, ss_tot = 0.0;
  for (const auto& [x, y] : points) {
    const double pred = fit.intercept + fit.slope * x;
    ss_res += (y - pred) * (y - pred);
    ss_tot += (y - mean_y) * (y - mean_y);
  }
  fit.r2 = ss_tot > 0.0 ? std::max(0.0, 1.0 - ss_res / ss_tot) : (ss_res == 0.0 ? 1.0 : 0.0);
  fit.points = std::move(points);
  return fit;
}

const char* kCsvHeader =
    "impl,pass,mask,B,H,N,D,L,workers,precision,wall_time_s,peak_transient_scalars,checksum";

void emit_csv(std::span<const BenchRecord> records, std::ostream& out) {
  out << kCsvHeader << '\n';
  char buf[64];
  for (const BenchRecord& r : records) {
    out << impl_name(r.impl) << ',' << pass_name(r.pass) << ',' << mask_name(r.mask) << ','
        << r.batch << ',' << r.heads << ',' << r.seq_len << ',' << r.dim << ','
        << r.reduction_blocks << ',' << r.workers << ',' << precision_name(r.precision) << ',';
    std::snprintf(buf, sizeof(buf), "%.9g", r.wall_time_s);
    out << buf << ',' << r.peak_transient_scalars << ',';
    std::snprintf(buf, sizeof(buf), "%.9g", r.checksum);
    out << buf << '\n';
  }
  if (!out) {
    throw IoError("failed while writing CSV records");
  }
}

void write_csv(std::span<const BenchRecord> records, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open CSV output path: " + path);
  }
  emit_csv(records, out);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream iss(line);
  while (std::getline(iss, field, ',')) fields.push_back(field);
  return fields;
}

Impl parse_impl(const std::string& s) {
  if (s == "fast") return Impl::Fast;
  if (s == "quad") return Impl::Quadratic;
  if (s == "softmax") return Impl::Softmax;
  if (s == "recurrent") return Impl::Recurrent;
  throw IoError("unknown impl in CSV: " + s);
}

}  // namespace

std::vector<BenchRecord> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw IoError("empty CSV input");
  }
  if (line != kCsvHeader) {
    throw IoError("unexpected CSV header: " + line);
  }
  std::vector<BenchRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (f.size() != 13) {
      throw IoError("malformed CSV row: " + line);
    }
    BenchRecord r;
    r.impl = parse_impl(f[0]);
    if (f[1] == "fwd") {
      r.pass = PassKind::Forward;
    } else if (f[1] == "bwd") {
      r.pass = PassKind::Backward;
    } else {
      throw IoError("unknown pass in CSV: " + f[1]);
    }
    if (f[2] == "causal") {
      r.mask = AttentionMask::Causal;
    } else if (f[2] == "none") {
      r.mask = AttentionMask::None;
    } else {
      throw IoError("unknown mask in CSV: " + f[2]);
    }
    r.batch = std::stoll(f[3]);
    r.heads = std::stoll(f[4]);
    r.seq_len = std::stoll(f[5]);
    r.dim = std::stoll(f[6]);
    r.reduction_blocks = std::stoll(f[7]);
    r.workers = std::stoi(f[8]);
    if (f[9] == "f32") {
      r.precision = Precision::F32;
    } else if (f[9] == "f64") {
      r.precision = Precision::F64;
    } else {
      throw IoError("unknown precision in CSV: " + f[9]);
    }
    r.wall_time_s = std::stod(f[10]);
    r.peak_transient_scalars = static_cast<std::size_t>(std::stoull(f[11]));
    r.checksum = std::stod(f[12]);
    records.push_back(r);
  }
  return records;
}

std::vector<BenchRecord> read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open CSV input path: " + path);
  }
  return read_csv(in);
}

}  // namespace la
