#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "icenet/channel_model.hpp"
#include "icenet/checkpoint.hpp"
#include "icenet/classical.hpp"
#include "icenet/csv.hpp"
#include "icenet/explicit_net.hpp"
#include "icenet/fixed_point.hpp"
#include "icenet/ofdm_frame.hpp"
#include "icenet/training.hpp"

namespace icenet {

// Frame-seed bases keep the splits disjoint for a given run seed.
inline constexpr std::uint64_t kTrainFrameBase = 0;
inline constexpr std::uint64_t kValFrameBase = 1'000'000;
inline constexpr std::uint64_t kTestFrameBase = 2'000'000;
inline constexpr std::uint64_t kCalibFrameBase = 3'000'000;

enum class Method { ideal, ls_li, ft, lmmse, ecenet, icenet };

inline std::string method_name(Method m, int depth = 0) {
  switch (m) {
    case Method::ideal: return "ideal";
    case Method::ls_li: return "ls_li";
    case Method::ft: return "ft";
    case Method::lmmse: return "lmmse";
    case Method::ecenet: return "ecenet_n" + std::to_string(depth);
    case Method::icenet: return "icenet";
  }
  return "unknown";
}

/// One evaluated sample.
struct EvalRecord {
  std::size_t sample_id = 0;
  std::string method;
  double snr_db = 0.0;
  double nmse = 0.0;
  std::optional<int> iters_used;  // implicit model only
  bool converged = true;
};

struct Table1Setting {
  double eps;
  int tau;
};

inline std::vector<Table1Setting> default_table1_settings() { return {{0.5, 10}, {0.1, 10}, {0.01, 20}, {0.001, 30}}; }

/// Everything an evaluation run needs; every test sample is regenerated
/// deterministically from (channel, pattern, seed).
struct RunConfig {
  ChannelConfig channel;
  PilotPattern pattern;
  double speed_kmh = 100.0;
  std::vector<double> snr_grid{-10.0, -5.0, 0.0, 5.0, 10.0, 15.0};
  int n_test_frames = 25;
  int n_calib_frames = 500;
  int ft_window = 0;  // 0 selects n_pilot_subcarriers / 4
  SolveConfig solve{1e-2, 10};
  std::uint64_t seed = 2024;
  std::string out_dir = ".";
  std::string icenet_checkpoint;
  std::map<int, std::string> ecenet_checkpoints;  // depth -> path

  double table1_speed_kmh = 10.0;
  double table1_snr_db = 10.0;
  std::vector<Table1Setting> table1_settings = default_table1_settings();
  double hist_snr_db = 10.0;
  double depth_snr_db = 10.0;

  void validate() const {
    channel.validate();
    for (double s : snr_grid)
      if (s < -10.0 || s > 15.0) throw ConfigError("run config: snr grid must lie within [-10, 15] dB");
    if (n_test_frames < 1) throw ConfigError("run config: n_test_frames must be >= 1");
    if (n_calib_frames < 1) throw ConfigError("run config: n_calib_frames must be >= 1");
    solve.validate();
  }

  ChannelConfig channel_at(double kmh) const {
    ChannelConfig c = channel;
    c.ue_speed_mps = kmh_to_mps(kmh);
    c.seed = seed;
    return c;
  }
};

inline std::vector<ChannelFrame> test_frames(const RunConfig& run, double kmh) {
  return generate_dataset(run.channel_at(kmh), run.n_test_frames, run.seed + kTestFrameBase);
}

/// The same unit noise is reused at every SNR, so all comparisons are paired.
inline std::vector<FrameSample> samples_at(const std::vector<ChannelFrame>& frames, const RunConfig& run, double snr_db,
                                           std::uint64_t stream = 0x7e57) {
  return build_samples(frames, run.pattern, SnrPolicy::fixed(snr_db), mix_seed(run.seed, stream));
}

inline IEBParams<float> load_icenet(const std::string& path) {
  if (path.empty() || !std::filesystem::exists(path)) throw ResolutionError(path.empty() ? "<icenet checkpoint>" : path);
  auto ck = load_checkpoint<float>(path);
  if (ck.kind != ModelKind::implicit || ck.blocks.size() != 1)
    throw FormatError("expected a single-block implicit checkpoint: " + path, 8);
  return ck.blocks.front();
}

inline ECENetParams<float> load_ecenet(const std::string& path) {
  if (path.empty() || !std::filesystem::exists(path)) throw ResolutionError(path.empty() ? "<ecenet checkpoint>" : path);
  auto ck = load_checkpoint<float>(path);
  if (ck.kind != ModelKind::explicit_stack) throw FormatError("expected an explicit-stack checkpoint: " + path, 8);
  return ck.blocks;
}

/// Per-sample equilibrium solves. A divergent sample falls back to its last
/// finite iterate and is reported as not converged at the iteration cap.
inline std::vector<SolveResult<float>> solve_samples(const std::vector<FrameSample>& samples,
                                                     const IEBParams<float>& params, const SolveConfig& solve) {
  BlockWorkspace<float> ws;
  std::vector<SolveResult<float>> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    try {
      out.push_back(deq_forward(s.x, params, solve, &ws));
    } catch (const DivergenceError& e) {
      SolveResult<float> r;
      r.z_star = Tensor3<float>(2, s.x.rows(), s.x.cols());
      for (std::size_t i = 0; i < r.z_star.size() && i < e.last_finite().size(); ++i)
        r.z_star[i] = static_cast<float>(e.last_finite()[i]);
      r.iters_used = solve.max_iters;
      r.residual_trace = e.trace();
      r.converged = false;
      out.push_back(std::move(r));
    }
  }
  return out;
}

inline std::vector<EvalRecord> icenet_records(const std::vector<FrameSample>& samples,
                                              const std::vector<SolveResult<float>>& sols) {
  std::vector<EvalRecord> recs;
  for (std::size_t i = 0; i < samples.size(); ++i)
    recs.push_back({i, method_name(Method::icenet), samples[i].snr_db, nmse(sols[i].z_star, samples[i].y),
                    sols[i].iters_used, sols[i].converged});
  return recs;
}

template <class Estimator>
std::vector<EvalRecord> records_for(const std::vector<FrameSample>& samples, const std::string& name, Estimator&& est) {
  std::vector<EvalRecord> recs;
  for (std::size_t i = 0; i < samples.size(); ++i)
    recs.push_back({i, name, samples[i].snr_db, nmse(est(samples[i]), samples[i].y), std::nullopt, true});
  return recs;
}

inline double mean_nmse(const std::vector<EvalRecord>& recs) {
  std::vector<double> v;
  for (const auto& r : recs) v.push_back(r.nmse);
  return mean_of(v);
}

inline double mean_iters(const std::vector<EvalRecord>& recs) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& r : recs)
    if (r.iters_used) {
      s += *r.iters_used;
      ++n;
    }
  return n ? s / static_cast<double>(n) : 0.0;
}

struct SweepRow {
  std::string method;
  double snr_db;
  double mean_nmse;
  std::optional<double> mean_iters;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<EvalRecord> records;

  /// method,snr,mean_nmse,mean_iters
  std::string to_csv() const {
    CsvWriter csv({"method", "snr", "mean_nmse", "mean_iters"});
    for (const auto& r : rows)
      csv.row({r.method, fmt_real(r.snr_db), fmt_real(r.mean_nmse), r.mean_iters ? fmt_real(*r.mean_iters) : ""});
    return csv.str();
  }

  const SweepRow* find(const std::string& method, double snr) const {
    for (const auto& r : rows)
      if (r.method == method && r.snr_db == snr) return &r;
    return nullptr;
  }
};

/// Models evaluated next to the classical baselines in a sweep.
struct SweepModels {
  std::optional<IEBParams<float>> icenet;
  std::map<int, ECENetParams<float>> ecenets;
};

inline SweepResult run_snr_sweep(const RunConfig& run, const SweepModels& models) {
  run.validate();
  const auto frames = test_frames(run, run.speed_kmh);
  const auto calib_frames =
      generate_dataset(run.channel_at(run.speed_kmh), run.n_calib_frames, run.seed + kCalibFrameBase);
  const int window = run.ft_window > 0 ? run.ft_window : default_ft_window(run.pattern, run.channel.n_subcarriers);
  SweepResult out;
  auto add = [&](const std::string& name, double snr, std::vector<EvalRecord> recs, bool with_iters) {
    out.rows.push_back({name, snr, mean_nmse(recs), with_iters ? std::optional<double>(mean_iters(recs)) : std::nullopt});
    out.records.insert(out.records.end(), recs.begin(), recs.end());
  };
  for (double snr : run.snr_grid) {
    const auto samples = samples_at(frames, run, snr);
    add("ideal", snr, records_for(samples, "ideal", [](const FrameSample& s) { return s.y; }), false);
    add("ls_li", snr,
        records_for(samples, "ls_li", [&](const FrameSample& s) { return estimate_ls_li(s, run.pattern); }), false);
    add("ft", snr,
        records_for(samples, "ft", [&](const FrameSample& s) { return estimate_ft(s, run.pattern, window); }), false);
    const auto calib = calibrate_lmmse(samples_at(calib_frames, run, snr, 0xca1b), run.pattern, snr);
    add("lmmse", snr, records_for(samples, "lmmse", [&](const FrameSample& s) { return estimate_lmmse(s, calib); }),
        false);
    for (const auto& [depth, params] : models.ecenets) {
      const auto name = method_name(Method::ecenet, depth);
      add(name, snr, records_for(samples, name, [&](const FrameSample& s) { return ecenet_forward(s.x, params); }),
          false);
    }
    if (models.icenet) add("icenet", snr, icenet_records(samples, solve_samples(samples, *models.icenet, run.solve)), true);
  }
  return out;
}

struct Table1Row {
  double eps;
  int tau;
  double iterf_mean;
  std::size_t param_count;
  double test_nmse;
};

/// eps,tau,iterf_mean,param_count,test_nmse
inline std::string table1_csv(const std::vector<Table1Row>& rows) {
  CsvWriter csv({"eps", "tau", "iterf_mean", "param_count", "test_nmse"});
  for (const auto& r : rows)
    csv.row({fmt_real(r.eps), std::to_string(r.tau), fmt_real(r.iterf_mean), std::to_string(r.param_count),
             fmt_real(r.test_nmse)});
  return csv.str();
}

/// Re-evaluates one checkpoint under each (eps, tau) setting; no retraining.
inline std::vector<Table1Row> run_table1(const RunConfig& run, const IEBParams<float>& params) {
  run.validate();
  const auto samples = samples_at(test_frames(run, run.table1_speed_kmh), run, run.table1_snr_db);
  std::vector<Table1Row> rows;
  for (const auto& setting : run.table1_settings) {
    SolveConfig solve = run.solve;
    solve.eps = setting.eps;
    solve.max_iters = setting.tau;
    const auto recs = icenet_records(samples, solve_samples(samples, params, solve));
    rows.push_back({setting.eps, setting.tau, mean_iters(recs), param_count(params), mean_nmse(recs)});
  }
  return rows;
}

struct IterationHistogram {
  std::vector<std::size_t> counts;  // counts[i] = samples that used i+1 iterations
  double mean_iters = 0.0;
  std::size_t n_samples = 0;
  std::size_t n_converged_below_cap = 0;
  std::vector<SolveResult<float>> solves;

  /// iters_used,sample_count
  std::string to_csv() const {
    CsvWriter csv({"iters_used", "sample_count"});
    for (std::size_t i = 0; i < counts.size(); ++i) csv.row({std::to_string(i + 1), std::to_string(counts[i])});
    return csv.str();
  }

  /// sample_id,iter,residual
  std::string trace_csv() const {
    CsvWriter csv({"sample_id", "iter", "residual"});
    for (std::size_t s = 0; s < solves.size(); ++s)
      for (std::size_t k = 0; k < solves[s].residual_trace.size(); ++k)
        csv.row({std::to_string(s), std::to_string(k + 1), fmt_real(solves[s].residual_trace[k])});
    return csv.str();
  }

  std::size_t mode() const {
    return static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin()) + 1;
  }
};

inline IterationHistogram iteration_histogram(const std::vector<FrameSample>& samples, const IEBParams<float>& params,
                                              const SolveConfig& solve) {
  IterationHistogram h;
  h.counts.assign(solve.max_iters, 0);
  h.solves = solve_samples(samples, params, solve);
  double sum = 0.0;
  for (const auto& s : h.solves) {
    h.counts[s.iters_used - 1]++;
    sum += s.iters_used;
    if (s.converged && s.iters_used < solve.max_iters) ++h.n_converged_below_cap;
  }
  h.n_samples = h.solves.size();
  h.mean_iters = h.n_samples ? sum / static_cast<double>(h.n_samples) : 0.0;
  return h;
}

inline IterationHistogram run_iteration_histogram(const RunConfig& run, const IEBParams<float>& params) {
  run.validate();
  return iteration_histogram(samples_at(test_frames(run, run.speed_kmh), run, run.hist_snr_db), params, run.solve);
}

struct DepthRow {
  std::string model_label;
  std::size_t param_count;
  double mean_nmse;
};

/// model_label,param_count,mean_nmse
inline std::string depth_csv(const std::vector<DepthRow>& rows) {
  CsvWriter csv({"model_label", "param_count", "mean_nmse"});
  for (const auto& r : rows) csv.row({r.model_label, std::to_string(r.param_count), fmt_real(r.mean_nmse)});
  return csv.str();
}

/// ICENet's effective depth is its mean iteration count times the number of
/// sub-blocks, written into its label for comparison with the stacked models.
inline std::vector<DepthRow> run_depth_comparison(const RunConfig& run, const IEBParams<float>& icenet,
                                                  const std::map<int, ECENetParams<float>>& ecenets) {
  run.validate();
  const auto samples = samples_at(test_frames(run, run.speed_kmh), run, run.depth_snr_db);
  std::vector<DepthRow> rows;
  const auto recs = icenet_records(samples, solve_samples(samples, icenet, run.solve));
  const double depth = mean_iters(recs) * icenet.config.n_sub_blocks;
  char label[64];
  std::snprintf(label, sizeof label, "icenet_eff_depth_%.2f", depth);
  rows.push_back({label, param_count(icenet), mean_nmse(recs)});
  for (const auto& [n, params] : ecenets) {
    const auto r = records_for(samples, "ecenet", [&](const FrameSample& s) { return ecenet_forward(s.x, params); });
    rows.push_back({method_name(Method::ecenet, n), ecenet_param_count(params), mean_nmse(r)});
  }
  return rows;
}

}  // namespace icenet
