#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "icenet/config_file.hpp"
#include "icenet/dataset_io.hpp"
#include "icenet/evaluation.hpp"

namespace icenet {

/// A full experiment: evaluation run, training recipe and model shapes.
/// Built from a key=value config; anything not given keeps its default.
struct Experiment {
  RunConfig run;
  TrainConfig train;
  SolveConfig train_solve;  // forward solve used while training
  IEBConfig block;
  std::vector<double> train_speeds_kmh{10.0, 100.0};
  std::vector<int> ecenet_depths{1, 2, 4, 9};
  std::string train_data;  // optional dataset files; generated in memory when empty
  std::string val_data;

  std::string icenet_path() const { return run.out_dir + "/icenet.iebp"; }
  std::string ecenet_path(int depth) const { return run.out_dir + "/" + method_name(Method::ecenet, depth) + ".iebp"; }

  ECENetConfig ecenet_config(int depth) const {
    ECENetConfig c;
    c.n_blocks = depth;
    c.block_cfg = block;
    return c;
  }

  void validate() const {
    run.validate();
    train.validate();
    train_solve.validate();
    block.validate();
    if (train_speeds_kmh.empty()) throw ConfigError("experiment: train_speeds_kmh is empty");
    for (int d : ecenet_depths)
      if (d < 1) throw ConfigError("experiment: ecenet depths must be >= 1");
  }
};

inline const std::vector<std::string>& experiment_keys() {
  static const std::vector<std::string> keys{
      "seed", "out_dir", "speed_kmh", "snr_grid", "n_test_frames", "n_calib_frames", "ft_window",
      "eps", "tau", "history_m", "tikhonov_lambda", "mixing_beta",
      "table1_speed_kmh", "table1_snr_db", "hist_snr_db", "depth_snr_db",
      "n_subcarriers", "n_symbols", "n_rx", "n_paths", "rms_delay_spread_ns", "carrier_freq_hz",
      "pilot_stride",
      "hidden_width", "norm", "norm_groups", "block_seed",
      "epochs", "cosine_period_epochs", "batch_size", "lr_init", "lr_final", "grad_clip_norm",
      "n_train", "n_val", "n_test", "train_eps", "train_tau", "train_snr_lo_db", "train_snr_hi_db", "train_speeds_kmh",
      "ecenet_depths", "train_data", "val_data"};
  return keys;
}

inline Experiment experiment_from(const ConfigFile& cf) {
  if (const auto bad = cf.unknown_keys(experiment_keys()); !bad.empty())
    throw ConfigError("unknown config key '" + bad.front() + "'");
  Experiment e;
  auto& run = e.run;
  run.seed = static_cast<std::uint64_t>(cf.get("seed", static_cast<long long>(run.seed)));
  run.out_dir = cf.get("out_dir", run.out_dir);
  run.speed_kmh = cf.get("speed_kmh", run.speed_kmh);
  run.snr_grid = cf.get_list("snr_grid", run.snr_grid);
  run.n_test_frames = cf.get("n_test_frames", run.n_test_frames);
  run.n_calib_frames = cf.get("n_calib_frames", run.n_calib_frames);
  run.ft_window = cf.get("ft_window", run.ft_window);
  run.solve.eps = cf.get("eps", run.solve.eps);
  run.solve.max_iters = cf.get("tau", run.solve.max_iters);
  run.solve.history_m = cf.get("history_m", run.solve.history_m);
  run.solve.tikhonov_lambda = cf.get("tikhonov_lambda", run.solve.tikhonov_lambda);
  run.solve.mixing_beta = cf.get("mixing_beta", run.solve.mixing_beta);
  run.table1_speed_kmh = cf.get("table1_speed_kmh", run.table1_speed_kmh);
  run.table1_snr_db = cf.get("table1_snr_db", run.table1_snr_db);
  run.hist_snr_db = cf.get("hist_snr_db", run.hist_snr_db);
  run.depth_snr_db = cf.get("depth_snr_db", run.depth_snr_db);

  auto& ch = run.channel;
  ch.n_subcarriers = cf.get("n_subcarriers", ch.n_subcarriers);
  ch.n_symbols = cf.get("n_symbols", ch.n_symbols);
  ch.n_rx = cf.get("n_rx", ch.n_rx);
  ch.n_paths = cf.get("n_paths", ch.n_paths);
  ch.rms_delay_spread_s = cf.get("rms_delay_spread_ns", ch.rms_delay_spread_s * 1e9) * 1e-9;
  ch.carrier_freq_hz = cf.get("carrier_freq_hz", ch.carrier_freq_hz);
  run.pattern.subcarrier_stride = cf.get("pilot_stride", run.pattern.subcarrier_stride);

  auto& b = e.block;
  b.hidden_width = cf.get("hidden_width", b.hidden_width);
  b.norm_groups = cf.get("norm_groups", b.norm_groups);
  b.seed = static_cast<std::uint64_t>(cf.get("block_seed", static_cast<long long>(b.seed)));
  const auto norm = cf.get("norm", std::string("group_norm"));
  if (norm == "group_norm") b.norm = NormKind::group_norm;
  else if (norm == "weight_scaled") b.norm = NormKind::weight_scaled;
  else throw ConfigError("config key 'norm': expected group_norm or weight_scaled");

  auto& t = e.train;
  t.seed = run.seed;
  t.epochs = cf.get("epochs", t.epochs);
  t.cosine_period_epochs = cf.get("cosine_period_epochs", t.cosine_period_epochs);
  t.batch_size = cf.get("batch_size", t.batch_size);
  t.lr_init = cf.get("lr_init", t.lr_init);
  t.lr_final = cf.get("lr_final", t.lr_final);
  t.grad_clip_norm = cf.get("grad_clip_norm", t.grad_clip_norm);
  t.n_train = cf.get("n_train", t.n_train);
  t.n_val = cf.get("n_val", t.n_val);
  t.n_test = cf.get("n_test", t.n_test);
  t.snr_lo_db = cf.get("train_snr_lo_db", t.snr_lo_db);
  t.snr_hi_db = cf.get("train_snr_hi_db", t.snr_hi_db);
  e.train_solve = run.solve;
  e.train_solve.eps = cf.get("train_eps", run.solve.eps);
  e.train_solve.max_iters = cf.get("train_tau", run.solve.max_iters);
  e.train_speeds_kmh = cf.get_list("train_speeds_kmh", e.train_speeds_kmh);
  e.ecenet_depths.clear();
  for (double d : cf.get_list("ecenet_depths", {1, 2, 4, 9})) {
    if (d != std::floor(d)) throw ConfigError("config key 'ecenet_depths': depths must be integers");
    e.ecenet_depths.push_back(static_cast<int>(d));
  }
  e.train_data = cf.get("train_data", std::string());
  e.val_data = cf.get("val_data", std::string());
  return e;
}

enum class Split { train, val, test };

/// Mixed-SNR samples for one split, spread evenly over the training speeds and
/// truncated to the configured size. The test split uses the run's speed only.
inline std::vector<FrameSample> split_samples(const Experiment& e, Split which) {
  const auto& run = e.run;
  const int n_rx = run.channel.n_rx;
  std::vector<double> speeds = e.train_speeds_kmh;
  int wanted = e.train.n_train;
  std::uint64_t base = kTrainFrameBase;
  if (which == Split::val) {
    wanted = e.train.n_val;
    base = kValFrameBase;
  } else if (which == Split::test) {
    wanted = e.train.n_test;
    base = kTestFrameBase;
    speeds = {run.speed_kmh};
  }
  std::vector<FrameSample> out;
  if (wanted <= 0) return out;
  const int per_speed = (wanted + static_cast<int>(speeds.size()) - 1) / static_cast<int>(speeds.size());
  const int n_frames = (per_speed + n_rx - 1) / n_rx;
  for (std::size_t i = 0; i < speeds.size(); ++i) {
    const auto frames = generate_dataset(run.channel_at(speeds[i]), n_frames, run.seed + base + 100'000 * i);
    auto s = build_samples(frames, run.pattern, SnrPolicy::uniform(e.train.snr_lo_db, e.train.snr_hi_db),
                           mix_seed(run.seed, base + 100'000 * i + 0x5eed));
    s.resize(static_cast<std::size_t>(per_speed));
    out.insert(out.end(), s.begin(), s.end());
  }
  out.resize(static_cast<std::size_t>(wanted));
  return out;
}

/// Training and validation samples, read from dataset files when configured.
inline std::vector<FrameSample> training_split(const Experiment& e, Split which) {
  const auto& path = which == Split::train ? e.train_data : e.val_data;
  if (path.empty()) return split_samples(e, which);
  if (!std::filesystem::exists(path)) throw ResolutionError(path);
  return load_dataset(path);
}

}  // namespace icenet
