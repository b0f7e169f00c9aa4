#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "icenet/evaluation.hpp"

using namespace icenet;

namespace {

RunConfig small_run() {
  RunConfig run;
  run.channel.n_subcarriers = 32;
  run.channel.n_rx = 2;
  run.n_test_frames = 4;
  run.n_calib_frames = 40;
  run.snr_grid = {-10.0, 10.0};
  return run;
}

IEBParams<float> small_icenet() {
  IEBConfig c;
  c.hidden_width = 8;
  c.norm_groups = 2;
  return init_params<float>(c);
}

ECENetParams<float> small_ecenet(int n) {
  ECENetConfig c;
  c.n_blocks = n;
  c.block_cfg.hidden_width = 8;
  c.block_cfg.norm_groups = 2;
  return init_ecenet<float>(c);
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(RunConfig, RejectsSnrOutsideRange) {
  RunConfig run = small_run();
  run.snr_grid = {-10.0, 20.0};
  EXPECT_THROW(run.validate(), ConfigError);
  run.snr_grid = {-12.0};
  EXPECT_THROW(run.validate(), ConfigError);
  run.snr_grid = {-10.0, 15.0};
  EXPECT_NO_THROW(run.validate());
}

TEST(RunConfig, SplitsAreDisjoint) {
  const RunConfig run = small_run();
  const auto test = test_frames(run, 100.0);
  const auto train = generate_dataset(run.channel_at(100.0), run.n_test_frames, run.seed + kTrainFrameBase);
  for (const auto& a : test)
    for (const auto& b : train) EXPECT_NE(a.frame_seed, b.frame_seed);
}

TEST(Sweep, IdealRowIsZeroAndRowsAreComplete) {
  const RunConfig run = small_run();
  SweepModels models;
  models.icenet = small_icenet();
  models.ecenets.emplace(2, small_ecenet(2));
  const auto res = run_snr_sweep(run, models);
  // ideal, ls_li, ft, lmmse, ecenet_n2, icenet at each SNR
  EXPECT_EQ(res.rows.size(), 6u * run.snr_grid.size());
  for (double snr : run.snr_grid) {
    ASSERT_NE(res.find("ideal", snr), nullptr);
    EXPECT_EQ(res.find("ideal", snr)->mean_nmse, 0.0);
    EXPECT_NE(res.find("ecenet_n2", snr), nullptr);
    ASSERT_NE(res.find("icenet", snr), nullptr);
    EXPECT_TRUE(res.find("icenet", snr)->mean_iters.has_value());
    EXPECT_FALSE(res.find("ls_li", snr)->mean_iters.has_value());
  }
  const std::size_t per_method = static_cast<std::size_t>(run.n_test_frames * run.channel.n_rx);
  EXPECT_EQ(res.records.size(), res.rows.size() * per_method);
  for (const auto& r : res.records) {
    EXPECT_GE(r.nmse, 0.0);
    if (r.iters_used) EXPECT_LE(*r.iters_used, run.solve.max_iters);
  }
}

TEST(Sweep, ClassicalRowsAgreeWithDirectEvaluation) {
  const RunConfig run = small_run();
  const auto res = run_snr_sweep(run, {});
  const auto samples = samples_at(test_frames(run, run.speed_kmh), run, 10.0);
  double sum = 0.0;
  for (const auto& s : samples) sum += nmse(estimate_ls_li(s, run.pattern), s.y);
  EXPECT_DOUBLE_EQ(res.find("ls_li", 10.0)->mean_nmse, sum / static_cast<double>(samples.size()));
}

TEST(Sweep, PairedNoiseAcrossMethods) {
  // Every method at a given SNR scores the same sample ids with the same inputs.
  const RunConfig run = small_run();
  const auto a = samples_at(test_frames(run, run.speed_kmh), run, 0.0);
  const auto b = samples_at(test_frames(run, run.speed_kmh), run, 0.0);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(Sweep, CsvIsDeterministicAndWellFormed) {
  const RunConfig run = small_run();
  SweepModels models;
  models.icenet = small_icenet();
  const auto csv1 = run_snr_sweep(run, models).to_csv();
  const auto csv2 = run_snr_sweep(run, models).to_csv();
  EXPECT_EQ(csv1, csv2);
  const auto ls = lines(csv1);
  ASSERT_FALSE(ls.empty());
  EXPECT_EQ(ls[0], "method,snr,mean_nmse,mean_iters");
  EXPECT_EQ(ls[1].rfind("ideal,-10,0,", 0), 0u);
  for (const auto& l : ls) EXPECT_EQ(std::count(l.begin(), l.end(), ','), 3);
}

TEST(Table1, ParamCountConstantAndIterationsMonotone) {
  const RunConfig run = small_run();
  const auto p = small_icenet();
  const auto rows = run_table1(run, p);
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows) EXPECT_EQ(r.param_count, rows[0].param_count);
  EXPECT_EQ(rows[0].param_count, param_count(p));
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_GE(rows[i].iterf_mean, rows[i - 1].iterf_mean);
  const auto ls = lines(table1_csv(rows));
  EXPECT_EQ(ls[0], "eps,tau,iterf_mean,param_count,test_nmse");
  EXPECT_EQ(ls[1].rfind("0.5,10,", 0), 0u);
  EXPECT_EQ(ls[4].rfind("0.001,30,", 0), 0u);
}

TEST(IterationHistogram, MassEqualsSampleCount) {
  const RunConfig run = small_run();
  const auto h = run_iteration_histogram(run, small_icenet());
  const std::size_t n = static_cast<std::size_t>(run.n_test_frames * run.channel.n_rx);
  EXPECT_EQ(h.n_samples, n);
  EXPECT_EQ(std::accumulate(h.counts.begin(), h.counts.end(), std::size_t{0}), n);
  EXPECT_EQ(h.counts.size(), static_cast<std::size_t>(run.solve.max_iters));
  double weighted = 0.0;
  for (std::size_t i = 0; i < h.counts.size(); ++i) weighted += static_cast<double>((i + 1) * h.counts[i]);
  EXPECT_DOUBLE_EQ(h.mean_iters, weighted / static_cast<double>(n));
  EXPECT_GE(h.mode(), 1u);
  EXPECT_LE(h.mode(), h.counts.size());

  const auto ls = lines(h.to_csv());
  EXPECT_EQ(ls[0], "iters_used,sample_count");
  EXPECT_EQ(ls.size(), h.counts.size() + 1);
  const auto tr = lines(h.trace_csv());
  EXPECT_EQ(tr[0], "sample_id,iter,residual");
  EXPECT_EQ(tr.size(), static_cast<std::size_t>(weighted) + 1);  // one trace row per iteration
}

TEST(IterationHistogram, LooserToleranceShiftsMeanLeft) {
  RunConfig run = small_run();
  const auto p = small_icenet();
  run.solve.eps = 1e-3;
  run.solve.max_iters = 30;
  const auto tight = run_iteration_histogram(run, p);
  run.solve.eps = 0.5;
  const auto loose = run_iteration_histogram(run, p);
  EXPECT_LT(loose.mean_iters, tight.mean_iters);
}

TEST(IterationHistogram, HandBuiltCounts) {
  IterationHistogram h;
  h.counts = {0, 2, 1};
  EXPECT_EQ(h.to_csv(), "iters_used,sample_count\n1,0\n2,2\n3,1\n");
  EXPECT_EQ(h.mode(), 2u);
}

TEST(DepthComparison, RowsAndParamScaling) {
  const RunConfig run = small_run();
  std::map<int, ECENetParams<float>> nets;
  for (int n : {1, 2, 4}) nets.emplace(n, small_ecenet(n));
  const auto ice = small_icenet();
  const auto rows = run_depth_comparison(run, ice, nets);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].model_label.rfind("icenet_eff_depth_", 0), 0u);
  EXPECT_EQ(rows[0].param_count, param_count(ice));
  EXPECT_EQ(rows[1].model_label, "ecenet_n1");
  EXPECT_EQ(rows[3].model_label, "ecenet_n4");
  EXPECT_EQ(rows[2].param_count, 2 * rows[1].param_count);
  EXPECT_EQ(rows[3].param_count, 4 * rows[1].param_count);
  EXPECT_LT(rows[0].param_count, rows[3].param_count);
  EXPECT_EQ(lines(depth_csv(rows))[0], "model_label,param_count,mean_nmse");
  EXPECT_EQ(depth_csv(rows), depth_csv(run_depth_comparison(run, ice, nets)));
}

TEST(Checkpoints, MissingPathIsResolutionError) {
  EXPECT_THROW(load_icenet("/nonexistent/icenet.bin"), ResolutionError);
  EXPECT_THROW(load_icenet(""), ResolutionError);
  EXPECT_THROW(load_ecenet("/nonexistent/ecenet.bin"), ResolutionError);
}

TEST(Checkpoints, WrongKindIsFormatError) {
  const auto path = (std::filesystem::temp_directory_path() / "icenet_eval_kind.bin").string();
  save_checkpoint(Checkpoint<float>{ModelKind::explicit_stack, small_ecenet(2)}, path);
  EXPECT_THROW(load_icenet(path), FormatError);
  EXPECT_EQ(load_ecenet(path).size(), 2u);
  save_checkpoint(Checkpoint<float>{ModelKind::implicit, {small_icenet()}}, path);
  EXPECT_THROW(load_ecenet(path), FormatError);
  EXPECT_EQ(load_icenet(path).flat, small_icenet().flat);
  std::filesystem::remove(path);
}

TEST(SolveSamples, DivergenceFallsBackToLastFiniteIterate) {
  const RunConfig run = small_run();
  auto p = small_icenet();
  p.config.norm = NormKind::weight_scaled;
  for (auto& v : p.flat) v *= 1e4f;
  const auto samples = samples_at(test_frames(run, run.speed_kmh), run, 10.0);
  SolveConfig solve{1e-12, 30};
  const auto sols = solve_samples({samples[0]}, p, solve);
  ASSERT_EQ(sols.size(), 1u);
  EXPECT_FALSE(sols[0].converged);
  EXPECT_EQ(sols[0].iters_used, 30);
  EXPECT_TRUE(sols[0].z_star.all_finite());
}

TEST(MethodNames, Labels) {
  EXPECT_EQ(method_name(Method::ls_li), "ls_li");
  EXPECT_EQ(method_name(Method::ecenet, 9), "ecenet_n9");
  EXPECT_EQ(method_name(Method::icenet), "icenet");
}
