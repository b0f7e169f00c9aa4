// End-to-end walk-through on a 32-subcarrier grid: simulate frames, run the
// classical estimators, train a small equilibrium model for a few epochs and
// look at how many fixed-point iterations each SNR needs. Runs in ~20 s.

#include <cstdio>

#include "icenet/icenet.hpp"

using namespace icenet;

int main() {
  ChannelConfig ch;
  ch.n_subcarriers = 32;
  ch.n_rx = 4;
  const PilotPattern pilots;
  std::printf("max Doppler at %.0f km/h: %.1f Hz\n", ch.ue_speed_mps * 3.6, ch.max_doppler_hz());

  const auto train = build_samples(generate_dataset(ch, 60, 0), pilots, SnrPolicy::uniform(-10, 15), 1);
  const auto val = build_samples(generate_dataset(ch, 10, 1'000'000), pilots, SnrPolicy::uniform(-10, 15), 2);
  const auto test_frames = generate_dataset(ch, 20, 2'000'000);
  const auto calib_frames = generate_dataset(ch, 100, 3'000'000);

  IEBConfig block;
  block.hidden_width = 8;
  block.norm_groups = 2;
  block.norm = NormKind::weight_scaled;
  TrainConfig tc;
  tc.epochs = tc.cosine_period_epochs = 10;
  const SolveConfig solve;  // eps 1e-2, tau 10
  std::printf("training %zu-parameter block on %zu samples...\n", param_count(init_params<float>(block)), train.size());
  const auto trained = train_icenet(train, val, block, tc, solve);
  std::printf("best val NMSE %.4f at epoch %d (%.1f s)\n\n", trained.report.best_val_nmse, trained.report.best_epoch,
              trained.report.wall_time_s);

  std::printf("%6s %9s %9s %9s %9s %7s\n", "snr", "ls_li", "ft", "lmmse", "icenet", "iters");
  for (double snr : {-10.0, 0.0, 10.0, 15.0}) {
    const auto test = build_samples(test_frames, pilots, SnrPolicy::fixed(snr), 3);
    const auto calib = calibrate_lmmse(build_samples(calib_frames, pilots, SnrPolicy::fixed(snr), 4), pilots, snr);
    const int window = default_ft_window(pilots, ch.n_subcarriers);
    double ls = 0, ft = 0, lm = 0;
    for (const auto& s : test) {
      ls += nmse(estimate_ls_li(s, pilots), s.y);
      ft += nmse(estimate_ft(s, pilots, window), s.y);
      lm += nmse(estimate_lmmse(s, calib), s.y);
    }
    const double n = static_cast<double>(test.size());
    double iters = 0;
    const double ice = evaluate_icenet(test, trained.params, solve, &iters);
    std::printf("%6.0f %9.4f %9.4f %9.4f %9.4f %7.2f\n", snr, ls / n, ft / n, lm / n, ice, iters);
  }
}
