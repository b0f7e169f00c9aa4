// icenet_cli: data generation, training and the evaluation reports.
//
// Exit codes: 0 ok, 1 unexpected failure, 2 bad configuration or arguments,
// 3 missing or unreadable artifact, 4 numerical divergence.

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "icenet/experiment.hpp"

namespace fs = std::filesystem;
using namespace icenet;

namespace {

struct Options {
  std::string config;
  std::optional<long long> seed;
  std::optional<std::string> out_dir;
  std::optional<double> speed_kmh;
  std::optional<double> snr_db;
  std::optional<double> eps;
  std::optional<int> tau;
  std::string model = "icenet";
  std::string checkpoint;
  bool with_ecenet = false;
};

Experiment load_experiment(const Options& o) {
  ConfigFile cf;
  if (!o.config.empty()) cf = ConfigFile::load(o.config);
  Experiment e = experiment_from(cf);
  if (o.seed) e.run.seed = e.train.seed = static_cast<std::uint64_t>(*o.seed);
  if (o.out_dir) e.run.out_dir = *o.out_dir;
  if (o.speed_kmh) e.run.speed_kmh = e.run.table1_speed_kmh = *o.speed_kmh;
  if (o.snr_db) {
    e.run.snr_grid = {*o.snr_db};
    e.run.table1_snr_db = e.run.hist_snr_db = e.run.depth_snr_db = *o.snr_db;
  }
  if (o.eps) e.run.solve.eps = *o.eps;
  if (o.tau) e.run.solve.max_iters = *o.tau;
  e.validate();
  fs::create_directories(e.run.out_dir);
  return e;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ResolutionError(path);
  f << text;
  std::cout << "wrote " << path << "\n";
}

int parse_depth(const std::string& model) {
  const std::string prefix = method_name(Method::ecenet, 0).substr(0, 8);  // "ecenet_n"
  if (model.rfind(prefix, 0) != 0) throw ConfigError("--model must be icenet or ecenet_n<depth>, got '" + model + "'");
  try {
    std::size_t used = 0;
    const int d = std::stoi(model.substr(prefix.size()), &used);
    if (used != model.size() - prefix.size() || d < 1) throw ConfigError("bad depth in --model " + model);
    return d;
  } catch (const std::logic_error&) {
    throw ConfigError("bad depth in --model " + model);
  }
}

std::string icenet_ckpt(const Options& o, const Experiment& e) {
  return o.checkpoint.empty() ? e.icenet_path() : o.checkpoint;
}

std::map<int, ECENetParams<float>> load_ecenets(const Experiment& e) {
  std::map<int, ECENetParams<float>> out;
  for (int d : e.ecenet_depths) {
    auto p = load_ecenet(e.ecenet_path(d));
    if (static_cast<int>(p.size()) != d) throw FormatError("checkpoint depth does not match " + e.ecenet_path(d), 12);
    out.emplace(d, std::move(p));
  }
  return out;
}

void cmd_gen_data(const Options& o) {
  const auto e = load_experiment(o);
  const auto train = split_samples(e, Split::train);
  const auto val = split_samples(e, Split::val);
  const auto test = split_samples(e, Split::test);
  for (auto [name, set] : {std::pair{"train", &train}, {"val", &val}, {"test", &test}}) {
    const auto path = e.run.out_dir + "/" + name + ".iced";
    save_dataset(*set, path);
    std::cout << "wrote " << path << " (" << set->size() << " samples)\n";
  }
}

void cmd_train(const Options& o) {
  const int depth = o.model == "icenet" ? 0 : parse_depth(o.model);
  const auto e = load_experiment(o);
  const auto train = training_split(e, Split::train);
  const auto val = training_split(e, Split::val);
  std::cout << "training " << o.model << " on " << train.size() << " samples (" << val.size() << " validation)\n";
  TrainReport rep;
  std::string ckpt;
  if (o.model == "icenet") {
    const auto res = train_icenet(train, val, e.block, e.train, e.train_solve);
    rep = res.report;
    ckpt = icenet_ckpt(o, e);
    save_checkpoint(Checkpoint<float>{ModelKind::implicit, {res.params}}, ckpt);
  } else {
    const auto res = train_ecenet(train, val, e.ecenet_config(depth), e.train);
    rep = res.report;
    ckpt = o.checkpoint.empty() ? e.ecenet_path(depth) : o.checkpoint;
    save_checkpoint(Checkpoint<float>{ModelKind::explicit_stack, res.params}, ckpt);
  }
  std::cout << "wrote " << ckpt << " (best epoch " << rep.best_epoch << ", val nmse " << fmt_real(rep.best_val_nmse)
            << ")\n";
  write_text(e.run.out_dir + "/train_" + o.model + ".csv", rep.to_csv());
}

void cmd_eval_sweep(const Options& o) {
  const auto e = load_experiment(o);
  SweepModels models;
  models.icenet = load_icenet(icenet_ckpt(o, e));
  if (o.with_ecenet) models.ecenets = load_ecenets(e);
  const auto res = run_snr_sweep(e.run, models);
  write_text(e.run.out_dir + "/sweep.csv", res.to_csv());
}

void cmd_table1(const Options& o) {
  auto e = load_experiment(o);
  if (o.eps || o.tau) e.run.table1_settings = {{e.run.solve.eps, e.run.solve.max_iters}};
  const auto rows = run_table1(e.run, load_icenet(icenet_ckpt(o, e)));
  write_text(e.run.out_dir + "/table1.csv", table1_csv(rows));
}

void cmd_iter_hist(const Options& o) {
  const auto e = load_experiment(o);
  const auto h = run_iteration_histogram(e.run, load_icenet(icenet_ckpt(o, e)));
  write_text(e.run.out_dir + "/iter_hist.csv", h.to_csv());
  write_text(e.run.out_dir + "/iter_trace.csv", h.trace_csv());
  std::cout << "mean iterations " << fmt_real(h.mean_iters) << ", " << h.n_converged_below_cap << " of "
            << h.n_samples << " converged below tau\n";
}

void cmd_depth_compare(const Options& o) {
  const auto e = load_experiment(o);
  const auto rows = run_depth_comparison(e.run, load_icenet(icenet_ckpt(o, e)), load_ecenets(e));
  write_text(e.run.out_dir + "/depth.csv", depth_csv(rows));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Implicit-equilibrium OFDM channel estimation"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config, "key=value config file");
  app.add_option("--seed", o.seed, "master seed");
  app.add_option("--out-dir", o.out_dir, "output directory for CSVs and checkpoints");
  app.add_option("--speed-kmh", o.speed_kmh, "UE speed for evaluation");
  app.add_option("--snr-db", o.snr_db, "evaluate at this single SNR");
  app.add_option("--eps", o.eps, "fixed-point relative tolerance");
  app.add_option("--tau", o.tau, "fixed-point iteration cap");
  app.add_option("--model", o.model, "icenet or ecenet_n<depth>");
  app.add_option("--checkpoint", o.checkpoint, "ICENet checkpoint (or output path for train)");
  app.add_flag("--with-ecenet", o.with_ecenet, "include the configured ECENet depths in eval-sweep");

  struct Sub {
    const char* name;
    const char* help;
    void (*run)(const Options&);
  };
  const Sub subs[] = {
      {"gen-data", "write train/val/test dataset files", cmd_gen_data},
      {"train", "train --model and write its checkpoint and curve", cmd_train},
      {"eval-sweep", "NMSE vs SNR for every method (sweep.csv)", cmd_eval_sweep},
      {"table1", "iterations and NMSE across (eps, tau) settings (table1.csv)", cmd_table1},
      {"iter-hist", "per-sample iteration histogram (iter_hist.csv, iter_trace.csv)", cmd_iter_hist},
      {"depth-compare", "ICENet against stacked ECENets (depth.csv)", cmd_depth_compare},
  };
  for (const auto& s : subs) app.add_subcommand(s.name, s.help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    for (const auto& s : subs)
      if (app.got_subcommand(s.name)) s.run(o);
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ArgumentError& e) {
    std::cerr << "argument error: " << e.what() << "\n";
    return 2;
  } catch (const ResolutionError& e) {
    std::cerr << e.what() << "\n";
    return 3;
  } catch (const FormatError& e) {
    std::cerr << "unreadable artifact: " << e.what() << "\n";
    return 3;
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return 4;
  } catch (const NumericError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
