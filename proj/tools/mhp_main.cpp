#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mhp/error.hpp"
#include "mhp/harness.hpp"
#include "mhp/kernels.hpp"
#include "mhp/metrics.hpp"
#include "mhp/tree_infer.hpp"

namespace {

using namespace mhp;

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

int points_for_task(harness::Task task) {
  switch (task) {
    case harness::Task::ToyClassification: return 75;
    case harness::Task::ToyPrediction: return 60;
    case harness::Task::ToyGeneration: return 25;
  }
  return 75;
}

void run_generate(const std::string& task_name, int n, std::uint64_t seed,
                  const std::string& out_path, toy::GeometryConfig geometry, int points) {
  const harness::Task task = harness::task_from_name(task_name);
  if (points <= 0) points = points_for_task(task);
  const auto trajectories = toy::generate_intersection(n, points, seed, geometry);
  toy::save_trajectories(trajectories, out_path);
  std::cout << "wrote " << trajectories.size() << " trajectories (" << points
            << " points each) to " << out_path << "\n";
}

harness::TrainResult run_train(const std::string& config_path, const std::string& out_path) {
  const harness::ExperimentConfig cfg = harness::load_config_file(config_path);
  const harness::Dataset data = harness::load_dataset(cfg);
  const toy::DatasetSplit split = toy::split_dataset(data.samples.size(), cfg.seed);
  harness::TrainResult result = harness::train_with_early_stopping(cfg, data, split);
  harness::save_checkpoint(result.model, out_path);
  std::cout << "model: " << cfg.name << "\n";
  for (const auto& e : result.history) {
    std::cout << "epoch " << e.epoch << "  train " << e.train_loss << "  val " << e.val_loss
              << "  val-best-hyp " << e.val_oracle_loss << "\n";
  }
  std::cout << "best epoch " << result.best_epoch << ", checkpoint " << out_path << "\n";
  return result;
}

harness::MetricRow run_evaluate(const std::string& checkpoint, const std::string& data_path,
                                double tau, const std::string& report_path) {
  harness::TrainedModel model = harness::load_checkpoint(checkpoint);
  if (!data_path.empty()) model.config.data_path = data_path;
  const harness::Dataset data = harness::load_dataset(model.config);
  const toy::DatasetSplit split = toy::split_dataset(data.samples.size(), model.config.seed);
  const harness::MetricRow row = harness::evaluate(model, data, split, tau);
  harness::MetricReport report{{row}};
  const std::string table = harness::format_table(report);
  std::cout << table;
  if (!report_path.empty()) {
    write_file(report_path, table);
    write_file(report_path + ".jsonl", harness::to_jsonl(report));
  }
  return row;
}

void run_infer(const std::string& checkpoint, const std::string& seed_file, int depth,
               int steps, double threshold, const std::string& plot_path) {
  harness::TrainedModel model = harness::load_checkpoint(checkpoint);
  require(model.config.task == harness::Task::ToyGeneration,
          "infer: checkpoint is not a sequence-generation model");

  std::ifstream in(seed_file);
  if (!in) throw IoError("cannot open seed points: " + seed_file);
  nlohmann::json arr;
  in >> arr;
  std::vector<Point2> seed;
  for (const auto& p : arr) seed.push_back({p.at(0).get<double>(), p.at(1).get<double>()});

  models::InferenceConfig icfg;
  icfg.tree_depth = depth > 0 ? depth : model.config.tree_depth;
  icfg.total_steps = steps > 0 ? steps : model.config.infer_steps;
  icfg.split_threshold = threshold > 0 ? threshold : model.config.split_threshold;

  auto& net = std::get<models::GeneratorModel>(model.net);
  const models::InferenceResult result = models::infer(net, seed, icfg);

  nlohmann::json out;
  out["split_step"] = result.split_step;
  auto hyps = nlohmann::json::array();
  for (const auto& h : result.hypotheses()) {
    auto seq = nlohmann::json::array();
    for (const Point2& p : h) seq.push_back({p.x, p.y});
    hyps.push_back(std::move(seq));
  }
  out["hypotheses"] = std::move(hyps);
  std::cout << out.dump(2) << "\n";

  if (!plot_path.empty()) {
    write_file(plot_path, harness::plot_scene_svg(seed, {}, result.hypotheses()));
    std::cerr << "plot written to " << plot_path << "\n";
  }
}

void run_sweep(const std::string& config_dir, const std::string& report_path) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(config_dir)) {
    if (entry.path().extension() == ".cfg") files.push_back(entry.path());
  }
  require(!files.empty(), "sweep: no .cfg files in " + config_dir);
  std::sort(files.begin(), files.end());

  harness::MetricReport report;
  for (const auto& file : files) {
    std::cerr << "== " << file.filename().string() << "\n";
    const harness::ExperimentConfig cfg = harness::load_config_file(file.string());
    const harness::Dataset data = harness::load_dataset(cfg);
    const toy::DatasetSplit split = toy::split_dataset(data.samples.size(), cfg.seed);
    harness::TrainResult result = harness::train_with_early_stopping(cfg, data, split);
    report.rows.push_back(harness::evaluate(result.model, data, split, cfg.tau));
  }
  const std::string table = harness::format_table(report);
  std::cout << table;
  if (!report_path.empty()) {
    write_file(report_path, table);
    write_file(report_path + ".jsonl", harness::to_jsonl(report));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-hypothesis recurrent prediction on the toy intersection benchmark"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Simulate intersection trajectories");
  std::string gen_task = "toy-classification", gen_out = "data.jsonl";
  int gen_n = 10000, gen_points = 0;
  std::uint64_t gen_seed = 1;
  toy::GeometryConfig geometry;
  gen->add_option("--task", gen_task, "toy-classification|toy-prediction|toy-generation");
  gen->add_option("--n", gen_n, "number of trajectories");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", gen_out, "output JSON-lines path")->required();
  gen->add_option("--points", gen_points, "points per trajectory (default per task)");
  gen->add_option("--approach-length", geometry.approach_length, "lane length before the fork");
  gen->add_option("--turn-radius", geometry.turn_radius, "quarter-circle turn radius");
  gen->add_option("--speed", geometry.speed, "distance between consecutive points");
  gen->add_option("--noise-sigma", geometry.noise_sigma, "per-point Gaussian noise sigma");

  // train
  auto* train = app.add_subcommand("train", "Train a model from a config file");
  std::string train_config, train_out = "model.ckpt";
  train->add_option("--config", train_config)->required();
  train->add_option("--out", train_out, "checkpoint path");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Evaluate a checkpoint on the test split");
  std::string eval_ckpt, eval_data, eval_report;
  double eval_tau = 1.0;
  eval->add_option("--checkpoint", eval_ckpt)->required();
  eval->add_option("--data", eval_data, "override dataset path");
  eval->add_option("--tau", eval_tau, "polytope fraction");
  eval->add_option("--report", eval_report, "report path (text + .jsonl)");

  // infer
  auto* infer = app.add_subcommand("infer", "Closed-loop generation from seed points");
  std::string infer_ckpt, infer_seed_file, infer_plot;
  int infer_depth = 0, infer_steps = 0;
  double infer_threshold = 0.0;
  infer->add_option("--checkpoint", infer_ckpt)->required();
  infer->add_option("--seed-points", infer_seed_file, "JSON array of [x,y] points")->required();
  infer->add_option("--depth", infer_depth, "tree depth");
  infer->add_option("--steps", infer_steps, "steps to generate");
  infer->add_option("--threshold", infer_threshold, "split threshold (map units)");
  infer->add_option("--plot", infer_plot, "SVG output path");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Train+evaluate every config in a directory");
  std::string sweep_dir, sweep_report;
  sweep->add_option("--configs", sweep_dir)->required();
  sweep->add_option("--report", sweep_report, "combined report path");

  // global
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = hardware)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    mhp::set_num_threads(threads);
    if (*gen) run_generate(gen_task, gen_n, gen_seed, gen_out, geometry, gen_points);
    if (*train) run_train(train_config, train_out);
    if (*eval) run_evaluate(eval_ckpt, eval_data, eval_tau, eval_report);
    if (*infer) run_infer(infer_ckpt, infer_seed_file, infer_depth, infer_steps,
                          infer_threshold, infer_plot);
    if (*sweep) run_sweep(sweep_dir, sweep_report);
  } catch (const mhp::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const mhp::ContractError& e) {
    std::cerr << "contract violation: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
