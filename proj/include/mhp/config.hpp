#pragma once

#include <cstdint>
#include <string>

#include "mhp/toydata.hpp"

namespace mhp::harness {

enum class Task { ToyClassification, ToyPrediction, ToyGeneration };
enum class ModelKind { Shp, ShpStar, Mcl, Mhp };

std::string task_name(Task t);
std::string model_kind_name(ModelKind k);
Task task_from_name(const std::string& s);
ModelKind model_kind_from_name(const std::string& s);

/// Flat key=value experiment description; see configs/ for examples.
struct ExperimentConfig {
  std::string name = "experiment";
  Task task = Task::ToyClassification;
  ModelKind model = ModelKind::Mhp;
  int num_hypotheses = 3;
  double epsilon = 0.15;
  double gamma = 0.0;  // shp-star read-out threshold
  double tau = 1.0;    // M2 polytope fraction
  int hidden_dim = 64;
  int batch_size = 32;
  double learning_rate = 0.001;
  int max_epochs = 50;
  int patience = 10;
  std::uint64_t seed = 1;

  // generation-task inference
  int tree_depth = 8;
  int infer_steps = 20;
  double split_threshold = 8.0;
  int seed_points = 5;

  // prediction-task observed prefix
  int prefix_length = 30;

  std::string data_path;
  double input_scale = 0.0125;
  int eval_limit = 0;  // 0 = full test set
  int threads = 0;     // 0 = hardware default

  void validate() const;
  std::string to_text() const;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

}  // namespace mhp::harness
