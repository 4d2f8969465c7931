#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "mhp/config.hpp"
#include "mhp/models.hpp"
#include "mhp/toydata.hpp"
#include "mhp/tree_infer.hpp"

namespace mhp::harness {

using ModelNet = std::variant<models::Seq2SeqModel, models::EncDecModel,
                              models::GeneratorModel, models::MclSeq2Seq, models::MclEncDec>;

/// A trained network plus the exact configuration that produced it.
struct TrainedModel {
  ExperimentConfig config;
  ModelNet net;
};

/// Parameters across any model variant; MCL members are name-prefixed.
ParamRefs model_parameters(ModelNet& net);
std::size_t model_parameter_count(const ModelNet& net);

/// Raw trajectories and per-task samples, index-aligned.
struct Dataset {
  Task task = Task::ToyClassification;
  std::vector<toy::Trajectory> trajectories;
  std::vector<models::SequenceSample> samples;
};

Dataset load_dataset(const ExperimentConfig& config);
Dataset build_dataset(const ExperimentConfig& config, std::vector<toy::Trajectory> trajectories);

/// Train+validation indices for metric fitting; never touches the test part.
std::vector<std::size_t> fitting_indices(const toy::DatasetSplit& split);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;         // meta-loss (the early-stopping signal)
  double val_oracle_loss = 0.0;  // winner's base loss
};

/// Tracks the best validation loss; stops after `patience` consecutive
/// non-improving epochs.
struct EarlyStopper {
  int patience = 10;
  double best = 0.0;
  int best_epoch = -1;
  int bad_epochs = 0;

  /// Records one epoch; returns true when it improved on the best so far.
  bool offer(double val_loss, int epoch);
  bool should_stop() const { return bad_epochs > patience; }
};

struct TrainResult {
  TrainedModel model;  // parameters restored from the best validation epoch
  std::vector<EpochStats> history;
  int best_epoch = -1;
};

ModelNet init_model(const ExperimentConfig& config);

TrainResult train_with_early_stopping(const ExperimentConfig& config, const Dataset& data,
                                      const toy::DatasetSplit& split);

/// Mean (meta-loss, winner base loss) over the given sample indices.
std::pair<double, double> dataset_loss(ModelNet& net, const ExperimentConfig& config,
                                       const Dataset& data,
                                       const std::vector<std::size_t>& indices);

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct MetricRow {
  std::string model;
  std::vector<std::pair<std::string, double>> values;

  double get(const std::string& key) const;
};

struct MetricReport {
  std::vector<MetricRow> rows;
};

/// Test-set metrics. M2 structures (polytopes, clusters) are fitted on the
/// train+validation partitions only.
MetricRow evaluate(TrainedModel& model, const Dataset& data, const toy::DatasetSplit& split,
                   double tau);

/// Fixed-width text table, 4 decimal places, byte-stable across runs.
std::string format_table(const MetricReport& report);

/// One JSON record per (model, metric) pair.
std::string to_jsonl(const MetricReport& report);

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

void save_checkpoint(TrainedModel& model, const std::string& path);
TrainedModel load_checkpoint(const std::string& path);

// ---------------------------------------------------------------------------
// Plots
// ---------------------------------------------------------------------------

/// Standalone SVG: observed polyline in blue, ground truth in green, each
/// hypothesis in yellow; single points render as circles.
std::string plot_scene_svg(const std::vector<Point2>& observed,
                           const std::vector<Point2>& truth,
                           const std::vector<std::vector<Point2>>& hypotheses);

}  // namespace mhp::harness
