#include "mhp/harness.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mhp/error.hpp"
#include "mhp/kernels.hpp"
#include "mhp/metrics.hpp"
#include "mhp/rng.hpp"

namespace mhp::harness {

namespace {

constexpr std::size_t kEvalChunk = 128;
constexpr std::size_t kNumClasses = 3;

std::vector<const models::SequenceSample*> gather(const Dataset& data,
                                                  const std::vector<std::size_t>& indices,
                                                  std::size_t from, std::size_t to) {
  std::vector<const models::SequenceSample*> out;
  out.reserve(to - from);
  for (std::size_t i = from; i < to; ++i) out.push_back(&data.samples[indices[i]]);
  return out;
}

std::size_t row_argmax(const Tensor& m, std::size_t row) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < m.cols(); ++c) {
    if (m.at(row, c) > m.at(row, best)) best = c;
  }
  return best;
}

Tensor row_view(const Tensor& m, std::size_t row) {
  Tensor out = Tensor::zeros({m.cols()});
  for (std::size_t c = 0; c < m.cols(); ++c) out[c] = m.at(row, c);
  return out;
}

MhpConfig training_config(const ExperimentConfig& cfg) {
  // MCL routes the whole gradient to the winner.
  const double eps = cfg.model == ModelKind::Mcl ? 0.0 : cfg.epsilon;
  return {cfg.num_hypotheses, eps};
}

}  // namespace

ParamRefs model_parameters(ModelNet& net) {
  return std::visit(
      [](auto& m) -> ParamRefs {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, models::MclSeq2Seq> ||
                      std::is_same_v<T, models::MclEncDec>) {
          ParamRefs refs;
          for (std::size_t j = 0; j < m.members.size(); ++j) {
            for (ParamRef r : m.members[j].parameters()) {
              refs.push_back({"member." + std::to_string(j) + "." + r.name, r.value});
            }
          }
          return refs;
        } else {
          return m.parameters();
        }
      },
      net);
}

std::size_t model_parameter_count(const ModelNet& net) {
  return std::visit([](const auto& m) { return m.parameter_count(); }, net);
}

Dataset build_dataset(const ExperimentConfig& config, std::vector<toy::Trajectory> trajectories) {
  Dataset data;
  data.task = config.task;
  data.trajectories = std::move(trajectories);
  switch (config.task) {
    case Task::ToyClassification:
      data.samples = toy::make_classification_samples(data.trajectories);
      break;
    case Task::ToyPrediction:
      data.samples = toy::make_prediction_samples(data.trajectories,
                                                  static_cast<std::size_t>(config.prefix_length));
      break;
    case Task::ToyGeneration: {
      for (const auto& t : data.trajectories) {
        require(t.points.size() >=
                    static_cast<std::size_t>(config.seed_points + config.infer_steps),
                "dataset: trajectories shorter than seed_points + infer_steps");
      }
      data.samples = toy::make_generation_samples(data.trajectories);
      break;
    }
  }
  return data;
}

Dataset load_dataset(const ExperimentConfig& config) {
  require(!config.data_path.empty(), "config: data path not set");
  return build_dataset(config, toy::load_trajectories(config.data_path));
}

std::vector<std::size_t> fitting_indices(const toy::DatasetSplit& split) {
  std::vector<std::size_t> out = split.train;
  out.insert(out.end(), split.validation.begin(), split.validation.end());
  std::set<std::size_t> test(split.test.begin(), split.test.end());
  for (std::size_t i : out) {
    require(test.count(i) == 0, "fitting_indices: test sample leaked into metric fitting");
  }
  return out;
}

ModelNet init_model(const ExperimentConfig& config) {
  Rng rng(config.seed * 0x9e3779b97f4a7c15ull + 17);
  switch (config.task) {
    case Task::ToyClassification: {
      if (config.model == ModelKind::Mcl) {
        models::MclSeq2Seq ens;
        for (int j = 0; j < config.num_hypotheses; ++j) {
          Rng member = rng.split(static_cast<std::uint64_t>(j) + 7);
          auto net = models::Seq2SeqModel::init(2, config.hidden_dim, kNumClasses, 1, member);
          net.input_scale = config.input_scale;
          ens.members.push_back(std::move(net));
        }
        return ens;
      }
      auto net = models::Seq2SeqModel::init(2, config.hidden_dim, kNumClasses,
                                            config.num_hypotheses, rng);
      net.input_scale = config.input_scale;
      return net;
    }
    case Task::ToyPrediction: {
      if (config.model == ModelKind::Mcl) {
        models::MclEncDec ens;
        for (int j = 0; j < config.num_hypotheses; ++j) {
          Rng member = rng.split(static_cast<std::uint64_t>(j) + 7);
          auto net = models::EncDecModel::init(config.hidden_dim, 1, member);
          net.input_scale = config.input_scale;
          ens.members.push_back(std::move(net));
        }
        return ens;
      }
      auto net = models::EncDecModel::init(config.hidden_dim, config.num_hypotheses, rng);
      net.input_scale = config.input_scale;
      return net;
    }
    case Task::ToyGeneration: {
      auto net = models::GeneratorModel::init(config.hidden_dim, config.num_hypotheses, rng);
      net.input_scale = config.input_scale;
      return net;
    }
  }
  throw ContractError("init_model: invalid task");
}

bool EarlyStopper::offer(double val_loss, int epoch) {
  if (best_epoch < 0 || val_loss < best) {
    best = val_loss;
    best_epoch = epoch;
    bad_epochs = 0;
    return true;
  }
  ++bad_epochs;
  return false;
}

namespace {

double run_train_step(ModelNet& net, const ExperimentConfig& cfg, models::SampleBatch batch,
                      std::vector<AdamState>& opts) {
  const MhpConfig mcfg = training_config(cfg);
  return std::visit(
      [&](auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, models::Seq2SeqModel>) {
          return models::seq2seq_train_step(m, batch, mcfg, opts[0]);
        } else if constexpr (std::is_same_v<T, models::EncDecModel>) {
          return models::encdec_train_step(m, batch, mcfg, opts[0]);
        } else if constexpr (std::is_same_v<T, models::GeneratorModel>) {
          return models::generator_train_step(m, batch, mcfg, opts[0]);
        } else {
          return models::mcl_train_step(m, batch, opts);
        }
      },
      net);
}

// Per-hypothesis per-sample loss values on a forward-only graph.
template <class ModelT, class BuildFn>
std::vector<std::vector<double>> chunk_losses(ModelT& model, models::SampleBatch batch,
                                              BuildFn build) {
  Graph g;
  models::BuiltLosses built = build(g, model, batch);
  std::vector<std::vector<double>> out;
  out.reserve(built.per_hypothesis.size());
  for (NodeId id : built.per_hypothesis) {
    out.push_back(g.value(id).data);
  }
  return out;
}

std::vector<std::vector<double>> model_chunk_losses(ModelNet& net, models::SampleBatch batch) {
  return std::visit(
      [&](auto& m) -> std::vector<std::vector<double>> {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, models::Seq2SeqModel>) {
          return chunk_losses(m, batch, [](Graph& g, models::Seq2SeqModel& mm,
                                           models::SampleBatch b) {
            return models::seq2seq_build_losses(g, mm, b);
          });
        } else if constexpr (std::is_same_v<T, models::EncDecModel>) {
          return chunk_losses(m, batch, [](Graph& g, models::EncDecModel& mm,
                                           models::SampleBatch b) {
            return models::encdec_build_losses(g, mm, b);
          });
        } else if constexpr (std::is_same_v<T, models::GeneratorModel>) {
          return chunk_losses(m, batch, [](Graph& g, models::GeneratorModel& mm,
                                           models::SampleBatch b) {
            return models::generator_build_losses(g, mm, b);
          });
        } else {
          // MCL: hypothesis j is member j's own (single) loss vector.
          std::vector<std::vector<double>> out;
          for (auto& member : m.members) {
            using MemberT = std::decay_t<decltype(member)>;
            auto one = chunk_losses(member, batch,
                                    [](Graph& g, MemberT& mm, models::SampleBatch b) {
                                      if constexpr (std::is_same_v<MemberT,
                                                                   models::Seq2SeqModel>) {
                                        return models::seq2seq_build_losses(g, mm, b);
                                      } else {
                                        return models::encdec_build_losses(g, mm, b);
                                      }
                                    });
            out.push_back(std::move(one[0]));
          }
          return out;
        }
      },
      net);
}

}  // namespace

std::pair<double, double> dataset_loss(ModelNet& net, const ExperimentConfig& config,
                                       const Dataset& data,
                                       const std::vector<std::size_t>& indices) {
  require(!indices.empty(), "dataset_loss: no samples");
  const MhpConfig mcfg = training_config(config);
  double meta_sum = 0.0, winner_sum = 0.0;
  for (std::size_t from = 0; from < indices.size(); from += kEvalChunk) {
    const std::size_t to = std::min(indices.size(), from + kEvalChunk);
    const auto batch = gather(data, indices, from, to);
    const auto losses = model_chunk_losses(net, batch);
    const auto metas = meta_loss_values(mcfg, losses);
    for (std::size_t i = 0; i < metas.size(); ++i) {
      meta_sum += metas[i];
      double best = losses[0][i];
      for (std::size_t j = 1; j < losses.size(); ++j) best = std::min(best, losses[j][i]);
      winner_sum += best;
    }
  }
  const double n = static_cast<double>(indices.size());
  return {meta_sum / n, winner_sum / n};
}

TrainResult train_with_early_stopping(const ExperimentConfig& config, const Dataset& data,
                                      const toy::DatasetSplit& split) {
  config.validate();
  require(data.task == config.task, "train: dataset built for a different task");
  require(!split.train.empty() && !split.validation.empty(), "train: empty partitions");
  set_num_threads(config.threads);

  TrainResult result;
  result.model.config = config;
  result.model.net = init_model(config);

  const std::size_t opt_count = config.model == ModelKind::Mcl
                                    ? static_cast<std::size_t>(config.num_hypotheses)
                                    : 1;
  std::vector<AdamState> opts(opt_count);
  for (auto& o : opts) o.learning_rate = config.learning_rate;

  const ParamRefs refs = model_parameters(result.model.net);
  std::vector<Tensor> best_params;
  EarlyStopper stopper{config.patience};
  Rng shuffle_rng(config.seed ^ 0xa02bdbf7bb3c0a7ull);

  std::vector<std::size_t> order = split.train;
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    // Seeded reshuffle each epoch.
    Rng er = shuffle_rng.split(static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i-- > 1;) {
      const std::size_t j = er.below(i + 1);
      std::swap(order[i], order[j]);
    }

    double train_sum = 0.0;
    std::size_t batches = 0;
    const std::size_t bs = static_cast<std::size_t>(config.batch_size);
    for (std::size_t from = 0; from < order.size(); from += bs) {
      const std::size_t to = std::min(order.size(), from + bs);
      const auto batch = gather(data, order, from, to);
      train_sum += run_train_step(result.model.net, config, batch, opts);
      ++batches;
    }

    const auto [val_meta, val_oracle] =
        dataset_loss(result.model.net, config, data, split.validation);
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = train_sum / static_cast<double>(batches);
    stats.val_loss = val_meta;
    stats.val_oracle_loss = val_oracle;
    result.history.push_back(stats);

    if (stopper.offer(val_meta, epoch)) {
      best_params.clear();
      for (const ParamRef& r : refs) best_params.push_back(*r.value);
    }
    if (stopper.should_stop()) break;
  }

  // Restore the best validation epoch.
  require(!best_params.empty(), "train: no epoch completed");
  for (std::size_t i = 0; i < refs.size(); ++i) *refs[i].value = best_params[i];
  result.best_epoch = stopper.best_epoch;
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

std::vector<std::size_t> test_indices(const toy::DatasetSplit& split, int eval_limit) {
  std::vector<std::size_t> idx = split.test;
  if (eval_limit > 0 && static_cast<std::size_t>(eval_limit) < idx.size()) {
    idx.resize(static_cast<std::size_t>(eval_limit));
  }
  require(!idx.empty(), "evaluate: empty test partition");
  return idx;
}

MetricRow evaluate_classification(TrainedModel& tm, const Dataset& data,
                                  const toy::DatasetSplit& split, double tau) {
  // Per-class polytopes over raw step coordinates, train+validation only.
  std::vector<std::vector<std::vector<double>>> by_class(kNumClasses);
  for (std::size_t idx : fitting_indices(split)) {
    const auto& traj = data.trajectories[idx];
    auto& bucket = by_class[static_cast<std::size_t>(traj.destination)];
    for (const Point2& p : traj.points) bucket.push_back({p.x, p.y});
  }
  std::vector<metrics::Polytope> polytopes;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    require(!by_class[c].empty(), "evaluate: class missing from fitting data");
    polytopes.push_back(metrics::fit_polytope(by_class[c], tau, static_cast<int>(c)));
  }

  const auto idx = test_indices(split, tm.config.eval_limit);
  const models::ShpStarConfig star{tm.config.gamma};

  double oracle_sum = 0.0, pr_sum = 0.0, re_sum = 0.0;
  std::size_t count = 0;
  for (std::size_t from = 0; from < idx.size(); from += kEvalChunk) {
    const std::size_t to = std::min(idx.size(), from + kEvalChunk);
    std::vector<const std::vector<Point2>*> trajs;
    trajs.reserve(to - from);
    for (std::size_t i = from; i < to; ++i) {
      trajs.push_back(&data.trajectories[idx[i]].points);
    }

    // probs[h][t]: [chunk x classes] for hypothesis h.
    std::vector<std::vector<Tensor>> probs;
    if (auto* mcl = std::get_if<models::MclSeq2Seq>(&tm.net)) {
      for (auto& member : mcl->members) {
        auto one = models::seq2seq_probs_batch(member, trajs);
        probs.push_back(std::move(one[0]));
      }
    } else {
      probs = models::seq2seq_probs_batch(std::get<models::Seq2SeqModel>(tm.net), trajs);
    }

    const std::size_t steps = probs[0].size();
    for (std::size_t i = 0; i < trajs.size(); ++i) {
      const auto& traj = data.trajectories[idx[from + i]];
      const int label = static_cast<int>(traj.destination);
      for (std::size_t t = 0; t < steps; ++t) {
        std::set<int> predicted;
        if (tm.config.model == ModelKind::ShpStar) {
          for (int c : models::shp_star_predict(row_view(probs[0][t], i), star)) {
            predicted.insert(c);
          }
        } else {
          for (const auto& hyp : probs) {
            predicted.insert(static_cast<int>(row_argmax(hyp[t], i)));
          }
        }
        std::set<int> labels{label};
        const std::vector<double> pt{traj.points[t].x, traj.points[t].y};
        for (const auto& poly : polytopes) {
          if (poly.contains(pt)) labels.insert(poly.class_id);
        }
        oracle_sum += predicted.count(label) ? 1.0 : 0.0;
        const auto [pr, re] = metrics::pr_re(predicted, labels);
        pr_sum += pr;
        re_sum += re;
        ++count;
      }
    }
  }

  const double n = static_cast<double>(count);
  const double pr_m2 = pr_sum / n, re_m2 = re_sum / n;
  MetricRow row;
  row.model = tm.config.name;
  row.values = {{"Pr_O", oracle_sum / n},
                {"Re_O", oracle_sum / n},
                {"Pr_M2", pr_m2},
                {"Re_M2", re_m2},
                {"F1_M2", metrics::f1_score(pr_m2, re_m2)}};
  return row;
}

struct ContinuousM2 {
  std::vector<metrics::Polytope> input_boxes;      // one per cluster
  std::vector<std::vector<Point2>> center_seqs;    // cluster centers as sequences
};

/// Clusters flattened label sequences of the fitting partitions and fits one
/// input-space box per cluster over its members' flattened inputs.
ContinuousM2 fit_continuous_m2(const std::vector<std::size_t>& fit, double tau,
                               const std::function<std::vector<Point2>(std::size_t)>& input_of,
                               const std::function<std::vector<Point2>(std::size_t)>& label_of) {
  std::vector<std::vector<double>> labels;
  labels.reserve(fit.size());
  for (std::size_t idx : fit) labels.push_back(metrics::flatten(label_of(idx)));
  const double bw = metrics::auto_bandwidth(labels);
  const metrics::ClusterModel clusters = metrics::mean_shift(labels, bw);

  ContinuousM2 out;
  std::vector<std::vector<std::vector<double>>> member_inputs(clusters.centers.size());
  for (std::size_t i = 0; i < fit.size(); ++i) {
    member_inputs[static_cast<std::size_t>(clusters.assignment[i])].push_back(
        metrics::flatten(input_of(fit[i])));
  }
  for (std::size_t c = 0; c < clusters.centers.size(); ++c) {
    require(!member_inputs[c].empty(), "fit_continuous_m2: empty cluster");
    out.input_boxes.push_back(
        metrics::fit_polytope(member_inputs[c], tau, static_cast<int>(c)));
    out.center_seqs.push_back(metrics::unflatten(clusters.centers[c]));
  }
  return out;
}

std::vector<std::vector<Point2>> m2_label_sequences(const ContinuousM2& m2,
                                                    const std::vector<Point2>& input) {
  const auto sets = metrics::relabel_continuous({metrics::flatten(input)}, m2.input_boxes);
  std::vector<std::vector<Point2>> out;
  out.reserve(sets[0].size());
  for (int c : sets[0]) out.push_back(m2.center_seqs[static_cast<std::size_t>(c)]);
  return out;
}

struct RegressionTallies {
  double fde_o = 0.0, ade_o = 0.0, fde_m2 = 0.0, ade_m2 = 0.0;
  std::size_t count = 0;

  void add(const std::vector<std::vector<Point2>>& hyps, const std::vector<Point2>& truth,
           const std::vector<std::vector<Point2>>& label_seqs) {
    auto fde_l = [](const std::vector<Point2>& a, const std::vector<Point2>& b) {
      return metrics::fde(a, b);
    };
    auto ade_l = [](const std::vector<Point2>& a, const std::vector<Point2>& b) {
      return metrics::ade(a, b);
    };
    fde_o += metrics::oracle_metric(fde_l, hyps, truth);
    ade_o += metrics::oracle_metric(ade_l, hyps, truth);
    fde_m2 += metrics::l_m2(fde_l, hyps, label_seqs);
    ade_m2 += metrics::l_m2(ade_l, hyps, label_seqs);
    ++count;
  }

  MetricRow row(const std::string& name) const {
    const double n = static_cast<double>(count);
    MetricRow r;
    r.model = name;
    r.values = {{"FDE_O", fde_o / n},
                {"ADE_O", ade_o / n},
                {"FDE_M2", fde_m2 / n},
                {"ADE_M2", ade_m2 / n}};
    return r;
  }
};

MetricRow evaluate_prediction(TrainedModel& tm, const Dataset& data,
                              const toy::DatasetSplit& split, double tau) {
  const auto fit = fitting_indices(split);
  const ContinuousM2 m2 = fit_continuous_m2(
      fit, tau, [&](std::size_t i) { return data.samples[i].input; },
      [&](std::size_t i) { return data.samples[i].coord_targets; });

  const auto idx = test_indices(split, tm.config.eval_limit);
  const std::size_t horizon = data.samples[idx[0]].coord_targets.size();

  RegressionTallies tally;
  for (std::size_t from = 0; from < idx.size(); from += kEvalChunk) {
    const std::size_t to = std::min(idx.size(), from + kEvalChunk);
    std::vector<const std::vector<Point2>*> inputs;
    inputs.reserve(to - from);
    for (std::size_t i = from; i < to; ++i) inputs.push_back(&data.samples[idx[i]].input);

    // coords[h][t]: [chunk x 2] map units.
    std::vector<std::vector<Tensor>> coords;
    if (auto* mcl = std::get_if<models::MclEncDec>(&tm.net)) {
      for (auto& member : mcl->members) {
        auto one = models::encdec_coords_batch(member, inputs, horizon);
        coords.push_back(std::move(one[0]));
      }
    } else {
      coords = models::encdec_coords_batch(std::get<models::EncDecModel>(tm.net), inputs,
                                           horizon);
    }

    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const auto& sample = data.samples[idx[from + i]];
      std::vector<std::vector<Point2>> hyps(coords.size());
      for (std::size_t h = 0; h < coords.size(); ++h) {
        hyps[h].reserve(horizon);
        for (std::size_t t = 0; t < horizon; ++t) {
          hyps[h].push_back({coords[h][t].at(i, 0), coords[h][t].at(i, 1)});
        }
      }
      tally.add(hyps, sample.coord_targets, m2_label_sequences(m2, sample.input));
    }
  }
  return tally.row(tm.config.name);
}

MetricRow evaluate_generation(TrainedModel& tm, const Dataset& data,
                              const toy::DatasetSplit& split, double tau) {
  const std::size_t s = static_cast<std::size_t>(tm.config.seed_points);
  const std::size_t l = static_cast<std::size_t>(tm.config.infer_steps);
  auto seed_of = [&](std::size_t i) {
    const auto& pts = data.trajectories[i].points;
    return std::vector<Point2>(pts.begin(), pts.begin() + static_cast<std::ptrdiff_t>(s));
  };
  auto truth_of = [&](std::size_t i) {
    const auto& pts = data.trajectories[i].points;
    return std::vector<Point2>(pts.begin() + static_cast<std::ptrdiff_t>(s),
                               pts.begin() + static_cast<std::ptrdiff_t>(s + l));
  };

  const auto fit = fitting_indices(split);
  const ContinuousM2 m2 = fit_continuous_m2(fit, tau, seed_of, truth_of);

  auto& model = std::get<models::GeneratorModel>(tm.net);
  const models::InferenceConfig icfg{tm.config.tree_depth, tm.config.infer_steps,
                                     tm.config.split_threshold};

  RegressionTallies tally;
  for (std::size_t i : test_indices(split, tm.config.eval_limit)) {
    const auto seed = seed_of(i);
    const auto result = models::infer(model, seed, icfg);
    tally.add(result.hypotheses(), truth_of(i), m2_label_sequences(m2, seed));
  }
  return tally.row(tm.config.name);
}

}  // namespace

MetricRow evaluate(TrainedModel& model, const Dataset& data, const toy::DatasetSplit& split,
                   double tau) {
  require(data.task == model.config.task, "evaluate: dataset/model task mismatch");
  set_num_threads(model.config.threads);
  switch (model.config.task) {
    case Task::ToyClassification: return evaluate_classification(model, data, split, tau);
    case Task::ToyPrediction: return evaluate_prediction(model, data, split, tau);
    case Task::ToyGeneration: return evaluate_generation(model, data, split, tau);
  }
  throw ContractError("evaluate: invalid task");
}

double MetricRow::get(const std::string& key) const {
  for (const auto& [k, v] : values) {
    if (k == key) return v;
  }
  throw ContractError("metric not in row: " + key);
}

std::string format_table(const MetricReport& report) {
  std::ostringstream out;
  out << std::left << std::setw(18) << "model";
  if (!report.rows.empty()) {
    for (const auto& [k, v] : report.rows.front().values) {
      out << std::right << std::setw(10) << k;
    }
  }
  out << '\n';
  out.setf(std::ios::fixed);
  out.precision(4);
  for (const auto& row : report.rows) {
    out << std::left << std::setw(18) << row.model;
    for (const auto& [k, v] : row.values) {
      out << std::right << std::setw(10) << v;
    }
    out << '\n';
  }
  return out.str();
}

std::string to_jsonl(const MetricReport& report) {
  std::ostringstream out;
  for (const auto& row : report.rows) {
    for (const auto& [k, v] : row.values) {
      nlohmann::json rec;
      rec["model"] = row.model;
      rec["metric"] = k;
      rec["value"] = v;
      out << rec.dump() << '\n';
    }
  }
  return out.str();
}

}  // namespace mhp::harness
