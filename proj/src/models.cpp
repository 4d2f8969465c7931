#include "mhp/models.hpp"

#include <algorithm>
#include <cmath>

#include "mhp/error.hpp"
#include "mhp/kernels.hpp"

namespace mhp::models {

namespace {

constexpr double kGradClipNorm = 5.0;
constexpr double kProbFloor = 1e-12;

Tensor step_inputs(SampleBatch batch, std::size_t t, double scale) {
  Tensor x = Tensor::zeros({batch.size(), 2});
  for (std::size_t i = 0; i < batch.size(); ++i) {
    x.at(i, 0) = batch[i]->input[t].x * scale;
    x.at(i, 1) = batch[i]->input[t].y * scale;
  }
  return x;
}

Tensor step_targets(SampleBatch batch, std::size_t t, double scale) {
  Tensor y = Tensor::zeros({batch.size(), 2});
  for (std::size_t i = 0; i < batch.size(); ++i) {
    y.at(i, 0) = batch[i]->coord_targets[t].x * scale;
    y.at(i, 1) = batch[i]->coord_targets[t].y * scale;
  }
  return y;
}

Tensor points_matrix(std::span<const std::vector<Point2>* const> trajs, std::size_t t,
                     double scale) {
  Tensor x = Tensor::zeros({trajs.size(), 2});
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    x.at(i, 0) = (*trajs[i])[t].x * scale;
    x.at(i, 1) = (*trajs[i])[t].y * scale;
  }
  return x;
}

// y = x @ w + b on the plain path.
Tensor affine_apply(const Affine& a, const Tensor& x) {
  Tensor y = Tensor::zeros({x.rows(), a.bias.numel()});
  gemm_nn(x.rows(), a.bias.numel(), x.cols(), x.data.data(), a.weights.data.data(),
          y.data.data(), false);
  add_row_vec(y.data.data(), a.bias.data.data(), y.data.data(), y.rows(), y.cols());
  return y;
}

template <class ModelT, class BuildFn>
double train_step_impl(ModelT& model, SampleBatch batch, const MhpConfig& config,
                       AdamState& opt, BuildFn build) {
  require(!batch.empty(), "train_step: empty batch");
  require(config.num_hypotheses == model.num_hypotheses(),
          "train_step: config hypothesis count != model heads");
  Graph g;
  BuiltLosses losses = build(g, model, batch);
  const NodeId meta = meta_loss_rows(g, config, losses.per_hypothesis);
  const NodeId total = g.scale(g.reduce_sum(meta), 1.0 / static_cast<double>(batch.size()));
  const double loss = g.value(total)[0];
  require(std::isfinite(loss), "train_step: non-finite loss");
  GradientMap grads = g.backward(total);
  clip_global_norm(grads, kGradClipNorm);
  const ParamRefs refs = model.parameters();
  adam_step(refs, grads, opt);
  return loss;
}

template <class ModelT, class BuildFn>
double mcl_train_step_impl(MclEnsemble<ModelT>& ensemble, SampleBatch batch,
                           std::vector<AdamState>& opts, BuildFn build) {
  const std::size_t m = ensemble.members.size();
  require(m >= 1, "mcl_train_step: empty ensemble");
  require(opts.size() == m, "mcl_train_step: one optimizer state per member");
  require(!batch.empty(), "mcl_train_step: empty batch");

  std::vector<Graph> graphs(m);
  std::vector<NodeId> member_loss(m);
  for (std::size_t j = 0; j < m; ++j) {
    require(ensemble.members[j].num_hypotheses() == 1,
            "mcl_train_step: members must be single-hypothesis models");
    BuiltLosses bl = build(graphs[j], ensemble.members[j], batch);
    member_loss[j] = bl.per_hypothesis[0];
  }

  // Route each sample to its best member: one-hot weights, no relaxation.
  const std::size_t b = batch.size();
  std::vector<Tensor> weights(m, Tensor::zeros({b}));
  std::vector<double> row(m);
  double winner_sum = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < m; ++j) row[j] = graphs[j].value(member_loss[j])[i];
    const std::size_t winner = assign_hypothesis(row);
    weights[winner][i] = 1.0;
    winner_sum += row[winner];
  }

  for (std::size_t j = 0; j < m; ++j) {
    Graph& g = graphs[j];
    const NodeId weighted = g.mul(member_loss[j], g.constant(std::move(weights[j])));
    const NodeId total = g.scale(g.reduce_sum(weighted), 1.0 / static_cast<double>(b));
    GradientMap grads = g.backward(total);
    clip_global_norm(grads, kGradClipNorm);
    const ParamRefs refs = ensemble.members[j].parameters();
    adam_step(refs, grads, opts[j]);
  }
  return winner_sum / static_cast<double>(b);
}

}  // namespace

Affine Affine::init(std::size_t in, std::size_t out, Rng& rng) {
  Affine a;
  const double k = 1.0 / std::sqrt(static_cast<double>(in));
  a.weights = Tensor::zeros({in, out});
  for (double& w : a.weights.data) w = rng.uniform(-k, k);
  a.bias = Tensor::zeros({out});
  return a;
}

double seq_xent_loss(const std::vector<Tensor>& step_probs, const std::vector<int>& labels) {
  require(step_probs.size() == labels.size(), "seq_xent_loss: length mismatch");
  require(!step_probs.empty(), "seq_xent_loss: empty sequence");
  double acc = 0.0;
  for (std::size_t t = 0; t < step_probs.size(); ++t) {
    require(labels[t] >= 0 &&
                static_cast<std::size_t>(labels[t]) < step_probs[t].numel(),
            "seq_xent_loss: label out of range");
    acc += -std::log(std::max(step_probs[t][labels[t]], kProbFloor));
  }
  return acc / static_cast<double>(step_probs.size());
}

double l2_seq_loss(const std::vector<Point2>& predicted, const std::vector<Point2>& truth) {
  require(predicted.size() == truth.size(), "l2_seq_loss: length mismatch");
  require(!predicted.empty(), "l2_seq_loss: empty sequence");
  double acc = 0.0;
  for (std::size_t t = 0; t < predicted.size(); ++t) {
    acc += squared_distance(predicted[t], truth[t]);
  }
  return acc / static_cast<double>(predicted.size());
}

// ---------------------------------------------------------------------------
// Seq2Seq
// ---------------------------------------------------------------------------

Seq2SeqModel Seq2SeqModel::init(std::size_t input_dim, std::size_t hidden_dim,
                                std::size_t num_classes, int num_hypotheses, Rng& rng) {
  require(num_hypotheses >= 1, "Seq2SeqModel: need at least one head");
  Seq2SeqModel m;
  m.lstm = rnn::LstmParams::init(input_dim, hidden_dim, rng);
  for (int j = 0; j < num_hypotheses; ++j) {
    Rng r = rng.split(1000 + static_cast<std::uint64_t>(j));
    m.heads.push_back(Affine::init(hidden_dim, num_classes, r));
  }
  return m;
}

ParamRefs Seq2SeqModel::parameters() {
  ParamRefs refs;
  refs.push_back({"lstm.weights", &lstm.weights});
  refs.push_back({"lstm.bias", &lstm.bias});
  for (std::size_t j = 0; j < heads.size(); ++j) {
    refs.push_back({"head." + std::to_string(j) + ".weights", &heads[j].weights});
    refs.push_back({"head." + std::to_string(j) + ".bias", &heads[j].bias});
  }
  return refs;
}

std::size_t Seq2SeqModel::parameter_count() const {
  std::size_t n = lstm.parameter_count();
  for (const auto& h : heads) n += h.parameter_count();
  return n;
}

std::vector<std::vector<Tensor>> seq2seq_probs_batch(
    const Seq2SeqModel& model, std::span<const std::vector<Point2>* const> inputs) {
  require(!inputs.empty(), "seq2seq_probs_batch: empty batch");
  const std::size_t n = inputs.front()->size();
  require(n > 0, "seq2seq_probs_batch: empty sequence");
  for (const auto* traj : inputs) {
    require(traj->size() == n, "seq2seq_probs_batch: unequal sequence lengths");
  }
  const std::size_t m = model.heads.size();
  std::vector<std::vector<Tensor>> probs(m);
  for (auto& v : probs) v.reserve(n);
  rnn::LstmStateBatch state = rnn::LstmStateBatch::zero(inputs.size(), model.lstm.hidden_dim);
  for (std::size_t t = 0; t < n; ++t) {
    state = rnn::lstm_step_batch(model.lstm, points_matrix(inputs, t, model.input_scale), state);
    for (std::size_t j = 0; j < m; ++j) {
      probs[j].push_back(softmax(affine_apply(model.heads[j], state.hidden)));
    }
  }
  return probs;
}

HypothesisSet seq2seq_forward(const Seq2SeqModel& model, const std::vector<Point2>& inputs) {
  require(!inputs.empty(), "seq2seq_forward: empty input");
  const std::vector<Point2>* ptr = &inputs;
  auto batch = seq2seq_probs_batch(model, std::span<const std::vector<Point2>* const>(&ptr, 1));
  HypothesisSet out;
  out.hypotheses.resize(model.heads.size());
  for (std::size_t j = 0; j < model.heads.size(); ++j) {
    for (Tensor& rowmat : batch[j]) {
      out.hypotheses[j].push_back(Tensor({model.num_classes()}, std::move(rowmat.data)));
    }
  }
  return out;
}

BuiltLosses seq2seq_build_losses(Graph& g, Seq2SeqModel& model, SampleBatch batch) {
  require(!batch.empty(), "seq2seq_build_losses: empty batch");
  const std::size_t b = batch.size();
  const std::size_t n = batch[0]->input.size();
  require(n > 0, "seq2seq_build_losses: empty sequence");
  for (const auto* s : batch) {
    require(s->input.size() == n && s->class_targets.size() == n,
            "seq2seq_build_losses: unequal lengths in batch");
  }
  const ParamRefs refs = model.parameters();
  std::vector<NodeId> pn;
  pn.reserve(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    pn.push_back(g.param(*refs[i].value, static_cast<std::uint32_t>(i)));
  }
  const rnn::LstmNodes cell{pn[0], pn[1]};
  const std::size_t hid = model.lstm.hidden_dim;
  const std::size_t m = model.heads.size();

  NodeId h = g.constant(Tensor::zeros({b, hid}));
  NodeId c = g.constant(Tensor::zeros({b, hid}));
  std::vector<NodeId> acc(m);
  std::vector<std::size_t> idx(b);
  for (std::size_t t = 0; t < n; ++t) {
    const NodeId x = g.constant(step_inputs(batch, t, model.input_scale));
    std::tie(h, c) = rnn::lstm_step_nodes(g, cell, x, h, c, hid);
    for (std::size_t i = 0; i < b; ++i) {
      const int label = batch[i]->class_targets[t];
      require(label >= 0 && static_cast<std::size_t>(label) < model.num_classes(),
              "seq2seq_build_losses: label out of range");
      idx[i] = static_cast<std::size_t>(label);
    }
    for (std::size_t j = 0; j < m; ++j) {
      const NodeId logits = g.add_row_vec(g.matmul(h, pn[2 + 2 * j]), pn[3 + 2 * j]);
      const NodeId xent = g.sub(g.row_logsumexp(logits), g.gather_cols(logits, idx));
      acc[j] = (t == 0) ? xent : g.add(acc[j], xent);
    }
  }
  BuiltLosses out;
  for (std::size_t j = 0; j < m; ++j) {
    out.per_hypothesis.push_back(g.scale(acc[j], 1.0 / static_cast<double>(n)));
  }
  return out;
}

double seq2seq_train_step(Seq2SeqModel& model, SampleBatch batch, const MhpConfig& config,
                          AdamState& opt) {
  return train_step_impl(model, batch, config, opt,
                         [](Graph& g, Seq2SeqModel& m, SampleBatch b) {
                           return seq2seq_build_losses(g, m, b);
                         });
}

// ---------------------------------------------------------------------------
// Encoder-decoder
// ---------------------------------------------------------------------------

EncDecModel EncDecModel::init(std::size_t hidden_dim, int num_hypotheses, Rng& rng) {
  require(num_hypotheses >= 1, "EncDecModel: need at least one bridge");
  EncDecModel m;
  m.encoder = rnn::LstmParams::init(2, hidden_dim, rng);
  Rng dec_rng = rng.split(1);
  m.decoder = rnn::LstmParams::init(2, hidden_dim, dec_rng);
  for (int j = 0; j < num_hypotheses; ++j) {
    Rng r = rng.split(2000 + static_cast<std::uint64_t>(j));
    m.bridges.push_back(Affine::init(hidden_dim, hidden_dim, r));
  }
  Rng out_rng = rng.split(3);
  m.output = Affine::init(hidden_dim, 2, out_rng);
  return m;
}

ParamRefs EncDecModel::parameters() {
  ParamRefs refs;
  refs.push_back({"encoder.weights", &encoder.weights});
  refs.push_back({"encoder.bias", &encoder.bias});
  refs.push_back({"decoder.weights", &decoder.weights});
  refs.push_back({"decoder.bias", &decoder.bias});
  for (std::size_t j = 0; j < bridges.size(); ++j) {
    refs.push_back({"bridge." + std::to_string(j) + ".weights", &bridges[j].weights});
    refs.push_back({"bridge." + std::to_string(j) + ".bias", &bridges[j].bias});
  }
  refs.push_back({"output.weights", &output.weights});
  refs.push_back({"output.bias", &output.bias});
  return refs;
}

std::size_t EncDecModel::parameter_count() const {
  std::size_t n = encoder.parameter_count() + decoder.parameter_count() +
                  output.parameter_count();
  for (const auto& br : bridges) n += br.parameter_count();
  return n;
}

std::vector<std::vector<Tensor>> encdec_coords_batch(
    const EncDecModel& model, std::span<const std::vector<Point2>* const> inputs,
    std::size_t horizon) {
  require(!inputs.empty(), "encdec_coords_batch: empty batch");
  require(horizon >= 1, "encdec_coords_batch: horizon must be at least 1");
  const std::size_t n = inputs.front()->size();
  require(n > 0, "encdec_coords_batch: empty input sequence");
  for (const auto* traj : inputs) {
    require(traj->size() == n, "encdec_coords_batch: unequal sequence lengths");
  }
  const std::size_t b = inputs.size();
  const std::size_t hid = model.encoder.hidden_dim;

  rnn::LstmStateBatch enc_state = rnn::LstmStateBatch::zero(b, hid);
  for (std::size_t t = 0; t < n; ++t) {
    enc_state = rnn::lstm_step_batch(model.encoder,
                                     points_matrix(inputs, t, model.input_scale), enc_state);
  }

  const double inv_scale = 1.0 / model.input_scale;
  std::vector<std::vector<Tensor>> coords(model.bridges.size());
  for (std::size_t j = 0; j < model.bridges.size(); ++j) {
    rnn::LstmStateBatch state{affine_apply(model.bridges[j], enc_state.hidden),
                              Tensor::zeros({b, hid})};
    Tensor x = Tensor::zeros({b, 2});
    coords[j].reserve(horizon);
    for (std::size_t t = 0; t < horizon; ++t) {
      state = rnn::lstm_step_batch(model.decoder, x, state);
      Tensor out = affine_apply(model.output, state.hidden);
      x = out;  // feedback in scaled space
      Tensor map_units = Tensor::zeros({b, 2});
      vscale(out.data.data(), inv_scale, map_units.data.data(), out.numel());
      coords[j].push_back(std::move(map_units));
    }
  }
  return coords;
}

std::vector<std::vector<Point2>> encdec_forward(const EncDecModel& model,
                                                const std::vector<Point2>& inputs,
                                                std::size_t horizon) {
  const std::vector<Point2>* ptr = &inputs;
  auto batch = encdec_coords_batch(model, std::span<const std::vector<Point2>* const>(&ptr, 1),
                                   horizon);
  std::vector<std::vector<Point2>> out(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j) {
    out[j].reserve(horizon);
    for (const Tensor& step : batch[j]) {
      out[j].push_back({step[0], step[1]});
    }
  }
  return out;
}

BuiltLosses encdec_build_losses(Graph& g, EncDecModel& model, SampleBatch batch) {
  require(!batch.empty(), "encdec_build_losses: empty batch");
  const std::size_t b = batch.size();
  const std::size_t n_obs = batch[0]->input.size();
  const std::size_t horizon = batch[0]->coord_targets.size();
  require(n_obs > 0 && horizon > 0, "encdec_build_losses: empty sequences");
  for (const auto* s : batch) {
    require(s->input.size() == n_obs && s->coord_targets.size() == horizon,
            "encdec_build_losses: unequal lengths in batch");
  }
  const ParamRefs refs = model.parameters();
  std::vector<NodeId> pn;
  pn.reserve(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    pn.push_back(g.param(*refs[i].value, static_cast<std::uint32_t>(i)));
  }
  const rnn::LstmNodes enc_cell{pn[0], pn[1]};
  const rnn::LstmNodes dec_cell{pn[2], pn[3]};
  const std::size_t m = model.bridges.size();
  const NodeId out_w = pn[4 + 2 * m];
  const NodeId out_b = pn[5 + 2 * m];
  const std::size_t hid = model.encoder.hidden_dim;

  NodeId h = g.constant(Tensor::zeros({b, hid}));
  NodeId c = g.constant(Tensor::zeros({b, hid}));
  for (std::size_t t = 0; t < n_obs; ++t) {
    const NodeId x = g.constant(step_inputs(batch, t, model.input_scale));
    std::tie(h, c) = rnn::lstm_step_nodes(g, enc_cell, x, h, c, hid);
  }

  std::vector<NodeId> targets;
  targets.reserve(horizon);
  for (std::size_t t = 0; t < horizon; ++t) {
    targets.push_back(g.constant(step_targets(batch, t, model.input_scale)));
  }

  BuiltLosses out;
  for (std::size_t j = 0; j < m; ++j) {
    NodeId dh = g.add_row_vec(g.matmul(h, pn[4 + 2 * j]), pn[5 + 2 * j]);
    NodeId dc = g.constant(Tensor::zeros({b, hid}));
    NodeId x = g.constant(Tensor::zeros({b, 2}));
    NodeId acc = 0;
    for (std::size_t t = 0; t < horizon; ++t) {
      std::tie(dh, dc) = rnn::lstm_step_nodes(g, dec_cell, x, dh, dc, hid);
      const NodeId pred = g.add_row_vec(g.matmul(dh, out_w), out_b);
      const NodeId diff = g.sub(pred, targets[t]);
      const NodeId step_loss = g.row_sum(g.mul(diff, diff));
      acc = (t == 0) ? step_loss : g.add(acc, step_loss);
      x = pred;
    }
    out.per_hypothesis.push_back(g.scale(acc, 1.0 / static_cast<double>(horizon)));
  }
  return out;
}

double encdec_train_step(EncDecModel& model, SampleBatch batch, const MhpConfig& config,
                         AdamState& opt) {
  return train_step_impl(model, batch, config, opt,
                         [](Graph& g, EncDecModel& m, SampleBatch b) {
                           return encdec_build_losses(g, m, b);
                         });
}

// ---------------------------------------------------------------------------
// Generator
// ---------------------------------------------------------------------------

GeneratorModel GeneratorModel::init(std::size_t hidden_dim, int num_hypotheses, Rng& rng) {
  require(num_hypotheses >= 1, "GeneratorModel: need at least one head");
  GeneratorModel m;
  m.lstm = rnn::LstmParams::init(2, hidden_dim, rng);
  for (int j = 0; j < num_hypotheses; ++j) {
    Rng r = rng.split(4000 + static_cast<std::uint64_t>(j));
    m.heads.push_back(Affine::init(hidden_dim, 2, r));
  }
  return m;
}

ParamRefs GeneratorModel::parameters() {
  ParamRefs refs;
  refs.push_back({"lstm.weights", &lstm.weights});
  refs.push_back({"lstm.bias", &lstm.bias});
  for (std::size_t j = 0; j < heads.size(); ++j) {
    refs.push_back({"head." + std::to_string(j) + ".weights", &heads[j].weights});
    refs.push_back({"head." + std::to_string(j) + ".bias", &heads[j].bias});
  }
  return refs;
}

std::size_t GeneratorModel::parameter_count() const {
  std::size_t n = lstm.parameter_count();
  for (const auto& h : heads) n += h.parameter_count();
  return n;
}

BuiltLosses generator_build_losses(Graph& g, GeneratorModel& model, SampleBatch batch) {
  require(!batch.empty(), "generator_build_losses: empty batch");
  const std::size_t b = batch.size();
  const std::size_t n = batch[0]->input.size();
  require(n > 0, "generator_build_losses: empty sequence");
  for (const auto* s : batch) {
    require(s->input.size() == n && s->coord_targets.size() == n,
            "generator_build_losses: need one target per input step");
  }
  const ParamRefs refs = model.parameters();
  std::vector<NodeId> pn;
  pn.reserve(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    pn.push_back(g.param(*refs[i].value, static_cast<std::uint32_t>(i)));
  }
  const rnn::LstmNodes cell{pn[0], pn[1]};
  const std::size_t hid = model.lstm.hidden_dim;
  const std::size_t m = model.heads.size();

  NodeId h = g.constant(Tensor::zeros({b, hid}));
  NodeId c = g.constant(Tensor::zeros({b, hid}));
  std::vector<NodeId> acc(m);
  for (std::size_t t = 0; t < n; ++t) {
    const NodeId x = g.constant(step_inputs(batch, t, model.input_scale));
    std::tie(h, c) = rnn::lstm_step_nodes(g, cell, x, h, c, hid);
    const NodeId target = g.constant(step_targets(batch, t, model.input_scale));
    for (std::size_t j = 0; j < m; ++j) {
      const NodeId pred = g.add_row_vec(g.matmul(h, pn[2 + 2 * j]), pn[3 + 2 * j]);
      const NodeId diff = g.sub(pred, target);
      const NodeId step_loss = g.row_sum(g.mul(diff, diff));
      acc[j] = (t == 0) ? step_loss : g.add(acc[j], step_loss);
    }
  }
  BuiltLosses out;
  for (std::size_t j = 0; j < m; ++j) {
    out.per_hypothesis.push_back(g.scale(acc[j], 1.0 / static_cast<double>(n)));
  }
  return out;
}

double generator_train_step(GeneratorModel& model, SampleBatch batch, const MhpConfig& config,
                            AdamState& opt) {
  return train_step_impl(model, batch, config, opt,
                         [](Graph& g, GeneratorModel& m, SampleBatch b) {
                           return generator_build_losses(g, m, b);
                         });
}

// ---------------------------------------------------------------------------
// SHP* and MCL
// ---------------------------------------------------------------------------

std::vector<int> shp_star_predict(const Tensor& probabilities, const ShpStarConfig& config) {
  std::vector<int> out;
  for (std::size_t c = 0; c < probabilities.numel(); ++c) {
    if (probabilities[c] > config.gamma) out.push_back(static_cast<int>(c));
  }
  if (out.empty()) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < probabilities.numel(); ++c) {
      if (probabilities[c] > probabilities[best]) best = c;
    }
    out.push_back(static_cast<int>(best));
  }
  return out;
}

double mcl_train_step(MclSeq2Seq& ensemble, SampleBatch batch, std::vector<AdamState>& opts) {
  return mcl_train_step_impl(ensemble, batch, opts,
                             [](Graph& g, Seq2SeqModel& m, SampleBatch b) {
                               return seq2seq_build_losses(g, m, b);
                             });
}

double mcl_train_step(MclEncDec& ensemble, SampleBatch batch, std::vector<AdamState>& opts) {
  return mcl_train_step_impl(ensemble, batch, opts,
                             [](Graph& g, EncDecModel& m, SampleBatch b) {
                               return encdec_build_losses(g, m, b);
                             });
}

}  // namespace mhp::models
