#pragma once

#include <span>
#include <vector>

#include "mhp/adam.hpp"
#include "mhp/graph.hpp"
#include "mhp/lstm.hpp"
#include "mhp/meta_loss.hpp"
#include "mhp/rng.hpp"
#include "mhp/tensor.hpp"

namespace mhp::models {

/// x @ w + b with w stored [in x out].
struct Affine {
  Tensor weights;
  Tensor bias;

  static Affine init(std::size_t in, std::size_t out, Rng& rng);
  std::size_t parameter_count() const { return weights.numel() + bias.numel(); }
};

/// M predicted sequences for one input; each step is a class-probability
/// vector or a coordinate vector depending on the task.
struct HypothesisSet {
  std::vector<std::vector<Tensor>> hypotheses;
};

/// One supervised sequence pair. Classification fills class_targets (one id
/// per input step); regression tasks fill coord_targets.
struct SequenceSample {
  std::vector<Point2> input;
  std::vector<int> class_targets;
  std::vector<Point2> coord_targets;
};

using SampleBatch = std::span<const SequenceSample* const>;

// ---------------------------------------------------------------------------
// Base losses
// ---------------------------------------------------------------------------

/// Mean per-step negative log probability of the true class. Probabilities
/// are clamped below at 1e-12 before the log.
double seq_xent_loss(const std::vector<Tensor>& step_probs, const std::vector<int>& labels);

/// Mean per-step squared Euclidean distance.
double l2_seq_loss(const std::vector<Point2>& predicted, const std::vector<Point2>& truth);

// ---------------------------------------------------------------------------
// Sequence-to-sequence classifier: shared LSTM trunk, M unshared softmax heads
// ---------------------------------------------------------------------------

struct Seq2SeqModel {
  rnn::LstmParams lstm;
  std::vector<Affine> heads;
  double input_scale = 1.0;

  static Seq2SeqModel init(std::size_t input_dim, std::size_t hidden_dim,
                           std::size_t num_classes, int num_hypotheses, Rng& rng);
  ParamRefs parameters();
  std::size_t parameter_count() const;
  std::size_t num_classes() const { return heads.front().bias.numel(); }
  int num_hypotheses() const { return static_cast<int>(heads.size()); }
};

/// Per-step class probabilities for all M heads.
HypothesisSet seq2seq_forward(const Seq2SeqModel& model, const std::vector<Point2>& inputs);

/// Batched probabilities: probs[m][t] is [batch x classes]. All trajectories
/// must share one length.
std::vector<std::vector<Tensor>> seq2seq_probs_batch(
    const Seq2SeqModel& model, std::span<const std::vector<Point2>* const> inputs);

// ---------------------------------------------------------------------------
// Encoder-decoder regressor: M bridge layers fan the encoder summary out into
// M decoder initializations; the decoder feeds back its own outputs
// ---------------------------------------------------------------------------

struct EncDecModel {
  rnn::LstmParams encoder;
  rnn::LstmParams decoder;
  std::vector<Affine> bridges;
  Affine output;  // decoder hidden -> 2-D coordinate
  double input_scale = 1.0;

  static EncDecModel init(std::size_t hidden_dim, int num_hypotheses, Rng& rng);
  ParamRefs parameters();
  std::size_t parameter_count() const;
  int num_hypotheses() const { return static_cast<int>(bridges.size()); }
};

/// M coordinate sequences of length `horizon`, in map units.
std::vector<std::vector<Point2>> encdec_forward(const EncDecModel& model,
                                                const std::vector<Point2>& inputs,
                                                std::size_t horizon);

/// Batched decode: coords[m][t] is [batch x 2], map units.
std::vector<std::vector<Tensor>> encdec_coords_batch(
    const EncDecModel& model, std::span<const std::vector<Point2>* const> inputs,
    std::size_t horizon);

// ---------------------------------------------------------------------------
// Closed-loop generator: trunk LSTM with M coordinate heads, trained with
// teacher forcing on next-point targets
// ---------------------------------------------------------------------------

struct GeneratorModel {
  rnn::LstmParams lstm;
  std::vector<Affine> heads;
  double input_scale = 1.0;

  static GeneratorModel init(std::size_t hidden_dim, int num_hypotheses, Rng& rng);
  ParamRefs parameters();
  std::size_t parameter_count() const;
  int num_hypotheses() const { return static_cast<int>(heads.size()); }
};

// ---------------------------------------------------------------------------
// Thresholded classifier read-out
// ---------------------------------------------------------------------------

struct ShpStarConfig {
  double gamma = 0.0;
};

/// All classes with probability strictly above gamma; falls back to the
/// argmax singleton when none qualifies. Returned ids are sorted.
std::vector<int> shp_star_predict(const Tensor& probabilities, const ShpStarConfig& config);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

/// Per-hypothesis per-sample loss vectors built on a graph, parameters
/// registered from id base 0 in parameters() order.
struct BuiltLosses {
  std::vector<NodeId> per_hypothesis;  // each [batch]
};

BuiltLosses seq2seq_build_losses(Graph& g, Seq2SeqModel& model, SampleBatch batch);
BuiltLosses encdec_build_losses(Graph& g, EncDecModel& model, SampleBatch batch);
BuiltLosses generator_build_losses(Graph& g, GeneratorModel& model, SampleBatch batch);

/// One mini-batch update: forward all hypotheses, winner-weighted meta-loss
/// per sample, mean over the batch, backward, global-norm clip at 5, Adam.
/// Returns the batch mean meta-loss.
double seq2seq_train_step(Seq2SeqModel& model, SampleBatch batch, const MhpConfig& config,
                          AdamState& opt);
double encdec_train_step(EncDecModel& model, SampleBatch batch, const MhpConfig& config,
                         AdamState& opt);
double generator_train_step(GeneratorModel& model, SampleBatch batch, const MhpConfig& config,
                            AdamState& opt);

/// Ensemble of M independent single-hypothesis models; each sample's gradient
/// reaches only the model with the smallest loss on it.
template <class ModelT>
struct MclEnsemble {
  std::vector<ModelT> members;
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& m : members) n += m.parameter_count();
    return n;
  }
};

using MclSeq2Seq = MclEnsemble<Seq2SeqModel>;
using MclEncDec = MclEnsemble<EncDecModel>;

double mcl_train_step(MclSeq2Seq& ensemble, SampleBatch batch, std::vector<AdamState>& opts);
double mcl_train_step(MclEncDec& ensemble, SampleBatch batch, std::vector<AdamState>& opts);

}  // namespace mhp::models
