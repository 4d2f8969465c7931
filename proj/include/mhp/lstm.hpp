#pragma once

#include <vector>

#include "mhp/graph.hpp"
#include "mhp/rng.hpp"
#include "mhp/tensor.hpp"

namespace mhp::rnn {

/// Single-layer LSTM cell. The four gate blocks live in one fused weight
/// matrix of shape [(input_dim + hidden_dim) x 4*hidden_dim] with column
/// blocks ordered [input, forget, candidate, output]; bias is [4*hidden_dim].
struct LstmParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Tensor weights;
  Tensor bias;

  /// Uniform +-1/sqrt(fan_in) weights, zero bias except forget gate bias 1.
  static LstmParams init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);

  std::size_t parameter_count() const {
    return 4 * hidden_dim * (input_dim + hidden_dim + 1);
  }
};

struct LstmState {
  Tensor hidden;  // [hidden_dim]
  Tensor cell;    // [hidden_dim]

  static LstmState zero(std::size_t hidden_dim) {
    return {Tensor::zeros({hidden_dim}), Tensor::zeros({hidden_dim})};
  }
};

/// States for a batch of independent sequences, one row each.
struct LstmStateBatch {
  Tensor hidden;  // [n x hidden_dim]
  Tensor cell;

  static LstmStateBatch zero(std::size_t n, std::size_t hidden_dim) {
    return {Tensor::zeros({n, hidden_dim}), Tensor::zeros({n, hidden_dim})};
  }
  std::size_t rows() const { return hidden.rows(); }
};

LstmState lstm_step(const LstmParams& params, const Tensor& input, const LstmState& state);

/// Unrolls the cell; result[i] is the state after consuming inputs[i].
std::vector<LstmState> run_sequence(const LstmParams& params,
                                    const std::vector<Tensor>& inputs,
                                    const LstmState& initial);

/// Batched step over [n x input_dim] inputs. Same kernels as the graph
/// forward pass, so values agree bit-for-bit with lstm_step_nodes.
LstmStateBatch lstm_step_batch(const LstmParams& params, const Tensor& inputs,
                               const LstmStateBatch& state);

/// Graph parameter handles for one cell.
struct LstmNodes {
  NodeId weights;
  NodeId bias;
};

/// Appends one batched LSTM step to the graph. x is [n x input_dim], h and c
/// are [n x hidden_dim]; returns (new hidden, new cell).
std::pair<NodeId, NodeId> lstm_step_nodes(Graph& g, const LstmNodes& cell, NodeId x,
                                          NodeId h, NodeId c, std::size_t hidden_dim);

}  // namespace mhp::rnn
