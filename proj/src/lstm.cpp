#include "mhp/lstm.hpp"

#include <cmath>

#include "mhp/error.hpp"
#include "mhp/kernels.hpp"

namespace mhp::rnn {

LstmParams LstmParams::init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
  LstmParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  const std::size_t fan_in = input_dim + hidden_dim;
  const double k = 1.0 / std::sqrt(static_cast<double>(fan_in));
  p.weights = Tensor::zeros({fan_in, 4 * hidden_dim});
  for (double& w : p.weights.data) w = rng.uniform(-k, k);
  p.bias = Tensor::zeros({4 * hidden_dim});
  for (std::size_t j = 0; j < hidden_dim; ++j) p.bias[hidden_dim + j] = 1.0;  // forget gate
  return p;
}

LstmStateBatch lstm_step_batch(const LstmParams& params, const Tensor& inputs,
                               const LstmStateBatch& state) {
  const std::size_t n = inputs.rows();
  const std::size_t in = params.input_dim, hid = params.hidden_dim;
  require(inputs.cols() == in, "lstm_step: input width != input_dim");
  require(state.hidden.rows() == n && state.hidden.cols() == hid,
          "lstm_step: state shape mismatch");

  // z = [x, h]
  Tensor z = Tensor::zeros({n, in + hid});
  for (std::size_t r = 0; r < n; ++r) {
    double* zr = z.data.data() + r * (in + hid);
    std::copy_n(inputs.data.data() + r * in, in, zr);
    std::copy_n(state.hidden.data.data() + r * hid, hid, zr + in);
  }

  Tensor gates = Tensor::zeros({n, 4 * hid});
  gemm_nn(n, 4 * hid, in + hid, z.data.data(), params.weights.data.data(),
          gates.data.data(), false);
  add_row_vec(gates.data.data(), params.bias.data.data(), gates.data.data(), n, 4 * hid);

  LstmStateBatch out = LstmStateBatch::zero(n, hid);
  Tensor ig = Tensor::zeros({n, hid}), fg = ig, cand = ig, og = ig, t1 = ig, t2 = ig;
  for (std::size_t r = 0; r < n; ++r) {
    const double* grow = gates.data.data() + r * 4 * hid;
    vsigmoid(grow, ig.data.data() + r * hid, hid);
    vsigmoid(grow + hid, fg.data.data() + r * hid, hid);
    vtanh(grow + 2 * hid, cand.data.data() + r * hid, hid);
    vsigmoid(grow + 3 * hid, og.data.data() + r * hid, hid);
  }
  // c' = f*c + i*g ; h' = o * tanh(c')
  vmul(fg.data.data(), state.cell.data.data(), t1.data.data(), n * hid);
  vmul(ig.data.data(), cand.data.data(), t2.data.data(), n * hid);
  vadd(t1.data.data(), t2.data.data(), out.cell.data.data(), n * hid);
  vtanh(out.cell.data.data(), t1.data.data(), n * hid);
  vmul(og.data.data(), t1.data.data(), out.hidden.data.data(), n * hid);
  return out;
}

LstmState lstm_step(const LstmParams& params, const Tensor& input, const LstmState& state) {
  require(input.numel() == params.input_dim, "lstm_step: input length != input_dim");
  require(state.hidden.numel() == params.hidden_dim, "lstm_step: hidden length mismatch");
  Tensor x({1, params.input_dim}, input.data);
  LstmStateBatch sb{Tensor({1, params.hidden_dim}, state.hidden.data),
                    Tensor({1, params.hidden_dim}, state.cell.data)};
  LstmStateBatch nb = lstm_step_batch(params, x, sb);
  return {Tensor({params.hidden_dim}, std::move(nb.hidden.data)),
          Tensor({params.hidden_dim}, std::move(nb.cell.data))};
}

std::vector<LstmState> run_sequence(const LstmParams& params,
                                    const std::vector<Tensor>& inputs,
                                    const LstmState& initial) {
  std::vector<LstmState> states;
  states.reserve(inputs.size());
  const LstmState* prev = &initial;
  for (const Tensor& x : inputs) {
    states.push_back(lstm_step(params, x, *prev));
    prev = &states.back();
  }
  return states;
}

std::pair<NodeId, NodeId> lstm_step_nodes(Graph& g, const LstmNodes& cell, NodeId x,
                                          NodeId h, NodeId c, std::size_t hidden_dim) {
  const NodeId z = g.concat_cols(x, h);
  const NodeId gates = g.add_row_vec(g.matmul(z, cell.weights), cell.bias);
  const NodeId ig = g.sigmoid(g.slice_cols(gates, 0, hidden_dim));
  const NodeId fg = g.sigmoid(g.slice_cols(gates, hidden_dim, hidden_dim));
  const NodeId cand = g.tanh(g.slice_cols(gates, 2 * hidden_dim, hidden_dim));
  const NodeId og = g.sigmoid(g.slice_cols(gates, 3 * hidden_dim, hidden_dim));
  const NodeId new_cell = g.add(g.mul(fg, c), g.mul(ig, cand));
  const NodeId new_hidden = g.mul(og, g.tanh(new_cell));
  return {new_hidden, new_cell};
}

}  // namespace mhp::rnn
