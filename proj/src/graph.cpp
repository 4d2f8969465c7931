#include "mhp/graph.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "mhp/kernels.hpp"

namespace mhp {

NodeId Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::constant(Tensor v) {
  Node n;
  n.op = Op::kConstant;
  n.value = std::move(v);
  return push(std::move(n));
}

NodeId Graph::param(const Tensor& v, std::uint32_t param_id) {
  for (const auto& [pid, node] : params_) {
    require(pid != param_id, "parameter id registered twice on one graph");
  }
  Node n;
  n.op = Op::kParam;
  n.value = v;
  n.param_id = param_id;
  const NodeId id = push(std::move(n));
  params_.emplace_back(param_id, id);
  return id;
}

NodeId Graph::add(NodeId a, NodeId b) {
  require(val(a).same_shape(val(b)), "add: shape mismatch");
  Node n;
  n.op = Op::kAdd;
  n.a = a;
  n.b = b;
  n.value = Tensor::zeros(val(a).shape);
  vadd(val(a).data.data(), val(b).data.data(), n.value.data.data(), n.value.numel());
  return push(std::move(n));
}

NodeId Graph::sub(NodeId a, NodeId b) {
  require(val(a).same_shape(val(b)), "sub: shape mismatch");
  Node n;
  n.op = Op::kSub;
  n.a = a;
  n.b = b;
  n.value = Tensor::zeros(val(a).shape);
  vsub(val(a).data.data(), val(b).data.data(), n.value.data.data(), n.value.numel());
  return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
  require(val(a).same_shape(val(b)), "mul: shape mismatch");
  Node n;
  n.op = Op::kMul;
  n.a = a;
  n.b = b;
  n.value = Tensor::zeros(val(a).shape);
  vmul(val(a).data.data(), val(b).data.data(), n.value.data.data(), n.value.numel());
  return push(std::move(n));
}

NodeId Graph::scale(NodeId a, double s) {
  Node n;
  n.op = Op::kScale;
  n.a = a;
  n.scalar = s;
  n.value = Tensor::zeros(val(a).shape);
  vscale(val(a).data.data(), s, n.value.data.data(), n.value.numel());
  return push(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  const Tensor& ta = val(a);
  const Tensor& tb = val(b);
  require(ta.cols() == tb.rows(), "matmul: inner dimensions differ");
  Node n;
  n.op = Op::kMatMul;
  n.a = a;
  n.b = b;
  n.value = Tensor::zeros({ta.rows(), tb.cols()});
  gemm_nn(ta.rows(), tb.cols(), ta.cols(), ta.data.data(), tb.data.data(),
          n.value.data.data(), false);
  return push(std::move(n));
}

NodeId Graph::add_row_vec(NodeId m, NodeId v) {
  const Tensor& tm = val(m);
  const Tensor& tv = val(v);
  require(tv.numel() == tm.cols(), "add_row_vec: vector length != columns");
  Node n;
  n.op = Op::kAddRowVec;
  n.a = m;
  n.b = v;
  n.value = Tensor::zeros(tm.shape);
  mhp::add_row_vec(tm.data.data(), tv.data.data(), n.value.data.data(), tm.rows(), tm.cols());
  return push(std::move(n));
}

NodeId Graph::sigmoid(NodeId a) {
  Node n;
  n.op = Op::kSigmoid;
  n.a = a;
  n.value = Tensor::zeros(val(a).shape);
  vsigmoid(val(a).data.data(), n.value.data.data(), n.value.numel());
  return push(std::move(n));
}

NodeId Graph::tanh(NodeId a) {
  Node n;
  n.op = Op::kTanh;
  n.a = a;
  n.value = Tensor::zeros(val(a).shape);
  vtanh(val(a).data.data(), n.value.data.data(), n.value.numel());
  return push(std::move(n));
}

NodeId Graph::exp(NodeId a) {
  Node n;
  n.op = Op::kExp;
  n.a = a;
  n.value = Tensor::zeros(val(a).shape);
  vexp(val(a).data.data(), n.value.data.data(), n.value.numel());
  return push(std::move(n));
}

NodeId Graph::log(NodeId a) {
  Node n;
  n.op = Op::kLog;
  n.a = a;
  n.value = Tensor::zeros(val(a).shape);
  vlog(val(a).data.data(), n.value.data.data(), n.value.numel());
  return push(std::move(n));
}

NodeId Graph::reduce_sum(NodeId a) {
  Node n;
  n.op = Op::kReduceSum;
  n.a = a;
  double s = 0.0;
  for (double v : val(a).data) s += v;
  n.value = Tensor::scalar(s);
  return push(std::move(n));
}

NodeId Graph::row_sum(NodeId a) {
  const Tensor& t = val(a);
  Node n;
  n.op = Op::kRowSum;
  n.a = a;
  n.value = Tensor::zeros({t.rows()});
  for (std::size_t r = 0; r < t.rows(); ++r) {
    double s = 0.0;
    const double* row = t.data.data() + r * t.cols();
    for (std::size_t j = 0; j < t.cols(); ++j) s += row[j];
    n.value[r] = s;
  }
  return push(std::move(n));
}

NodeId Graph::concat_cols(NodeId a, NodeId b) {
  const Tensor& ta = val(a);
  const Tensor& tb = val(b);
  require(ta.rows() == tb.rows(), "concat_cols: row counts differ");
  Node n;
  n.op = Op::kConcatCols;
  n.a = a;
  n.b = b;
  const std::size_t rows = ta.rows(), ca = ta.cols(), cb = tb.cols();
  n.value = ta.shape.size() == 1 && tb.shape.size() == 1
                ? Tensor::zeros({ca + cb})
                : Tensor::zeros({rows, ca + cb});
  for (std::size_t r = 0; r < rows; ++r) {
    double* out = n.value.data.data() + r * (ca + cb);
    std::copy_n(ta.data.data() + r * ca, ca, out);
    std::copy_n(tb.data.data() + r * cb, cb, out + ca);
  }
  return push(std::move(n));
}

NodeId Graph::slice_cols(NodeId a, std::size_t c0, std::size_t len) {
  const Tensor& t = val(a);
  require(c0 + len <= t.cols(), "slice_cols: range out of bounds");
  Node n;
  n.op = Op::kSliceCols;
  n.a = a;
  n.c0 = c0;
  n.len = len;
  n.value = t.shape.size() == 1 ? Tensor::zeros({len}) : Tensor::zeros({t.rows(), len});
  for (std::size_t r = 0; r < t.rows(); ++r) {
    std::copy_n(t.data.data() + r * t.cols() + c0, len, n.value.data.data() + r * len);
  }
  return push(std::move(n));
}

NodeId Graph::gather_cols(NodeId a, std::vector<std::size_t> idx) {
  const Tensor& t = val(a);
  require(idx.size() == t.rows(), "gather_cols: one index per row required");
  for (std::size_t i : idx) require(i < t.cols(), "gather_cols: index out of range");
  Node n;
  n.op = Op::kGatherCols;
  n.a = a;
  n.idx = std::move(idx);
  n.value = Tensor::zeros({t.rows()});
  for (std::size_t r = 0; r < t.rows(); ++r) n.value[r] = t.at(r, n.idx[r]);
  return push(std::move(n));
}

NodeId Graph::row_logsumexp(NodeId a) {
  const Tensor& t = val(a);
  Node n;
  n.op = Op::kRowLogSumExp;
  n.a = a;
  n.value = Tensor::zeros({t.rows()});
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const double* row = t.data.data() + r * t.cols();
    double mx = row[0];
    for (std::size_t j = 1; j < t.cols(); ++j) mx = std::max(mx, row[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < t.cols(); ++j) s += std::exp(row[j] - mx);
    n.value[r] = mx + std::log(s);
  }
  return push(std::move(n));
}

GradientMap Graph::backward(NodeId loss) {
  require(loss < nodes_.size(), "backward: unknown node");
  require(val(loss).numel() == 1, "backward: loss node must be scalar");

  // Lazily allocated adjoints; nodes without one contribute nothing.
  std::vector<Tensor> grad(nodes_.size());
  grad[loss] = Tensor::scalar(1.0);
  if (val(loss).shape != grad[loss].shape) grad[loss].shape = val(loss).shape;

  // Transposes of matmul right-hand sides, shared across the pass (the same
  // weight node typically feeds every timestep).
  std::unordered_map<NodeId, Tensor> transposed;
  auto transpose_of = [&](NodeId id) -> const Tensor& {
    auto it = transposed.find(id);
    if (it != transposed.end()) return it->second;
    const Tensor& t = val(id);
    Tensor tt = Tensor::zeros({t.cols(), t.rows()});
    for (std::size_t r = 0; r < t.rows(); ++r)
      for (std::size_t j = 0; j < t.cols(); ++j) tt.at(j, r) = t.at(r, j);
    return transposed.emplace(id, std::move(tt)).first->second;
  };

  auto adj = [&](NodeId id) -> Tensor& {
    if (grad[id].data.empty()) grad[id] = Tensor::zeros(val(id).shape);
    return grad[id];
  };

  for (std::size_t ii = nodes_.size(); ii-- > 0;) {
    const NodeId id = static_cast<NodeId>(ii);
    if (grad[id].data.empty()) continue;
    const Node& n = nodes_[id];
    const Tensor& g = grad[id];
    switch (n.op) {
      case Op::kConstant:
      case Op::kParam:
        break;
      case Op::kAdd: {
        Tensor& ga = adj(n.a);
        Tensor& gb = adj(n.b);
        for (std::size_t i = 0; i < g.numel(); ++i) {
          ga[i] += g[i];
          gb[i] += g[i];
        }
        break;
      }
      case Op::kSub: {
        Tensor& ga = adj(n.a);
        Tensor& gb = adj(n.b);
        for (std::size_t i = 0; i < g.numel(); ++i) {
          ga[i] += g[i];
          gb[i] -= g[i];
        }
        break;
      }
      case Op::kMul: {
        Tensor& ga = adj(n.a);
        Tensor& gb = adj(n.b);
        const Tensor& va = val(n.a);
        const Tensor& vb = val(n.b);
        for (std::size_t i = 0; i < g.numel(); ++i) {
          ga[i] += g[i] * vb[i];
          gb[i] += g[i] * va[i];
        }
        break;
      }
      case Op::kScale: {
        Tensor& ga = adj(n.a);
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * n.scalar;
        break;
      }
      case Op::kMatMul: {
        const Tensor& va = val(n.a);
        // dA += dC * B^T (materialized transpose, cached per node)
        const Tensor& bt = transpose_of(n.b);
        gemm_nn(g.rows(), bt.cols(), g.cols(), g.data.data(), bt.data.data(),
                adj(n.a).data.data(), true);
        // dB += A^T * dC
        gemm_tn(va.cols(), g.cols(), va.rows(), va.data.data(), g.data.data(),
                adj(n.b).data.data(), true);
        break;
      }
      case Op::kAddRowVec: {
        Tensor& gm = adj(n.a);
        Tensor& gv = adj(n.b);
        const std::size_t rows = val(n.a).rows(), cols = val(n.a).cols();
        for (std::size_t r = 0; r < rows; ++r) {
          const double* grow = g.data.data() + r * cols;
          double* gmr = gm.data.data() + r * cols;
          for (std::size_t j = 0; j < cols; ++j) {
            gmr[j] += grow[j];
            gv[j] += grow[j];
          }
        }
        break;
      }
      case Op::kSigmoid: {
        Tensor& ga = adj(n.a);
        for (std::size_t i = 0; i < g.numel(); ++i) {
          const double s = n.value[i];
          ga[i] += g[i] * s * (1.0 - s);
        }
        break;
      }
      case Op::kTanh: {
        Tensor& ga = adj(n.a);
        for (std::size_t i = 0; i < g.numel(); ++i) {
          const double t = n.value[i];
          ga[i] += g[i] * (1.0 - t * t);
        }
        break;
      }
      case Op::kExp: {
        Tensor& ga = adj(n.a);
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * n.value[i];
        break;
      }
      case Op::kLog: {
        Tensor& ga = adj(n.a);
        const Tensor& va = val(n.a);
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] / va[i];
        break;
      }
      case Op::kReduceSum: {
        Tensor& ga = adj(n.a);
        const double gv = g[0];
        for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += gv;
        break;
      }
      case Op::kRowSum: {
        Tensor& ga = adj(n.a);
        const std::size_t rows = val(n.a).rows(), cols = val(n.a).cols();
        for (std::size_t r = 0; r < rows; ++r) {
          double* garow = ga.data.data() + r * cols;
          const double gv = g[r];
          for (std::size_t j = 0; j < cols; ++j) garow[j] += gv;
        }
        break;
      }
      case Op::kConcatCols: {
        Tensor& ga = adj(n.a);
        Tensor& gb = adj(n.b);
        const std::size_t rows = val(n.a).rows();
        const std::size_t ca = val(n.a).cols(), cb = val(n.b).cols();
        for (std::size_t r = 0; r < rows; ++r) {
          const double* grow = g.data.data() + r * (ca + cb);
          double* gar = ga.data.data() + r * ca;
          double* gbr = gb.data.data() + r * cb;
          for (std::size_t j = 0; j < ca; ++j) gar[j] += grow[j];
          for (std::size_t j = 0; j < cb; ++j) gbr[j] += grow[ca + j];
        }
        break;
      }
      case Op::kSliceCols: {
        Tensor& ga = adj(n.a);
        const std::size_t rows = val(n.a).rows(), cols = val(n.a).cols();
        for (std::size_t r = 0; r < rows; ++r) {
          const double* grow = g.data.data() + r * n.len;
          double* gar = ga.data.data() + r * cols + n.c0;
          for (std::size_t j = 0; j < n.len; ++j) gar[j] += grow[j];
        }
        break;
      }
      case Op::kGatherCols: {
        Tensor& ga = adj(n.a);
        const std::size_t cols = val(n.a).cols();
        for (std::size_t r = 0; r < n.idx.size(); ++r) {
          ga.data[r * cols + n.idx[r]] += g[r];
        }
        break;
      }
      case Op::kRowLogSumExp: {
        Tensor& ga = adj(n.a);
        const Tensor& va = val(n.a);
        const std::size_t rows = va.rows(), cols = va.cols();
        for (std::size_t r = 0; r < rows; ++r) {
          const double* xrow = va.data.data() + r * cols;
          double* garow = ga.data.data() + r * cols;
          const double lse = n.value[r];
          const double gv = g[r];
          for (std::size_t j = 0; j < cols; ++j) {
            garow[j] += gv * std::exp(xrow[j] - lse);
          }
        }
        break;
      }
    }
  }

  GradientMap out;
  for (const auto& [pid, node] : params_) {
    if (grad[node].data.empty()) {
      out.emplace(pid, Tensor::zeros(val(node).shape));
    } else {
      out.emplace(pid, std::move(grad[node]));
    }
  }
  return out;
}

void Graph::clear() {
  nodes_.clear();
  params_.clear();
}

Tensor softmax(const Tensor& logits) {
  require(logits.is_finite(), "softmax: logits must be finite");
  Tensor out = Tensor::zeros(logits.shape);
  const std::size_t rows = logits.rows(), cols = logits.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = logits.data.data() + r * cols;
    double* y = out.data.data() + r * cols;
    double mx = x[0];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      y[j] = std::exp(x[j] - mx);
      s += y[j];
    }
    for (std::size_t j = 0; j < cols; ++j) y[j] /= s;
  }
  return out;
}

}  // namespace mhp
