#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "mhp/tensor.hpp"

namespace mhp {

using NodeId = std::uint32_t;

/// Gradients keyed by parameter id, in id order. Every parameter registered on
/// the graph has an entry; parameters the loss never touches hold zeros.
using GradientMap = std::map<std::uint32_t, Tensor>;

/// Reverse-mode tape. Nodes are appended in forward order, which is a
/// topological order by construction; backward() walks it once in reverse.
/// Instances are single-threaded; distinct graphs may run concurrently.
class Graph {
 public:
  NodeId constant(Tensor v);
  NodeId param(const Tensor& v, std::uint32_t param_id);

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);  // elementwise
  NodeId scale(NodeId a, double s);
  NodeId matmul(NodeId a, NodeId b);
  NodeId add_row_vec(NodeId m, NodeId v);  // broadcast v over rows of m
  NodeId sigmoid(NodeId a);
  NodeId tanh(NodeId a);
  NodeId exp(NodeId a);
  NodeId log(NodeId a);
  NodeId reduce_sum(NodeId a);                            // -> scalar
  NodeId row_sum(NodeId a);                               // [n x m] -> [n]
  NodeId concat_cols(NodeId a, NodeId b);                 // [n x p],[n x q] -> [n x p+q]
  NodeId slice_cols(NodeId a, std::size_t c0, std::size_t len);
  NodeId gather_cols(NodeId a, std::vector<std::size_t> idx);  // [n x m] -> [n]
  NodeId row_logsumexp(NodeId a);                         // [n x m] -> [n]

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  std::size_t size() const { return nodes_.size(); }
  std::size_t num_params() const { return params_.size(); }

  /// d(loss)/d(param) for every registered parameter. The loss must be scalar.
  GradientMap backward(NodeId loss);

  /// Drops all nodes but keeps buffer capacity for reuse across batches.
  void clear();

 private:
  enum class Op : std::uint8_t {
    kConstant, kParam, kAdd, kSub, kMul, kScale, kMatMul, kAddRowVec,
    kSigmoid, kTanh, kExp, kLog, kReduceSum, kRowSum, kConcatCols,
    kSliceCols, kGatherCols, kRowLogSumExp,
  };

  struct Node {
    Op op;
    NodeId a = 0, b = 0;
    Tensor value;
    double scalar = 0.0;
    std::size_t c0 = 0, len = 0;
    std::vector<std::size_t> idx;
    std::uint32_t param_id = 0;
  };

  NodeId push(Node n);
  const Tensor& val(NodeId id) const { return nodes_[id].value; }

  std::vector<Node> nodes_;
  std::vector<std::pair<std::uint32_t, NodeId>> params_;
};

/// Numerically stable softmax over the last axis (max-subtraction). Rank-1
/// tensors are treated as a single row.
Tensor softmax(const Tensor& logits);

}  // namespace mhp
