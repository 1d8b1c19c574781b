#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "hdgnn/array.hpp"

namespace hdgnn::ad {

class ParameterStore;

struct Value {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Dynamic tape for reverse-mode differentiation. One tape per forward pass;
// parameter leaves point into a single ParameterStore and backward()
// accumulates into that store's gradient buffers.
class Tape {
 public:
  Tape() = default;

  Value constant(Array v);
  Value scalar(double v) { return constant(Array::scalar(v)); }
  Value param(ParameterStore& store, int param_index);

  // a:[m,k] x b:[k,n] -> [m,n], or a:[m,k] x b:[k] -> [m]
  Value matmul(Value a, Value b);
  // a:[m,k] x b:[n,k]^T -> [m,n]; both operands dotted row against row
  Value matmul_nt(Value a, Value b);
  Value reshape(Value a, std::size_t rows, std::size_t cols);
  Value add(Value a, Value b);
  Value sub(Value a, Value b);
  Value mul(Value a, Value b);
  // scalar (rank-0 or length-1) times arbitrary array
  Value smul(Value scalar, Value v);
  Value scale(Value a, double s);
  Value add_const(Value a, double c);
  Value concat(std::span<const Value> parts);
  Value slice(Value a, std::size_t start, std::size_t len);
  Value mean_pool(std::span<const Value> parts);
  Value sum_pool(std::span<const Value> parts);
  Value max_pool(std::span<const Value> parts);
  Value concat(std::initializer_list<Value> parts) {
    return concat(std::span<const Value>(parts.begin(), parts.size()));
  }
  Value mean_pool(std::initializer_list<Value> parts) {
    return mean_pool(std::span<const Value>(parts.begin(), parts.size()));
  }
  Value sum_pool(std::initializer_list<Value> parts) {
    return sum_pool(std::span<const Value>(parts.begin(), parts.size()));
  }
  Value max_pool(std::initializer_list<Value> parts) {
    return max_pool(std::span<const Value>(parts.begin(), parts.size()));
  }
  Value sigmoid(Value a);
  Value tanh(Value a);
  Value softmax(Value a);
  Value leaky_relu(Value a, double slope = 0.01);
  Value gelu(Value a);
  Value log(Value a);
  Value square(Value a);
  Value log_sigmoid(Value a);
  Value dot(Value a, Value b);
  Value reduce_sum(Value a);
  Value reduce_mean(Value a);

  const Array& value(Value v) const;
  double scalar_value(Value v) const;

  // Reverse sweep from a scalar loss; seeds d(loss)/d(loss) = seed and adds
  // parameter gradients into the bound store.
  void backward(Value loss, double seed = 1.0);

  // Gradient w.r.t. an arbitrary tape value from the last backward().
  Array grad(Value v) const;

  std::size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op {
    Constant, Param, MatMul, MatMulNT, Reshape, Add, Sub, Mul, SMul, Scale, AddConst,
    Concat, Slice, MeanPool, SumPool, MaxPool,
    Sigmoid, Tanh, Softmax, LeakyRelu, Gelu, Log, Square, LogSigmoid,
    Dot, ReduceSum, ReduceMean,
  };

  struct Node {
    Op op;
    int a = -1, b = -1;
    double aux = 0.0;
    std::size_t start = 0, len = 0;
    std::vector<int> list;
    std::vector<int> winner;  // MaxPool: per-element argmax into list
    int param = -1;
    Array val;
  };

  int push(Node n);
  Value unary(Op op, Value a, double aux = 0.0);
  Value binary_same_shape(Op op, Value a, Value b);
  Value pool(Op op, std::span<const Value> parts);
  const Array& val_of(int id) const;

  std::vector<Node> nodes_;
  ParameterStore* store_ = nullptr;
  std::unordered_map<int, int> param_leaves_;

  // Gradients live in one flat arena per backward pass: grad_off_[i] is the
  // start of node i's slot, grad_live_ marks nodes reached by the sweep.
  std::vector<double> grad_arena_;
  std::vector<std::size_t> grad_off_;
  std::vector<unsigned char> grad_live_;
};

bool all_finite(const Array& a);

}  // namespace hdgnn::ad
