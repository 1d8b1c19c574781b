#include "hdgnn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hdgnn/params.hpp"

namespace hdgnn::ad {

namespace {
constexpr double kGeluCoeff = 0.044715;
const double kGeluScale = std::sqrt(2.0 / M_PI);

double sigmoid_stable(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid_stable(double x) {
  // log sigma(x) = -softplus(-x)
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

// four independent accumulators so the reduction vectorizes; fixed summation
// order keeps results deterministic
double dot_unrolled(const double* __restrict__ a, const double* __restrict__ b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

void axpy(double* __restrict__ y, double s, const double* __restrict__ x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += s * x[i];
}
}  // namespace

bool all_finite(const Array& a) {
  for (double v : a.data)
    if (!std::isfinite(v)) return false;
  return true;
}

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

const Array& Tape::val_of(int id) const {
  const Node& n = nodes_[id];
  if (n.op == Op::Param) return store_->value(n.param);
  return n.val;
}

const Array& Tape::value(Value v) const { return val_of(v.id); }

double Tape::scalar_value(Value v) const {
  const Array& a = val_of(v.id);
  if (a.size() != 1) throw std::invalid_argument("scalar_value: not a scalar");
  return a.data[0];
}

Array Tape::grad(Value v) const {
  Array g = Array::zeros_like(val_of(v.id));
  if (!grad_off_.empty())
    std::copy_n(grad_arena_.data() + grad_off_[v.id], g.size(), g.data.data());
  return g;
}

Value Tape::constant(Array v) {
  Node n;
  n.op = Op::Constant;
  n.val = std::move(v);
  return Value{push(std::move(n))};
}

Value Tape::param(ParameterStore& store, int param_index) {
  if (store_ == nullptr) store_ = &store;
  if (store_ != &store)
    throw std::invalid_argument("tape is bound to a different ParameterStore");
  auto it = param_leaves_.find(param_index);
  if (it != param_leaves_.end()) return Value{it->second};
  Node n;
  n.op = Op::Param;
  n.param = param_index;
  int id = push(std::move(n));
  param_leaves_.emplace(param_index, id);
  return Value{id};
}

Value Tape::matmul(Value a, Value b) {
  const Array& A = val_of(a.id);
  const Array& B = val_of(b.id);
  if (A.rank() != 2) throw std::invalid_argument("matmul: lhs must be rank 2");
  Node n;
  n.op = Op::MatMul;
  n.a = a.id;
  n.b = b.id;
  std::size_t m = A.rows(), k = A.cols();
  if (B.rank() == 1) {
    if (B.shape[0] != k) throw std::invalid_argument("matmul: shape mismatch");
    n.val.shape = {m};
    n.val.data.resize(m);
    const double* w = A.data.data();
    const double* x = B.data.data();
    double* y = n.val.data.data();
    for (std::size_t r = 0; r < m; ++r) y[r] = dot_unrolled(w + r * k, x, k);
  } else if (B.rank() == 2) {
    if (B.rows() != k) throw std::invalid_argument("matmul: shape mismatch");
    std::size_t p = B.cols();
    n.val = Array::matrix(m, p);
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < k; ++c) {
        double av = A(r, c);
        for (std::size_t j = 0; j < p; ++j) n.val(r, j) += av * B(c, j);
      }
  } else {
    throw std::invalid_argument("matmul: rhs must be rank 1 or 2");
  }
  return Value{push(std::move(n))};
}

Value Tape::matmul_nt(Value a, Value b) {
  const Array& A = val_of(a.id);
  const Array& B = val_of(b.id);
  if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.cols())
    throw std::invalid_argument("matmul_nt: need [m,k] x [n,k]");
  std::size_t m = A.rows(), k = A.cols(), p = B.rows();
  Node n;
  n.op = Op::MatMulNT;
  n.a = a.id;
  n.b = b.id;
  n.val.shape = {m, p};
  n.val.data.resize(m * p);
  const double* ap = A.data.data();
  const double* bp = B.data.data();
  double* y = n.val.data.data();
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < p; ++c)
      y[r * p + c] = dot_unrolled(ap + r * k, bp + c * k, k);
  return Value{push(std::move(n))};
}

Value Tape::reshape(Value a, std::size_t rows, std::size_t cols) {
  const Array& X = val_of(a.id);
  if (X.size() != rows * cols) throw std::invalid_argument("reshape: size mismatch");
  Node n;
  n.op = Op::Reshape;
  n.a = a.id;
  n.val.shape = {rows, cols};
  n.val.data = X.data;
  return Value{push(std::move(n))};
}

Value Tape::binary_same_shape(Op op, Value a, Value b) {
  const Array& A = val_of(a.id);
  const Array& B = val_of(b.id);
  if (!A.same_shape(B)) throw std::invalid_argument("elementwise op: shape mismatch");
  Node n;
  n.op = op;
  n.a = a.id;
  n.b = b.id;
  n.val = A;
  double* y = n.val.data.data();
  const double* x = B.data.data();
  std::size_t sz = n.val.size();
  switch (op) {
    case Op::Add:
      for (std::size_t i = 0; i < sz; ++i) y[i] += x[i];
      break;
    case Op::Sub:
      for (std::size_t i = 0; i < sz; ++i) y[i] -= x[i];
      break;
    case Op::Mul:
      for (std::size_t i = 0; i < sz; ++i) y[i] *= x[i];
      break;
    default:
      throw std::logic_error("binary_same_shape: bad op");
  }
  return Value{push(std::move(n))};
}

Value Tape::add(Value a, Value b) { return binary_same_shape(Op::Add, a, b); }
Value Tape::sub(Value a, Value b) { return binary_same_shape(Op::Sub, a, b); }
Value Tape::mul(Value a, Value b) { return binary_same_shape(Op::Mul, a, b); }

Value Tape::smul(Value scalar, Value v) {
  const Array& S = val_of(scalar.id);
  if (S.size() != 1) throw std::invalid_argument("smul: first operand must be scalar");
  Node n;
  n.op = Op::SMul;
  n.a = scalar.id;
  n.b = v.id;
  n.val = val_of(v.id);
  double s = S.data[0];
  for (double& y : n.val.data) y *= s;
  return Value{push(std::move(n))};
}

Value Tape::unary(Op op, Value a, double aux) {
  Node n;
  n.op = op;
  n.a = a.id;
  n.aux = aux;
  n.val = val_of(a.id);
  double* y = n.val.data.data();
  std::size_t sz = n.val.size();
  switch (op) {
    case Op::Scale:
      for (std::size_t i = 0; i < sz; ++i) y[i] *= aux;
      break;
    case Op::AddConst:
      for (std::size_t i = 0; i < sz; ++i) y[i] += aux;
      break;
    case Op::Sigmoid:
      for (std::size_t i = 0; i < sz; ++i) y[i] = sigmoid_stable(y[i]);
      break;
    case Op::Tanh:
      for (std::size_t i = 0; i < sz; ++i) y[i] = std::tanh(y[i]);
      break;
    case Op::LeakyRelu:
      for (std::size_t i = 0; i < sz; ++i)
        if (y[i] < 0.0) y[i] *= aux;
      break;
    case Op::Gelu:
      for (std::size_t i = 0; i < sz; ++i) {
        double x = y[i];
        double u = kGeluScale * (x + kGeluCoeff * x * x * x);
        y[i] = 0.5 * x * (1.0 + std::tanh(u));
      }
      break;
    case Op::Log:
      for (std::size_t i = 0; i < sz; ++i) y[i] = std::log(y[i]);
      break;
    case Op::Square:
      for (std::size_t i = 0; i < sz; ++i) y[i] *= y[i];
      break;
    case Op::LogSigmoid:
      for (std::size_t i = 0; i < sz; ++i) y[i] = log_sigmoid_stable(y[i]);
      break;
    default:
      throw std::logic_error("unary: bad op");
  }
  return Value{push(std::move(n))};
}

Value Tape::scale(Value a, double s) { return unary(Op::Scale, a, s); }
Value Tape::add_const(Value a, double c) { return unary(Op::AddConst, a, c); }
Value Tape::sigmoid(Value a) { return unary(Op::Sigmoid, a); }
Value Tape::tanh(Value a) { return unary(Op::Tanh, a); }
Value Tape::leaky_relu(Value a, double slope) { return unary(Op::LeakyRelu, a, slope); }
Value Tape::gelu(Value a) { return unary(Op::Gelu, a); }
Value Tape::log(Value a) { return unary(Op::Log, a); }
Value Tape::square(Value a) { return unary(Op::Square, a); }
Value Tape::log_sigmoid(Value a) { return unary(Op::LogSigmoid, a); }

Value Tape::softmax(Value a) {
  const Array& X = val_of(a.id);
  if (X.size() == 0) throw std::invalid_argument("softmax: empty input");
  Node n;
  n.op = Op::Softmax;
  n.a = a.id;
  n.val = X;
  double mx = n.val.data[0];
  for (double v : n.val.data) mx = std::max(mx, v);
  double z = 0.0;
  for (double& v : n.val.data) {
    v = std::exp(v - mx);
    z += v;
  }
  for (double& v : n.val.data) v /= z;
  return Value{push(std::move(n))};
}

Value Tape::concat(std::span<const Value> parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  Node n;
  n.op = Op::Concat;
  std::size_t total = 0;
  for (Value p : parts) {
    n.list.push_back(p.id);
    total += val_of(p.id).size();
  }
  n.val.shape = {total};
  n.val.data.reserve(total);
  for (Value p : parts) {
    const Array& part = val_of(p.id);
    n.val.data.insert(n.val.data.end(), part.data.begin(), part.data.end());
  }
  return Value{push(std::move(n))};
}

Value Tape::slice(Value a, std::size_t start, std::size_t len) {
  const Array& X = val_of(a.id);
  if (start + len > X.size()) throw std::invalid_argument("slice: out of range");
  Node n;
  n.op = Op::Slice;
  n.a = a.id;
  n.start = start;
  n.len = len;
  n.val.shape = {len};
  n.val.data.assign(X.data.begin() + start, X.data.begin() + start + len);
  return Value{push(std::move(n))};
}

Value Tape::pool(Op op, std::span<const Value> parts) {
  if (parts.empty()) throw std::invalid_argument("pool: no inputs");
  Node n;
  n.op = op;
  const Array& first = val_of(parts[0].id);
  for (Value p : parts) {
    if (!val_of(p.id).same_shape(first))
      throw std::invalid_argument("pool: shape mismatch");
    n.list.push_back(p.id);
  }
  n.val = first;
  std::size_t sz = n.val.size();
  if (op == Op::MaxPool) {
    n.winner.assign(sz, 0);
    for (std::size_t j = 1; j < parts.size(); ++j) {
      const Array& part = val_of(parts[j].id);
      for (std::size_t i = 0; i < sz; ++i)
        if (part.data[i] > n.val.data[i]) {  // strict: first index wins ties
          n.val.data[i] = part.data[i];
          n.winner[i] = static_cast<int>(j);
        }
    }
  } else {
    for (std::size_t j = 1; j < parts.size(); ++j) {
      const Array& part = val_of(parts[j].id);
      for (std::size_t i = 0; i < sz; ++i) n.val.data[i] += part.data[i];
    }
    if (op == Op::MeanPool) {
      double inv = 1.0 / static_cast<double>(parts.size());
      for (double& v : n.val.data) v *= inv;
    }
  }
  return Value{push(std::move(n))};
}

Value Tape::mean_pool(std::span<const Value> parts) { return pool(Op::MeanPool, parts); }
Value Tape::sum_pool(std::span<const Value> parts) { return pool(Op::SumPool, parts); }
Value Tape::max_pool(std::span<const Value> parts) { return pool(Op::MaxPool, parts); }

Value Tape::dot(Value a, Value b) {
  const Array& A = val_of(a.id);
  const Array& B = val_of(b.id);
  if (A.size() != B.size()) throw std::invalid_argument("dot: shape mismatch");
  Node n;
  n.op = Op::Dot;
  n.a = a.id;
  n.b = b.id;
  double acc = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) acc += A.data[i] * B.data[i];
  n.val = Array::scalar(acc);
  return Value{push(std::move(n))};
}

Value Tape::reduce_sum(Value a) {
  Node n;
  n.op = Op::ReduceSum;
  n.a = a.id;
  double acc = 0.0;
  for (double v : val_of(a.id).data) acc += v;
  n.val = Array::scalar(acc);
  return Value{push(std::move(n))};
}

Value Tape::reduce_mean(Value a) {
  const Array& X = val_of(a.id);
  if (X.size() == 0) throw std::invalid_argument("reduce_mean: empty input");
  Node n;
  n.op = Op::ReduceMean;
  n.a = a.id;
  double acc = 0.0;
  for (double v : X.data) acc += v;
  n.val = Array::scalar(acc / static_cast<double>(X.size()));
  return Value{push(std::move(n))};
}

void Tape::backward(Value loss, double seed) {
  if (!loss.valid() || val_of(loss.id).size() != 1)
    throw std::invalid_argument("backward: loss must be a scalar");
  const std::size_t count = nodes_.size();
  grad_off_.resize(count + 1);
  std::size_t total = 0;
  for (std::size_t idx = 0; idx < count; ++idx) {
    grad_off_[idx] = total;
    total += val_of(static_cast<int>(idx)).size();
  }
  grad_off_[count] = total;
  grad_arena_.assign(total, 0.0);
  grad_live_.assign(count, 0);
  grad_arena_[grad_off_[loss.id]] = seed;
  grad_live_[loss.id] = 1;

  auto slot = [&](int id) {
    grad_live_[id] = 1;
    return grad_arena_.data() + grad_off_[id];
  };

  for (int i = static_cast<int>(count) - 1; i >= 0; --i) {
    if (!grad_live_[i]) continue;
    Node& n = nodes_[i];
    const double* g = grad_arena_.data() + grad_off_[i];
    std::size_t sz = grad_off_[i + 1] - grad_off_[i];
    switch (n.op) {
      case Op::Constant:
        break;
      case Op::Param:
        for (std::size_t k = 0; k < sz; ++k)
          store_->grad(n.param).data[k] += g[k];
        break;
      case Op::MatMul: {
        const Array& A = val_of(n.a);
        const Array& B = val_of(n.b);
        double* gA = slot(n.a);
        double* gB = slot(n.b);
        std::size_t m = A.rows(), k = A.cols();
        if (B.rank() == 1) {
          for (std::size_t r = 0; r < m; ++r) {
            double gr = g[r];
            if (gr == 0.0) continue;
            axpy(gA + r * k, gr, B.data.data(), k);
            axpy(gB, gr, A.data.data() + r * k, k);
          }
        } else {
          std::size_t p = B.cols();
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < k; ++c) {
              double acc = 0.0;
              for (std::size_t j = 0; j < p; ++j) acc += g[r * p + j] * B(c, j);
              gA[r * k + c] += acc;
            }
          for (std::size_t c = 0; c < k; ++c)
            for (std::size_t j = 0; j < p; ++j) {
              double acc = 0.0;
              for (std::size_t r = 0; r < m; ++r) acc += A(r, c) * g[r * p + j];
              gB[c * p + j] += acc;
            }
        }
        break;
      }
      case Op::MatMulNT: {
        const Array& A = val_of(n.a);
        const Array& B = val_of(n.b);
        double* gA = slot(n.a);
        double* gB = slot(n.b);
        std::size_t m = A.rows(), k = A.cols(), p = B.rows();
        // separate nests so the written row stays hot in each
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t c = 0; c < p; ++c) {
            double gv = g[r * p + c];
            if (gv == 0.0) continue;
            axpy(gA + r * k, gv, B.data.data() + c * k, k);
          }
        for (std::size_t c = 0; c < p; ++c)
          for (std::size_t r = 0; r < m; ++r) {
            double gv = g[r * p + c];
            if (gv == 0.0) continue;
            axpy(gB + c * k, gv, A.data.data() + r * k, k);
          }
        break;
      }
      case Op::Reshape: {
        double* gA = slot(n.a);
        for (std::size_t k = 0; k < sz; ++k) gA[k] += g[k];
        break;
      }
      case Op::Add: {
        double* gA = slot(n.a);
        double* gB = slot(n.b);
        for (std::size_t k = 0; k < sz; ++k) gA[k] += g[k];
        for (std::size_t k = 0; k < sz; ++k) gB[k] += g[k];
        break;
      }
      case Op::Sub: {
        double* gA = slot(n.a);
        double* gB = slot(n.b);
        for (std::size_t k = 0; k < sz; ++k) gA[k] += g[k];
        for (std::size_t k = 0; k < sz; ++k) gB[k] -= g[k];
        break;
      }
      case Op::Mul: {
        const Array& A = val_of(n.a);
        const Array& B = val_of(n.b);
        double* gA = slot(n.a);
        double* gB = slot(n.b);
        for (std::size_t k = 0; k < sz; ++k) {
          gA[k] += g[k] * B.data[k];
          gB[k] += g[k] * A.data[k];
        }
        break;
      }
      case Op::SMul: {
        double s = val_of(n.a).data[0];
        const Array& V = val_of(n.b);
        double* gB = slot(n.b);
        double gs = 0.0;
        for (std::size_t k = 0; k < sz; ++k) {
          gB[k] += g[k] * s;
          gs += g[k] * V.data[k];
        }
        slot(n.a)[0] += gs;
        break;
      }
      case Op::Scale: {
        double* gA = slot(n.a);
        for (std::size_t k = 0; k < sz; ++k) gA[k] += g[k] * n.aux;
        break;
      }
      case Op::AddConst: {
        double* gA = slot(n.a);
        for (std::size_t k = 0; k < sz; ++k) gA[k] += g[k];
        break;
      }
      case Op::Concat: {
        std::size_t off = 0;
        for (int src : n.list) {
          std::size_t len = grad_off_[src + 1] - grad_off_[src];
          double* gs = slot(src);
          for (std::size_t k = 0; k < len; ++k) gs[k] += g[off + k];
          off += len;
        }
        break;
      }
      case Op::Slice: {
        double* gA = slot(n.a);
        for (std::size_t k = 0; k < n.len; ++k) gA[n.start + k] += g[k];
        break;
      }
      case Op::MeanPool: {
        double inv = 1.0 / static_cast<double>(n.list.size());
        for (int src : n.list) {
          double* gs = slot(src);
          for (std::size_t k = 0; k < sz; ++k) gs[k] += g[k] * inv;
        }
        break;
      }
      case Op::SumPool:
        for (int src : n.list) {
          double* gs = slot(src);
          for (std::size_t k = 0; k < sz; ++k) gs[k] += g[k];
        }
        break;
      case Op::MaxPool:
        for (std::size_t k = 0; k < sz; ++k)
          slot(n.list[n.winner[k]])[k] += g[k];
        break;
      case Op::Sigmoid: {
        double* gA = slot(n.a);
        for (std::size_t k = 0; k < sz; ++k) {
          double y = n.val.data[k];
          gA[k] += g[k] * y * (1.0 - y);
        }
        break;
      }
      case Op::Tanh: {
        double* gA = slot(n.a);
        for (std::size_t k = 0; k < sz; ++k) {
          double y = n.val.data[k];
          gA[k] += g[k] * (1.0 - y * y);
        }
        break;
      }
      case Op::Softmax: {
        double* gA = slot(n.a);
        double gy = 0.0;
        for (std::size_t k = 0; k < sz; ++k) gy += g[k] * n.val.data[k];
        for (std::size_t k = 0; k < sz; ++k)
          gA[k] += n.val.data[k] * (g[k] - gy);
        break;
      }
      case Op::LeakyRelu: {
        const Array& X = val_of(n.a);
        double* gA = slot(n.a);
        for (std::size_t k = 0; k < sz; ++k)
          gA[k] += g[k] * (X.data[k] > 0.0 ? 1.0 : n.aux);
        break;
      }
      case Op::Gelu: {
        const Array& X = val_of(n.a);
        double* gA = slot(n.a);
        for (std::size_t k = 0; k < sz; ++k) {
          double x = X.data[k];
          double u = kGeluScale * (x + kGeluCoeff * x * x * x);
          double t = std::tanh(u);
          double du = kGeluScale * (1.0 + 3.0 * kGeluCoeff * x * x);
          double d = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
          gA[k] += g[k] * d;
        }
        break;
      }
      case Op::Log: {
        const Array& X = val_of(n.a);
        double* gA = slot(n.a);
        for (std::size_t k = 0; k < sz; ++k) gA[k] += g[k] / X.data[k];
        break;
      }
      case Op::Square: {
        const Array& X = val_of(n.a);
        double* gA = slot(n.a);
        for (std::size_t k = 0; k < sz; ++k) gA[k] += g[k] * 2.0 * X.data[k];
        break;
      }
      case Op::LogSigmoid: {
        const Array& X = val_of(n.a);
        double* gA = slot(n.a);
        for (std::size_t k = 0; k < sz; ++k)
          gA[k] += g[k] * sigmoid_stable(-X.data[k]);
        break;
      }
      case Op::Dot: {
        const Array& A = val_of(n.a);
        const Array& B = val_of(n.b);
        double* gA = slot(n.a);
        double* gB = slot(n.b);
        double gs = g[0];
        for (std::size_t k = 0; k < A.size(); ++k) {
          gA[k] += gs * B.data[k];
          gB[k] += gs * A.data[k];
        }
        break;
      }
      case Op::ReduceSum: {
        double gs = g[0];
        std::size_t len = grad_off_[n.a + 1] - grad_off_[n.a];
        double* gA = slot(n.a);
        for (std::size_t k = 0; k < len; ++k) gA[k] += gs;
        break;
      }
      case Op::ReduceMean: {
        std::size_t len = grad_off_[n.a + 1] - grad_off_[n.a];
        double gs = g[0] / static_cast<double>(len);
        double* gA = slot(n.a);
        for (std::size_t k = 0; k < len; ++k) gA[k] += gs;
        break;
      }
    }
  }
}

}  // namespace hdgnn::ad
