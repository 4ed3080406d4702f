#pragma once
#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "ddss/pchip.hpp"
#include "ddss/tensor.hpp"

namespace ddss::tg {

enum class Op {
  leaf,
  constant,
  add,
  sub,
  mul,
  div,
  matmul,
  scale,
  sigmoid,
  softplus,
  softmax,
  cumsum,
  concat,
  slice,
  sum,
  mean,
  square,
  sqrt,
  silu,
  sin,
  cos,
  reparam,
  schedule_logsnr,
  checkpoint,
};

const char* op_name(Op op);

struct OpParams {
  double c = 0.0;
  bool trans_b = false;
  int axis = 0;
  std::size_t offset = 0;
  std::size_t extent = 0;
  bool simplex = false;  // cumsum variant: final entry forced to exactly 1
  const Pchip* pchip = nullptr;
};

struct Value {
  int id = -1;
  bool defined() const { return id >= 0; }
};

class Tape;
// Re-runnable subgraph: must be a pure function of its inputs. Called once at
// record time and once more during backward (rematerialization).
using Recipe = std::function<Value(Tape&, const std::vector<Value>&)>;

using GradientMap = std::map<int, Tensor>;

// Reverse-mode tape. Records immutable forward values; backward walks nodes
// in reverse record order with a fixed accumulation order, so gradients are
// bitwise reproducible. Checkpointed subgraphs keep only inputs + output and
// re-execute their recipe during backward.
class Tape {
 public:
  Value leaf(Tensor v, bool trainable = true);
  Value constant(Tensor v);
  Value constant(double v) { return constant(Tensor::scalar(v)); }

  Value record(Op op, const std::vector<Value>& inputs, const OpParams& p = {});

  Value add(Value a, Value b) { return record(Op::add, {a, b}); }
  Value sub(Value a, Value b) { return record(Op::sub, {a, b}); }
  Value mul(Value a, Value b) { return record(Op::mul, {a, b}); }
  Value div(Value a, Value b) { return record(Op::div, {a, b}); }
  Value matmul(Value a, Value b, bool trans_b = false) {
    OpParams p;
    p.trans_b = trans_b;
    return record(Op::matmul, {a, b}, p);
  }
  Value scale(Value a, double c) {
    OpParams p;
    p.c = c;
    return record(Op::scale, {a}, p);
  }
  Value scale(Value a, Value s) { return record(Op::scale, {a, s}); }
  Value sigmoid(Value a) { return record(Op::sigmoid, {a}); }
  Value softplus(Value a) { return record(Op::softplus, {a}); }
  Value softmax(Value a) { return record(Op::softmax, {a}); }
  Value cumsum(Value a, bool simplex = false) {
    OpParams p;
    p.simplex = simplex;
    return record(Op::cumsum, {a}, p);
  }
  Value concat(const std::vector<Value>& xs, int axis = 0) {
    OpParams p;
    p.axis = axis;
    return record(Op::concat, xs, p);
  }
  Value slice(Value a, int axis, std::size_t offset, std::size_t extent) {
    OpParams p;
    p.axis = axis;
    p.offset = offset;
    p.extent = extent;
    return record(Op::slice, {a}, p);
  }
  Value sum(Value a) { return record(Op::sum, {a}); }
  Value mean(Value a) { return record(Op::mean, {a}); }
  Value square(Value a) { return record(Op::square, {a}); }
  Value sqrt(Value a) { return record(Op::sqrt, {a}); }
  Value silu(Value a) { return record(Op::silu, {a}); }
  Value sin(Value a) { return record(Op::sin, {a}); }
  Value cos(Value a) { return record(Op::cos, {a}); }
  // x = mean + std .* noise; gradients never flow into noise.
  Value reparam(Value mean, Value std, Value noise) {
    return record(Op::reparam, {mean, std, noise});
  }
  Value schedule_logsnr(Value t, const Pchip& table) {
    OpParams p;
    p.pchip = &table;
    return record(Op::schedule_logsnr, {t}, p);
  }

  Value checkpoint(const Recipe& f, const std::vector<Value>& inputs);

  const Tensor& val(Value v) const;
  bool needs_grad(Value v) const;
  std::size_t node_count() const { return nodes_.size(); }

  // loss must be scalar-shaped; returns gradients for trainable leaves.
  GradientMap backward(Value loss);
  GradientMap backward_seed(Value v, Tensor seed);

 private:
  struct Node {
    Op op;
    std::vector<int> inputs;
    OpParams params;
    Tensor value;
    bool needs_grad = false;
    bool trainable = false;
    Recipe recipe;               // checkpoint only
    std::uint64_t value_hash = 0;  // checkpoint only
  };

  int push(Node n);
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  void check_value(Value v, const char* who) const;
  Tensor eval_forward(Op op, const std::vector<int>& inputs, const OpParams& p) const;

  std::vector<Node> nodes_;
};

}  // namespace ddss::tg
