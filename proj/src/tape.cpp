#include "ddss/tape.hpp"

#include <cmath>
#include <cstring>

#include "ddss/errors.hpp"
#include "ddss/kernels.hpp"

namespace ddss::tg {

namespace k = ddss::kernels;

const char* op_name(Op op) {
  switch (op) {
    case Op::leaf: return "leaf";
    case Op::constant: return "constant";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::div: return "div";
    case Op::matmul: return "matmul";
    case Op::scale: return "scale";
    case Op::sigmoid: return "sigmoid";
    case Op::softplus: return "softplus";
    case Op::softmax: return "softmax";
    case Op::cumsum: return "cumsum";
    case Op::concat: return "concat";
    case Op::slice: return "slice";
    case Op::sum: return "sum";
    case Op::mean: return "mean";
    case Op::square: return "square";
    case Op::sqrt: return "sqrt";
    case Op::silu: return "silu";
    case Op::sin: return "sin";
    case Op::cos: return "cos";
    case Op::reparam: return "reparam";
    case Op::schedule_logsnr: return "schedule_logsnr";
    case Op::checkpoint: return "checkpoint";
  }
  return "?";
}

namespace {

[[noreturn]] void shape_fail(Op op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op_name(op)) + ": incompatible shapes " +
                   shape_str(a.shape()) + " and " + shape_str(b.shape()));
}

enum class Bcast { same, a_scalar, b_scalar, a_row, b_row, a_col, b_col };

Bcast classify(Op op, const Tensor& a, const Tensor& b) {
  if (a.same_shape(b)) return Bcast::same;
  if (a.size() == 1) return Bcast::a_scalar;
  if (b.size() == 1) return Bcast::b_scalar;
  if (a.rank() == 2 && b.rank() == 2) {
    if (b.shape()[0] == 1 && b.shape()[1] == a.shape()[1]) return Bcast::b_row;
    if (a.shape()[0] == 1 && a.shape()[1] == b.shape()[1]) return Bcast::a_row;
    if (b.shape()[1] == 1 && b.shape()[0] == a.shape()[0]) return Bcast::b_col;
    if (a.shape()[1] == 1 && a.shape()[0] == b.shape()[0]) return Bcast::a_col;
  }
  shape_fail(op, a, b);
}

double apply1(Op op, double x, double y) {
  switch (op) {
    case Op::add: return x + y;
    case Op::sub: return x - y;
    case Op::mul: return x * y;
    case Op::div: return x / y;
    default: throw Error("apply1: not a binary op");
  }
}

// Materializes b at out-shape positions; all broadcast loops share one
// fixed iteration order so results do not depend on the kernel backend.
Tensor binary_bcast(Op op, const Tensor& a, const Tensor& b) {
  const Bcast bc = classify(op, a, b);
  const Tensor& big = (bc == Bcast::a_scalar || bc == Bcast::a_row || bc == Bcast::a_col) ? b : a;
  Tensor out = Tensor::zeros(big.shape());
  const std::size_t n = big.size();
  double* o = out.mut();
  const auto& ops = k::ops();
  switch (bc) {
    case Bcast::same:
      switch (op) {
        case Op::add: ops.add(o, a.data(), b.data(), n); break;
        case Op::sub: ops.sub(o, a.data(), b.data(), n); break;
        case Op::mul: ops.mul(o, a.data(), b.data(), n); break;
        case Op::div: ops.div(o, a.data(), b.data(), n); break;
        default: throw Error("binary_bcast: bad op");
      }
      break;
    case Bcast::b_scalar: {
      const double c = b.at(0);
      if (op == Op::mul) {
        ops.scale(o, a.data(), c, n);
      } else {
        for (std::size_t i = 0; i < n; ++i) o[i] = apply1(op, a.data()[i], c);
      }
      break;
    }
    case Bcast::a_scalar: {
      const double c = a.at(0);
      for (std::size_t i = 0; i < n; ++i) o[i] = apply1(op, c, b.data()[i]);
      break;
    }
    case Bcast::b_row: {
      const std::size_t rows = big.shape()[0], cols = big.shape()[1];
      if (op == Op::add) {
        ops.add_row(o, a.data(), b.data(), rows, cols);
      } else {
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < cols; ++j)
            o[i * cols + j] = apply1(op, a.data()[i * cols + j], b.data()[j]);
      }
      break;
    }
    case Bcast::a_row: {
      const std::size_t rows = big.shape()[0], cols = big.shape()[1];
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
          o[i * cols + j] = apply1(op, a.data()[j], b.data()[i * cols + j]);
      break;
    }
    case Bcast::b_col: {
      const std::size_t rows = big.shape()[0], cols = big.shape()[1];
      if (op == Op::mul) {
        ops.scale_rows(o, a.data(), b.data(), rows, cols);
      } else {
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < cols; ++j)
            o[i * cols + j] = apply1(op, a.data()[i * cols + j], b.data()[i]);
      }
      break;
    }
    case Bcast::a_col: {
      const std::size_t rows = big.shape()[0], cols = big.shape()[1];
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
          o[i * cols + j] = apply1(op, a.data()[i], b.data()[i * cols + j]);
      break;
    }
  }
  return out;
}

Tensor broadcast_to(const Tensor& t, const Shape& s) {
  if (t.shape() == s) return t;
  Tensor out = Tensor::zeros(s);
  double* o = out.mut();
  const std::size_t n = out.size();
  if (t.size() == 1) {
    const double c = t.at(0);
    for (std::size_t i = 0; i < n; ++i) o[i] = c;
    return out;
  }
  const std::size_t rows = s[0], cols = s.size() == 2 ? s[1] : 1;
  if (t.rank() == 2 && t.shape()[0] == 1 && t.shape()[1] == cols) {
    for (std::size_t i = 0; i < rows; ++i)
      std::memcpy(o + i * cols, t.data(), cols * sizeof(double));
    return out;
  }
  if (t.rank() == 2 && t.shape()[1] == 1 && t.shape()[0] == rows) {
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) o[i * cols + j] = t.at(i);
    return out;
  }
  throw ShapeError("broadcast_to: cannot expand " + shape_str(t.shape()) + " to " + shape_str(s));
}

// Sums g down to `target` (inverse of broadcasting). Fixed loop order.
Tensor reduce_to(const Tensor& g, const Shape& target) {
  if (g.shape() == target) return g;
  Tensor out = Tensor::zeros(target);
  double* o = out.mut();
  if (out.size() == 1) {
    o[0] = k::ops().sum(g.data(), g.size());
    return out;
  }
  const std::size_t rows = g.shape()[0], cols = g.shape()[1];
  if (target.size() == 2 && target[0] == 1 && target[1] == cols) {
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) o[j] += g.data()[i * cols + j];
    return out;
  }
  if (target.size() == 2 && target[1] == 1 && target[0] == rows) {
    for (std::size_t i = 0; i < rows; ++i) o[i] = k::ops().sum(g.data() + i * cols, cols);
    return out;
  }
  throw ShapeError("reduce_to: cannot reduce " + shape_str(g.shape()) + " to " + shape_str(target));
}

Tensor ew_mul(const Tensor& a, const Tensor& b) {
  Tensor out = Tensor::zeros(a.shape());
  k::ops().mul(out.mut(), a.data(), b.data(), a.size());
  return out;
}

Tensor ew_scale(const Tensor& a, double c) {
  Tensor out = Tensor::zeros(a.shape());
  k::ops().scale(out.mut(), a.data(), c, a.size());
  return out;
}

}  // namespace

void Tape::check_value(Value v, const char* who) const {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size())
    throw Error(std::string(who) + ": value id " + std::to_string(v.id) + " is not on this tape");
}

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size() - 1);
}

Value Tape::leaf(Tensor v, bool trainable) {
  if (!v.defined()) throw Error("leaf: undefined tensor");
  Node n;
  n.op = Op::leaf;
  n.value = std::move(v);
  n.trainable = trainable;
  n.needs_grad = trainable;
  return {push(std::move(n))};
}

Value Tape::constant(Tensor v) {
  if (!v.defined()) throw Error("constant: undefined tensor");
  Node n;
  n.op = Op::constant;
  n.value = std::move(v);
  return {push(std::move(n))};
}

const Tensor& Tape::val(Value v) const {
  check_value(v, "val");
  return nodes_[static_cast<std::size_t>(v.id)].value;
}

bool Tape::needs_grad(Value v) const {
  check_value(v, "needs_grad");
  return nodes_[static_cast<std::size_t>(v.id)].needs_grad;
}

Tensor Tape::eval_forward(Op op, const std::vector<int>& in, const OpParams& p) const {
  auto V = [&](std::size_t i) -> const Tensor& {
    return nodes_[static_cast<std::size_t>(in[i])].value;
  };
  const auto& ops = k::ops();
  switch (op) {
    case Op::add:
    case Op::sub:
    case Op::mul:
    case Op::div:
      return binary_bcast(op, V(0), V(1));

    case Op::matmul: {
      const Tensor &a = V(0), &b = V(1);
      if (a.rank() != 2 || b.rank() != 2) shape_fail(op, a, b);
      const std::size_t m = a.shape()[0], kk = a.shape()[1];
      if (!p.trans_b) {
        if (b.shape()[0] != kk) shape_fail(op, a, b);
        const std::size_t n = b.shape()[1];
        Tensor out = Tensor::zeros({m, n});
        ops.matmul_nn(out.mut(), a.data(), b.data(), m, kk, n);
        return out;
      }
      if (b.shape()[1] != kk) shape_fail(op, a, b);
      const std::size_t n = b.shape()[0];
      Tensor out = Tensor::zeros({m, n});
      ops.matmul_nt(out.mut(), a.data(), b.data(), m, kk, n);
      return out;
    }

    case Op::scale: {
      const Tensor& a = V(0);
      double c = p.c;
      if (in.size() == 2) {
        if (V(1).size() != 1)
          throw ShapeError("scale: scaling value must be a scalar tensor, got " + shape_str(V(1).shape()));
        c = V(1).at(0);
      }
      return ew_scale(a, c);
    }

    case Op::sigmoid: {
      Tensor out = Tensor::zeros(V(0).shape());
      k::sigmoid_map(out.mut(), V(0).data(), out.size());
      return out;
    }
    case Op::softplus: {
      Tensor out = Tensor::zeros(V(0).shape());
      k::softplus_map(out.mut(), V(0).data(), out.size());
      return out;
    }
    case Op::silu: {
      Tensor out = Tensor::zeros(V(0).shape());
      k::silu_map(out.mut(), V(0).data(), out.size());
      return out;
    }
    case Op::sin: {
      Tensor out = Tensor::zeros(V(0).shape());
      k::sin_map(out.mut(), V(0).data(), out.size());
      return out;
    }
    case Op::cos: {
      Tensor out = Tensor::zeros(V(0).shape());
      k::cos_map(out.mut(), V(0).data(), out.size());
      return out;
    }
    case Op::square: {
      Tensor out = Tensor::zeros(V(0).shape());
      ops.square(out.mut(), V(0).data(), out.size());
      return out;
    }
    case Op::sqrt: {
      const Tensor& a = V(0);
      for (std::size_t i = 0; i < a.size(); ++i)
        if (a.at(i) < 0.0)
          throw DomainError("sqrt: negative input at index " + std::to_string(i));
      Tensor out = Tensor::zeros(a.shape());
      ops.sqrt(out.mut(), a.data(), out.size());
      return out;
    }

    case Op::softmax: {
      const Tensor& a = V(0);
      if (a.rank() != 1) throw ShapeError("softmax: expects a 1-d tensor, got " + shape_str(a.shape()));
      const std::size_t n = a.size();
      Tensor out = Tensor::zeros(a.shape());
      double mx = a.at(0);
      for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, a.at(i));
      double* o = out.mut();
      double z = 0;
      for (std::size_t i = 0; i < n; ++i) {
        o[i] = std::exp(a.at(i) - mx);
        z += o[i];
      }
      for (std::size_t i = 0; i < n; ++i) o[i] /= z;
      return out;
    }

    case Op::cumsum: {
      const Tensor& a = V(0);
      if (a.rank() != 1) throw ShapeError("cumsum: expects a 1-d tensor, got " + shape_str(a.shape()));
      Tensor out = Tensor::zeros(a.shape());
      double* o = out.mut();
      double acc = 0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        acc += a.at(i);
        o[i] = acc;
      }
      // On simplex input the analytic final entry is exactly 1 and its
      // derivative w.r.t. any input is exactly 0; pin both.
      if (p.simplex) o[a.size() - 1] = 1.0;
      return out;
    }

    case Op::concat: {
      if (in.size() < 2) throw ShapeError("concat: needs at least two inputs");
      const std::size_t rank = V(0).rank();
      for (std::size_t i = 1; i < in.size(); ++i)
        if (V(i).rank() != rank) shape_fail(op, V(0), V(i));
      if (p.axis == 0 && rank == 1) {
        std::size_t total = 0;
        for (std::size_t i = 0; i < in.size(); ++i) total += V(i).size();
        Tensor out = Tensor::zeros({total});
        std::size_t off = 0;
        for (std::size_t i = 0; i < in.size(); ++i) {
          std::memcpy(out.mut() + off, V(i).data(), V(i).size() * sizeof(double));
          off += V(i).size();
        }
        return out;
      }
      if (rank != 2) throw ShapeError("concat: axis 1 needs rank-2 tensors");
      if (p.axis == 0) {
        const std::size_t cols = V(0).shape()[1];
        std::size_t rows = 0;
        for (std::size_t i = 0; i < in.size(); ++i) {
          if (V(i).shape()[1] != cols) shape_fail(op, V(0), V(i));
          rows += V(i).shape()[0];
        }
        Tensor out = Tensor::zeros({rows, cols});
        std::size_t off = 0;
        for (std::size_t i = 0; i < in.size(); ++i) {
          std::memcpy(out.mut() + off, V(i).data(), V(i).size() * sizeof(double));
          off += V(i).size();
        }
        return out;
      }
      const std::size_t rows = V(0).shape()[0];
      std::size_t cols = 0;
      for (std::size_t i = 0; i < in.size(); ++i) {
        if (V(i).shape()[0] != rows) shape_fail(op, V(0), V(i));
        cols += V(i).shape()[1];
      }
      Tensor out = Tensor::zeros({rows, cols});
      std::size_t coff = 0;
      for (std::size_t i = 0; i < in.size(); ++i) {
        const std::size_t c = V(i).shape()[1];
        for (std::size_t r = 0; r < rows; ++r)
          std::memcpy(out.mut() + r * cols + coff, V(i).data() + r * c, c * sizeof(double));
        coff += c;
      }
      return out;
    }

    case Op::slice: {
      const Tensor& a = V(0);
      if (p.extent == 0) throw ShapeError("slice: empty extent");
      if (a.rank() == 1) {
        if (p.axis != 0 || p.offset + p.extent > a.size())
          throw ShapeError("slice: [" + std::to_string(p.offset) + "," +
                           std::to_string(p.offset + p.extent) + ") out of range for " + shape_str(a.shape()));
        Tensor out = Tensor::zeros({p.extent});
        std::memcpy(out.mut(), a.data() + p.offset, p.extent * sizeof(double));
        return out;
      }
      const std::size_t rows = a.shape()[0], cols = a.shape()[1];
      if (p.axis == 0) {
        if (p.offset + p.extent > rows) throw ShapeError("slice: row range out of bounds for " + shape_str(a.shape()));
        Tensor out = Tensor::zeros({p.extent, cols});
        std::memcpy(out.mut(), a.data() + p.offset * cols, p.extent * cols * sizeof(double));
        return out;
      }
      if (p.offset + p.extent > cols) throw ShapeError("slice: col range out of bounds for " + shape_str(a.shape()));
      Tensor out = Tensor::zeros({rows, p.extent});
      for (std::size_t r = 0; r < rows; ++r)
        std::memcpy(out.mut() + r * p.extent, a.data() + r * cols + p.offset, p.extent * sizeof(double));
      return out;
    }

    case Op::sum: {
      return Tensor::scalar(ops.sum(V(0).data(), V(0).size()));
    }
    case Op::mean: {
      return Tensor::scalar(ops.sum(V(0).data(), V(0).size()) / static_cast<double>(V(0).size()));
    }

    case Op::reparam: {
      const Tensor &m = V(0), &s = V(1), &z = V(2);
      if (!m.same_shape(z)) shape_fail(op, m, z);
      Tensor out = Tensor::zeros(m.shape());
      if (s.size() == 1) {
        ops.add_scaled(out.mut(), m.data(), s.at(0), z.data(), m.size());
      } else if (s.same_shape(m)) {
        ops.add_scaled_ew(out.mut(), m.data(), s.data(), z.data(), m.size());
      } else {
        shape_fail(op, m, s);
      }
      return out;
    }

    case Op::schedule_logsnr: {
      if (!p.pchip) throw Error("schedule_logsnr: missing interpolation table");
      const Tensor& a = V(0);
      Tensor out = Tensor::zeros(a.shape());
      for (std::size_t i = 0; i < a.size(); ++i) out.mut()[i] = p.pchip->eval(a.at(i));
      return out;
    }

    default:
      throw Error(std::string("eval_forward: op ") + op_name(op) + " handled elsewhere");
  }
}

Value Tape::record(Op op, const std::vector<Value>& inputs, const OpParams& p) {
  if (op == Op::leaf || op == Op::constant || op == Op::checkpoint)
    throw Error("record: use leaf()/constant()/checkpoint() for this op");
  Node n;
  n.op = op;
  n.params = p;
  n.inputs.reserve(inputs.size());
  for (auto v : inputs) {
    check_value(v, op_name(op));
    n.inputs.push_back(v.id);
  }
  n.value = eval_forward(op, n.inputs, p);
  for (std::size_t i = 0; i < n.inputs.size(); ++i) {
    if (op == Op::reparam && i == 2) continue;  // noise never carries grads
    n.needs_grad = n.needs_grad || node(n.inputs[i]).needs_grad;
  }
  return {push(std::move(n))};
}

Value Tape::checkpoint(const Recipe& f, const std::vector<Value>& inputs) {
  Node n;
  n.op = Op::checkpoint;
  for (auto v : inputs) {
    check_value(v, "checkpoint");
    n.inputs.push_back(v.id);
    n.needs_grad = n.needs_grad || node(v.id).needs_grad;
  }
  {
    Tape scratch;
    std::vector<Value> sub;
    sub.reserve(inputs.size());
    for (auto v : inputs) sub.push_back(scratch.constant(val(v)));
    Value out = f(scratch, sub);
    scratch.check_value(out, "checkpoint recipe output");
    n.value = scratch.val(out);
  }  // scratch activations freed here; only the output tensor survives
  n.value.storage()->retag(Accountant::current_tag());
  n.value_hash = tensor_hash(n.value);
  n.recipe = f;
  return {push(std::move(n))};
}

GradientMap Tape::backward(Value loss) {
  check_value(loss, "backward");
  if (val(loss).size() != 1)
    throw ShapeError("backward: loss must be scalar, got " + shape_str(val(loss).shape()));
  return backward_seed(loss, Tensor::scalar(1.0));
}

GradientMap Tape::backward_seed(Value v, Tensor seed) {
  check_value(v, "backward_seed");
  if (!seed.same_shape(val(v)))
    throw ShapeError("backward_seed: seed shape " + shape_str(seed.shape()) +
                     " != value shape " + shape_str(val(v).shape()));

  const std::size_t n = nodes_.size();
  std::vector<Tensor> grads(n);
  std::vector<char> owned(n, 0);

  auto accum = [&](int id, const Tensor& g, bool g_owned) {
    auto& slot = grads[static_cast<std::size_t>(id)];
    if (!slot.defined()) {
      slot = g;
      owned[static_cast<std::size_t>(id)] = g_owned ? 1 : 0;
      return;
    }
    if (!owned[static_cast<std::size_t>(id)]) {
      Tensor fresh = Tensor::zeros(slot.shape());
      k::ops().add(fresh.mut(), slot.data(), g.data(), slot.size());
      slot = fresh;
      owned[static_cast<std::size_t>(id)] = 1;
      return;
    }
    k::ops().add(slot.mut(), slot.data(), g.data(), slot.size());
  };

  accum(v.id, seed, true);

  for (int id = v.id; id >= 0; --id) {
    Node& nd = nodes_[static_cast<std::size_t>(id)];
    Tensor g = grads[static_cast<std::size_t>(id)];
    if (!g.defined() || !nd.needs_grad) {
      grads[static_cast<std::size_t>(id)] = Tensor();
      continue;
    }
    auto IN = [&](std::size_t i) -> const Node& { return node(nd.inputs[i]); };
    auto want = [&](std::size_t i) { return IN(i).needs_grad; };

    switch (nd.op) {
      case Op::leaf:
      case Op::constant:
        break;

      case Op::add: {
        if (want(0)) accum(nd.inputs[0], reduce_to(g, IN(0).value.shape()), !g.same_shape(IN(0).value));
        if (want(1)) accum(nd.inputs[1], reduce_to(g, IN(1).value.shape()), !g.same_shape(IN(1).value));
        break;
      }
      case Op::sub: {
        if (want(0)) accum(nd.inputs[0], reduce_to(g, IN(0).value.shape()), !g.same_shape(IN(0).value));
        if (want(1)) accum(nd.inputs[1], reduce_to(ew_scale(g, -1.0), IN(1).value.shape()), true);
        break;
      }
      case Op::mul: {
        if (want(0))
          accum(nd.inputs[0], reduce_to(ew_mul(g, broadcast_to(IN(1).value, g.shape())), IN(0).value.shape()), true);
        if (want(1))
          accum(nd.inputs[1], reduce_to(ew_mul(g, broadcast_to(IN(0).value, g.shape())), IN(1).value.shape()), true);
        break;
      }
      case Op::div: {
        Tensor binv = broadcast_to(IN(1).value, g.shape());
        if (want(0)) {
          Tensor da = Tensor::zeros(g.shape());
          k::ops().div(da.mut(), g.data(), binv.data(), g.size());
          accum(nd.inputs[0], reduce_to(da, IN(0).value.shape()), true);
        }
        if (want(1)) {
          Tensor db = ew_mul(g, nd.value);  // g * y
          Tensor db2 = Tensor::zeros(g.shape());
          k::ops().div(db2.mut(), db.data(), binv.data(), g.size());
          accum(nd.inputs[1], reduce_to(ew_scale(db2, -1.0), IN(1).value.shape()), true);
        }
        break;
      }

      case Op::matmul: {
        const Tensor &A = IN(0).value, &B = IN(1).value;
        const std::size_t m = A.shape()[0], kk = A.shape()[1];
        if (!nd.params.trans_b) {
          const std::size_t nn = B.shape()[1];
          if (want(0)) {
            Tensor dA = Tensor::zeros({m, kk});
            k::ops().matmul_nt(dA.mut(), g.data(), B.data(), m, nn, kk);
            accum(nd.inputs[0], dA, true);
          }
          if (want(1)) {
            Tensor dB = Tensor::zeros({kk, nn});
            k::ops().matmul_tn(dB.mut(), A.data(), g.data(), kk, m, nn);
            accum(nd.inputs[1], dB, true);
          }
        } else {
          const std::size_t nn = B.shape()[0];
          if (want(0)) {
            Tensor dA = Tensor::zeros({m, kk});
            k::ops().matmul_nn(dA.mut(), g.data(), B.data(), m, nn, kk);
            accum(nd.inputs[0], dA, true);
          }
          if (want(1)) {
            Tensor dB = Tensor::zeros({nn, kk});
            k::ops().matmul_tn(dB.mut(), g.data(), A.data(), nn, m, kk);
            accum(nd.inputs[1], dB, true);
          }
        }
        break;
      }

      case Op::scale: {
        const double c = nd.inputs.size() == 2 ? IN(1).value.at(0) : nd.params.c;
        if (want(0)) accum(nd.inputs[0], ew_scale(g, c), true);
        if (nd.inputs.size() == 2 && want(1))
          accum(nd.inputs[1], Tensor::scalar(k::ops().dot(g.data(), IN(0).value.data(), g.size())), true);
        break;
      }

      case Op::sigmoid: {
        Tensor dx = Tensor::zeros(g.shape());
        const double* y = nd.value.data();
        for (std::size_t i = 0; i < g.size(); ++i)
          dx.mut()[i] = g.data()[i] * y[i] * (1.0 - y[i]);
        accum(nd.inputs[0], dx, true);
        break;
      }
      case Op::softplus: {
        Tensor dx = Tensor::zeros(g.shape());
        const double* x = IN(0).value.data();
        for (std::size_t i = 0; i < g.size(); ++i)
          dx.mut()[i] = g.data()[i] * k::sigmoid(x[i]);
        accum(nd.inputs[0], dx, true);
        break;
      }
      case Op::silu: {
        Tensor dx = Tensor::zeros(g.shape());
        const double* x = IN(0).value.data();
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double s = k::sigmoid(x[i]);
          dx.mut()[i] = g.data()[i] * (s + x[i] * s * (1.0 - s));
        }
        accum(nd.inputs[0], dx, true);
        break;
      }
      case Op::sin: {
        Tensor dx = Tensor::zeros(g.shape());
        const double* x = IN(0).value.data();
        for (std::size_t i = 0; i < g.size(); ++i) dx.mut()[i] = g.data()[i] * std::cos(x[i]);
        accum(nd.inputs[0], dx, true);
        break;
      }
      case Op::cos: {
        Tensor dx = Tensor::zeros(g.shape());
        const double* x = IN(0).value.data();
        for (std::size_t i = 0; i < g.size(); ++i) dx.mut()[i] = -g.data()[i] * std::sin(x[i]);
        accum(nd.inputs[0], dx, true);
        break;
      }
      case Op::square: {
        Tensor dx = ew_mul(g, IN(0).value);
        accum(nd.inputs[0], ew_scale(dx, 2.0), true);
        break;
      }
      case Op::sqrt: {
        Tensor dx = Tensor::zeros(g.shape());
        const double* y = nd.value.data();
        for (std::size_t i = 0; i < g.size(); ++i) dx.mut()[i] = g.data()[i] / (2.0 * y[i]);
        accum(nd.inputs[0], dx, true);
        break;
      }

      case Op::softmax: {
        const double gy = k::ops().dot(g.data(), nd.value.data(), g.size());
        Tensor dx = Tensor::zeros(g.shape());
        for (std::size_t i = 0; i < g.size(); ++i)
          dx.mut()[i] = nd.value.at(i) * (g.data()[i] - gy);
        accum(nd.inputs[0], dx, true);
        break;
      }

      case Op::cumsum: {
        const std::size_t m = g.size();
        Tensor dx = Tensor::zeros(g.shape());
        double acc = 0;
        if (nd.params.simplex) {
          // final output is the constant 1: no gradient flows through it
          dx.mut()[m - 1] = 0.0;
          for (std::size_t i = m - 1; i-- > 0;) {
            acc += g.data()[i];
            dx.mut()[i] = acc;
          }
        } else {
          for (std::size_t i = m; i-- > 0;) {
            acc += g.data()[i];
            dx.mut()[i] = acc;
          }
        }
        accum(nd.inputs[0], dx, true);
        break;
      }

      case Op::concat: {
        std::size_t off = 0;
        for (std::size_t i = 0; i < nd.inputs.size(); ++i) {
          const Tensor& part = IN(i).value;
          if (want(i)) {
            Tensor dg;
            if (nd.params.axis == 0 || g.rank() == 1) {
              dg = Tensor::zeros(part.shape());
              std::memcpy(dg.mut(), g.data() + off, part.size() * sizeof(double));
            } else {
              const std::size_t rows = g.shape()[0], cols = g.shape()[1], c = part.shape()[1];
              dg = Tensor::zeros(part.shape());
              for (std::size_t r = 0; r < rows; ++r)
                std::memcpy(dg.mut() + r * c, g.data() + r * cols + off, c * sizeof(double));
            }
            accum(nd.inputs[i], dg, true);
          }
          off += (nd.params.axis == 0 || g.rank() == 1)
                     ? part.size()
                     : part.shape()[1];
        }
        break;
      }

      case Op::slice: {
        const Tensor& a = IN(0).value;
        Tensor dx = Tensor::zeros(a.shape());
        if (a.rank() == 1) {
          std::memcpy(dx.mut() + nd.params.offset, g.data(), g.size() * sizeof(double));
        } else if (nd.params.axis == 0) {
          const std::size_t cols = a.shape()[1];
          std::memcpy(dx.mut() + nd.params.offset * cols, g.data(), g.size() * sizeof(double));
        } else {
          const std::size_t rows = a.shape()[0], cols = a.shape()[1], c = nd.params.extent;
          for (std::size_t r = 0; r < rows; ++r)
            std::memcpy(dx.mut() + r * cols + nd.params.offset, g.data() + r * c, c * sizeof(double));
        }
        accum(nd.inputs[0], dx, true);
        break;
      }

      case Op::sum: {
        accum(nd.inputs[0], Tensor::full(IN(0).value.shape(), g.at(0)), true);
        break;
      }
      case Op::mean: {
        accum(nd.inputs[0],
              Tensor::full(IN(0).value.shape(), g.at(0) / static_cast<double>(IN(0).value.size())), true);
        break;
      }

      case Op::reparam: {
        if (want(0)) accum(nd.inputs[0], g, false);
        if (want(1)) {
          const Tensor& s = IN(1).value;
          const Tensor& z = IN(2).value;
          if (s.size() == 1) {
            accum(nd.inputs[1], Tensor::scalar(k::ops().dot(g.data(), z.data(), g.size())), true);
          } else {
            accum(nd.inputs[1], ew_mul(g, z), true);
          }
        }
        // input 2 (noise) deliberately receives nothing
        break;
      }

      case Op::schedule_logsnr: {
        Tensor dx = Tensor::zeros(g.shape());
        const double* x = IN(0).value.data();
        for (std::size_t i = 0; i < g.size(); ++i)
          dx.mut()[i] = g.data()[i] * nd.params.pchip->deriv(x[i]);
        accum(nd.inputs[0], dx, true);
        break;
      }

      case Op::checkpoint: {
        Tape scratch;
        std::vector<Value> sub;
        sub.reserve(nd.inputs.size());
        for (auto in_id : nd.inputs)
          sub.push_back(scratch.leaf(node(in_id).value, node(in_id).needs_grad));
        Value out = nd.recipe(scratch, sub);
        scratch.check_value(out, "checkpoint replay output");
        if (tensor_hash(scratch.val(out)) != nd.value_hash)
          throw IntegrityError("checkpoint: replayed recipe output differs from recorded value; recipe is not deterministic");
        GradientMap inner = scratch.backward_seed(out, g);
        for (std::size_t i = 0; i < nd.inputs.size(); ++i) {
          auto it = inner.find(static_cast<int>(i));
          if (it != inner.end() && it->second.defined())
            accum(nd.inputs[i], it->second, true);
        }
        break;
      }

      default:
        throw Error(std::string("backward: unhandled op ") + op_name(nd.op));
    }
    if (nd.op != Op::leaf) grads[static_cast<std::size_t>(id)] = Tensor();  // free as we go
  }

  GradientMap out;
  for (std::size_t id = 0; id < n; ++id) {
    const Node& nd = nodes_[id];
    if (nd.op != Op::leaf || !nd.trainable) continue;
    Tensor& g = grads[id];
    out.emplace(static_cast<int>(id), g.defined() ? g : Tensor::zeros(nd.value.shape()));
  }
  return out;
}

}  // namespace ddss::tg
