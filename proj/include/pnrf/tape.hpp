#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "pnrf/tensor.hpp"
#include "pnrf/util.hpp"

namespace pnrf {

namespace detail {

// C[m,n] += A[m,k] * B[k,n]
template <class S>
void mm_nn(const S* a, const S* b, S* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const S* arow = a + static_cast<int64_t>(i) * k;
    S* crow = c + static_cast<int64_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const S av = arow[p];
      if (av == S(0)) continue;
      const S* brow = b + static_cast<int64_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[k,n] += A^T * B  with A stored [m,k], B stored [m,n]
template <class S>
void mm_tn(const S* a, const S* b, S* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const S* arow = a + static_cast<int64_t>(i) * k;
    const S* brow = b + static_cast<int64_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const S av = arow[p];
      if (av == S(0)) continue;
      S* crow = c + static_cast<int64_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m,k] += A * B^T  with A stored [m,n], B stored [k,n]
template <class S>
void mm_nt(const S* a, const S* b, S* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const S* arow = a + static_cast<int64_t>(i) * n;
    S* crow = c + static_cast<int64_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const S* brow = b + static_cast<int64_t>(p) * n;
      S acc = S(0);
      for (int j = 0; j < n; ++j) acc += arow[j] * brow[j];
      crow[p] += acc;
    }
  }
}

template <class S>
S stable_sigmoid(S x) {
  if (x >= S(0)) {
    S e = std::exp(-x);
    return S(1) / (S(1) + e);
  }
  S e = std::exp(x);
  return e / (S(1) + e);
}

template <class S>
S stable_softplus(S x) {
  if (x > S(0)) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

}  // namespace detail

// Reverse-mode tape over dense real buffers. One tape per training step;
// nodes are recorded in topological order by construction and backward
// replays them in reverse exactly once each. All accumulation loops are
// serial with a fixed order, so gradients are bit-reproducible.
template <class S>
class Tape {
 public:
  struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
  };

  // ---- graph inputs ----

  Var leaf(ParamTensor<S>& p) {
    int id = push(p.shape, p.values, p.requires_grad, nullptr);
    nodes_[id].leaf = &p;
    leaf_ids_.push_back(id);
    return {id};
  }

  Var constant(std::vector<S> values, std::vector<int> shape) {
    check_arg(static_cast<int64_t>(values.size()) == numel(shape),
              cat("constant: ", values.size(), " values for shape ", shape_str(shape)));
    return {push(std::move(shape), std::move(values), false, nullptr)};
  }

  Var scalar(S v) { return constant({v}, {1}); }

  // ---- element-wise binary ----

  Var add(Var a, Var b) {
    return binary("add", a, b, [](S x, S y) { return x + y; },
                  [](S, S, S g, S& da, S& db) { da += g; db += g; });
  }
  Var sub(Var a, Var b) {
    return binary("sub", a, b, [](S x, S y) { return x - y; },
                  [](S, S, S g, S& da, S& db) { da += g; db -= g; });
  }
  Var mul(Var a, Var b) {
    return binary("mul", a, b, [](S x, S y) { return x * y; },
                  [](S x, S y, S g, S& da, S& db) { da += g * y; db += g * x; });
  }
  Var div(Var a, Var b) {
    return binary("div", a, b, [](S x, S y) { return x / y; },
                  [](S x, S y, S g, S& da, S& db) {
                    da += g / y;
                    db -= g * x / (y * y);
                  });
  }

  Var add_scalar(Var a, S c) {
    return unary("add_scalar", a, [c](S x) { return x + c; }, [](S, S) { return S(1); });
  }
  Var mul_scalar(Var a, S c) {
    return unary("mul_scalar", a, [c](S x) { return x * c; }, [c](S, S) { return c; });
  }
  // c - x
  Var rsub_scalar(S c, Var a) {
    return unary("rsub_scalar", a, [c](S x) { return c - x; }, [](S, S) { return S(-1); });
  }

  // ---- element-wise unary ----

  Var sin(Var a) {
    return unary("sin", a, [](S x) { return std::sin(x); }, [](S x, S) { return std::cos(x); });
  }
  Var cos(Var a) {
    return unary("cos", a, [](S x) { return std::cos(x); }, [](S x, S) { return -std::sin(x); });
  }
  Var exp(Var a) {
    return unary("exp", a, [](S x) { return std::exp(x); }, [](S, S y) { return y; });
  }
  Var sqrt(Var a) {
    return unary("sqrt", a, [](S x) { return std::sqrt(x); },
                 [](S, S y) { return S(0.5) / y; });
  }
  Var square(Var a) {
    return unary("square", a, [](S x) { return x * x; }, [](S x, S) { return S(2) * x; });
  }
  Var sigmoid(Var a) {
    return unary("sigmoid", a, [](S x) { return detail::stable_sigmoid(x); },
                 [](S, S y) { return y * (S(1) - y); });
  }
  Var softplus(Var a) {
    return unary("softplus", a, [](S x) { return detail::stable_softplus(x); },
                 [](S x, S) { return detail::stable_sigmoid(x); });
  }
  Var relu(Var a) {
    return unary("relu", a, [](S x) { return x > S(0) ? x : S(0); },
                 [](S x, S) { return x > S(0) ? S(1) : S(0); });
  }
  // max(c, x); relu is the c = 0 case
  Var maximum_scalar(Var a, S c) {
    return unary("maximum_scalar", a, [c](S x) { return x > c ? x : c; },
                 [c](S x, S) { return x > c ? S(1) : S(0); });
  }

  // ---- matmul / layout ----

  Var matmul(Var a, Var b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    check_arg(na.shape.size() == 2 && nb.shape.size() == 2 && na.shape[1] == nb.shape[0],
              cat("matmul: incompatible shapes ", shape_str(na.shape), " x ", shape_str(nb.shape)));
    const int m = na.shape[0], k = na.shape[1], n = nb.shape[1];
    std::vector<S> out(static_cast<size_t>(m) * n, S(0));
    detail::mm_nn(na.values.data(), nb.values.data(), out.data(), m, k, n);
    const int ia = a.id, ib = b.id;
    return {push({m, n}, std::move(out), na.needs_grad || nb.needs_grad,
                 [ia, ib, m, k, n](Tape& t, const Node& self) {
                   if (t.nodes_[ia].needs_grad)
                     detail::mm_nt(self.grad.data(), t.nodes_[ib].values.data(),
                                   t.grads(ia).data(), m, k, n);
                   if (t.nodes_[ib].needs_grad)
                     detail::mm_tn(t.nodes_[ia].values.data(), self.grad.data(),
                                   t.grads(ib).data(), m, k, n);
                 })};
  }

  // [m,n] plus a [n] (or [1,n]) bias applied to every row. Deliberately a
  // named op instead of general broadcasting.
  Var add_bias(Var a, Var b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    check_arg(na.shape.size() == 2 && numel(nb.shape) == na.shape[1],
              cat("add_bias: shape mismatch ", shape_str(na.shape), " vs ", shape_str(nb.shape)));
    const int m = na.shape[0], n = na.shape[1];
    std::vector<S> out(na.values.size());
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j)
        out[static_cast<size_t>(i) * n + j] = na.values[static_cast<size_t>(i) * n + j] + nb.values[j];
    const int ia = a.id, ib = b.id;
    return {push(na.shape, std::move(out), na.needs_grad || nb.needs_grad,
                 [ia, ib, m, n](Tape& t, const Node& self) {
                   if (t.nodes_[ia].needs_grad) {
                     std::vector<S>& g = t.grads(ia);
                     for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                   }
                   if (t.nodes_[ib].needs_grad) {
                     std::vector<S>& g = t.grads(ib);
                     for (int i = 0; i < m; ++i)
                       for (int j = 0; j < n; ++j) g[j] += self.grad[static_cast<size_t>(i) * n + j];
                   }
                 })};
  }

  Var concat_cols(const std::vector<Var>& parts) {
    check_arg(!parts.empty(), "concat: no inputs");
    const int m = node(parts[0]).shape.size() == 2 ? node(parts[0]).shape[0] : -1;
    check_arg(m > 0, cat("concat: expects 2-d inputs, got ", shape_str(node(parts[0]).shape)));
    int total = 0;
    bool needs = false;
    std::vector<int> ids;
    std::vector<int> widths;
    for (Var p : parts) {
      const Node& np = node(p);
      check_arg(np.shape.size() == 2 && np.shape[0] == m,
                cat("concat: shape mismatch ", shape_str(node(parts[0]).shape), " vs ",
                    shape_str(np.shape)));
      total += np.shape[1];
      needs = needs || np.needs_grad;
      ids.push_back(p.id);
      widths.push_back(np.shape[1]);
    }
    std::vector<S> out(static_cast<size_t>(m) * total);
    int off = 0;
    for (size_t pi = 0; pi < ids.size(); ++pi) {
      const std::vector<S>& v = nodes_[ids[pi]].values;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < widths[pi]; ++j)
          out[static_cast<size_t>(i) * total + off + j] = v[static_cast<size_t>(i) * widths[pi] + j];
      off += widths[pi];
    }
    return {push({m, total}, std::move(out), needs,
                 [ids, widths, m, total](Tape& t, const Node& self) {
                   int off2 = 0;
                   for (size_t pi = 0; pi < ids.size(); ++pi) {
                     if (t.nodes_[ids[pi]].needs_grad) {
                       std::vector<S>& g = t.grads(ids[pi]);
                       for (int i = 0; i < m; ++i)
                         for (int j = 0; j < widths[pi]; ++j)
                           g[static_cast<size_t>(i) * widths[pi] + j] +=
                               self.grad[static_cast<size_t>(i) * total + off2 + j];
                     }
                     off2 += widths[pi];
                   }
                 })};
  }

  Var reshape(Var a, std::vector<int> shape) {
    const Node& na = node(a);
    check_arg(numel(shape) == numel(na.shape),
              cat("reshape: ", shape_str(na.shape), " to ", shape_str(shape)));
    const int ia = a.id;
    return {push(std::move(shape), na.values, na.needs_grad, [ia](Tape& t, const Node& self) {
      std::vector<S>& g = t.grads(ia);
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    })};
  }

  Var slice_cols(Var a, int c0, int c1) {
    const Node& na = node(a);
    check_arg(na.shape.size() == 2 && c0 >= 0 && c1 <= na.shape[1] && c0 < c1,
              cat("slice_cols: [", c0, ",", c1, ") of ", shape_str(na.shape)));
    const int m = na.shape[0], n = na.shape[1], w = c1 - c0;
    std::vector<S> out(static_cast<size_t>(m) * w);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < w; ++j)
        out[static_cast<size_t>(i) * w + j] = na.values[static_cast<size_t>(i) * n + c0 + j];
    const int ia = a.id;
    return {push({m, w}, std::move(out), na.needs_grad,
                 [ia, m, n, w, c0](Tape& t, const Node& self) {
                   std::vector<S>& g = t.grads(ia);
                   for (int i = 0; i < m; ++i)
                     for (int j = 0; j < w; ++j)
                       g[static_cast<size_t>(i) * n + c0 + j] +=
                           self.grad[static_cast<size_t>(i) * w + j];
                 })};
  }

  Var gather_rows(Var a, std::vector<int> rows) {
    const Node& na = node(a);
    check_arg(na.shape.size() == 2, cat("gather_rows: expects 2-d input, got ", shape_str(na.shape)));
    const int m = na.shape[0], n = na.shape[1];
    for (int r : rows) check_arg(r >= 0 && r < m, cat("gather_rows: row ", r, " out of ", m));
    const int k = static_cast<int>(rows.size());
    std::vector<S> out(static_cast<size_t>(k) * n);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < n; ++j)
        out[static_cast<size_t>(i) * n + j] = na.values[static_cast<size_t>(rows[i]) * n + j];
    const int ia = a.id;
    return {push({k, n}, std::move(out), na.needs_grad,
                 [ia, rows = std::move(rows), n](Tape& t, const Node& self) {
                   std::vector<S>& g = t.grads(ia);
                   for (size_t i = 0; i < rows.size(); ++i)
                     for (int j = 0; j < n; ++j)
                       g[static_cast<size_t>(rows[i]) * n + j] += self.grad[i * n + j];
                 })};
  }

  // ---- reductions / scans ----

  Var sum(Var a) {
    const Node& na = node(a);
    S acc = S(0);
    for (S v : na.values) acc += v;
    const int ia = a.id;
    return {push({1}, {acc}, na.needs_grad, [ia](Tape& t, const Node& self) {
      std::vector<S>& g = t.grads(ia);
      const S gv = self.grad[0];
      for (S& x : g) x += gv;
    })};
  }

  Var mean(Var a) {
    const Node& na = node(a);
    const S n = static_cast<S>(na.values.size());
    S acc = S(0);
    for (S v : na.values) acc += v;
    const int ia = a.id;
    return {push({1}, {acc / n}, na.needs_grad, [ia, n](Tape& t, const Node& self) {
      std::vector<S>& g = t.grads(ia);
      const S gv = self.grad[0] / n;
      for (S& x : g) x += gv;
    })};
  }

  // [m,n] -> [m,1], summing within each row
  Var row_sum(Var a) {
    const Node& na = node(a);
    check_arg(na.shape.size() == 2, cat("row_sum: expects 2-d input, got ", shape_str(na.shape)));
    const int m = na.shape[0], n = na.shape[1];
    std::vector<S> out(m, S(0));
    for (int i = 0; i < m; ++i) {
      S acc = S(0);
      for (int j = 0; j < n; ++j) acc += na.values[static_cast<size_t>(i) * n + j];
      out[i] = acc;
    }
    const int ia = a.id;
    return {push({m, 1}, std::move(out), na.needs_grad, [ia, m, n](Tape& t, const Node& self) {
      std::vector<S>& g = t.grads(ia);
      for (int i = 0; i < m; ++i) {
        const S gv = self.grad[i];
        for (int j = 0; j < n; ++j) g[static_cast<size_t>(i) * n + j] += gv;
      }
    })};
  }

  // out[i,j] = sum_{k<j} in[i,k]; the transmittance accumulator
  Var exclusive_cumsum_rows(Var a) {
    const Node& na = node(a);
    check_arg(na.shape.size() == 2,
              cat("exclusive_cumsum: expects 2-d input, got ", shape_str(na.shape)));
    const int m = na.shape[0], n = na.shape[1];
    std::vector<S> out(static_cast<size_t>(m) * n);
    for (int i = 0; i < m; ++i) {
      S run = S(0);
      for (int j = 0; j < n; ++j) {
        out[static_cast<size_t>(i) * n + j] = run;
        run += na.values[static_cast<size_t>(i) * n + j];
      }
    }
    const int ia = a.id;
    return {push({m, n}, std::move(out), na.needs_grad, [ia, m, n](Tape& t, const Node& self) {
      std::vector<S>& g = t.grads(ia);
      for (int i = 0; i < m; ++i) {
        S run = S(0);
        for (int j = n - 1; j >= 0; --j) {
          g[static_cast<size_t>(i) * n + j] += run;
          run += self.grad[static_cast<size_t>(i) * n + j];
        }
      }
    })};
  }

  // ---- backward ----

  void backward(Var loss) {
    check(!nodes_.empty(), "backward: empty tape");
    check(!consumed_, "backward: tape already consumed");
    const Node& nl = node(loss);
    check(numel(nl.shape) == 1,
          cat("backward: loss must be scalar, got shape ", shape_str(nl.shape)));
    consumed_ = true;
    backward_visits_ = 0;
    grads(loss.id)[0] = S(1);
    for (int i = loss.id; i >= 0; --i) {
      Node& nd = nodes_[i];
      if (!nd.needs_grad || !nd.back || nd.grad.empty()) continue;
      nd.back(*this, nd);
      ++backward_visits_;
    }
    // Route leaf gradients into their parameter tensors, in registration
    // order. Parameters never touched by the sweep end up with zero grads.
    for (int id : leaf_ids_) {
      Node& nd = nodes_[id];
      if (!nd.leaf || !nd.leaf->requires_grad) continue;
      std::vector<S>& pg = nd.leaf->ensure_grad();
      if (!nd.grad.empty())
        for (size_t i = 0; i < pg.size(); ++i) pg[i] += nd.grad[i];
    }
  }

  // ---- access ----

  const std::vector<S>& values(Var v) const { return node(v).values; }
  const std::vector<int>& shape(Var v) const { return node(v).shape; }
  S value(Var v) const { return node(v).values[0]; }
  bool needs_grad(Var v) const { return node(v).needs_grad; }
  const std::vector<S>& grad(Var v) const { return node(v).grad; }

  size_t node_count() const { return nodes_.size(); }
  int64_t backward_visits() const { return backward_visits_; }

  void reset() {
    nodes_.clear();
    leaf_ids_.clear();
    consumed_ = false;
    backward_visits_ = 0;
  }

 private:
  struct Node {
    std::vector<int> shape;
    std::vector<S> values;
    std::vector<S> grad;  // allocated on first accumulation during backward
    std::function<void(Tape&, const Node&)> back;
    ParamTensor<S>* leaf = nullptr;
    bool needs_grad = false;
  };

  const Node& node(Var v) const {
    check_arg(v.id >= 0 && v.id < static_cast<int>(nodes_.size()),
              cat("tape: invalid var id ", v.id));
    return nodes_[v.id];
  }

  std::vector<S>& grads(int id) {
    Node& nd = nodes_[id];
    if (nd.grad.empty()) nd.grad.assign(nd.values.size(), S(0));
    return nd.grad;
  }

  int push(std::vector<int> shape, std::vector<S> values, bool needs_grad,
           std::function<void(Tape&, const Node&)> back) {
    Node nd;
    nd.shape = std::move(shape);
    nd.values = std::move(values);
    nd.needs_grad = needs_grad;
    nd.back = std::move(back);
    nodes_.push_back(std::move(nd));
    return static_cast<int>(nodes_.size()) - 1;
  }

  template <class Fwd, class Bwd>
  Var unary(const char* name, Var a, Fwd fwd, Bwd dfn) {
    const Node& na = node(a);
    (void)name;
    std::vector<S> out(na.values.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(na.values[i]);
    const int ia = a.id;
    return {push(na.shape, std::move(out), na.needs_grad, [ia, dfn](Tape& t, const Node& self) {
      std::vector<S>& g = t.grads(ia);
      const std::vector<S>& x = t.nodes_[ia].values;
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * dfn(x[i], self.values[i]);
    })};
  }

  // Element-wise with the same shape on both sides, or scalar broadcast on
  // either side (the only broadcast the engine supports).
  template <class Fwd, class Bwd>
  Var binary(const char* name, Var a, Var b, Fwd fwd, Bwd bwd) {
    const Node& na = node(a);
    const Node& nb = node(b);
    const bool a_scalar = numel(na.shape) == 1;
    const bool b_scalar = numel(nb.shape) == 1;
    check_arg(a_scalar || b_scalar || na.shape == nb.shape,
              cat(name, ": shape mismatch ", shape_str(na.shape), " vs ", shape_str(nb.shape)));
    const std::vector<int>& out_shape = a_scalar ? nb.shape : na.shape;
    const size_t n = static_cast<size_t>(numel(out_shape));
    std::vector<S> out(n);
    for (size_t i = 0; i < n; ++i)
      out[i] = fwd(na.values[a_scalar ? 0 : i], nb.values[b_scalar ? 0 : i]);
    const int ia = a.id, ib = b.id;
    return {push(out_shape, std::move(out), na.needs_grad || nb.needs_grad,
                 [ia, ib, a_scalar, b_scalar, bwd, n](Tape& t, const Node& self) {
                   const std::vector<S>& xa = t.nodes_[ia].values;
                   const std::vector<S>& xb = t.nodes_[ib].values;
                   const bool ga = t.nodes_[ia].needs_grad;
                   const bool gb = t.nodes_[ib].needs_grad;
                   std::vector<S> dump_a(ga ? 0 : 1, S(0)), dump_b(gb ? 0 : 1, S(0));
                   std::vector<S>& da = ga ? t.grads(ia) : dump_a;
                   std::vector<S>& db = gb ? t.grads(ib) : dump_b;
                   for (size_t i = 0; i < n; ++i) {
                     S sa = S(0), sb = S(0);
                     bwd(xa[a_scalar ? 0 : i], xb[b_scalar ? 0 : i], self.grad[i], sa, sb);
                     if (ga) da[a_scalar ? 0 : i] += sa;
                     if (gb) db[b_scalar ? 0 : i] += sb;
                   }
                 })};
  }

  std::vector<Node> nodes_;
  std::vector<int> leaf_ids_;
  int64_t backward_visits_ = 0;
  bool consumed_ = false;
};

}  // namespace pnrf
