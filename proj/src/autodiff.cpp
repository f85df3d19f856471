#include "drl/autodiff.hpp"

#include <cmath>
#include <unordered_set>

namespace drl {

namespace {

Var make_node(const char* op, Tensor value, std::vector<Var> parents,
              std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->value = std::move(value);
  for (const auto& p : parents)
    if (p->requires_grad) n->requires_grad = true;
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backprop = std::move(backprop);
  }
  return n;
}

void ensure_grad(Node& n) {
  if (n.grad.data.size() != n.value.data.size())
    n.grad = Tensor(n.value.shape);
}

void check_same_shape(const char* op, const Var& a, const Var& b) {
  if (!a->value.same_shape(b->value))
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_str(a->value.shape) + " vs " +
                     shape_str(b->value.shape));
}

Var unary(const char* op, const Var& a, std::function<double(double)> f,
          std::function<double(double, double)> df /* (x, y) -> dy/dx */) {
  Tensor out(a->value.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = f(a->value.data[i]);
  return make_node(op, std::move(out), {a}, [f = std::move(df)](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    for (std::size_t i = 0; i < n.value.size(); ++i)
      p.grad.data[i] += n.grad.data[i] * f(p.value.data[i], n.value.data[i]);
  });
}

}  // namespace

Var leaf(Tensor value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return n;
}

Var constant(Tensor value) { return leaf(std::move(value), false); }

void zero_grad(const std::vector<Var>& params) {
  for (const auto& p : params) p->grad = Tensor(p->value.shape);
}

void backward(const Var& loss) {
  if (loss->value.size() != 1)
    throw ShapeError("backward: loss must be scalar, got shape " +
                     shape_str(loss->value.shape));
  // Iterative post-order topological sort.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.get(), 0}};
  while (!stack.empty()) {
    auto& [node, child] = stack.back();
    if (child == 0 && visited.count(node)) {
      stack.pop_back();
      continue;
    }
    visited.insert(node);
    if (child < node->parents.size()) {
      Node* next = node->parents[child++].get();
      if (!visited.count(next)) stack.push_back({next, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  ensure_grad(*loss);
  loss->grad.data[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop) {
      ensure_grad(*n);
      n->backprop(*n);
    }
  }
  // Sever the tape so intermediate nodes are reclaimed.
  for (Node* n : order) {
    if (n->backprop) {
      n->backprop = nullptr;
      n->parents.clear();
    }
  }
}

Var add(const Var& a, const Var& b) {
  check_same_shape("add", a, b);
  Tensor out(a->value.shape);
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data[i] = a->value.data[i] + b->value.data[i];
  return make_node("add", std::move(out), {a, b}, [](Node& n) {
    for (int k = 0; k < 2; ++k) {
      Node& p = *n.parents[k];
      if (!p.requires_grad) continue;
      ensure_grad(p);
      for (std::size_t i = 0; i < n.grad.size(); ++i)
        p.grad.data[i] += n.grad.data[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape("sub", a, b);
  Tensor out(a->value.shape);
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data[i] = a->value.data[i] - b->value.data[i];
  return make_node("sub", std::move(out), {a, b}, [](Node& n) {
    for (int k = 0; k < 2; ++k) {
      Node& p = *n.parents[k];
      if (!p.requires_grad) continue;
      ensure_grad(p);
      double sign = k == 0 ? 1.0 : -1.0;
      for (std::size_t i = 0; i < n.grad.size(); ++i)
        p.grad.data[i] += sign * n.grad.data[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape("mul", a, b);
  Tensor out(a->value.shape);
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data[i] = a->value.data[i] * b->value.data[i];
  return make_node("mul", std::move(out), {a, b}, [](Node& n) {
    Node& pa = *n.parents[0];
    Node& pb = *n.parents[1];
    if (pa.requires_grad) {
      ensure_grad(pa);
      for (std::size_t i = 0; i < n.grad.size(); ++i)
        pa.grad.data[i] += n.grad.data[i] * pb.value.data[i];
    }
    if (pb.requires_grad) {
      ensure_grad(pb);
      for (std::size_t i = 0; i < n.grad.size(); ++i)
        pb.grad.data[i] += n.grad.data[i] * pa.value.data[i];
    }
  });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var scale(const Var& a, double c) {
  Tensor out(a->value.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = c * a->value.data[i];
  return make_node("scale", std::move(out), {a}, [c](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    for (std::size_t i = 0; i < n.grad.size(); ++i)
      p.grad.data[i] += c * n.grad.data[i];
  });
}

Var add_scalar(const Var& a, double c) {
  Tensor out(a->value.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a->value.data[i] + c;
  return make_node("add_scalar", std::move(out), {a}, [](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    for (std::size_t i = 0; i < n.grad.size(); ++i)
      p.grad.data[i] += n.grad.data[i];
  });
}

Var add_rowvec(const Var& mat, const Var& vec) {
  const std::size_t B = mat->value.rows(), D = mat->value.cols();
  if (vec->value.size() != D)
    throw ShapeError("add_rowvec: shape mismatch " + shape_str(mat->value.shape) +
                     " vs " + shape_str(vec->value.shape));
  Tensor out(mat->value.shape);
  for (std::size_t r = 0; r < B; ++r)
    for (std::size_t c = 0; c < D; ++c)
      out.data[r * D + c] = mat->value.data[r * D + c] + vec->value.data[c];
  return make_node("add_rowvec", std::move(out), {mat, vec}, [B, D](Node& n) {
    Node& pm = *n.parents[0];
    Node& pv = *n.parents[1];
    if (pm.requires_grad) {
      ensure_grad(pm);
      for (std::size_t i = 0; i < n.grad.size(); ++i)
        pm.grad.data[i] += n.grad.data[i];
    }
    if (pv.requires_grad) {
      ensure_grad(pv);
      for (std::size_t r = 0; r < B; ++r)
        for (std::size_t c = 0; c < D; ++c)
          pv.grad.data[c] += n.grad.data[r * D + c];
    }
  });
}

Var matmul(const Var& a, const Var& b) {
  const std::size_t B = a->value.rows(), K = a->value.cols();
  const std::size_t K2 = b->value.rows(), N = b->value.cols();
  if (K != K2)
    throw ShapeError("matmul: shape mismatch " + shape_str(a->value.shape) +
                     " vs " + shape_str(b->value.shape));
  Tensor out({B, N});
  const double* A = a->value.data.data();
  const double* Bm = b->value.data.data();
  double* C = out.data.data();
  for (std::size_t i = 0; i < B; ++i)
    for (std::size_t k = 0; k < K; ++k) {
      const double aik = A[i * K + k];
      for (std::size_t j = 0; j < N; ++j) C[i * N + j] += aik * Bm[k * N + j];
    }
  return make_node("matmul", std::move(out), {a, b}, [B, K, N](Node& n) {
    Node& pa = *n.parents[0];
    Node& pb = *n.parents[1];
    const double* G = n.grad.data.data();
    if (pa.requires_grad) {
      ensure_grad(pa);
      const double* Bm = pb.value.data.data();
      double* GA = pa.grad.data.data();
      // dA = G * B^T
      for (std::size_t i = 0; i < B; ++i)
        for (std::size_t j = 0; j < N; ++j) {
          const double g = G[i * N + j];
          for (std::size_t k = 0; k < K; ++k) GA[i * K + k] += g * Bm[k * N + j];
        }
    }
    if (pb.requires_grad) {
      ensure_grad(pb);
      const double* A = pa.value.data.data();
      double* GB = pb.grad.data.data();
      // dB = A^T * G
      for (std::size_t i = 0; i < B; ++i)
        for (std::size_t k = 0; k < K; ++k) {
          const double aik = A[i * K + k];
          for (std::size_t j = 0; j < N; ++j) GB[k * N + j] += aik * G[i * N + j];
        }
    }
  });
}

Var tanh_v(const Var& a) {
  return unary("tanh", a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid_v(const Var& a) {
  return unary("sigmoid", a,
               [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
               [](double, double y) { return y * (1.0 - y); });
}

Var softplus_v(const Var& a) {
  return unary("softplus", a,
               [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); },
               [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Var exp_v(const Var& a) {
  return unary("exp", a, [](double x) { return std::exp(x); },
               [](double, double y) { return y; });
}

Var log_v(const Var& a) {
  return unary("log", a, [](double x) { return std::log(x); },
               [](double x, double) { return 1.0 / x; });
}

Var sqrt_v(const Var& a) {
  return unary("sqrt", a, [](double x) { return std::sqrt(x); },
               [](double, double y) { return 0.5 / y; });
}

Var square_v(const Var& a) {
  return unary("square", a, [](double x) { return x * x; },
               [](double x, double) { return 2.0 * x; });
}

Var sum_all(const Var& a) {
  double s = 0;
  for (double v : a->value.data) s += v;
  return make_node("sum", Tensor::scalar(s), {a}, [](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    for (std::size_t i = 0; i < p.grad.size(); ++i)
      p.grad.data[i] += n.grad.data[0];
  });
}

Var mean_all(const Var& a) { return scale(sum_all(a), 1.0 / a->value.size()); }

Var rowsum(const Var& a) {
  const std::size_t B = a->value.rows(), D = a->value.cols();
  Tensor out({B});
  for (std::size_t r = 0; r < B; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < D; ++c) s += a->value.data[r * D + c];
    out.data[r] = s;
  }
  return make_node("rowsum", std::move(out), {a}, [B, D](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    for (std::size_t r = 0; r < B; ++r)
      for (std::size_t c = 0; c < D; ++c)
        p.grad.data[r * D + c] += n.grad.data[r];
  });
}

Var concat_cols(const Var& a, const Var& b) {
  const std::size_t B = a->value.rows(), Da = a->value.cols(),
                    Db = b->value.cols();
  if (b->value.rows() != B)
    throw ShapeError("concat: row mismatch " + shape_str(a->value.shape) +
                     " vs " + shape_str(b->value.shape));
  Tensor out({B, Da + Db});
  for (std::size_t r = 0; r < B; ++r) {
    for (std::size_t c = 0; c < Da; ++c)
      out.data[r * (Da + Db) + c] = a->value.data[r * Da + c];
    for (std::size_t c = 0; c < Db; ++c)
      out.data[r * (Da + Db) + Da + c] = b->value.data[r * Db + c];
  }
  return make_node("concat", std::move(out), {a, b}, [B, Da, Db](Node& n) {
    Node& pa = *n.parents[0];
    Node& pb = *n.parents[1];
    if (pa.requires_grad) {
      ensure_grad(pa);
      for (std::size_t r = 0; r < B; ++r)
        for (std::size_t c = 0; c < Da; ++c)
          pa.grad.data[r * Da + c] += n.grad.data[r * (Da + Db) + c];
    }
    if (pb.requires_grad) {
      ensure_grad(pb);
      for (std::size_t r = 0; r < B; ++r)
        for (std::size_t c = 0; c < Db; ++c)
          pb.grad.data[r * Db + c] += n.grad.data[r * (Da + Db) + Da + c];
    }
  });
}

Var slice_cols(const Var& a, std::size_t start, std::size_t len) {
  const std::size_t B = a->value.rows(), D = a->value.cols();
  if (start + len > D)
    throw ShapeError("slice: out of range on " + shape_str(a->value.shape));
  Tensor out({B, len});
  for (std::size_t r = 0; r < B; ++r)
    for (std::size_t c = 0; c < len; ++c)
      out.data[r * len + c] = a->value.data[r * D + start + c];
  return make_node("slice", std::move(out), {a}, [B, D, start, len](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    for (std::size_t r = 0; r < B; ++r)
      for (std::size_t c = 0; c < len; ++c)
        p.grad.data[r * D + start + c] += n.grad.data[r * len + c];
  });
}

Var reshape(const Var& a, std::vector<std::size_t> shape) {
  Tensor out(std::move(shape), a->value.data);
  return make_node("reshape", std::move(out), {a}, [](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    for (std::size_t i = 0; i < n.grad.size(); ++i)
      p.grad.data[i] += n.grad.data[i];
  });
}

Var conv2d(const Var& x, const Var& w, const Var& bias, std::size_t stride) {
  const auto& xs = x->value.shape;
  const auto& ws = w->value.shape;
  if (xs.size() != 4 || ws.size() != 4 || xs[1] != ws[1])
    throw ShapeError("conv2d: shape mismatch " + shape_str(xs) + " vs " +
                     shape_str(ws));
  const std::size_t B = xs[0], C = xs[1], H = xs[2], W = xs[3];
  const std::size_t F = ws[0], k = ws[2];
  if (H < k || W < k)
    throw ShapeError("conv2d: kernel larger than input " + shape_str(xs));
  const std::size_t Ho = (H - k) / stride + 1, Wo = (W - k) / stride + 1;
  Tensor out({B, F, Ho, Wo});
  const double* X = x->value.data.data();
  const double* Wt = w->value.data.data();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t i = 0; i < Ho; ++i)
        for (std::size_t j = 0; j < Wo; ++j) {
          double s = bias->value.data[f];
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t ki = 0; ki < k; ++ki)
              for (std::size_t kj = 0; kj < k; ++kj)
                s += X[((b * C + c) * H + i * stride + ki) * W + j * stride + kj] *
                     Wt[((f * C + c) * k + ki) * k + kj];
          out.data[((b * F + f) * Ho + i) * Wo + j] = s;
        }
  return make_node(
      "conv2d", std::move(out), {x, w, bias},
      [B, C, H, W, F, k, Ho, Wo, stride](Node& n) {
        Node& px = *n.parents[0];
        Node& pw = *n.parents[1];
        Node& pb = *n.parents[2];
        const double* G = n.grad.data.data();
        if (px.requires_grad) ensure_grad(px);
        if (pw.requires_grad) ensure_grad(pw);
        if (pb.requires_grad) ensure_grad(pb);
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t f = 0; f < F; ++f)
            for (std::size_t i = 0; i < Ho; ++i)
              for (std::size_t j = 0; j < Wo; ++j) {
                const double g = G[((b * F + f) * Ho + i) * Wo + j];
                if (pb.requires_grad) pb.grad.data[f] += g;
                for (std::size_t c = 0; c < C; ++c)
                  for (std::size_t ki = 0; ki < k; ++ki)
                    for (std::size_t kj = 0; kj < k; ++kj) {
                      const std::size_t xi =
                          ((b * C + c) * H + i * stride + ki) * W + j * stride + kj;
                      const std::size_t wi = ((f * C + c) * k + ki) * k + kj;
                      if (pw.requires_grad)
                        pw.grad.data[wi] += g * px.value.data[xi];
                      if (px.requires_grad)
                        px.grad.data[xi] += g * pw.value.data[wi];
                    }
              }
      });
}

}  // namespace drl
