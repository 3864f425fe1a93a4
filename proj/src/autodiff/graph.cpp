#include "fedgrain/autodiff/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fedgrain::ad {

NodeId Binding::node(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return nodes_[i];
  throw ShapeError("binding: no parameter named '" + std::string(name) + "'");
}

namespace {

void require(bool ok, const std::string& layer, const std::string& detail) {
  if (!ok) throw ShapeError(layer + ": " + detail);
}

void require_4d(const Tensor& t, const std::string& layer, const char* role) {
  require(t.rank() == 4, layer, std::string(role) + " must be NCHW, got " + shape_str(t.shape()));
}

int reflect_index(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * (n - 1) - i;
  return i;
}

double sigmoid_of(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_of(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

// Padded copy of one H x W plane into (H+2p) x (W+2p).
void pad_plane(const double* src, std::size_t h, std::size_t w, std::size_t p, Padding mode,
               double* dst) {
  const std::size_t wp = w + 2 * p;
  const std::size_t hp = h + 2 * p;
  for (std::size_t yy = 0; yy < hp; ++yy) {
    const int sy = static_cast<int>(yy) - static_cast<int>(p);
    double* row = dst + yy * wp;
    if (mode == Padding::kZero && (sy < 0 || sy >= static_cast<int>(h))) {
      std::fill(row, row + wp, 0.0);
      continue;
    }
    const int ry = reflect_index(sy, static_cast<int>(h));
    const double* srow = src + static_cast<std::size_t>(ry) * w;
    for (std::size_t xx = 0; xx < wp; ++xx) {
      const int sx = static_cast<int>(xx) - static_cast<int>(p);
      if (sx >= 0 && sx < static_cast<int>(w)) {
        row[xx] = srow[sx];
      } else if (mode == Padding::kZero) {
        row[xx] = 0.0;
      } else {
        row[xx] = srow[reflect_index(sx, static_cast<int>(w))];
      }
    }
  }
}

// Adjoint of pad_plane: folds padded gradient back onto the source plane.
void unpad_plane_add(const double* gpad, std::size_t h, std::size_t w, std::size_t p, Padding mode,
                     double* gsrc) {
  const std::size_t wp = w + 2 * p;
  const std::size_t hp = h + 2 * p;
  for (std::size_t yy = 0; yy < hp; ++yy) {
    const int sy = static_cast<int>(yy) - static_cast<int>(p);
    const bool row_inside = sy >= 0 && sy < static_cast<int>(h);
    if (mode == Padding::kZero && !row_inside) continue;
    const int ry = reflect_index(sy, static_cast<int>(h));
    double* grow = gsrc + static_cast<std::size_t>(ry) * w;
    const double* prow = gpad + yy * wp;
    for (std::size_t xx = 0; xx < wp; ++xx) {
      const int sx = static_cast<int>(xx) - static_cast<int>(p);
      if (sx >= 0 && sx < static_cast<int>(w)) {
        grow[sx] += prow[xx];
      } else if (mode == Padding::kReflect) {
        grow[reflect_index(sx, static_cast<int>(w))] += prow[xx];
      }
    }
  }
}

}  // namespace

const Graph::Node& Graph::at(NodeId id) const {
  if (id >= nodes_.size()) throw ShapeError("graph: unknown node id " + std::to_string(id));
  return nodes_[id];
}

NodeId Graph::push(std::string kind, Tensor value, std::vector<NodeId> inputs, Backprop backprop) {
  Node n;
  n.kind = std::move(kind);
  n.value = std::move(value);
  n.requires_grad = std::any_of(inputs.begin(), inputs.end(), [&](NodeId i) { return needs(i); });
  n.inputs = std::move(inputs);
  if (n.requires_grad) n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

Tensor& Graph::grad_of(NodeId id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape(), 0.0);
    n.has_grad = true;
  }
  return n.grad;
}

NodeId Graph::constant(Tensor value) { return push("constant", std::move(value), {}, nullptr); }

Binding Graph::bind(const ParamSet& params, bool trainable) {
  Binding b;
  for (const auto& e : params) {
    Node n;
    n.kind = "parameter";
    n.value = e.value;
    n.requires_grad = trainable;
    nodes_.push_back(std::move(n));
    b.nodes_.push_back(nodes_.size() - 1);
    b.names_.push_back(e.name);
    b.shapes_.push_back(e.value.shape());
  }
  return b;
}

NodeId Graph::conv2d(NodeId xid, NodeId wid, NodeId bid, Padding padding) {
  const Tensor& x = at(xid).value;
  const Tensor& w = at(wid).value;
  const Tensor& b = at(bid).value;
  const std::string layer = "conv2d";
  require_4d(x, layer, "input");
  require(w.rank() == 4, layer, "weight must be [O,C,K,K], got " + shape_str(w.shape()));
  require(w.dim(2) == w.dim(3) && w.dim(2) % 2 == 1, layer,
          "kernel must be square and odd, got " + shape_str(w.shape()));
  require(w.dim(1) == x.dim(1), layer,
          "input has " + std::to_string(x.dim(1)) + " channels but weight expects " +
              std::to_string(w.dim(1)) + " (input " + shape_str(x.shape()) + ", weight " +
              shape_str(w.shape()) + ")");
  require(b.rank() == 1 && b.dim(0) == w.dim(0), layer,
          "bias must be [" + std::to_string(w.dim(0)) + "], got " + shape_str(b.shape()));
  const std::size_t n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t co = w.dim(0), k = w.dim(2), p = k / 2;
  if (padding == Padding::kReflect)
    require(h > p && wd > p, layer, "reflect padding needs spatial dims > " + std::to_string(p));
  const std::size_t hp = h + 2 * p, wp = wd + 2 * p, plane = h * wd, pplane = hp * wp;

  std::vector<double> padded(n * ci * pplane);
  for (std::size_t s = 0; s < n * ci; ++s)
    pad_plane(x.ptr() + s * plane, h, wd, p, padding, padded.data() + s * pplane);

  Tensor out(Shape{n, co, h, wd});
  for (std::size_t in = 0; in < n; ++in) {
    for (std::size_t o = 0; o < co; ++o) {
      double* dst = out.ptr() + (in * co + o) * plane;
      std::fill(dst, dst + plane, b[o]);
      for (std::size_t c = 0; c < ci; ++c) {
        const double* src = padded.data() + (in * ci + c) * pplane;
        const double* wk = w.ptr() + (o * ci + c) * k * k;
        for (std::size_t ky = 0; ky < k; ++ky) {
          for (std::size_t kx = 0; kx < k; ++kx) {
            const double wv = wk[ky * k + kx];
            for (std::size_t y = 0; y < h; ++y) {
              const double* s = src + (y + ky) * wp + kx;
              double* d = dst + y * wd;
#pragma omp simd
              for (std::size_t xx = 0; xx < wd; ++xx) d[xx] += wv * s[xx];
            }
          }
        }
      }
    }
  }

  auto backprop = [xid, wid, bid, padding, n, ci, co, h, wd, k, p, hp, wp, plane, pplane,
                   padded = std::move(padded)](Graph& g, NodeId self) {
    const Tensor& gout = g.nodes_[self].grad;
    const Tensor& wv = g.nodes_[wid].value;
    if (g.needs(bid)) {
      Tensor& gb = g.grad_of(bid);
      for (std::size_t in = 0; in < n; ++in)
        for (std::size_t o = 0; o < co; ++o) {
          const double* go = gout.ptr() + (in * co + o) * plane;
          double acc = 0.0;
#pragma omp simd reduction(+ : acc)
          for (std::size_t i = 0; i < plane; ++i) acc += go[i];
          gb[o] += acc;
        }
    }
    if (g.needs(wid)) {
      Tensor& gw = g.grad_of(wid);
      for (std::size_t in = 0; in < n; ++in)
        for (std::size_t o = 0; o < co; ++o) {
          const double* go = gout.ptr() + (in * co + o) * plane;
          for (std::size_t c = 0; c < ci; ++c) {
            const double* src = padded.data() + (in * ci + c) * pplane;
            double* gwk = gw.ptr() + (o * ci + c) * k * k;
            for (std::size_t ky = 0; ky < k; ++ky)
              for (std::size_t kx = 0; kx < k; ++kx) {
                double acc = 0.0;
                for (std::size_t y = 0; y < h; ++y) {
                  const double* s = src + (y + ky) * wp + kx;
                  const double* d = go + y * wd;
#pragma omp simd reduction(+ : acc)
                  for (std::size_t xx = 0; xx < wd; ++xx) acc += d[xx] * s[xx];
                }
                gwk[ky * k + kx] += acc;
              }
          }
        }
    }
    if (g.needs(xid)) {
      std::vector<double> gpad(pplane);
      Tensor& gx = g.grad_of(xid);
      for (std::size_t in = 0; in < n; ++in)
        for (std::size_t c = 0; c < ci; ++c) {
          std::fill(gpad.begin(), gpad.end(), 0.0);
          for (std::size_t o = 0; o < co; ++o) {
            const double* go = gout.ptr() + (in * co + o) * plane;
            const double* wk = wv.ptr() + (o * ci + c) * k * k;
            for (std::size_t ky = 0; ky < k; ++ky)
              for (std::size_t kx = 0; kx < k; ++kx) {
                const double wk_v = wk[ky * k + kx];
                for (std::size_t y = 0; y < h; ++y) {
                  double* s = gpad.data() + (y + ky) * wp + kx;
                  const double* d = go + y * wd;
#pragma omp simd
                  for (std::size_t xx = 0; xx < wd; ++xx) s[xx] += wk_v * d[xx];
                }
              }
          }
          unpad_plane_add(gpad.data(), h, wd, p, padding, gx.ptr() + (in * ci + c) * plane);
        }
    }
    (void)hp;
  };
  return push("conv2d", std::move(out), {xid, wid, bid}, std::move(backprop));
}

NodeId Graph::unary(std::string kind, NodeId xid, double (*fwd)(double, double),
                    double (*dfdx)(double, double, double), double arg) {
  const Tensor& x = at(xid).value;
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fwd(x[i], arg);
  auto backprop = [xid, dfdx, arg](Graph& g, NodeId self) {
    const Tensor& gout = g.nodes_[self].grad;
    const Tensor& xv = g.nodes_[xid].value;
    const Tensor& yv = g.nodes_[self].value;
    Tensor& gx = g.grad_of(xid);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gout[i] * dfdx(xv[i], yv[i], arg);
  };
  return push(std::move(kind), std::move(out), {xid}, std::move(backprop));
}

NodeId Graph::relu(NodeId x) {
  return unary(
      "relu", x, [](double v, double) { return v > 0 ? v : 0.0; },
      [](double v, double, double) { return v > 0 ? 1.0 : 0.0; }, 0.0);
}

NodeId Graph::leaky_relu(NodeId x, double slope) {
  return unary(
      "leaky_relu", x, [](double v, double s) { return v > 0 ? v : s * v; },
      [](double v, double, double s) { return v > 0 ? 1.0 : s; }, slope);
}

NodeId Graph::sigmoid(NodeId x) {
  return unary(
      "sigmoid", x, [](double v, double) { return sigmoid_of(v); },
      [](double, double y, double) { return y * (1.0 - y); }, 0.0);
}

NodeId Graph::softplus(NodeId x) {
  return unary(
      "softplus", x, [](double v, double) { return softplus_of(v); },
      [](double v, double, double) { return sigmoid_of(v); }, 0.0);
}

NodeId Graph::scale(NodeId x, double factor) {
  return unary(
      "scale", x, [](double v, double f) { return v * f; },
      [](double, double, double f) { return f; }, factor);
}

NodeId Graph::upsample2x(NodeId xid) {
  const Tensor& x = at(xid).value;
  require_4d(x, "upsample2x", "input");
  const std::size_t nc = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor out(Shape{x.dim(0), x.dim(1), 2 * h, 2 * w});
  for (std::size_t s = 0; s < nc; ++s)
    for (std::size_t y = 0; y < 2 * h; ++y)
      for (std::size_t xx = 0; xx < 2 * w; ++xx)
        out[(s * 2 * h + y) * 2 * w + xx] = x[(s * h + y / 2) * w + xx / 2];
  auto backprop = [xid, nc, h, w](Graph& g, NodeId self) {
    const Tensor& gout = g.nodes_[self].grad;
    Tensor& gx = g.grad_of(xid);
    for (std::size_t s = 0; s < nc; ++s)
      for (std::size_t y = 0; y < 2 * h; ++y)
        for (std::size_t xx = 0; xx < 2 * w; ++xx)
          gx[(s * h + y / 2) * w + xx / 2] += gout[(s * 2 * h + y) * 2 * w + xx];
  };
  return push("upsample2x", std::move(out), {xid}, std::move(backprop));
}

NodeId Graph::max_pool2x2(NodeId xid) {
  const Tensor& x = at(xid).value;
  require_4d(x, "max_pool2x2", "input");
  const std::size_t h = x.dim(2), w = x.dim(3);
  require(h % 2 == 0 && w % 2 == 0, "max_pool2x2",
          "spatial dims must be even, got " + shape_str(x.shape()));
  const std::size_t nc = x.dim(0) * x.dim(1), ho = h / 2, wo = w / 2;
  Tensor out(Shape{x.dim(0), x.dim(1), ho, wo});
  std::vector<std::uint32_t> argmax(out.size());
  for (std::size_t s = 0; s < nc; ++s)
    for (std::size_t y = 0; y < ho; ++y)
      for (std::size_t xx = 0; xx < wo; ++xx) {
        std::size_t best = (s * h + 2 * y) * w + 2 * xx;
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = (s * h + 2 * y + dy) * w + 2 * xx + dx;
            if (x[idx] > x[best]) best = idx;
          }
        const std::size_t o = (s * ho + y) * wo + xx;
        out[o] = x[best];
        argmax[o] = static_cast<std::uint32_t>(best);
      }
  auto backprop = [xid, argmax = std::move(argmax)](Graph& g, NodeId self) {
    const Tensor& gout = g.nodes_[self].grad;
    Tensor& gx = g.grad_of(xid);
    for (std::size_t o = 0; o < argmax.size(); ++o) gx[argmax[o]] += gout[o];
  };
  return push("max_pool2x2", std::move(out), {xid}, std::move(backprop));
}

NodeId Graph::mean_pool2x2(NodeId xid) {
  const Tensor& x = at(xid).value;
  require_4d(x, "mean_pool2x2", "input");
  const std::size_t h = x.dim(2), w = x.dim(3);
  require(h % 2 == 0 && w % 2 == 0, "mean_pool2x2",
          "spatial dims must be even, got " + shape_str(x.shape()));
  const std::size_t nc = x.dim(0) * x.dim(1), ho = h / 2, wo = w / 2;
  Tensor out(Shape{x.dim(0), x.dim(1), ho, wo});
  for (std::size_t s = 0; s < nc; ++s)
    for (std::size_t y = 0; y < ho; ++y)
      for (std::size_t xx = 0; xx < wo; ++xx) {
        const std::size_t base = (s * h + 2 * y) * w + 2 * xx;
        out[(s * ho + y) * wo + xx] = 0.25 * (x[base] + x[base + 1] + x[base + w] + x[base + w + 1]);
      }
  auto backprop = [xid, nc, h, w, ho, wo](Graph& g, NodeId self) {
    const Tensor& gout = g.nodes_[self].grad;
    Tensor& gx = g.grad_of(xid);
    for (std::size_t s = 0; s < nc; ++s)
      for (std::size_t y = 0; y < ho; ++y)
        for (std::size_t xx = 0; xx < wo; ++xx) {
          const double v = 0.25 * gout[(s * ho + y) * wo + xx];
          const std::size_t base = (s * h + 2 * y) * w + 2 * xx;
          gx[base] += v;
          gx[base + 1] += v;
          gx[base + w] += v;
          gx[base + w + 1] += v;
        }
  };
  return push("mean_pool2x2", std::move(out), {xid}, std::move(backprop));
}

NodeId Graph::concat_channels(NodeId aid, NodeId bid) {
  const Tensor& a = at(aid).value;
  const Tensor& b = at(bid).value;
  require_4d(a, "concat_channels", "first input");
  require_4d(b, "concat_channels", "second input");
  require(a.dim(0) == b.dim(0) && a.dim(2) == b.dim(2) && a.dim(3) == b.dim(3), "concat_channels",
          "batch/spatial mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const std::size_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1), plane = a.dim(2) * a.dim(3);
  Tensor out(Shape{n, ca + cb, a.dim(2), a.dim(3)});
  for (std::size_t in = 0; in < n; ++in) {
    std::copy_n(a.ptr() + in * ca * plane, ca * plane, out.ptr() + in * (ca + cb) * plane);
    std::copy_n(b.ptr() + in * cb * plane, cb * plane, out.ptr() + (in * (ca + cb) + ca) * plane);
  }
  auto backprop = [aid, bid, n, ca, cb, plane](Graph& g, NodeId self) {
    const Tensor& gout = g.nodes_[self].grad;
    if (g.needs(aid)) {
      Tensor& ga = g.grad_of(aid);
      for (std::size_t in = 0; in < n; ++in)
        for (std::size_t i = 0; i < ca * plane; ++i)
          ga[in * ca * plane + i] += gout[in * (ca + cb) * plane + i];
    }
    if (g.needs(bid)) {
      Tensor& gb = g.grad_of(bid);
      for (std::size_t in = 0; in < n; ++in)
        for (std::size_t i = 0; i < cb * plane; ++i)
          gb[in * cb * plane + i] += gout[(in * (ca + cb) + ca) * plane + i];
    }
  };
  return push("concat_channels", std::move(out), {aid, bid}, std::move(backprop));
}

NodeId Graph::softmax_channels(NodeId xid) {
  const Tensor& x = at(xid).value;
  require_4d(x, "softmax_channels", "input");
  const std::size_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  Tensor out(x.shape());
  for (std::size_t in = 0; in < n; ++in)
    for (std::size_t i = 0; i < plane; ++i) {
      const double* src = x.ptr() + in * c * plane + i;
      double* dst = out.ptr() + in * c * plane + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < c; ++k) mx = std::max(mx, src[k * plane]);
      double z = 0.0;
      for (std::size_t k = 0; k < c; ++k) z += (dst[k * plane] = std::exp(src[k * plane] - mx));
      for (std::size_t k = 0; k < c; ++k) dst[k * plane] /= z;
    }
  auto backprop = [xid, n, c, plane](Graph& g, NodeId self) {
    const Tensor& gout = g.nodes_[self].grad;
    const Tensor& y = g.nodes_[self].value;
    Tensor& gx = g.grad_of(xid);
    for (std::size_t in = 0; in < n; ++in)
      for (std::size_t i = 0; i < plane; ++i) {
        const std::size_t base = in * c * plane + i;
        double dot = 0.0;
        for (std::size_t k = 0; k < c; ++k) dot += gout[base + k * plane] * y[base + k * plane];
        for (std::size_t k = 0; k < c; ++k)
          gx[base + k * plane] += y[base + k * plane] * (gout[base + k * plane] - dot);
      }
  };
  return push("softmax_channels", std::move(out), {xid}, std::move(backprop));
}

NodeId Graph::add(NodeId aid, NodeId bid) {
  const Tensor& a = at(aid).value;
  const Tensor& b = at(bid).value;
  require(a.shape() == b.shape(), "add",
          "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  auto backprop = [aid, bid](Graph& g, NodeId self) {
    const Tensor& gout = g.nodes_[self].grad;
    for (NodeId id : {aid, bid}) {
      if (!g.needs(id)) continue;
      Tensor& gi = g.grad_of(id);
      for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += gout[i];
    }
  };
  return push("add", std::move(out), {aid, bid}, std::move(backprop));
}

NodeId Graph::mul(NodeId aid, NodeId bid) {
  const Tensor& a = at(aid).value;
  const Tensor& b = at(bid).value;
  require(a.shape() == b.shape(), "mul",
          "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  auto backprop = [aid, bid](Graph& g, NodeId self) {
    const Tensor& gout = g.nodes_[self].grad;
    if (g.needs(aid)) {
      const Tensor& bv = g.nodes_[bid].value;
      Tensor& ga = g.grad_of(aid);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gout[i] * bv[i];
    }
    if (g.needs(bid)) {
      const Tensor& av = g.nodes_[aid].value;
      Tensor& gb = g.grad_of(bid);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gout[i] * av[i];
    }
  };
  return push("mul", std::move(out), {aid, bid}, std::move(backprop));
}

NodeId Graph::sum(NodeId xid) {
  const Tensor& x = at(xid).value;
  double s = 0.0;
  for (double v : x.data()) s += v;
  auto backprop = [xid](Graph& g, NodeId self) {
    const double gv = g.nodes_[self].grad[0];
    Tensor& gx = g.grad_of(xid);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gv;
  };
  return push("sum", Tensor::scalar(s), {xid}, std::move(backprop));
}

NodeId Graph::mean(NodeId xid) {
  const Tensor& x = at(xid).value;
  double s = 0.0;
  for (double v : x.data()) s += v;
  const double inv = 1.0 / static_cast<double>(x.size());
  auto backprop = [xid, inv](Graph& g, NodeId self) {
    const double gv = g.nodes_[self].grad[0] * inv;
    Tensor& gx = g.grad_of(xid);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gv;
  };
  return push("mean", Tensor::scalar(s * inv), {xid}, std::move(backprop));
}

NodeId Graph::mean_abs_diff(NodeId aid, NodeId bid) {
  const Tensor& a = at(aid).value;
  const Tensor& b = at(bid).value;
  require(a.shape() == b.shape(), "mean_abs_diff",
          "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  const double inv = 1.0 / static_cast<double>(a.size());
  auto backprop = [aid, bid, inv](Graph& g, NodeId self) {
    const double gv = g.nodes_[self].grad[0] * inv;
    const Tensor& av = g.nodes_[aid].value;
    const Tensor& bv = g.nodes_[bid].value;
    auto sign = [](double d) { return d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0); };
    if (g.needs(aid)) {
      Tensor& ga = g.grad_of(aid);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gv * sign(av[i] - bv[i]);
    }
    if (g.needs(bid)) {
      Tensor& gb = g.grad_of(bid);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= gv * sign(av[i] - bv[i]);
    }
  };
  return push("mean_abs_diff", Tensor::scalar(s * inv), {aid, bid}, std::move(backprop));
}

NodeId Graph::softmax_cross_entropy(NodeId lid, std::span<const std::uint8_t> labels) {
  const Tensor& x = at(lid).value;
  require_4d(x, "softmax_cross_entropy", "logits");
  const std::size_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  require(labels.size() == n * plane, "softmax_cross_entropy",
          "expected " + std::to_string(n * plane) + " labels for logits " + shape_str(x.shape()) +
              ", got " + std::to_string(labels.size()));
  std::vector<double> probs(x.size());
  std::vector<std::uint8_t> lab(labels.begin(), labels.end());
  double total = 0.0;
  for (std::size_t in = 0; in < n; ++in)
    for (std::size_t i = 0; i < plane; ++i) {
      const std::size_t base = in * c * plane + i;
      const std::size_t label = lab[in * plane + i];
      require(label < c, "softmax_cross_entropy",
              "label " + std::to_string(label) + " out of range for " + std::to_string(c) + " classes");
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < c; ++k) mx = std::max(mx, x[base + k * plane]);
      double z = 0.0;
      for (std::size_t k = 0; k < c; ++k) z += (probs[base + k * plane] = std::exp(x[base + k * plane] - mx));
      for (std::size_t k = 0; k < c; ++k) probs[base + k * plane] /= z;
      total += -(x[base + label * plane] - mx - std::log(z));
    }
  const double inv = 1.0 / static_cast<double>(n * plane);
  auto backprop = [lid, n, c, plane, inv, probs = std::move(probs), lab = std::move(lab)](Graph& g,
                                                                                        NodeId self) {
    const double gv = g.nodes_[self].grad[0] * inv;
    Tensor& gx = g.grad_of(lid);
    for (std::size_t in = 0; in < n; ++in)
      for (std::size_t i = 0; i < plane; ++i) {
        const std::size_t base = in * c * plane + i;
        const std::size_t label = lab[in * plane + i];
        for (std::size_t k = 0; k < c; ++k)
          gx[base + k * plane] += gv * (probs[base + k * plane] - (k == label ? 1.0 : 0.0));
      }
  };
  return push("softmax_cross_entropy", Tensor::scalar(total * inv), {lid}, std::move(backprop));
}

void Graph::backward(NodeId loss) {
  const Node& l = at(loss);
  if (l.value.size() != 1) throw ShapeError("backward: loss must be scalar, got " + shape_str(l.value.shape()));
  if (!std::isfinite(l.value[0])) throw DivergenceError("backward: non-finite loss");
  for (auto& n : nodes_) n.has_grad = false;
  grad_of(loss)[0] = 1.0;
  for (NodeId id = loss + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.has_grad || !n.backprop) continue;
    if (!corrupt_kind_.empty() && n.kind == corrupt_kind_) {
      for (double& v : n.grad.data()) v *= corrupt_factor_;
    }
    n.backprop(*this, id);
  }
}

ParamSet Graph::gradients(const Binding& binding) const {
  ParamSet out;
  for (std::size_t i = 0; i < binding.nodes_.size(); ++i) {
    const Node& n = nodes_.at(binding.nodes_[i]);
    out.add(binding.names_[i], n.has_grad ? n.grad : Tensor(binding.shapes_[i], 0.0));
  }
  return out;
}

}  // namespace fedgrain::ad
