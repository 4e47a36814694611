#include "wdiff/autodiff.hpp"

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

namespace wdiff::ad {

using Eigen::Index;
using Eigen::VectorXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConstMat = Eigen::Map<const RowMat>;

Index numel(const Shape& s) {
  Index n = 1;
  for (const auto d : s) n *= d;
  return n;
}

std::string to_string(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? ", " : "") << s[i];
  os << ')';
  return os.str();
}

Tensor::Tensor(Shape s, VectorXd d) : shape(std::move(s)), data(std::move(d)) {
  if (numel(shape) != data.size()) {
    throw Error(ErrorCode::ShapeMismatch, "tensor of shape " + to_string(shape) + " given " +
                                              std::to_string(data.size()) + " values");
  }
}

const Shape& Var::shape() const { return graph_->nodes_[id_].shape; }
const VectorXd& Var::value() const { return graph_->nodes_[id_].value; }

Index Var::dim(int axis) const {
  const auto& s = shape();
  const int r = static_cast<int>(s.size());
  return s[axis < 0 ? axis + r : axis];
}

namespace {

// Per-operand strides of a right-aligned broadcast; zero on broadcast axes.
struct BroadcastPlan {
  Shape out;
  std::vector<Index> sa, sb;
};

std::vector<Index> contiguous_strides(const Shape& s) {
  std::vector<Index> st(s.size(), 1);
  for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i) st[i] = st[i + 1] * s[i + 1];
  return st;
}

bool plan_broadcast(const Shape& a, const Shape& b, BroadcastPlan& p) {
  const std::size_t r = std::max(a.size(), b.size());
  p.out.assign(r, 1);
  p.sa.assign(r, 0);
  p.sb.assign(r, 0);
  const auto sta = contiguous_strides(a);
  const auto stb = contiguous_strides(b);
  for (std::size_t i = 0; i < r; ++i) {
    const std::ptrdiff_t ia = static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(r - a.size());
    const std::ptrdiff_t ib = static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(r - b.size());
    const Index da = ia >= 0 ? a[ia] : 1;
    const Index db = ib >= 0 ? b[ib] : 1;
    if (da != db && da != 1 && db != 1) return false;
    p.out[i] = std::max(da, db);
    if (da != 1) p.sa[i] = sta[ia];
    if (db != 1) p.sb[i] = stb[ib];
  }
  return true;
}

// Calls f(out_index, a_index, b_index) for every element of the output.
template <typename F>
void for_each_broadcast(const BroadcastPlan& p, F&& f) {
  const Index total = numel(p.out);
  if (total == 0) return;
  const int r = static_cast<int>(p.out.size());
  if (r == 0) {
    f(0, 0, 0);
    return;
  }
  const Index inner = p.out[r - 1];
  const Index sa_in = p.sa[r - 1], sb_in = p.sb[r - 1];
  std::vector<Index> idx(r, 0);
  Index oa = 0, ob = 0;
  for (Index o = 0; o < total; o += inner) {
    for (Index i = 0; i < inner; ++i) f(o + i, oa + i * sa_in, ob + i * sb_in);
    for (int d = r - 2; d >= 0; --d) {
      ++idx[d];
      oa += p.sa[d];
      ob += p.sb[d];
      if (idx[d] < p.out[d]) break;
      oa -= p.sa[d] * p.out[d];
      ob -= p.sb[d] * p.out[d];
      idx[d] = 0;
    }
  }
}

int normalize_axis(int axis, std::size_t rank) {
  const int r = static_cast<int>(rank);
  return axis < 0 ? axis + r : axis;
}

}  // namespace

Graph::Graph(bool training, std::uint64_t dropout_seed) : training_(training), dropout_stream_(dropout_seed) {
  nodes_.reserve(256);
}

int Graph::push(std::string op, Shape shape, VectorXd value, bool needs_grad) {
  Node n;
  n.op = std::move(op);
  n.shape = std::move(shape);
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

VectorXd& Graph::grad_buffer(int id) {
  auto& n = nodes_[id];
  if (n.grad.size() != n.value.size()) n.grad = VectorXd::Zero(n.value.size());
  return n.grad;
}

void Graph::check_owned(Var v, const char* op) const {
  if (v.graph() != this || v.id() < 0 || v.id() >= static_cast<int>(nodes_.size())) {
    throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": operand does not belong to this graph");
  }
}

void Graph::shape_error(const std::string& op, const std::string& detail) const {
  throw Error(ErrorCode::ShapeMismatch, op + " (node #" + std::to_string(nodes_.size()) + "): " + detail);
}

namespace {

std::string describe(const std::string& op, int id, const Shape& s) {
  return "'" + op + "'#" + std::to_string(id) + " " + to_string(s);
}

}  // namespace

Var Graph::constant(const Tensor& t, std::string name) { return constant(t.shape, t.data, std::move(name)); }

Var Graph::constant(Shape shape, VectorXd data, std::string name) {
  if (numel(shape) != data.size()) shape_error(name, "shape " + to_string(shape) + " vs " + std::to_string(data.size()) + " values");
  return Var(this, push(std::move(name), std::move(shape), std::move(data), false));
}

Var Graph::parameter(const Tensor& t, std::string name) {
  if (numel(t.shape) != t.data.size()) shape_error(name, "shape " + to_string(t.shape) + " vs data");
  return Var(this, push(std::move(name), t.shape, t.data, true));
}

Var Graph::scalar(double v) { return constant(Shape{}, VectorXd::Constant(1, v), "scalar"); }

template <typename Fwd, typename Da, typename Db>
Var Graph::broadcast_binary(const char* op, Var a, Var b, Fwd fwd, Da da, Db db) {
  check_owned(a, op);
  check_owned(b, op);
  BroadcastPlan plan;
  const Node& na = node(a);
  const Node& nb = node(b);
  if (!plan_broadcast(na.shape, nb.shape, plan)) {
    shape_error(op, "cannot broadcast " + describe(na.op, a.id(), na.shape) + " with " +
                        describe(nb.op, b.id(), nb.shape));
  }
  VectorXd out(numel(plan.out));
  const double* pa = na.value.data();
  const double* pb = nb.value.data();
  double* po = out.data();
  for_each_broadcast(plan, [&](Index o, Index ia, Index ib) { po[o] = fwd(pa[ia], pb[ib]); });
  const bool needs = na.needs_grad || nb.needs_grad;
  const int id = push(op, plan.out, std::move(out), needs);
  if (needs) {
    const int ida = a.id(), idb = b.id();
    nodes_[id].backward = [this, id, ida, idb, plan, da, db]() {
      const VectorXd& go = nodes_[id].grad;
      const VectorXd& va = nodes_[ida].value;
      const VectorXd& vb = nodes_[idb].value;
      if (nodes_[ida].needs_grad) {
        double* ga = grad_buffer(ida).data();
        for_each_broadcast(plan, [&](Index o, Index ia, Index ib) { ga[ia] += da(va[ia], vb[ib], go[o]); });
      }
      if (nodes_[idb].needs_grad) {
        double* gb = grad_buffer(idb).data();
        for_each_broadcast(plan, [&](Index o, Index ia, Index ib) { gb[ib] += db(va[ia], vb[ib], go[o]); });
      }
    };
  }
  return Var(this, id);
}

Var Graph::add(Var a, Var b) {
  return broadcast_binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double, double g) { return g; },
      [](double, double, double g) { return g; });
}

Var Graph::sub(Var a, Var b) {
  return broadcast_binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double, double g) { return g; },
      [](double, double, double g) { return -g; });
}

Var Graph::mul(Var a, Var b) {
  return broadcast_binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y, double g) { return g * y; },
      [](double x, double, double g) { return g * x; });
}

Var Graph::scale(Var a, double s) {
  check_owned(a, "scale");
  const Node& na = node(a);
  const int id = push("scale", na.shape, na.value * s, na.needs_grad);
  if (nodes_[id].needs_grad) {
    const int ia = a.id();
    nodes_[id].backward = [this, id, ia, s]() { grad_buffer(ia) += s * nodes_[id].grad; };
  }
  return Var(this, id);
}

Var Graph::add_scalar(Var a, double s) {
  check_owned(a, "add_scalar");
  const Node& na = node(a);
  const int id = push("add_scalar", na.shape, (na.value.array() + s).matrix(), na.needs_grad);
  if (nodes_[id].needs_grad) {
    const int ia = a.id();
    nodes_[id].backward = [this, id, ia]() { grad_buffer(ia) += nodes_[id].grad; };
  }
  return Var(this, id);
}

#define WDIFF_UNARY(NAME, FWD, DERIV)                                                                       \
  Var Graph::NAME(Var a) {                                                                                  \
    check_owned(a, #NAME);                                                                                  \
    const Node& na = node(a);                                                                               \
    VectorXd out(na.value.size());                                                                          \
    for (Index i = 0; i < out.size(); ++i) {                                                                \
      const double x = na.value[i];                                                                         \
      out[i] = (FWD);                                                                                       \
    }                                                                                                       \
    const int id = push(#NAME, na.shape, std::move(out), na.needs_grad);                                    \
    if (nodes_[id].needs_grad) {                                                                                    \
      const int ia = a.id();                                                                                \
      nodes_[id].backward = [this, id, ia]() {                                                              \
        const VectorXd& go = nodes_[id].grad;                                                               \
        const VectorXd& xs = nodes_[ia].value;                                                              \
        const VectorXd& ys = nodes_[id].value;                                                              \
        VectorXd& gi = grad_buffer(ia);                                                                     \
        for (Index i = 0; i < go.size(); ++i) {                                                             \
          const double x = xs[i];                                                                           \
          const double y = ys[i];                                                                           \
          (void)x;                                                                                          \
          (void)y;                                                                                          \
          gi[i] += go[i] * (DERIV);                                                                         \
        }                                                                                                   \
      };                                                                                                    \
    }                                                                                                       \
    return Var(this, id);                                                                                   \
  }

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

WDIFF_UNARY(gelu, 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)),
            0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x))
WDIFF_UNARY(sigmoid, 1.0 / (1.0 + std::exp(-x)), y * (1.0 - y))
WDIFF_UNARY(square, x * x, 2.0 * x)
WDIFF_UNARY(abs, std::abs(x), (x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0)))

#undef WDIFF_UNARY

Var Graph::dropout(Var a, double rate) {
  check_owned(a, "dropout");
  if (!training_ || rate <= 0.0) return a;
  if (rate >= 1.0) shape_error("dropout", "rate must be below 1");
  const Node& na = node(a);
  const double keep = 1.0 / (1.0 - rate);
  VectorXd mask(na.value.size());
  for (Index i = 0; i < mask.size(); ++i) mask[i] = dropout_stream_.uniform() < rate ? 0.0 : keep;
  const int id = push("dropout", na.shape, na.value.cwiseProduct(mask), na.needs_grad);
  if (nodes_[id].needs_grad) {
    const int ia = a.id();
    nodes_[id].backward = [this, id, ia, mask = std::move(mask)]() {
      grad_buffer(ia) += nodes_[id].grad.cwiseProduct(mask);
    };
  }
  return Var(this, id);
}

Var Graph::matmul(Var a, Var b) {
  check_owned(a, "matmul");
  check_owned(b, "matmul");
  const Node& na = node(a);
  const Node& nb = node(b);
  if (na.shape.empty() || nb.shape.size() != 2 || na.shape.back() != nb.shape[0]) {
    shape_error("matmul", "incompatible operands " + describe(na.op, a.id(), na.shape) + " x " +
                              describe(nb.op, b.id(), nb.shape));
  }
  const Index k = nb.shape[0], n = nb.shape[1];
  const Index rows = na.value.size() / k;
  Shape out_shape = na.shape;
  out_shape.back() = n;
  VectorXd out(rows * n);
  MapMat(out.data(), rows, n).noalias() = MapConstMat(na.value.data(), rows, k) * MapConstMat(nb.value.data(), k, n);
  const bool needs = na.needs_grad || nb.needs_grad;
  const int id = push("matmul", std::move(out_shape), std::move(out), needs);
  if (needs) {
    const int ia = a.id(), ib = b.id();
    nodes_[id].backward = [this, id, ia, ib, rows, k, n]() {
      MapConstMat go(nodes_[id].grad.data(), rows, n);
      if (nodes_[ia].needs_grad) {
        MapMat(grad_buffer(ia).data(), rows, k).noalias() += go * MapConstMat(nodes_[ib].value.data(), k, n).transpose();
      }
      if (nodes_[ib].needs_grad) {
        MapMat(grad_buffer(ib).data(), k, n).noalias() += MapConstMat(nodes_[ia].value.data(), rows, k).transpose() * go;
      }
    };
  }
  return Var(this, id);
}

Var Graph::bmm(Var a, Var b, bool transpose_b) {
  check_owned(a, "bmm");
  check_owned(b, "bmm");
  const Node& na = node(a);
  const Node& nb = node(b);
  const auto fail = [&]() {
    shape_error("bmm", "incompatible operands " + describe(na.op, a.id(), na.shape) + " x " +
                           describe(nb.op, b.id(), nb.shape) + (transpose_b ? " (transposed)" : ""));
  };
  if (na.shape.size() < 2 || na.shape.size() != nb.shape.size()) fail();
  const std::size_t r = na.shape.size();
  for (std::size_t i = 0; i + 2 < r; ++i) {
    if (na.shape[i] != nb.shape[i]) fail();
  }
  const Index m = na.shape[r - 2], k = na.shape[r - 1];
  const Index bk = transpose_b ? nb.shape[r - 1] : nb.shape[r - 2];
  const Index n = transpose_b ? nb.shape[r - 2] : nb.shape[r - 1];
  if (bk != k) fail();
  const Index batches = m * k == 0 ? 0 : na.value.size() / (m * k);
  Shape out_shape = na.shape;
  out_shape[r - 1] = n;
  VectorXd out(batches * m * n);
  for (Index i = 0; i < batches; ++i) {
    MapConstMat A(na.value.data() + i * m * k, m, k);
    MapMat Y(out.data() + i * m * n, m, n);
    if (transpose_b) {
      Y.noalias() = A * MapConstMat(nb.value.data() + i * n * k, n, k).transpose();
    } else {
      Y.noalias() = A * MapConstMat(nb.value.data() + i * k * n, k, n);
    }
  }
  const bool needs = na.needs_grad || nb.needs_grad;
  const int id = push("bmm", std::move(out_shape), std::move(out), needs);
  if (needs) {
    const int ia = a.id(), ib = b.id();
    nodes_[id].backward = [this, id, ia, ib, batches, m, k, n, transpose_b]() {
      const bool ga_needed = nodes_[ia].needs_grad;
      const bool gb_needed = nodes_[ib].needs_grad;
      double* ga = ga_needed ? grad_buffer(ia).data() : nullptr;
      double* gb = gb_needed ? grad_buffer(ib).data() : nullptr;
      const double* va = nodes_[ia].value.data();
      const double* vb = nodes_[ib].value.data();
      const double* go = nodes_[id].grad.data();
      for (Index i = 0; i < batches; ++i) {
        MapConstMat G(go + i * m * n, m, n);
        MapConstMat A(va + i * m * k, m, k);
        if (transpose_b) {
          MapConstMat B(vb + i * n * k, n, k);
          if (ga) MapMat(ga + i * m * k, m, k).noalias() += G * B;
          if (gb) MapMat(gb + i * n * k, n, k).noalias() += G.transpose() * A;
        } else {
          MapConstMat B(vb + i * k * n, k, n);
          if (ga) MapMat(ga + i * m * k, m, k).noalias() += G * B.transpose();
          if (gb) MapMat(gb + i * k * n, k, n).noalias() += A.transpose() * G;
        }
      }
    };
  }
  return Var(this, id);
}

Var Graph::softmax(Var a) {
  check_owned(a, "softmax");
  const Node& na = node(a);
  if (na.shape.empty() || na.shape.back() == 0) shape_error("softmax", "needs a non-empty last axis, got " + describe(na.op, a.id(), na.shape));
  const Index cols = na.shape.back();
  const Index rows = na.value.size() / cols;
  VectorXd out(na.value.size());
  MapConstMat x(na.value.data(), rows, cols);
  MapMat y(out.data(), rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const double mx = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - mx).exp();
    y.row(r) /= y.row(r).sum();
  }
  const int id = push("softmax", na.shape, std::move(out), na.needs_grad);
  if (nodes_[id].needs_grad) {
    const int ia = a.id();
    nodes_[id].backward = [this, id, ia, rows, cols]() {
      MapConstMat Y(nodes_[id].value.data(), rows, cols);
      MapConstMat G(nodes_[id].grad.data(), rows, cols);
      MapMat GI(grad_buffer(ia).data(), rows, cols);
      const Eigen::VectorXd dots = (G.array() * Y.array()).rowwise().sum();
      GI.array() += Y.array() * (G.array().colwise() - dots.array());
    };
  }
  return Var(this, id);
}

Var Graph::layer_norm(Var a, double eps) {
  check_owned(a, "layer_norm");
  const Node& na = node(a);
  if (na.shape.empty() || na.shape.back() == 0) shape_error("layer_norm", "needs a non-empty last axis, got " + describe(na.op, a.id(), na.shape));
  const Index cols = na.shape.back();
  const Index rows = na.value.size() / cols;
  VectorXd out(na.value.size());
  VectorXd inv_sigma(rows);
  MapConstMat x(na.value.data(), rows, cols);
  MapMat y(out.data(), rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().mean();
    inv_sigma[r] = 1.0 / std::sqrt(var + eps);
    y.row(r) = (x.row(r).array() - mu) * inv_sigma[r];
  }
  const int id = push("layer_norm", na.shape, std::move(out), na.needs_grad);
  if (nodes_[id].needs_grad) {
    const int ia = a.id();
    nodes_[id].backward = [this, id, ia, rows, cols, inv_sigma = std::move(inv_sigma)]() {
      MapConstMat Y(nodes_[id].value.data(), rows, cols);
      MapConstMat G(nodes_[id].grad.data(), rows, cols);
      MapMat GI(grad_buffer(ia).data(), rows, cols);
      for (Index r = 0; r < rows; ++r) {
        const double mg = G.row(r).mean();
        const double mgy = G.row(r).dot(Y.row(r)) / static_cast<double>(cols);
        GI.row(r).array() += inv_sigma[r] * (G.row(r).array() - mg - Y.row(r).array() * mgy);
      }
    };
  }
  return Var(this, id);
}

Var Graph::reshape(Var a, Shape shape) {
  check_owned(a, "reshape");
  const Node& na = node(a);
  if (numel(shape) != na.value.size()) {
    shape_error("reshape", "cannot view " + describe(na.op, a.id(), na.shape) + " as " + to_string(shape));
  }
  const int id = push("reshape", std::move(shape), na.value, na.needs_grad);
  if (nodes_[id].needs_grad) {
    const int ia = a.id();
    nodes_[id].backward = [this, id, ia]() { grad_buffer(ia) += nodes_[id].grad; };
  }
  return Var(this, id);
}

Var Graph::permute(Var a, const std::vector<int>& axes) {
  check_owned(a, "permute");
  const Node& na = node(a);
  const std::size_t r = na.shape.size();
  std::vector<bool> seen(r, false);
  bool ok = axes.size() == r;
  for (std::size_t i = 0; ok && i < r; ++i) {
    const int ax = axes[i];
    ok = ax >= 0 && static_cast<std::size_t>(ax) < r && !seen[ax];
    if (ok) seen[ax] = true;
  }
  if (!ok) shape_error("permute", "invalid axis order for " + describe(na.op, a.id(), na.shape));

  Shape out_shape(r);
  std::vector<Index> src_strides(r);
  const auto in_strides = contiguous_strides(na.shape);
  for (std::size_t i = 0; i < r; ++i) {
    out_shape[i] = na.shape[axes[i]];
    src_strides[i] = in_strides[axes[i]];
  }
  // Gather map: output element o reads input element src[o].
  BroadcastPlan plan;
  plan.out = out_shape;
  plan.sa = src_strides;
  plan.sb.assign(r, 0);
  std::vector<Index> src(numel(out_shape));
  for_each_broadcast(plan, [&](Index o, Index ia, Index) { src[o] = ia; });
  VectorXd out(src.size());
  for (std::size_t o = 0; o < src.size(); ++o) out[static_cast<Index>(o)] = na.value[src[o]];
  const int id = push("permute", std::move(out_shape), std::move(out), na.needs_grad);
  if (nodes_[id].needs_grad) {
    const int ia = a.id();
    nodes_[id].backward = [this, id, ia, src = std::move(src)]() {
      VectorXd& gi = grad_buffer(ia);
      const VectorXd& go = nodes_[id].grad;
      for (std::size_t o = 0; o < src.size(); ++o) gi[src[o]] += go[static_cast<Index>(o)];
    };
  }
  return Var(this, id);
}

Var Graph::concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) shape_error("concat", "no operands");
  for (const auto& p : parts) check_owned(p, "concat");
  const Shape& first = node(parts[0]).shape;
  const int ax = normalize_axis(axis, first.size());
  if (ax < 0 || ax >= static_cast<int>(first.size())) shape_error("concat", "axis out of range for " + to_string(first));
  Shape out_shape = first;
  out_shape[ax] = 0;
  bool needs = false;
  for (const auto& p : parts) {
    const Node& np = node(p);
    bool match = np.shape.size() == first.size();
    for (std::size_t i = 0; match && i < first.size(); ++i) {
      if (static_cast<int>(i) != ax && np.shape[i] != first[i]) match = false;
    }
    if (!match) {
      shape_error("concat", describe(np.op, p.id(), np.shape) + " does not match " + to_string(first) +
                                " outside axis " + std::to_string(ax));
    }
    out_shape[ax] += np.shape[ax];
    needs = needs || np.needs_grad;
  }
  Index outer = 1, inner = 1;
  for (int i = 0; i < ax; ++i) outer *= first[i];
  for (std::size_t i = ax + 1; i < first.size(); ++i) inner *= first[i];
  const Index out_row = out_shape[ax] * inner;

  VectorXd out(numel(out_shape));
  std::vector<int> ids;
  std::vector<Index> widths;
  Index offset = 0;
  for (const auto& p : parts) {
    const Node& np = node(p);
    const Index w = np.shape[ax] * inner;
    for (Index o = 0; o < outer; ++o) out.segment(o * out_row + offset, w) = np.value.segment(o * w, w);
    ids.push_back(p.id());
    widths.push_back(w);
    offset += w;
  }
  const int id = push("concat", std::move(out_shape), std::move(out), needs);
  if (needs) {
    nodes_[id].backward = [this, id, ids = std::move(ids), widths = std::move(widths), outer, out_row]() {
      Index off = 0;
      for (std::size_t p = 0; p < ids.size(); ++p) {
        const Index w = widths[p];
        if (nodes_[ids[p]].needs_grad) {
          VectorXd& gi = grad_buffer(ids[p]);
          const VectorXd& go = nodes_[id].grad;
          for (Index o = 0; o < outer; ++o) gi.segment(o * w, w) += go.segment(o * out_row + off, w);
        }
        off += w;
      }
    };
  }
  return Var(this, id);
}

Var Graph::slice(Var a, int axis, Index start, Index length) {
  check_owned(a, "slice");
  const Node& na = node(a);
  const int ax = normalize_axis(axis, na.shape.size());
  if (ax < 0 || ax >= static_cast<int>(na.shape.size()) || start < 0 || length < 0 ||
      start + length > na.shape[ax]) {
    shape_error("slice", "range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                             ") on axis " + std::to_string(axis) + " of " + describe(na.op, a.id(), na.shape));
  }
  Index outer = 1, inner = 1;
  for (int i = 0; i < ax; ++i) outer *= na.shape[i];
  for (std::size_t i = ax + 1; i < na.shape.size(); ++i) inner *= na.shape[i];
  const Index in_row = na.shape[ax] * inner;
  const Index w = length * inner;
  const Index off = start * inner;
  Shape out_shape = na.shape;
  out_shape[ax] = length;
  VectorXd out(outer * w);
  for (Index o = 0; o < outer; ++o) out.segment(o * w, w) = na.value.segment(o * in_row + off, w);
  const int id = push("slice", std::move(out_shape), std::move(out), na.needs_grad);
  if (nodes_[id].needs_grad) {
    const int ia = a.id();
    nodes_[id].backward = [this, id, ia, outer, in_row, w, off]() {
      VectorXd& gi = grad_buffer(ia);
      const VectorXd& go = nodes_[id].grad;
      for (Index o = 0; o < outer; ++o) gi.segment(o * in_row + off, w) += go.segment(o * w, w);
    };
  }
  return Var(this, id);
}

Var Graph::sum(Var a) {
  check_owned(a, "sum");
  const Node& na = node(a);
  const int id = push("sum", Shape{}, VectorXd::Constant(1, na.value.sum()), na.needs_grad);
  if (nodes_[id].needs_grad) {
    const int ia = a.id();
    nodes_[id].backward = [this, id, ia]() { grad_buffer(ia).array() += nodes_[id].grad[0]; };
  }
  return Var(this, id);
}

Var Graph::mean(Var a) {
  check_owned(a, "mean");
  const Index n = node(a).value.size();
  if (n == 0) shape_error("mean", "empty operand");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

void Graph::backward(Var loss) {
  check_owned(loss, "backward");
  if (backward_done_) {
    throw Error(ErrorCode::GraphStateError, "backward already ran on this graph; call reset_grads() first");
  }
  if (node(loss).value.size() != 1) {
    shape_error("backward", "loss must be a scalar, got " + describe(node(loss).op, loss.id(), node(loss).shape));
  }
  backward_done_ = true;
  for (auto& n : nodes_) n.grad.resize(0);
  grad_buffer(loss.id())[0] = 1.0;
  for (int i = loss.id(); i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.backward && n.grad.size() == n.value.size() && n.value.size() > 0) n.backward();
  }
}

void Graph::reset_grads() {
  for (auto& n : nodes_) n.grad.resize(0);
  backward_done_ = false;
}

VectorXd Graph::grad(Var v) const {
  check_owned(v, "grad");
  const Node& n = node(v);
  if (n.grad.size() != n.value.size()) return VectorXd::Zero(n.value.size());
  return n.grad;
}

Var operator+(Var a, Var b) { return a.graph()->add(a, b); }
Var operator-(Var a, Var b) { return a.graph()->sub(a, b); }
Var operator*(Var a, Var b) { return a.graph()->mul(a, b); }
Var operator*(double s, Var a) { return a.graph()->scale(a, s); }

FiniteDiffResult finite_diff_check(const std::function<double(const std::vector<Tensor>&)>& f,
                                   std::vector<Tensor> params, const std::vector<VectorXd>& grads, double h,
                                   int coords, std::uint64_t seed, double floor) {
  if (grads.size() != params.size()) throw Error(ErrorCode::ShapeMismatch, "finite_diff_check: gradient count");
  std::vector<std::pair<std::size_t, Index>> all;
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (grads[p].size() != params[p].data.size()) throw Error(ErrorCode::ShapeMismatch, "finite_diff_check: gradient size");
    for (Index i = 0; i < params[p].data.size(); ++i) all.emplace_back(p, i);
  }
  std::vector<std::pair<std::size_t, Index>> chosen;
  if (coords <= 0 || static_cast<std::size_t>(coords) >= all.size()) {
    chosen = all;
  } else {
    NoiseStream stream(seed);
    std::set<std::size_t> picked;
    while (picked.size() < static_cast<std::size_t>(coords)) picked.insert(stream.below(all.size()));
    for (const auto k : picked) chosen.push_back(all[k]);
  }
  FiniteDiffResult res;
  for (const auto& [p, i] : chosen) {
    const double orig = params[p].data[i];
    params[p].data[i] = orig + h;
    const double up = f(params);
    params[p].data[i] = orig - h;
    const double down = f(params);
    params[p].data[i] = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double analytic = grads[p][i];
    const double denom = std::max({std::abs(numeric), std::abs(analytic), floor});
    res.max_rel_error = std::max(res.max_rel_error, std::abs(numeric - analytic) / denom);
    ++res.coordinates;
  }
  return res;
}

}  // namespace wdiff::ad
