#include "hycot/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

#include "hycot/errors.hpp"
#include "hycot/kernels.hpp"

namespace hycot {

namespace {

std::atomic<std::uint64_t> next_tensor_id{1};

[[noreturn]] void dimension_error(const char* op, const Shape& a, const Shape& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
                       shape_string(b));
}

Shape with_last(Shape s, std::size_t last) {
  s.back() = last;
  return s;
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

// ---- Tensor ---------------------------------------------------------------

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : impl_(std::make_shared<Impl>()) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one axis");
  for (std::size_t e : shape)
    if (e == 0) throw DimensionError("tensor extents must be positive: " + shape_string(shape));
  if (shape_numel(shape) != values.size())
    throw DimensionError("tensor shape " + shape_string(shape) + " does not hold " +
                         std::to_string(values.size()) + " values");
  impl_->shape = std::move(shape);
  impl_->values = std::move(values);
  impl_->requires_grad = requires_grad;
  impl_->id = next_tensor_id.fetch_add(1, std::memory_order_relaxed);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return filled(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

std::uint64_t Tensor::id() const { return impl_->id; }
const Shape& Tensor::shape() const { return impl_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= impl_->shape.size())
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " +
                         shape_string(impl_->shape));
  return impl_->shape[axis];
}

std::size_t Tensor::numel() const { return impl_->values.size(); }
std::span<const double> Tensor::values() const { return impl_->values; }
std::span<double> Tensor::values_mut() const { return impl_->values; }

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape()));
  return impl_->values[0];
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }
void Tensor::set_requires_grad(bool on) { impl_->requires_grad = on; }
bool Tensor::has_grad() const { return !impl_->grad.empty(); }
std::span<const double> Tensor::grad() const { return impl_->grad; }

std::span<double> Tensor::grad_mut() const {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->values.size(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

void Tensor::clear_grad() { impl_->grad.clear(); }

Tensor Tensor::clone() const {
  Tensor t(impl_->shape, impl_->values, impl_->requires_grad);
  t.impl_->grad = impl_->grad;
  return t;
}

// ---- Graph ----------------------------------------------------------------

void Graph::record(Tensor& out, std::initializer_list<const Tensor*> inputs,
                   std::function<void()> rule) {
  if (!recording_) return;
  bool any = false;
  for (const Tensor* t : inputs) any = any || (t->defined() && t->requires_grad());
  if (!any) return;
  out.set_requires_grad(true);
  Node node;
  for (const Tensor* t : inputs)
    if (t->defined()) node.inputs.push_back(t->id());
  node.output = out.id();
  node.output_tensor = out;
  node.backward = std::move(rule);
  nodes_.push_back(std::move(node));
}

void Graph::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw ContractError("backward() needs a scalar loss, got " +
                        (loss.defined() ? shape_string(loss.shape()) : std::string("undefined")));
  if (!loss.requires_grad())
    throw ContractError("backward() on a loss that does not depend on any trainable tensor");
  for (Node& n : nodes_) n.output_tensor.clear_grad();
  Tensor seed = loss;
  seed.grad_mut()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
    if (it->output_tensor.has_grad()) it->backward();
}

// ---- operations -----------------------------------------------------------

Tensor matmul(Graph& g, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    dimension_error("matmul", a.shape(), b.shape());
  const std::size_t m = a.dim(0), p = a.dim(1), n = b.dim(1);
  Tensor out = Tensor::zeros({m, n});
  kernels::active().gemm_nn(m, n, p, a.values().data(), b.values().data(),
                            out.values_mut().data());
  g.record(out, {&a, &b}, [a, b, out, m, n, p]() mutable {
    const double* go = out.grad().data();
    if (a.requires_grad()) kernels::gemm_nt(m, p, n, go, b.values().data(), a.grad_mut().data());
    if (b.requires_grad())
      kernels::active().gemm_tn(p, n, m, a.values().data(), go, b.grad_mut().data());
  });
  return out;
}

Tensor bmm(Graph& g, const Tensor& a, const Tensor& b, bool transpose_b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) ||
      a.dim(2) != (transpose_b ? b.dim(2) : b.dim(1)))
    dimension_error("bmm", a.shape(), b.shape());
  const std::size_t batch = a.dim(0), m = a.dim(1), p = a.dim(2);
  const std::size_t n = transpose_b ? b.dim(1) : b.dim(2);
  Tensor out = Tensor::zeros({batch, m, n});
  const auto& kt = kernels::active();
  for (std::size_t s = 0; s < batch; ++s) {
    const double* as = a.values().data() + s * m * p;
    const double* bs = b.values().data() + s * p * n;
    double* cs = out.values_mut().data() + s * m * n;
    if (transpose_b)
      kernels::gemm_nt(m, n, p, as, bs, cs);
    else
      kt.gemm_nn(m, n, p, as, bs, cs);
  }
  g.record(out, {&a, &b}, [a, b, out, batch, m, n, p, transpose_b]() mutable {
    const auto& kt = kernels::active();
    for (std::size_t s = 0; s < batch; ++s) {
      const double* go = out.grad().data() + s * m * n;
      const double* as = a.values().data() + s * m * p;
      const double* bs = b.values().data() + s * p * n;
      if (a.requires_grad()) {
        double* ga = a.grad_mut().data() + s * m * p;
        if (transpose_b)
          kt.gemm_nn(m, p, n, go, bs, ga);  // dA += dC * B, B stored [n x p]
        else
          kernels::gemm_nt(m, p, n, go, bs, ga);  // dA += dC * B^T
      }
      if (b.requires_grad()) {
        double* gb = b.grad_mut().data() + s * p * n;
        if (transpose_b)
          kt.gemm_tn(n, p, m, go, as, gb);  // dB += dC^T * A
        else
          kt.gemm_tn(p, n, m, as, go, gb);  // dB += A^T * dC
      }
    }
  });
  return out;
}

Tensor linear(Graph& g, const Tensor& x, const Tensor& w, const Tensor& bias) {
  if (w.rank() != 2 || x.shape().back() != w.dim(0)) dimension_error("linear", x.shape(), w.shape());
  const std::size_t in = w.dim(0), outd = w.dim(1);
  if (bias.defined() && bias.numel() != outd) dimension_error("linear bias", w.shape(), bias.shape());
  const std::size_t rows = x.numel() / in;
  Tensor out = Tensor::zeros(with_last(x.shape(), outd));
  double* o = out.values_mut().data();
  kernels::active().gemm_nn(rows, outd, in, x.values().data(), w.values().data(), o);
  if (bias.defined()) {
    const double* bv = bias.values().data();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < outd; ++j) o[r * outd + j] += bv[j];
  }
  g.record(out, {&x, &w, &bias}, [x, w, bias, out, rows, in, outd]() mutable {
    const double* go = out.grad().data();
    if (x.requires_grad()) kernels::gemm_nt(rows, in, outd, go, w.values().data(), x.grad_mut().data());
    if (w.requires_grad())
      kernels::active().gemm_tn(in, outd, rows, x.values().data(), go, w.grad_mut().data());
    if (bias.defined() && bias.requires_grad()) {
      double* gb = bias.grad_mut().data();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < outd; ++j) gb[j] += go[r * outd + j];
    }
  });
  return out;
}

Tensor add(Graph& g, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) dimension_error("add", a.shape(), b.shape());
  Tensor out = a.clone();
  out.set_requires_grad(false);
  out.clear_grad();
  auto o = out.values_mut();
  auto bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  g.record(out, {&a, &b}, [a, b, out]() mutable {
    auto go = out.grad();
    for (const Tensor* t : {&a, &b}) {
      if (!t->requires_grad()) continue;
      auto gt = t->grad_mut();
      for (std::size_t i = 0; i < gt.size(); ++i) gt[i] += go[i];
    }
  });
  return out;
}

Tensor mul(Graph& g, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) dimension_error("mul", a.shape(), b.shape());
  Tensor out = Tensor::zeros(a.shape());
  auto o = out.values_mut();
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] * bv[i];
  g.record(out, {&a, &b}, [a, b, out]() mutable {
    auto go = out.grad();
    if (a.requires_grad()) {
      auto ga = a.grad_mut();
      auto bv = b.values();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i] * bv[i];
    }
    if (b.requires_grad()) {
      auto gb = b.grad_mut();
      auto av = a.values();
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += go[i] * av[i];
    }
  });
  return out;
}

Tensor add_trailing(Graph& g, const Tensor& x, const Tensor& y) {
  const Shape& xs = x.shape();
  const Shape& ys = y.shape();
  if (ys.size() > xs.size() || !std::equal(ys.rbegin(), ys.rend(), xs.rbegin()))
    dimension_error("add_trailing", xs, ys);
  const std::size_t block = y.numel();
  const std::size_t reps = x.numel() / block;
  Tensor out = Tensor::zeros(xs);
  auto o = out.values_mut();
  auto xv = x.values(), yv = y.values();
  for (std::size_t r = 0; r < reps; ++r)
    for (std::size_t j = 0; j < block; ++j) o[r * block + j] = xv[r * block + j] + yv[j];
  g.record(out, {&x, &y}, [x, y, out, reps, block]() mutable {
    auto go = out.grad();
    if (x.requires_grad()) {
      auto gx = x.grad_mut();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i];
    }
    if (y.requires_grad()) {
      auto gy = y.grad_mut();
      for (std::size_t r = 0; r < reps; ++r)
        for (std::size_t j = 0; j < block; ++j) gy[j] += go[r * block + j];
    }
  });
  return out;
}

Tensor scale(Graph& g, const Tensor& x, double factor) {
  Tensor out = Tensor::zeros(x.shape());
  auto o = out.values_mut();
  auto xv = x.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = xv[i] * factor;
  g.record(out, {&x}, [x, out, factor]() mutable {
    auto go = out.grad();
    auto gx = x.grad_mut();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i] * factor;
  });
  return out;
}

Tensor softmax_rows(Graph& g, const Tensor& x) {
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.numel() / n;
  Tensor out = Tensor::zeros(x.shape());
  auto o = out.values_mut();
  auto xv = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * n;
    double* yr = o.data() + r * n;
    const double mx = *std::max_element(xr, xr + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      total += yr[j];
    }
    for (std::size_t j = 0; j < n; ++j) yr[j] /= total;
  }
  g.record(out, {&x}, [x, out, rows, n]() mutable {
    auto go = out.grad();
    auto y = out.values();
    auto gx = x.grad_mut();
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t base = r * n;
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += go[base + j] * y[base + j];
      for (std::size_t j = 0; j < n; ++j) gx[base + j] += y[base + j] * (go[base + j] - dot);
    }
  });
  return out;
}

Tensor layer_norm(Graph& g, const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t d = x.shape().back();
  if (gain.numel() != d || bias.numel() != d) dimension_error("layer_norm", x.shape(), gain.shape());
  const std::size_t rows = x.numel() / d;
  Tensor out = Tensor::zeros(x.shape());
  std::vector<double> xhat(x.numel());
  std::vector<double> inv_std(rows);
  auto o = out.values_mut();
  auto xv = x.values(), gv = gain.values(), bv = bias.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += xr[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (xr[j] - mean) * is;
      xhat[r * d + j] = h;
      o[r * d + j] = gv[j] * h + bv[j];
    }
  }
  g.record(out, {&x, &gain, &bias},
           [x, gain, bias, out, rows, d, xhat = std::move(xhat), inv_std = std::move(inv_std)]() mutable {
             auto go = out.grad();
             if (gain.requires_grad()) {
               auto gg = gain.grad_mut();
               for (std::size_t r = 0; r < rows; ++r)
                 for (std::size_t j = 0; j < d; ++j) gg[j] += go[r * d + j] * xhat[r * d + j];
             }
             if (bias.requires_grad()) {
               auto gb = bias.grad_mut();
               for (std::size_t r = 0; r < rows; ++r)
                 for (std::size_t j = 0; j < d; ++j) gb[j] += go[r * d + j];
             }
             if (x.requires_grad()) {
               auto gx = x.grad_mut();
               auto gv = gain.values();
               const double inv_d = 1.0 / static_cast<double>(d);
               for (std::size_t r = 0; r < rows; ++r) {
                 double mean_dh = 0.0, mean_dh_h = 0.0;
                 for (std::size_t j = 0; j < d; ++j) {
                   const double dh = go[r * d + j] * gv[j];
                   mean_dh += dh;
                   mean_dh_h += dh * xhat[r * d + j];
                 }
                 mean_dh *= inv_d;
                 mean_dh_h *= inv_d;
                 for (std::size_t j = 0; j < d; ++j) {
                   const double dh = go[r * d + j] * gv[j];
                   gx[r * d + j] += inv_std[r] * (dh - mean_dh - xhat[r * d + j] * mean_dh_h);
                 }
               }
             }
           });
  return out;
}

Tensor leaky_relu(Graph& g, const Tensor& x, double slope) {
  Tensor out = Tensor::zeros(x.shape());
  kernels::active().leaky_relu(x.numel(), slope, x.values().data(), out.values_mut().data());
  g.record(out, {&x}, [x, out, slope]() mutable {
    auto go = out.grad();
    auto xv = x.values();
    auto gx = x.grad_mut();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += xv[i] >= 0.0 ? go[i] : slope * go[i];
  });
  return out;
}

Tensor sigmoid(Graph& g, const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  auto o = out.values_mut();
  auto xv = x.values();
  for (std::size_t i = 0; i < o.size(); ++i) {
    const double v = xv[i];
    if (v >= 0.0) {
      o[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      o[i] = e / (1.0 + e);
    }
  }
  g.record(out, {&x}, [x, out]() mutable {
    auto go = out.grad();
    auto y = out.values();
    auto gx = x.grad_mut();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i] * y[i] * (1.0 - y[i]);
  });
  return out;
}

Tensor gelu(Graph& g, const Tensor& x) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  constexpr double inv_sqrt_2pi = 0.39894228040143267794;
  Tensor out = Tensor::zeros(x.shape());
  auto o = out.values_mut();
  auto xv = x.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = 0.5 * xv[i] * (1.0 + std::erf(xv[i] * inv_sqrt2));
  g.record(out, {&x}, [x, out]() mutable {
    auto go = out.grad();
    auto xv = x.values();
    auto gx = x.grad_mut();
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const double v = xv[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
      gx[i] += go[i] * (cdf + v * pdf);
    }
  });
  return out;
}

Tensor sum(Graph& g, const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  Tensor out({1}, {total});
  g.record(out, {&x}, [x, out]() mutable {
    const double go = out.grad()[0];
    for (double& v : x.grad_mut()) v += go;
  });
  return out;
}

Tensor mse(Graph& g, const Tensor& prediction, const Tensor& target) {
  if (prediction.shape() != target.shape()) dimension_error("mse", prediction.shape(), target.shape());
  const std::size_t n = prediction.numel();
  auto pv = prediction.values(), tv = target.values();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = pv[i] - tv[i];
    total += d * d;
  }
  Tensor out({1}, {total / static_cast<double>(n)});
  g.record(out, {&prediction, &target}, [prediction, target, out, n]() mutable {
    const double coef = 2.0 * out.grad()[0] / static_cast<double>(n);
    auto pv = prediction.values(), tv = target.values();
    if (prediction.requires_grad()) {
      auto gp = prediction.grad_mut();
      for (std::size_t i = 0; i < n; ++i) gp[i] += coef * (pv[i] - tv[i]);
    }
    if (target.requires_grad()) {
      auto gt = target.grad_mut();
      for (std::size_t i = 0; i < n; ++i) gt[i] -= coef * (pv[i] - tv[i]);
    }
  });
  return out;
}

Tensor reshape(Graph& g, const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) dimension_error("reshape", x.shape(), shape);
  Tensor out(std::move(shape), std::vector<double>(x.values().begin(), x.values().end()));
  g.record(out, {&x}, [x, out]() mutable {
    auto go = out.grad();
    auto gx = x.grad_mut();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i];
  });
  return out;
}

Tensor slice_last(Graph& g, const Tensor& x, std::size_t offset, std::size_t length) {
  const std::size_t d = x.shape().back();
  if (length == 0 || offset + length > d)
    throw DimensionError("slice_last: columns [" + std::to_string(offset) + ", " +
                         std::to_string(offset + length) + ") outside " + shape_string(x.shape()));
  const std::size_t rows = x.numel() / d;
  Tensor out = Tensor::zeros(with_last(x.shape(), length));
  auto o = out.values_mut();
  auto xv = x.values();
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(xv.data() + r * d + offset, length, o.data() + r * length);
  g.record(out, {&x}, [x, out, rows, d, offset, length]() mutable {
    auto go = out.grad();
    auto gx = x.grad_mut();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < length; ++j) gx[r * d + offset + j] += go[r * length + j];
  });
  return out;
}

Tensor split_heads(Graph& g, const Tensor& x, std::size_t heads) {
  if (x.rank() != 3 || heads == 0 || x.dim(2) % heads != 0)
    dimension_error("split_heads", x.shape(), Shape{heads});
  const std::size_t batch = x.dim(0), n = x.dim(1), d = x.dim(2), dh = d / heads;
  Tensor out = Tensor::zeros({batch * heads, n, dh});
  auto o = out.values_mut();
  auto xv = x.values();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t t = 0; t < n; ++t)
        std::copy_n(xv.data() + (b * n + t) * d + h * dh, dh,
                    o.data() + ((b * heads + h) * n + t) * dh);
  g.record(out, {&x}, [x, out, batch, heads, n, d, dh]() mutable {
    auto go = out.grad();
    auto gx = x.grad_mut();
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t t = 0; t < n; ++t)
          for (std::size_t j = 0; j < dh; ++j)
            gx[(b * n + t) * d + h * dh + j] += go[((b * heads + h) * n + t) * dh + j];
  });
  return out;
}

Tensor merge_heads(Graph& g, const Tensor& x, std::size_t heads) {
  if (x.rank() != 3 || heads == 0 || x.dim(0) % heads != 0)
    dimension_error("merge_heads", x.shape(), Shape{heads});
  const std::size_t batch = x.dim(0) / heads, n = x.dim(1), dh = x.dim(2), d = dh * heads;
  Tensor out = Tensor::zeros({batch, n, d});
  auto o = out.values_mut();
  auto xv = x.values();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t t = 0; t < n; ++t)
        std::copy_n(xv.data() + ((b * heads + h) * n + t) * dh, dh,
                    o.data() + (b * n + t) * d + h * dh);
  g.record(out, {&x}, [x, out, batch, heads, n, d, dh]() mutable {
    auto go = out.grad();
    auto gx = x.grad_mut();
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t t = 0; t < n; ++t)
          for (std::size_t j = 0; j < dh; ++j)
            gx[((b * heads + h) * n + t) * dh + j] += go[(b * n + t) * d + h * dh + j];
  });
  return out;
}

Tensor select_token(Graph& g, const Tensor& x, std::size_t index) {
  if (x.rank() != 3 || index >= x.dim(1)) dimension_error("select_token", x.shape(), Shape{index});
  const std::size_t batch = x.dim(0), n = x.dim(1), d = x.dim(2);
  Tensor out = Tensor::zeros({batch, d});
  auto o = out.values_mut();
  auto xv = x.values();
  for (std::size_t b = 0; b < batch; ++b) std::copy_n(xv.data() + (b * n + index) * d, d, o.data() + b * d);
  g.record(out, {&x}, [x, out, batch, n, d, index]() mutable {
    auto go = out.grad();
    auto gx = x.grad_mut();
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < d; ++j) gx[(b * n + index) * d + j] += go[b * d + j];
  });
  return out;
}

Tensor prepend_token(Graph& g, const Tensor& token, const Tensor& x) {
  if (x.rank() != 3 || token.numel() != x.dim(2)) dimension_error("prepend_token", token.shape(), x.shape());
  const std::size_t batch = x.dim(0), n = x.dim(1), d = x.dim(2);
  Tensor out = Tensor::zeros({batch, n + 1, d});
  auto o = out.values_mut();
  auto xv = x.values(), tv = token.values();
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy_n(tv.data(), d, o.data() + b * (n + 1) * d);
    std::copy_n(xv.data() + b * n * d, n * d, o.data() + (b * (n + 1) + 1) * d);
  }
  g.record(out, {&token, &x}, [token, x, out, batch, n, d]() mutable {
    auto go = out.grad();
    if (token.requires_grad()) {
      auto gt = token.grad_mut();
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t j = 0; j < d; ++j) gt[j] += go[b * (n + 1) * d + j];
    }
    if (x.requires_grad()) {
      auto gx = x.grad_mut();
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < n * d; ++i) gx[b * n * d + i] += go[(b * (n + 1) + 1) * d + i];
    }
  });
  return out;
}

}  // namespace hycot
