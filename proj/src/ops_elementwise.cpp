#include "src/ops_common.hpp"

namespace senh {

using detail::attach;
using detail::require;

namespace {

void check_binary(const char* op, const Tensor& a, const Tensor& b) {
  if (b.numel() == 1) return;
  if (a.shape() != b.shape())
    detail::fail_shape(op, "shape mismatch " + shape_str(a.shape()) + " vs " +
                               shape_str(b.shape()));
}

Tensor sum_to_scalar(const Tensor& g) {
  double s = 0.0;
  for (double v : g.data()) s += v;
  return Tensor::scalar(s);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_binary("add", a, b);
  const bool bs = b.numel() == 1 && a.numel() != 1;
  Tensor out(a.shape());
  const double* pa = a.ptr();
  const double* pb = b.ptr();
  double* po = out.ptr();
  const int64_t n = a.numel();
  if (bs) {
    const double v = pb[0];
    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] + v;
  } else {
    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
  }
  attach("add", out, {&a, &b},
         [bs](const Tensor& g, const std::vector<char>& need) -> std::vector<Tensor> {
           std::vector<Tensor> gs(2);
           if (need[0]) gs[0] = g;
           if (need[1]) gs[1] = bs ? sum_to_scalar(g) : g;
           return gs;
         });
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_binary("sub", a, b);
  const bool bs = b.numel() == 1 && a.numel() != 1;
  Tensor out(a.shape());
  const double* pa = a.ptr();
  const double* pb = b.ptr();
  double* po = out.ptr();
  const int64_t n = a.numel();
  if (bs) {
    const double v = pb[0];
    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] - v;
  } else {
    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] - pb[i];
  }
  attach("sub", out, {&a, &b},
         [bs](const Tensor& g, const std::vector<char>& need) -> std::vector<Tensor> {
           std::vector<Tensor> gs(2);
           if (need[0]) gs[0] = g;
           if (need[1]) {
             if (bs) {
               Tensor s = sum_to_scalar(g);
               s.ptr()[0] = -s.ptr()[0];
               gs[1] = s;
             } else {
               Tensor ng(g.shape());
               const double* pg = g.ptr();
               double* pn = ng.ptr();
               for (int64_t i = 0; i < g.numel(); ++i) pn[i] = -pg[i];
               gs[1] = ng;
             }
           }
           return gs;
         });
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_binary("mul", a, b);
  const bool bs = b.numel() == 1 && a.numel() != 1;
  Tensor out(a.shape());
  const double* pa = a.ptr();
  const double* pb = b.ptr();
  double* po = out.ptr();
  const int64_t n = a.numel();
  if (bs) {
    const double v = pb[0];
    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] * v;
  } else {
    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
  }
  attach("mul", out, {&a, &b},
         [a, b, bs](const Tensor& g, const std::vector<char>& need) -> std::vector<Tensor> {
           std::vector<Tensor> gs(2);
           const double* pg = g.ptr();
           const int64_t n = g.numel();
           if (need[0]) {
             Tensor ga(g.shape());
             double* p = ga.ptr();
             if (bs) {
               const double v = b.ptr()[0];
               for (int64_t i = 0; i < n; ++i) p[i] = pg[i] * v;
             } else {
               const double* pb = b.ptr();
               for (int64_t i = 0; i < n; ++i) p[i] = pg[i] * pb[i];
             }
             gs[0] = ga;
           }
           if (need[1]) {
             const double* pa = a.ptr();
             if (bs) {
               double s = 0.0;
               for (int64_t i = 0; i < n; ++i) s += pg[i] * pa[i];
               gs[1] = Tensor::scalar(s);
             } else {
               Tensor gb(g.shape());
               double* p = gb.ptr();
               for (int64_t i = 0; i < n; ++i) p[i] = pg[i] * pa[i];
               gs[1] = gb;
             }
           }
           return gs;
         });
  return out;
}

Tensor div(const Tensor& a, const Tensor& b) {
  check_binary("div", a, b);
  const bool bs = b.numel() == 1 && a.numel() != 1;
  Tensor out(a.shape());
  const double* pa = a.ptr();
  const double* pb = b.ptr();
  double* po = out.ptr();
  const int64_t n = a.numel();
  if (bs) {
    const double v = pb[0];
    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] / v;
  } else {
    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] / pb[i];
  }
  attach("div", out, {&a, &b},
         [a, b, bs](const Tensor& g, const std::vector<char>& need) -> std::vector<Tensor> {
           std::vector<Tensor> gs(2);
           const double* pg = g.ptr();
           const double* pa = a.ptr();
           const double* pb = b.ptr();
           const int64_t n = g.numel();
           if (need[0]) {
             Tensor ga(g.shape());
             double* p = ga.ptr();
             if (bs) {
               const double inv = 1.0 / pb[0];
               for (int64_t i = 0; i < n; ++i) p[i] = pg[i] * inv;
             } else {
               for (int64_t i = 0; i < n; ++i) p[i] = pg[i] / pb[i];
             }
             gs[0] = ga;
           }
           if (need[1]) {
             if (bs) {
               const double inv2 = 1.0 / (pb[0] * pb[0]);
               double s = 0.0;
               for (int64_t i = 0; i < n; ++i) s -= pg[i] * pa[i] * inv2;
               gs[1] = Tensor::scalar(s);
             } else {
               Tensor gb(g.shape());
               double* p = gb.ptr();
               for (int64_t i = 0; i < n; ++i) p[i] = -pg[i] * pa[i] / (pb[i] * pb[i]);
               gs[1] = gb;
             }
           }
           return gs;
         });
  return out;
}

Tensor scale(const Tensor& a, double s) {
  Tensor out(a.shape());
  const double* pa = a.ptr();
  double* po = out.ptr();
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = pa[i] * s;
  attach("scale", out, {&a},
         [s](const Tensor& g, const std::vector<char>&) -> std::vector<Tensor> {
           Tensor ga(g.shape());
           const double* pg = g.ptr();
           double* p = ga.ptr();
           for (int64_t i = 0; i < g.numel(); ++i) p[i] = pg[i] * s;
           return {ga};
         });
  return out;
}

Tensor add_scalar(const Tensor& a, double s) {
  Tensor out(a.shape());
  const double* pa = a.ptr();
  double* po = out.ptr();
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = pa[i] + s;
  attach("add_scalar", out, {&a},
         [](const Tensor& g, const std::vector<char>&) -> std::vector<Tensor> { return {g}; });
  return out;
}

Tensor sigmoid(const Tensor& a) {
  Tensor out(a.shape());
  const double* pa = a.ptr();
  double* po = out.ptr();
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = 1.0 / (1.0 + std::exp(-pa[i]));
  attach("sigmoid", out, {&a},
         [out](const Tensor& g, const std::vector<char>&) -> std::vector<Tensor> {
           Tensor ga(g.shape());
           const double* pg = g.ptr();
           const double* py = out.ptr();
           double* p = ga.ptr();
           for (int64_t i = 0; i < g.numel(); ++i) p[i] = pg[i] * py[i] * (1.0 - py[i]);
           return {ga};
         });
  return out;
}

Tensor gelu(const Tensor& a) {
  static const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  static const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * M_PI);
  Tensor out(a.shape());
  const double* pa = a.ptr();
  double* po = out.ptr();
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i)
    po[i] = 0.5 * pa[i] * (1.0 + std::erf(pa[i] * inv_sqrt2));
  attach("gelu", out, {&a},
         [a](const Tensor& g, const std::vector<char>&) -> std::vector<Tensor> {
           Tensor ga(g.shape());
           const double* pg = g.ptr();
           const double* px = a.ptr();
           double* p = ga.ptr();
           for (int64_t i = 0; i < g.numel(); ++i) {
             const double x = px[i];
             const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
             const double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
             p[i] = pg[i] * (cdf + x * pdf);
           }
           return {ga};
         });
  return out;
}

Tensor abs(const Tensor& a) {
  Tensor out(a.shape());
  const double* pa = a.ptr();
  double* po = out.ptr();
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = std::abs(pa[i]);
  attach("abs", out, {&a},
         [a](const Tensor& g, const std::vector<char>&) -> std::vector<Tensor> {
           Tensor ga(g.shape());
           const double* pg = g.ptr();
           const double* px = a.ptr();
           double* p = ga.ptr();
           for (int64_t i = 0; i < g.numel(); ++i) {
             const double x = px[i];
             p[i] = x > 0.0 ? pg[i] : (x < 0.0 ? -pg[i] : 0.0);
           }
           return {ga};
         });
  return out;
}

Tensor reduce_sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  Tensor out = Tensor::scalar(s);
  attach("reduce_sum", out, {&a},
         [shape = a.shape()](const Tensor& g, const std::vector<char>&) -> std::vector<Tensor> {
           return {Tensor(shape, g.value())};
         });
  return out;
}

Tensor reduce_mean(const Tensor& a) {
  const int64_t n = a.numel();
  double s = 0.0;
  for (double v : a.data()) s += v;
  Tensor out = Tensor::scalar(s / static_cast<double>(n));
  attach("reduce_mean", out, {&a},
         [shape = a.shape(), n](const Tensor& g, const std::vector<char>&) -> std::vector<Tensor> {
           return {Tensor(shape, g.value() / static_cast<double>(n))};
         });
  return out;
}

}  // namespace senh
