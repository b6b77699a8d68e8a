#include "src/ops_common.hpp"

namespace senh {

using detail::attach;
using detail::require;
using detail::require_rank4;

namespace {

std::vector<int64_t> strides_of(const Shape& s) {
  std::vector<int64_t> st(s.size());
  int64_t acc = 1;
  for (int i = static_cast<int>(s.size()) - 1; i >= 0; --i) {
    st[static_cast<size_t>(i)] = acc;
    acc *= s[static_cast<size_t>(i)];
  }
  return st;
}

Tensor permute_raw(const Tensor& a, const std::vector<int>& order) {
  const int r = a.rank();
  Shape out_shape(static_cast<size_t>(r));
  for (int i = 0; i < r; ++i) out_shape[static_cast<size_t>(i)] = a.extent(order[static_cast<size_t>(i)]);
  Tensor out(out_shape);
  const auto in_strides = strides_of(a.shape());
  // Stride of the input axis that lands at output position i.
  std::vector<int64_t> gather(static_cast<size_t>(r));
  for (int i = 0; i < r; ++i) gather[static_cast<size_t>(i)] = in_strides[static_cast<size_t>(order[static_cast<size_t>(i)])];
  const auto out_strides = strides_of(out_shape);
  const double* pa = a.ptr();
  double* po = out.ptr();
  parallel_for(out.numel(), [&](int64_t begin, int64_t end) {
    for (int64_t idx = begin; idx < end; ++idx) {
      int64_t rem = idx;
      int64_t src = 0;
      for (int i = 0; i < r; ++i) {
        const int64_t q = rem / out_strides[static_cast<size_t>(i)];
        rem -= q * out_strides[static_cast<size_t>(i)];
        src += q * gather[static_cast<size_t>(i)];
      }
      po[idx] = pa[src];
    }
  });
  return out;
}

}  // namespace

Tensor permute(const Tensor& a, const std::vector<int>& order) {
  const int r = a.rank();
  require(static_cast<int>(order.size()) == r, "permute",
          "order size " + std::to_string(order.size()) + " vs rank " + std::to_string(r));
  std::vector<char> seen(static_cast<size_t>(r), 0);
  for (int o : order) {
    require(o >= 0 && o < r, "permute", "axis " + std::to_string(o) + " out of range");
    require(!seen[static_cast<size_t>(o)], "permute", "axis " + std::to_string(o) + " repeated");
    seen[static_cast<size_t>(o)] = 1;
  }
  Tensor out = permute_raw(a, order);
  std::vector<int> inverse(order.size());
  for (int i = 0; i < r; ++i) inverse[static_cast<size_t>(order[static_cast<size_t>(i)])] = i;
  attach("permute", out, {&a},
         [inverse](const Tensor& g, const std::vector<char>&) -> std::vector<Tensor> {
           return {permute_raw(g, inverse)};
         });
  return out;
}

Tensor concat_channels(const std::vector<Tensor>& xs) {
  require(!xs.empty(), "concat_channels", "no inputs");
  for (const Tensor& x : xs) require_rank4("concat_channels", x, "input");
  const int64_t b = xs[0].extent(0), h = xs[0].extent(2), w = xs[0].extent(3);
  int64_t c_total = 0;
  for (const Tensor& x : xs) {
    require(x.extent(0) == b && x.extent(2) == h && x.extent(3) == w, "concat_channels",
            "incompatible shapes " + shape_str(xs[0].shape()) + " vs " + shape_str(x.shape()));
    c_total += x.extent(1);
  }
  Tensor out({b, c_total, h, w});
  const int64_t plane = h * w;
  double* po = out.ptr();
  int64_t c_off = 0;
  for (const Tensor& x : xs) {
    const int64_t c = x.extent(1);
    const double* px = x.ptr();
    for (int64_t bi = 0; bi < b; ++bi)
      std::copy(px + bi * c * plane, px + (bi + 1) * c * plane,
                po + (bi * c_total + c_off) * plane);
    c_off += c;
  }
  std::vector<const Tensor*> inputs;
  std::vector<int64_t> channels;
  for (const Tensor& x : xs) {
    inputs.push_back(&x);
    channels.push_back(x.extent(1));
  }
  attach("concat_channels", out, inputs,
         [channels, b, plane, c_total](const Tensor& g,
                                       const std::vector<char>& need) -> std::vector<Tensor> {
           std::vector<Tensor> gs(channels.size());
           const double* pg = g.ptr();
           int64_t c_off = 0;
           for (size_t i = 0; i < channels.size(); ++i) {
             const int64_t c = channels[i];
             if (need[i]) {
               Tensor gi({b, c, g.extent(2), g.extent(3)});
               double* p = gi.ptr();
               for (int64_t bi = 0; bi < b; ++bi)
                 std::copy(pg + (bi * c_total + c_off) * plane,
                           pg + (bi * c_total + c_off + c) * plane, p + bi * c * plane);
               gs[i] = gi;
             }
             c_off += c;
           }
           return gs;
         });
  return out;
}

Tensor slice_channels(const Tensor& x, int64_t c0, int64_t c1) {
  require_rank4("slice_channels", x, "x");
  const int64_t c = x.extent(1);
  require(c0 >= 0 && c0 < c1 && c1 <= c, "slice_channels",
          "range [" + std::to_string(c0) + "," + std::to_string(c1) + ") of " +
              std::to_string(c) + " channels");
  const int64_t b = x.extent(0), h = x.extent(2), w = x.extent(3);
  const int64_t plane = h * w, cs = c1 - c0;
  Tensor out({b, cs, h, w});
  const double* px = x.ptr();
  double* po = out.ptr();
  for (int64_t bi = 0; bi < b; ++bi)
    std::copy(px + (bi * c + c0) * plane, px + (bi * c + c1) * plane, po + bi * cs * plane);
  attach("slice_channels", out, {&x},
         [b, c, c0, cs, plane, h, w](const Tensor& g, const std::vector<char>&) -> std::vector<Tensor> {
           Tensor gx({b, c, h, w}, 0.0);
           const double* pg = g.ptr();
           double* p = gx.ptr();
           for (int64_t bi = 0; bi < b; ++bi)
             std::copy(pg + bi * cs * plane, pg + (bi + 1) * cs * plane, p + (bi * c + c0) * plane);
           return {gx};
         });
  return out;
}

Tensor global_avg_pool(const Tensor& x) {
  require_rank4("global_avg_pool", x, "x");
  const int64_t b = x.extent(0), c = x.extent(1), h = x.extent(2), w = x.extent(3);
  const int64_t plane = h * w;
  Tensor out({b, c, 1, 1});
  const double* px = x.ptr();
  double* po = out.ptr();
  const double inv = 1.0 / static_cast<double>(plane);
  for (int64_t i = 0; i < b * c; ++i) {
    double s = 0.0;
    const double* p = px + i * plane;
    for (int64_t j = 0; j < plane; ++j) s += p[j];
    po[i] = s * inv;
  }
  attach("global_avg_pool", out, {&x},
         [b, c, h, w, plane, inv](const Tensor& g, const std::vector<char>&) -> std::vector<Tensor> {
           Tensor gx({b, c, h, w});
           const double* pg = g.ptr();
           double* p = gx.ptr();
           for (int64_t i = 0; i < b * c; ++i) {
             const double v = pg[i] * inv;
             for (int64_t j = 0; j < plane; ++j) p[i * plane + j] = v;
           }
           return {gx};
         });
  return out;
}

Tensor mul_channel_gate(const Tensor& x, const Tensor& g) {
  require_rank4("mul_channel_gate", x, "x");
  require_rank4("mul_channel_gate", g, "gate");
  const int64_t b = x.extent(0), c = x.extent(1), h = x.extent(2), w = x.extent(3);
  require(g.extent(0) == b && g.extent(1) == c && g.extent(2) == 1 && g.extent(3) == 1,
          "mul_channel_gate",
          "gate must be [" + std::to_string(b) + "," + std::to_string(c) + ",1,1], got " +
              shape_str(g.shape()));
  const int64_t plane = h * w;
  Tensor out(x.shape());
  const double* px = x.ptr();
  const double* pgate = g.ptr();
  double* po = out.ptr();
  for (int64_t i = 0; i < b * c; ++i) {
    const double v = pgate[i];
    const double* p = px + i * plane;
    double* q = po + i * plane;
    for (int64_t j = 0; j < plane; ++j) q[j] = p[j] * v;
  }
  attach("mul_channel_gate", out, {&x, &g},
         [x, g, b, c, plane](const Tensor& go, const std::vector<char>& need) -> std::vector<Tensor> {
           std::vector<Tensor> gs(2);
           const double* pg = go.ptr();
           if (need[0]) {
             Tensor gx(x.shape());
             const double* pgate = g.ptr();
             double* p = gx.ptr();
             for (int64_t i = 0; i < b * c; ++i) {
               const double v = pgate[i];
               for (int64_t j = 0; j < plane; ++j) p[i * plane + j] = pg[i * plane + j] * v;
             }
             gs[0] = gx;
           }
           if (need[1]) {
             Tensor gg({b, c, 1, 1});
             const double* px = x.ptr();
             double* p = gg.ptr();
             for (int64_t i = 0; i < b * c; ++i) {
               double s = 0.0;
               for (int64_t j = 0; j < plane; ++j) s += pg[i * plane + j] * px[i * plane + j];
               p[i] = s;
             }
             gs[1] = gg;
           }
           return gs;
         });
  return out;
}

namespace {

// Shared kernel for the two forward-difference ops. `horizontal` differences
// along the width axis, otherwise along height.
Tensor diff_impl(const char* op, const Tensor& x, bool horizontal) {
  require_rank4(op, x, "x");
  const int64_t b = x.extent(0), c = x.extent(1), h = x.extent(2), w = x.extent(3);
  require(horizontal ? w >= 2 : h >= 2, op, "axis too short in " + shape_str(x.shape()));
  const int64_t oh = horizontal ? h : h - 1;
  const int64_t ow = horizontal ? w - 1 : w;
  Tensor out({b, c, oh, ow});
  const double* px = x.ptr();
  double* po = out.ptr();
  const int64_t step = horizontal ? 1 : w;
  for (int64_t i = 0; i < b * c; ++i) {
    const double* p = px + i * h * w;
    double* q = po + i * oh * ow;
    for (int64_t y = 0; y < oh; ++y)
      for (int64_t xx = 0; xx < ow; ++xx)
        q[y * ow + xx] = p[y * w + xx + step] - p[y * w + xx];
  }
  attach(op, out, {&x},
         [b, c, h, w, oh, ow, step](const Tensor& g, const std::vector<char>&) -> std::vector<Tensor> {
           Tensor gx({b, c, h, w}, 0.0);
           const double* pg = g.ptr();
           double* p = gx.ptr();
           for (int64_t i = 0; i < b * c; ++i) {
             const double* gq = pg + i * oh * ow;
             double* xq = p + i * h * w;
             for (int64_t y = 0; y < oh; ++y)
               for (int64_t xx = 0; xx < ow; ++xx) {
                 const double v = gq[y * ow + xx];
                 xq[y * w + xx + step] += v;
                 xq[y * w + xx] -= v;
               }
           }
           return {gx};
         });
  return out;
}

}  // namespace

Tensor diff_horizontal(const Tensor& x) { return diff_impl("diff_horizontal", x, true); }
Tensor diff_vertical(const Tensor& x) { return diff_impl("diff_vertical", x, false); }

}  // namespace senh
