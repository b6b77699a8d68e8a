#include <algorithm>

#include "src/ops_common.hpp"

namespace senh {

using detail::attach;
using detail::require;
using detail::require_rank4;

// ---------------------------------------------------------------------------
// matmul_batched
// ---------------------------------------------------------------------------

Tensor matmul_batched(const Tensor& a, const Tensor& b) {
  require_rank4("matmul_batched", a, "a");
  require_rank4("matmul_batched", b, "b");
  const int64_t nb = a.extent(0), ng = a.extent(1), m = a.extent(2), k = a.extent(3);
  require(b.extent(0) == nb && b.extent(1) == ng && b.extent(2) == k, "matmul_batched",
          "incompatible " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const int64_t n = b.extent(3);
  Tensor out({nb, ng, m, n});
  const double* pa = a.ptr();
  const double* pb = b.ptr();
  double* po = out.ptr();
  parallel_for(nb * ng, [&](int64_t begin, int64_t end) {
    for (int64_t s = begin; s < end; ++s) {
      const double* as = pa + s * m * k;
      const double* bs = pb + s * k * n;
      double* os = po + s * m * n;
      std::fill(os, os + m * n, 0.0);
      for (int64_t i = 0; i < m; ++i) {
        double* orow = os + i * n;
        for (int64_t kk = 0; kk < k; ++kk) {
          const double av = as[i * k + kk];
          const double* brow = bs + kk * n;
          for (int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
      }
    }
  });
  attach("matmul_batched", out, {&a, &b},
         [a, b, nb, ng, m, k, n](const Tensor& g, const std::vector<char>& need) -> std::vector<Tensor> {
           std::vector<Tensor> gs(2);
           const double* pg = g.ptr();
           if (need[0]) {
             // dA = G * B^T
             Tensor ga(a.shape());
             double* p = ga.ptr();
             const double* pb = b.ptr();
             parallel_for(nb * ng, [&](int64_t begin, int64_t end) {
               for (int64_t s = begin; s < end; ++s) {
                 const double* gsl = pg + s * m * n;
                 const double* bs = pb + s * k * n;
                 double* as = p + s * m * k;
                 for (int64_t i = 0; i < m; ++i)
                   for (int64_t kk = 0; kk < k; ++kk) {
                     double acc = 0.0;
                     const double* grow = gsl + i * n;
                     const double* brow = bs + kk * n;
                     for (int64_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                     as[i * k + kk] = acc;
                   }
               }
             });
             gs[0] = ga;
           }
           if (need[1]) {
             // dB = A^T * G
             Tensor gb(b.shape());
             double* p = gb.ptr();
             const double* pa = a.ptr();
             parallel_for(nb * ng, [&](int64_t begin, int64_t end) {
               for (int64_t s = begin; s < end; ++s) {
                 const double* gsl = pg + s * m * n;
                 const double* as = pa + s * m * k;
                 double* bs = p + s * k * n;
                 std::fill(bs, bs + k * n, 0.0);
                 for (int64_t i = 0; i < m; ++i) {
                   const double* grow = gsl + i * n;
                   for (int64_t kk = 0; kk < k; ++kk) {
                     const double av = as[i * k + kk];
                     double* brow = bs + kk * n;
                     for (int64_t j = 0; j < n; ++j) brow[j] += av * grow[j];
                   }
                 }
               }
             });
             gs[1] = gb;
           }
           return gs;
         });
  return out;
}

// ---------------------------------------------------------------------------
// conv2d
// ---------------------------------------------------------------------------

namespace {

struct ConvDims {
  int64_t b, ci, h, w, co, k, oh, ow;
  int stride, pad;
};

ConvDims conv_dims(const char* op, const Tensor& x, const Tensor& w, const Tensor& bias,
                   int stride, int pad) {
  require_rank4(op, x, "x");
  require_rank4(op, w, "w");
  require(bias.rank() == 1, op, "bias must be rank 1, got " + shape_str(bias.shape()));
  ConvDims d{};
  d.b = x.extent(0);
  d.ci = x.extent(1);
  d.h = x.extent(2);
  d.w = x.extent(3);
  d.co = w.extent(0);
  d.k = w.extent(2);
  d.stride = stride;
  d.pad = pad;
  require(w.extent(1) == d.ci, op,
          "weight expects " + std::to_string(w.extent(1)) + " input channels, x has " +
              std::to_string(d.ci));
  require(w.extent(3) == d.k, op, "kernel must be square, got " + shape_str(w.shape()));
  require(d.k % 2 == 1, op, "kernel size must be odd, got " + std::to_string(d.k));
  require(bias.extent(0) == d.co, op, "bias size " + shape_str(bias.shape()) + " vs " +
                                          std::to_string(d.co) + " output channels");
  require(stride >= 1, op, "stride must be >= 1");
  require(pad >= 0, op, "pad must be >= 0");
  require(d.h + 2 * pad >= d.k && d.w + 2 * pad >= d.k, op,
          "kernel " + std::to_string(d.k) + " exceeds padded input " + shape_str(x.shape()));
  d.oh = (d.h + 2 * pad - d.k) / stride + 1;
  d.ow = (d.w + 2 * pad - d.k) / stride + 1;
  return d;
}

void conv_forward(const ConvDims& d, const double* px, const double* pw, const double* pbias,
                  double* po) {
  parallel_for(d.b * d.co, [&](int64_t begin, int64_t end) {
    for (int64_t bc = begin; bc < end; ++bc) {
      const int64_t bi = bc / d.co, co = bc % d.co;
      const double* xb = px + bi * d.ci * d.h * d.w;
      const double* wc = pw + co * d.ci * d.k * d.k;
      double* ob = po + bc * d.oh * d.ow;
      const double bv = pbias[co];
      for (int64_t oy = 0; oy < d.oh; ++oy) {
        const int64_t iy0 = oy * d.stride - d.pad;
        const int64_t ky0 = std::max<int64_t>(0, -iy0);
        const int64_t ky1 = std::min<int64_t>(d.k, d.h - iy0);
        for (int64_t ox = 0; ox < d.ow; ++ox) {
          const int64_t ix0 = ox * d.stride - d.pad;
          const int64_t kx0 = std::max<int64_t>(0, -ix0);
          const int64_t kx1 = std::min<int64_t>(d.k, d.w - ix0);
          double acc = bv;
          for (int64_t ci = 0; ci < d.ci; ++ci) {
            const double* xc = xb + ci * d.h * d.w;
            const double* wk = wc + ci * d.k * d.k;
            for (int64_t ky = ky0; ky < ky1; ++ky) {
              const double* xrow = xc + (iy0 + ky) * d.w + ix0;
              const double* wrow = wk + ky * d.k;
              for (int64_t kx = kx0; kx < kx1; ++kx) acc += xrow[kx] * wrow[kx];
            }
          }
          ob[oy * d.ow + ox] = acc;
        }
      }
    }
  });
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad) {
  const ConvDims d = conv_dims("conv2d", x, w, bias, stride, pad);
  Tensor out({d.b, d.co, d.oh, d.ow});
  conv_forward(d, x.ptr(), w.ptr(), bias.ptr(), out.ptr());
  attach("conv2d", out, {&x, &w, &bias},
         [x, w, d](const Tensor& g, const std::vector<char>& need) -> std::vector<Tensor> {
           std::vector<Tensor> gs(3);
           const double* pg = g.ptr();
           if (need[0]) {
             Tensor gx(x.shape(), 0.0);
             double* p = gx.ptr();
             const double* pw = w.ptr();
             parallel_for(d.b * d.ci, [&](int64_t begin, int64_t end) {
               for (int64_t bc = begin; bc < end; ++bc) {
                 const int64_t bi = bc / d.ci, ci = bc % d.ci;
                 double* xc = p + bc * d.h * d.w;
                 for (int64_t iy = 0; iy < d.h; ++iy)
                   for (int64_t ix = 0; ix < d.w; ++ix) {
                     double acc = 0.0;
                     for (int64_t co = 0; co < d.co; ++co) {
                       const double* gb = pg + (bi * d.co + co) * d.oh * d.ow;
                       const double* wk = pw + (co * d.ci + ci) * d.k * d.k;
                       for (int64_t ky = 0; ky < d.k; ++ky) {
                         const int64_t t = iy + d.pad - ky;
                         if (t < 0 || t % d.stride) continue;
                         const int64_t oy = t / d.stride;
                         if (oy >= d.oh) continue;
                         for (int64_t kx = 0; kx < d.k; ++kx) {
                           const int64_t u = ix + d.pad - kx;
                           if (u < 0 || u % d.stride) continue;
                           const int64_t ox = u / d.stride;
                           if (ox >= d.ow) continue;
                           acc += wk[ky * d.k + kx] * gb[oy * d.ow + ox];
                         }
                       }
                     }
                     xc[iy * d.w + ix] = acc;
                   }
               }
             });
             gs[0] = gx;
           }
           if (need[1]) {
             Tensor gw(w.shape(), 0.0);
             double* p = gw.ptr();
             const double* px = x.ptr();
             parallel_for(d.co * d.ci, [&](int64_t begin, int64_t end) {
               for (int64_t cc = begin; cc < end; ++cc) {
                 const int64_t co = cc / d.ci, ci = cc % d.ci;
                 double* wk = p + cc * d.k * d.k;
                 for (int64_t ky = 0; ky < d.k; ++ky)
                   for (int64_t kx = 0; kx < d.k; ++kx) {
                     double acc = 0.0;
                     for (int64_t bi = 0; bi < d.b; ++bi) {
                       const double* gb = pg + (bi * d.co + co) * d.oh * d.ow;
                       const double* xc = px + (bi * d.ci + ci) * d.h * d.w;
                       for (int64_t oy = 0; oy < d.oh; ++oy) {
                         const int64_t iy = oy * d.stride + ky - d.pad;
                         if (iy < 0 || iy >= d.h) continue;
                         for (int64_t ox = 0; ox < d.ow; ++ox) {
                           const int64_t ix = ox * d.stride + kx - d.pad;
                           if (ix < 0 || ix >= d.w) continue;
                           acc += gb[oy * d.ow + ox] * xc[iy * d.w + ix];
                         }
                       }
                     }
                     wk[ky * d.k + kx] = acc;
                   }
               }
             });
             gs[1] = gw;
           }
           if (need[2]) {
             Tensor gb({d.co}, 0.0);
             double* p = gb.ptr();
             for (int64_t bi = 0; bi < d.b; ++bi)
               for (int64_t co = 0; co < d.co; ++co) {
                 const double* gsl = pg + (bi * d.co + co) * d.oh * d.ow;
                 double acc = 0.0;
                 for (int64_t i = 0; i < d.oh * d.ow; ++i) acc += gsl[i];
                 p[co] += acc;
               }
             gs[2] = gb;
           }
           return gs;
         });
  return out;
}

// ---------------------------------------------------------------------------
// dwconv2d (stride 1, same-size padding)
// ---------------------------------------------------------------------------

Tensor dwconv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int pad_arg) {
  require_rank4("dwconv2d", x, "x");
  require(w.rank() == 4 && w.extent(1) == 1, "dwconv2d",
          "w must be [C,1,k,k], got " + shape_str(w.shape()));
  require(bias.rank() == 1, "dwconv2d", "bias must be rank 1, got " + shape_str(bias.shape()));
  const int64_t b = x.extent(0), c = x.extent(1), h = x.extent(2), wd = x.extent(3);
  const int64_t k = w.extent(2);
  require(w.extent(0) == c, "dwconv2d",
          "w has " + std::to_string(w.extent(0)) + " channels, x has " + std::to_string(c));
  require(w.extent(3) == k, "dwconv2d", "kernel must be square, got " + shape_str(w.shape()));
  require(k % 2 == 1, "dwconv2d", "kernel size must be odd, got " + std::to_string(k));
  require(bias.extent(0) == c, "dwconv2d", "bias size mismatch");
  require(pad_arg == static_cast<int>((k - 1) / 2), "dwconv2d",
          "pad must be (k-1)/2 = " + std::to_string((k - 1) / 2) + ", got " +
              std::to_string(pad_arg));
  const int64_t pad = pad_arg;
  Tensor out(x.shape());
  const double* px = x.ptr();
  const double* pw = w.ptr();
  const double* pb = bias.ptr();
  double* po = out.ptr();
  parallel_for(b * c, [&](int64_t begin, int64_t end) {
    for (int64_t bc = begin; bc < end; ++bc) {
      const int64_t ci = bc % c;
      const double* xc = px + bc * h * wd;
      const double* wk = pw + ci * k * k;
      double* oc = po + bc * h * wd;
      const double bv = pb[ci];
      for (int64_t oy = 0; oy < h; ++oy) {
        const int64_t iy0 = oy - pad;
        const int64_t ky0 = std::max<int64_t>(0, -iy0);
        const int64_t ky1 = std::min<int64_t>(k, h - iy0);
        for (int64_t ox = 0; ox < wd; ++ox) {
          const int64_t ix0 = ox - pad;
          const int64_t kx0 = std::max<int64_t>(0, -ix0);
          const int64_t kx1 = std::min<int64_t>(k, wd - ix0);
          double acc = bv;
          for (int64_t ky = ky0; ky < ky1; ++ky) {
            const double* xrow = xc + (iy0 + ky) * wd + ix0;
            const double* wrow = wk + ky * k;
            for (int64_t kx = kx0; kx < kx1; ++kx) acc += xrow[kx] * wrow[kx];
          }
          oc[oy * wd + ox] = acc;
        }
      }
    }
  });
  attach("dwconv2d", out, {&x, &w, &bias},
         [x, w, b, c, h, wd, k, pad](const Tensor& g, const std::vector<char>& need) -> std::vector<Tensor> {
           std::vector<Tensor> gs(3);
           const double* pg = g.ptr();
           if (need[0]) {
             // Correlation with the flipped kernel.
             Tensor gx(x.shape());
             double* p = gx.ptr();
             const double* pw = w.ptr();
             parallel_for(b * c, [&](int64_t begin, int64_t end) {
               for (int64_t bc = begin; bc < end; ++bc) {
                 const int64_t ci = bc % c;
                 const double* gc = pg + bc * h * wd;
                 const double* wk = pw + ci * k * k;
                 double* xc = p + bc * h * wd;
                 for (int64_t iy = 0; iy < h; ++iy) {
                   const int64_t ky0 = std::max<int64_t>(0, iy + pad - (h - 1));
                   const int64_t ky1 = std::min<int64_t>(k, iy + pad + 1);
                   for (int64_t ix = 0; ix < wd; ++ix) {
                     const int64_t kx0 = std::max<int64_t>(0, ix + pad - (wd - 1));
                     const int64_t kx1 = std::min<int64_t>(k, ix + pad + 1);
                     double acc = 0.0;
                     for (int64_t ky = ky0; ky < ky1; ++ky) {
                       const double* grow = gc + (iy + pad - ky) * wd;
                       const double* wrow = wk + ky * k;
                       for (int64_t kx = kx0; kx < kx1; ++kx)
                         acc += wrow[kx] * grow[ix + pad - kx];
                     }
                     xc[iy * wd + ix] = acc;
                   }
                 }
               }
             });
             gs[0] = gx;
           }
           if (need[1]) {
             Tensor gw(w.shape(), 0.0);
             double* p = gw.ptr();
             const double* px = x.ptr();
             parallel_for(c, [&](int64_t begin, int64_t end) {
               for (int64_t ci = begin; ci < end; ++ci) {
                 double* wk = p + ci * k * k;
                 for (int64_t ky = 0; ky < k; ++ky)
                   for (int64_t kx = 0; kx < k; ++kx) {
                     double acc = 0.0;
                     for (int64_t bi = 0; bi < b; ++bi) {
                       const double* gc = pg + (bi * c + ci) * h * wd;
                       const double* xc = px + (bi * c + ci) * h * wd;
                       const int64_t y0 = std::max<int64_t>(0, pad - ky);
                       const int64_t y1 = std::min<int64_t>(h, h + pad - ky);
                       for (int64_t oy = y0; oy < y1; ++oy) {
                         const int64_t x0 = std::max<int64_t>(0, pad - kx);
                         const int64_t x1 = std::min<int64_t>(wd, wd + pad - kx);
                         const double* grow = gc + oy * wd;
                         const double* xrow = xc + (oy + ky - pad) * wd;
                         for (int64_t ox = x0; ox < x1; ++ox)
                           acc += grow[ox] * xrow[ox + kx - pad];
                       }
                     }
                     wk[ky * k + kx] = acc;
                   }
               }
             });
             gs[1] = gw;
           }
           if (need[2]) {
             Tensor gb({c}, 0.0);
             double* p = gb.ptr();
             for (int64_t bi = 0; bi < b; ++bi)
               for (int64_t ci = 0; ci < c; ++ci) {
                 const double* gc = pg + (bi * c + ci) * h * wd;
                 double acc = 0.0;
                 for (int64_t i = 0; i < h * wd; ++i) acc += gc[i];
                 p[ci] += acc;
               }
             gs[2] = gb;
           }
           return gs;
         });
  return out;
}

// ---------------------------------------------------------------------------
// linear_channels (1x1 conv)
// ---------------------------------------------------------------------------

Tensor linear_channels(const Tensor& x, const Tensor& w, const Tensor& bias) {
  require_rank4("linear_channels", x, "x");
  require(w.rank() == 2, "linear_channels", "w must be rank 2, got " + shape_str(w.shape()));
  require(bias.rank() == 1, "linear_channels",
          "bias must be rank 1, got " + shape_str(bias.shape()));
  const int64_t b = x.extent(0), ci = x.extent(1), h = x.extent(2), wd = x.extent(3);
  const int64_t co = w.extent(0);
  require(w.extent(1) == ci, "linear_channels",
          "w " + shape_str(w.shape()) + " vs " + std::to_string(ci) + " input channels");
  require(bias.extent(0) == co, "linear_channels", "bias size mismatch");
  const int64_t plane = h * wd;
  Tensor out({b, co, h, wd});
  const double* px = x.ptr();
  const double* pw = w.ptr();
  const double* pb = bias.ptr();
  double* po = out.ptr();
  parallel_for(b * co, [&](int64_t begin, int64_t end) {
    for (int64_t bc = begin; bc < end; ++bc) {
      const int64_t bi = bc / co, o = bc % co;
      double* orow = po + bc * plane;
      std::fill(orow, orow + plane, pb[o]);
      const double* wrow = pw + o * ci;
      const double* xb = px + bi * ci * plane;
      for (int64_t c = 0; c < ci; ++c) {
        const double v = wrow[c];
        const double* xrow = xb + c * plane;
        for (int64_t p = 0; p < plane; ++p) orow[p] += v * xrow[p];
      }
    }
  });
  attach("linear_channels", out, {&x, &w, &bias},
         [x, w, b, ci, co, plane](const Tensor& g, const std::vector<char>& need) -> std::vector<Tensor> {
           std::vector<Tensor> gs(3);
           const double* pg = g.ptr();
           if (need[0]) {
             Tensor gx(x.shape());
             double* p = gx.ptr();
             const double* pw = w.ptr();
             parallel_for(b * ci, [&](int64_t begin, int64_t end) {
               for (int64_t bc = begin; bc < end; ++bc) {
                 const int64_t bi = bc / ci, c = bc % ci;
                 double* xrow = p + bc * plane;
                 std::fill(xrow, xrow + plane, 0.0);
                 const double* gb = pg + bi * co * plane;
                 for (int64_t o = 0; o < co; ++o) {
                   const double v = pw[o * ci + c];
                   const double* grow = gb + o * plane;
                   for (int64_t q = 0; q < plane; ++q) xrow[q] += v * grow[q];
                 }
               }
             });
             gs[0] = gx;
           }
           if (need[1]) {
             Tensor gw(w.shape());
             double* p = gw.ptr();
             const double* px = x.ptr();
             parallel_for(co, [&](int64_t begin, int64_t end) {
               for (int64_t o = begin; o < end; ++o)
                 for (int64_t c = 0; c < ci; ++c) {
                   double acc = 0.0;
                   for (int64_t bi = 0; bi < b; ++bi) {
                     const double* grow = pg + (bi * co + o) * plane;
                     const double* xrow = px + (bi * ci + c) * plane;
                     for (int64_t q = 0; q < plane; ++q) acc += grow[q] * xrow[q];
                   }
                   p[o * ci + c] = acc;
                 }
             });
             gs[1] = gw;
           }
           if (need[2]) {
             Tensor gb({co}, 0.0);
             double* p = gb.ptr();
             for (int64_t bi = 0; bi < b; ++bi)
               for (int64_t o = 0; o < co; ++o) {
                 const double* grow = pg + (bi * co + o) * plane;
                 double acc = 0.0;
                 for (int64_t q = 0; q < plane; ++q) acc += grow[q];
                 p[o] += acc;
               }
             gs[2] = gb;
           }
           return gs;
         });
  return out;
}

// ---------------------------------------------------------------------------
// layer_norm over the channel axis
// ---------------------------------------------------------------------------

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_rank4("layer_norm", x, "x");
  const int64_t b = x.extent(0), c = x.extent(1), h = x.extent(2), wd = x.extent(3);
  require(gamma.rank() == 1 && gamma.extent(0) == c, "layer_norm",
          "gamma " + shape_str(gamma.shape()) + " vs " + std::to_string(c) + " channels");
  require(beta.rank() == 1 && beta.extent(0) == c, "layer_norm",
          "beta " + shape_str(beta.shape()) + " vs " + std::to_string(c) + " channels");
  require(eps > 0.0, "layer_norm", "eps must be positive");
  const int64_t plane = h * wd;
  Tensor out(x.shape());
  // Per-position statistics, kept for the backward pass.
  Tensor mean({b, 1, h, wd});
  Tensor inv_std({b, 1, h, wd});
  const double* px = x.ptr();
  const double* pgm = gamma.ptr();
  const double* pbt = beta.ptr();
  double* po = out.ptr();
  double* pm = mean.ptr();
  double* pis = inv_std.ptr();
  const double inv_c = 1.0 / static_cast<double>(c);
  parallel_for(b, [&](int64_t begin, int64_t end) {
    for (int64_t bi = begin; bi < end; ++bi) {
      const double* xb = px + bi * c * plane;
      double* mb = pm + bi * plane;
      double* ib = pis + bi * plane;
      std::fill(mb, mb + plane, 0.0);
      for (int64_t ci = 0; ci < c; ++ci) {
        const double* xrow = xb + ci * plane;
        for (int64_t p = 0; p < plane; ++p) mb[p] += xrow[p];
      }
      for (int64_t p = 0; p < plane; ++p) mb[p] *= inv_c;
      std::fill(ib, ib + plane, 0.0);
      for (int64_t ci = 0; ci < c; ++ci) {
        const double* xrow = xb + ci * plane;
        for (int64_t p = 0; p < plane; ++p) {
          const double dlt = xrow[p] - mb[p];
          ib[p] += dlt * dlt;
        }
      }
      for (int64_t p = 0; p < plane; ++p) ib[p] = 1.0 / std::sqrt(ib[p] * inv_c + eps);
      double* ob = po + bi * c * plane;
      for (int64_t ci = 0; ci < c; ++ci) {
        const double gm = pgm[ci], bt = pbt[ci];
        const double* xrow = xb + ci * plane;
        double* orow = ob + ci * plane;
        for (int64_t p = 0; p < plane; ++p)
          orow[p] = (xrow[p] - mb[p]) * ib[p] * gm + bt;
      }
    }
  });
  attach("layer_norm", out, {&x, &gamma, &beta},
         [x, gamma, mean, inv_std, b, c, plane, inv_c](
             const Tensor& g, const std::vector<char>& need) -> std::vector<Tensor> {
           std::vector<Tensor> gs(3);
           const double* pg = g.ptr();
           const double* px = x.ptr();
           const double* pm = mean.ptr();
           const double* pis = inv_std.ptr();
           const double* pgm = gamma.ptr();
           if (need[0]) {
             Tensor gx(x.shape());
             double* p = gx.ptr();
             parallel_for(b, [&](int64_t begin, int64_t end) {
               std::vector<double> s1(static_cast<size_t>(plane));
               std::vector<double> s2(static_cast<size_t>(plane));
               for (int64_t bi = begin; bi < end; ++bi) {
                 const double* xb = px + bi * c * plane;
                 const double* gb = pg + bi * c * plane;
                 const double* mb = pm + bi * plane;
                 const double* ib = pis + bi * plane;
                 std::fill(s1.begin(), s1.end(), 0.0);
                 std::fill(s2.begin(), s2.end(), 0.0);
                 for (int64_t ci = 0; ci < c; ++ci) {
                   const double gm = pgm[ci];
                   const double* xrow = xb + ci * plane;
                   const double* grow = gb + ci * plane;
                   for (int64_t q = 0; q < plane; ++q) {
                     const double gy = grow[q] * gm;
                     const double xh = (xrow[q] - mb[q]) * ib[q];
                     s1[static_cast<size_t>(q)] += gy;
                     s2[static_cast<size_t>(q)] += gy * xh;
                   }
                 }
                 double* pb_out = p + bi * c * plane;
                 for (int64_t ci = 0; ci < c; ++ci) {
                   const double gm = pgm[ci];
                   const double* xrow = xb + ci * plane;
                   const double* grow = gb + ci * plane;
                   double* orow = pb_out + ci * plane;
                   for (int64_t q = 0; q < plane; ++q) {
                     const double gy = grow[q] * gm;
                     const double xh = (xrow[q] - mb[q]) * ib[q];
                     orow[q] = ib[q] * (gy - inv_c * s1[static_cast<size_t>(q)] -
                                        xh * inv_c * s2[static_cast<size_t>(q)]);
                   }
                 }
               }
             });
             gs[0] = gx;
           }
           if (need[1] || need[2]) {
             Tensor ggm({c}, 0.0);
             Tensor gbt({c}, 0.0);
             double* pg1 = ggm.ptr();
             double* pg2 = gbt.ptr();
             parallel_for(c, [&](int64_t begin, int64_t end) {
               for (int64_t ci = begin; ci < end; ++ci) {
                 double a1 = 0.0, a2 = 0.0;
                 for (int64_t bi = 0; bi < b; ++bi) {
                   const double* xrow = px + (bi * c + ci) * plane;
                   const double* grow = pg + (bi * c + ci) * plane;
                   const double* mb = pm + bi * plane;
                   const double* ib = pis + bi * plane;
                   for (int64_t q = 0; q < plane; ++q) {
                     a1 += grow[q] * (xrow[q] - mb[q]) * ib[q];
                     a2 += grow[q];
                   }
                 }
                 pg1[ci] = a1;
                 pg2[ci] = a2;
               }
             });
             if (need[1]) gs[1] = ggm;
             if (need[2]) gs[2] = gbt;
           }
           return gs;
         });
  return out;
}

// ---------------------------------------------------------------------------
// softmax over the last axis
// ---------------------------------------------------------------------------

Tensor softmax_lastdim(const Tensor& x) {
  const int64_t n = x.extent(x.rank() - 1);
  const int64_t rows = x.numel() / n;
  Tensor out(x.shape());
  const double* px = x.ptr();
  double* po = out.ptr();
  parallel_for(rows, [&](int64_t begin, int64_t end) {
    for (int64_t r = begin; r < end; ++r) {
      const double* xr = px + r * n;
      double* orow = po + r * n;
      double m = xr[0];
      for (int64_t i = 1; i < n; ++i) m = std::max(m, xr[i]);
      double s = 0.0;
      for (int64_t i = 0; i < n; ++i) {
        orow[i] = std::exp(xr[i] - m);
        s += orow[i];
      }
      const double inv = 1.0 / s;
      for (int64_t i = 0; i < n; ++i) orow[i] *= inv;
    }
  });
  attach("softmax_lastdim", out, {&x},
         [out, n, rows](const Tensor& g, const std::vector<char>&) -> std::vector<Tensor> {
           Tensor gx(g.shape());
           const double* pg = g.ptr();
           const double* py = out.ptr();
           double* p = gx.ptr();
           parallel_for(rows, [&](int64_t begin, int64_t end) {
             for (int64_t r = begin; r < end; ++r) {
               const double* grow = pg + r * n;
               const double* yrow = py + r * n;
               double dot = 0.0;
               for (int64_t i = 0; i < n; ++i) dot += grow[i] * yrow[i];
               double* orow = p + r * n;
               for (int64_t i = 0; i < n; ++i) orow[i] = yrow[i] * (grow[i] - dot);
             }
           });
           return {gx};
         });
  return out;
}

// ---------------------------------------------------------------------------
// bilinear resize (align_corners = false)
// ---------------------------------------------------------------------------

namespace {

struct Axis {
  std::vector<int64_t> lo, hi;
  std::vector<double> frac;
};

Axis make_axis(int64_t in, int64_t out) {
  Axis ax;
  ax.lo.resize(static_cast<size_t>(out));
  ax.hi.resize(static_cast<size_t>(out));
  ax.frac.resize(static_cast<size_t>(out));
  const double r = static_cast<double>(in) / static_cast<double>(out);
  for (int64_t o = 0; o < out; ++o) {
    const double src = (static_cast<double>(o) + 0.5) * r - 0.5;
    int64_t i0 = static_cast<int64_t>(std::floor(src));
    const double f = src - static_cast<double>(i0);
    int64_t i1 = i0 + 1;
    i0 = std::clamp<int64_t>(i0, 0, in - 1);
    i1 = std::clamp<int64_t>(i1, 0, in - 1);
    ax.lo[static_cast<size_t>(o)] = i0;
    ax.hi[static_cast<size_t>(o)] = i1;
    ax.frac[static_cast<size_t>(o)] = f;
  }
  return ax;
}

// Output indices (with weights) that reference each input index; ascending
// output order so gradient gathers are deterministic.
std::vector<std::vector<std::pair<int64_t, double>>> invert_axis(const Axis& ax, int64_t in) {
  std::vector<std::vector<std::pair<int64_t, double>>> lists(static_cast<size_t>(in));
  for (int64_t o = 0; o < static_cast<int64_t>(ax.lo.size()); ++o) {
    const double f = ax.frac[static_cast<size_t>(o)];
    lists[static_cast<size_t>(ax.lo[static_cast<size_t>(o)])].emplace_back(o, 1.0 - f);
    lists[static_cast<size_t>(ax.hi[static_cast<size_t>(o)])].emplace_back(o, f);
  }
  return lists;
}

}  // namespace

Tensor resize_bilinear(const Tensor& x, int64_t out_h, int64_t out_w) {
  require_rank4("resize_bilinear", x, "x");
  require(out_h >= 1 && out_w >= 1, "resize_bilinear", "output size must be >= 1");
  const int64_t b = x.extent(0), c = x.extent(1), h = x.extent(2), w = x.extent(3);
  if (out_h == h && out_w == w) {
    // Identity resize; still a fresh tensor with a pass-through gradient.
    Tensor out(x.shape(), std::vector<double>(x.data()));
    attach("resize_bilinear", out, {&x},
           [](const Tensor& g, const std::vector<char>&) -> std::vector<Tensor> { return {g}; });
    return out;
  }
  const Axis ay = make_axis(h, out_h);
  const Axis axx = make_axis(w, out_w);
  Tensor out({b, c, out_h, out_w});
  const double* px = x.ptr();
  double* po = out.ptr();
  parallel_for(b * c, [&](int64_t begin, int64_t end) {
    for (int64_t bc = begin; bc < end; ++bc) {
      const double* xp = px + bc * h * w;
      double* op = po + bc * out_h * out_w;
      for (int64_t oy = 0; oy < out_h; ++oy) {
        const int64_t y0 = ay.lo[static_cast<size_t>(oy)], y1 = ay.hi[static_cast<size_t>(oy)];
        const double fy = ay.frac[static_cast<size_t>(oy)];
        const double* r0 = xp + y0 * w;
        const double* r1 = xp + y1 * w;
        double* orow = op + oy * out_w;
        for (int64_t ox = 0; ox < out_w; ++ox) {
          const int64_t x0 = axx.lo[static_cast<size_t>(ox)], x1 = axx.hi[static_cast<size_t>(ox)];
          const double fx = axx.frac[static_cast<size_t>(ox)];
          const double top = r0[x0] + fx * (r0[x1] - r0[x0]);
          const double bot = r1[x0] + fx * (r1[x1] - r1[x0]);
          orow[ox] = top + fy * (bot - top);
        }
      }
    }
  });
  attach("resize_bilinear", out, {&x},
         [b, c, h, w, out_h, out_w, ay, axx](const Tensor& g,
                                             const std::vector<char>&) -> std::vector<Tensor> {
           const auto ylists = invert_axis(ay, h);
           const auto xlists = invert_axis(axx, w);
           Tensor gx({b, c, h, w});
           const double* pg = g.ptr();
           double* p = gx.ptr();
           parallel_for(b * c, [&](int64_t begin, int64_t end) {
             std::vector<double> tmp(static_cast<size_t>(h * out_w));
             for (int64_t bc = begin; bc < end; ++bc) {
               const double* gp = pg + bc * out_h * out_w;
               // Collapse the output rows onto input rows first, then columns.
               std::fill(tmp.begin(), tmp.end(), 0.0);
               for (int64_t iy = 0; iy < h; ++iy) {
                 double* trow = tmp.data() + iy * out_w;
                 for (const auto& [oy, wy] : ylists[static_cast<size_t>(iy)]) {
                   const double* grow = gp + oy * out_w;
                   for (int64_t ox = 0; ox < out_w; ++ox) trow[ox] += wy * grow[ox];
                 }
               }
               double* xp = p + bc * h * w;
               for (int64_t iy = 0; iy < h; ++iy) {
                 const double* trow = tmp.data() + iy * out_w;
                 double* xrow = xp + iy * w;
                 for (int64_t ix = 0; ix < w; ++ix) {
                   double acc = 0.0;
                   for (const auto& [ox, wx] : xlists[static_cast<size_t>(ix)]) acc += wx * trow[ox];
                   xrow[ix] = acc;
                 }
               }
             }
           });
           return {gx};
         });
  return out;
}

}  // namespace senh
