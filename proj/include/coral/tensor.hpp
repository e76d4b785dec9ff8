#ifndef CORAL_TENSOR_HPP
#define CORAL_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "coral/error.hpp"

namespace coral::nn {

// Dense NCHW tensor. Training runs the float instantiation; gradient checks
// run the double one.
template <typename T>
struct Tensor4 {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_),
        data(static_cast<size_t>(n_) * c_ * h_ * w_, T(0)) {}

  size_t size() const { return data.size(); }
  bool same_shape(const Tensor4& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
  T* plane(int ni, int ci) {
    return data.data() + (static_cast<size_t>(ni) * c + ci) * h * w;
  }
  const T* plane(int ni, int ci) const {
    return data.data() + (static_cast<size_t>(ni) * c + ci) * h * w;
  }
  T& at(int ni, int ci, int y, int x) {
    return data[((static_cast<size_t>(ni) * c + ci) * h + y) * w + x];
  }
  T at(int ni, int ci, int y, int x) const {
    return data[((static_cast<size_t>(ni) * c + ci) * h + y) * w + x];
  }
  void fill(T v) { data.assign(data.size(), v); }
  void zero() { fill(T(0)); }

  template <typename U>
  Tensor4<U> cast() const {
    Tensor4<U> out(n, c, h, w);
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

using Tensor4f = Tensor4<float>;
using Tensor4d = Tensor4<double>;

inline int conv_out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// ---- convolution -----------------------------------------------------------

// Cross-correlation. w laid out (co, ci, k, k); b may be null.
template <typename T>
void conv2d_forward(const Tensor4<T>& x, const T* w, const T* b, int co,
                    int k, int stride, int pad, Tensor4<T>& y) {
  const int oh = conv_out_dim(x.h, k, stride, pad);
  const int ow = conv_out_dim(x.w, k, stride, pad);
  if (oh < 1 || ow < 1) throw_usage("conv2d output would be empty");
  y = Tensor4<T>(x.n, co, oh, ow);
  for (int ni = 0; ni < x.n; ++ni) {
    for (int oc = 0; oc < co; ++oc) {
      T* yp = y.plane(ni, oc);
      if (b) {
        const T bias = b[oc];
        for (int i = 0; i < oh * ow; ++i) yp[i] = bias;
      }
      for (int ic = 0; ic < x.c; ++ic) {
        const T* xp = x.plane(ni, ic);
        const T* wrow = w + ((static_cast<size_t>(oc) * x.c + ic) * k * k);
        for (int kh = 0; kh < k; ++kh) {
          for (int kw = 0; kw < k; ++kw) {
            const T wv = wrow[kh * k + kw];
            if (wv == T(0)) continue;
            for (int oy = 0; oy < oh; ++oy) {
              const int iy = oy * stride - pad + kh;
              if (iy < 0 || iy >= x.h) continue;
              const T* xrow = xp + static_cast<size_t>(iy) * x.w;
              T* yrow = yp + static_cast<size_t>(oy) * ow;
              // valid ox range so that 0 <= ox*stride - pad + kw < x.w
              int lo = 0;
              const int shift = kw - pad;
              if (shift < 0) lo = (-shift + stride - 1) / stride;
              int hi = (x.w - 1 - shift) / stride;
              if (hi > ow - 1) hi = ow - 1;
              if (hi < lo) continue;
              if (stride == 1) {
                const T* xs = xrow + shift + lo;
                T* ys = yrow + lo;
                const int len = hi - lo + 1;
                for (int t = 0; t < len; ++t) ys[t] += wv * xs[t];
              } else {
                for (int ox = lo; ox <= hi; ++ox)
                  yrow[ox] += wv * xrow[ox * stride + shift];
              }
            }
          }
        }
      }
    }
  }
}

// Any of dx, dw, db may be null. dw/db are accumulated into.
template <typename T>
void conv2d_backward(const Tensor4<T>& x, const T* w, int co, int k,
                     int stride, int pad, const Tensor4<T>& dy, Tensor4<T>* dx,
                     T* dw, T* db) {
  const int oh = dy.h, ow = dy.w;
  if (dx) *dx = Tensor4<T>(x.n, x.c, x.h, x.w);
  for (int ni = 0; ni < x.n; ++ni) {
    for (int oc = 0; oc < co; ++oc) {
      const T* dyp = dy.plane(ni, oc);
      if (db) {
        T s = 0;
        for (int i = 0; i < oh * ow; ++i) s += dyp[i];
        db[oc] += s;
      }
      for (int ic = 0; ic < x.c; ++ic) {
        const T* xp = x.plane(ni, ic);
        T* dxp = dx ? dx->plane(ni, ic) : nullptr;
        const size_t wbase = (static_cast<size_t>(oc) * x.c + ic) * k * k;
        for (int kh = 0; kh < k; ++kh) {
          for (int kw = 0; kw < k; ++kw) {
            const T wv = w ? w[wbase + kh * k + kw] : T(0);
            T wgrad = 0;
            for (int oy = 0; oy < oh; ++oy) {
              const int iy = oy * stride - pad + kh;
              if (iy < 0 || iy >= x.h) continue;
              const T* xrow = xp + static_cast<size_t>(iy) * x.w;
              T* dxrow = dxp ? dxp + static_cast<size_t>(iy) * x.w : nullptr;
              const T* dyrow = dyp + static_cast<size_t>(oy) * ow;
              int lo = 0;
              const int shift = kw - pad;
              if (shift < 0) lo = (-shift + stride - 1) / stride;
              int hi = (x.w - 1 - shift) / stride;
              if (hi > ow - 1) hi = ow - 1;
              if (hi < lo) continue;
              if (stride == 1) {
                const int len = hi - lo + 1;
                const T* xs = xrow + shift + lo;
                const T* ds = dyrow + lo;
                if (dw)
                  for (int t = 0; t < len; ++t) wgrad += xs[t] * ds[t];
                if (dxrow) {
                  T* dxs = dxrow + shift + lo;
                  for (int t = 0; t < len; ++t) dxs[t] += wv * ds[t];
                }
              } else {
                for (int ox = lo; ox <= hi; ++ox) {
                  const int ix = ox * stride + shift;
                  if (dw) wgrad += xrow[ix] * dyrow[ox];
                  if (dxrow) dxrow[ix] += wv * dyrow[ox];
                }
              }
            }
            if (dw) dw[wbase + kh * k + kw] += wgrad;
          }
        }
      }
    }
  }
}

// ---- activations / pooling -------------------------------------------------

template <typename T>
void relu_forward(const Tensor4<T>& x, Tensor4<T>& y) {
  y = Tensor4<T>(x.n, x.c, x.h, x.w);
  for (size_t i = 0; i < x.size(); ++i) y.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
}

template <typename T>
void relu_backward(const Tensor4<T>& x, const Tensor4<T>& dy, Tensor4<T>& dx) {
  dx = Tensor4<T>(x.n, x.c, x.h, x.w);
  for (size_t i = 0; i < x.size(); ++i)
    dx.data[i] = x.data[i] > T(0) ? dy.data[i] : T(0);
}

template <typename T>
void maxpool_forward(const Tensor4<T>& x, int k, int stride, int pad,
                     Tensor4<T>& y, std::vector<int>& argmax) {
  if (k > x.h + 2 * pad || k > x.w + 2 * pad)
    throw_usage("pooling window larger than input");
  const int oh = conv_out_dim(x.h, k, stride, pad);
  const int ow = conv_out_dim(x.w, k, stride, pad);
  y = Tensor4<T>(x.n, x.c, oh, ow);
  argmax.assign(y.size(), -1);
  size_t oi = 0;
  for (int ni = 0; ni < x.n; ++ni)
    for (int ci = 0; ci < x.c; ++ci) {
      const T* xp = x.plane(ni, ci);
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox, ++oi) {
          T best = T(0);
          int best_idx = -1;
          for (int kh = 0; kh < k; ++kh) {
            const int iy = oy * stride - pad + kh;
            if (iy < 0 || iy >= x.h) continue;
            for (int kw = 0; kw < k; ++kw) {
              const int ix = ox * stride - pad + kw;
              if (ix < 0 || ix >= x.w) continue;
              const T v = xp[iy * x.w + ix];
              if (best_idx < 0 || v > best) {
                best = v;
                best_idx = iy * x.w + ix;
              }
            }
          }
          y.data[oi] = best_idx >= 0 ? best : T(0);
          argmax[oi] = best_idx;
        }
    }
}

template <typename T>
void maxpool_backward(const Tensor4<T>& x, const Tensor4<T>& dy,
                      const std::vector<int>& argmax, Tensor4<T>& dx) {
  dx = Tensor4<T>(x.n, x.c, x.h, x.w);
  size_t oi = 0;
  for (int ni = 0; ni < x.n; ++ni)
    for (int ci = 0; ci < x.c; ++ci) {
      T* dxp = dx.plane(ni, ci);
      for (int i = 0; i < dy.h * dy.w; ++i, ++oi)
        if (argmax[oi] >= 0) dxp[argmax[oi]] += dy.data[oi];
    }
}

template <typename T>
void avgpool_forward(const Tensor4<T>& x, int k, int stride, Tensor4<T>& y) {
  if (k > x.h || k > x.w) throw_usage("pooling window larger than input");
  const int oh = (x.h - k) / stride + 1;
  const int ow = (x.w - k) / stride + 1;
  y = Tensor4<T>(x.n, x.c, oh, ow);
  const T inv = T(1) / static_cast<T>(k * k);
  for (int ni = 0; ni < x.n; ++ni)
    for (int ci = 0; ci < x.c; ++ci) {
      const T* xp = x.plane(ni, ci);
      T* yp = y.plane(ni, ci);
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double s = 0;
          for (int kh = 0; kh < k; ++kh)
            for (int kw = 0; kw < k; ++kw)
              s += xp[(oy * stride + kh) * x.w + ox * stride + kw];
          yp[oy * ow + ox] = static_cast<T>(s * inv);
        }
    }
}

template <typename T>
void avgpool_backward(const Tensor4<T>& x, int k, int stride,
                      const Tensor4<T>& dy, Tensor4<T>& dx) {
  dx = Tensor4<T>(x.n, x.c, x.h, x.w);
  const T inv = T(1) / static_cast<T>(k * k);
  for (int ni = 0; ni < x.n; ++ni)
    for (int ci = 0; ci < x.c; ++ci) {
      T* dxp = dx.plane(ni, ci);
      const T* dyp = dy.plane(ni, ci);
      for (int oy = 0; oy < dy.h; ++oy)
        for (int ox = 0; ox < dy.w; ++ox) {
          const T g = dyp[oy * dy.w + ox] * inv;
          for (int kh = 0; kh < k; ++kh)
            for (int kw = 0; kw < k; ++kw)
              dxp[(oy * stride + kh) * x.w + ox * stride + kw] += g;
        }
    }
}

// Nearest resize to an arbitrary target, source index floor(dst * in / out).
template <typename T>
void upsample_nearest_forward(const Tensor4<T>& x, int out_h, int out_w,
                              Tensor4<T>& y) {
  y = Tensor4<T>(x.n, x.c, out_h, out_w);
  for (int ni = 0; ni < x.n; ++ni)
    for (int ci = 0; ci < x.c; ++ci) {
      const T* xp = x.plane(ni, ci);
      T* yp = y.plane(ni, ci);
      for (int oy = 0; oy < out_h; ++oy) {
        const int iy = static_cast<int>(static_cast<long long>(oy) * x.h / out_h);
        for (int ox = 0; ox < out_w; ++ox) {
          const int ix = static_cast<int>(static_cast<long long>(ox) * x.w / out_w);
          yp[oy * out_w + ox] = xp[iy * x.w + ix];
        }
      }
    }
}

template <typename T>
void upsample_nearest_backward(const Tensor4<T>& x, const Tensor4<T>& dy,
                               Tensor4<T>& dx) {
  dx = Tensor4<T>(x.n, x.c, x.h, x.w);
  for (int ni = 0; ni < x.n; ++ni)
    for (int ci = 0; ci < x.c; ++ci) {
      T* dxp = dx.plane(ni, ci);
      const T* dyp = dy.plane(ni, ci);
      for (int oy = 0; oy < dy.h; ++oy) {
        const int iy = static_cast<int>(static_cast<long long>(oy) * x.h / dy.h);
        for (int ox = 0; ox < dy.w; ++ox) {
          const int ix = static_cast<int>(static_cast<long long>(ox) * x.w / dy.w);
          dxp[iy * x.w + ix] += dyp[oy * dy.w + ox];
        }
      }
    }
}

// ---- linear -----------------------------------------------------------------

// x viewed as (rows, in); W is (out, in); y is (rows, out).
template <typename T>
void linear_forward(const T* x, int rows, int in_dim, const T* w, const T* b,
                    int out_dim, T* y) {
  for (int r = 0; r < rows; ++r) {
    const T* xr = x + static_cast<size_t>(r) * in_dim;
    T* yr = y + static_cast<size_t>(r) * out_dim;
    for (int o = 0; o < out_dim; ++o) {
      const T* wr = w + static_cast<size_t>(o) * in_dim;
      double s = b ? b[o] : T(0);
      for (int i = 0; i < in_dim; ++i) s += static_cast<double>(wr[i]) * xr[i];
      yr[o] = static_cast<T>(s);
    }
  }
}

template <typename T>
void linear_backward(const T* x, int rows, int in_dim, const T* w, int out_dim,
                     const T* dy, T* dx, T* dw, T* db) {
  if (dx)
    for (size_t i = 0; i < static_cast<size_t>(rows) * in_dim; ++i) dx[i] = T(0);
  for (int r = 0; r < rows; ++r) {
    const T* xr = x + static_cast<size_t>(r) * in_dim;
    const T* dyr = dy + static_cast<size_t>(r) * out_dim;
    T* dxr = dx ? dx + static_cast<size_t>(r) * in_dim : nullptr;
    for (int o = 0; o < out_dim; ++o) {
      const T g = dyr[o];
      if (db) db[o] += g;
      const T* wr = w + static_cast<size_t>(o) * in_dim;
      T* dwr = dw ? dw + static_cast<size_t>(o) * in_dim : nullptr;
      for (int i = 0; i < in_dim; ++i) {
        if (dwr) dwr[i] += g * xr[i];
        if (dxr) dxr[i] += g * wr[i];
      }
    }
  }
}

// ---- softmax / normalization -------------------------------------------------

// Softmax across channels independently at every (n, y, x) site.
template <typename T>
void softmax_channels_forward(const Tensor4<T>& x, Tensor4<T>& y) {
  y = Tensor4<T>(x.n, x.c, x.h, x.w);
  const int hw = x.h * x.w;
  for (int ni = 0; ni < x.n; ++ni)
    for (int s = 0; s < hw; ++s) {
      T mx = x.plane(ni, 0)[s];
      for (int ci = 1; ci < x.c; ++ci) mx = std::max(mx, x.plane(ni, ci)[s]);
      double denom = 0;
      for (int ci = 0; ci < x.c; ++ci)
        denom += std::exp(static_cast<double>(x.plane(ni, ci)[s] - mx));
      for (int ci = 0; ci < x.c; ++ci)
        y.plane(ni, ci)[s] = static_cast<T>(
            std::exp(static_cast<double>(x.plane(ni, ci)[s] - mx)) / denom);
    }
}

template <typename T>
void softmax_channels_backward(const Tensor4<T>& y, const Tensor4<T>& dy,
                               Tensor4<T>& dx) {
  dx = Tensor4<T>(y.n, y.c, y.h, y.w);
  const int hw = y.h * y.w;
  for (int ni = 0; ni < y.n; ++ni)
    for (int s = 0; s < hw; ++s) {
      double dot = 0;
      for (int ci = 0; ci < y.c; ++ci)
        dot += static_cast<double>(y.plane(ni, ci)[s]) * dy.plane(ni, ci)[s];
      for (int ci = 0; ci < y.c; ++ci)
        dx.plane(ni, ci)[s] = static_cast<T>(
            y.plane(ni, ci)[s] * (static_cast<double>(dy.plane(ni, ci)[s]) - dot));
    }
}

// L2 normalization of each sample's full (c*h*w) vector, eps-guarded.
template <typename T>
void l2_normalize_forward(const Tensor4<T>& x, T eps, Tensor4<T>& y,
                          std::vector<double>& norms) {
  y = Tensor4<T>(x.n, x.c, x.h, x.w);
  const size_t d = static_cast<size_t>(x.c) * x.h * x.w;
  norms.assign(x.n, 0.0);
  for (int ni = 0; ni < x.n; ++ni) {
    const T* xp = x.data.data() + ni * d;
    double s = 0;
    for (size_t i = 0; i < d; ++i) s += static_cast<double>(xp[i]) * xp[i];
    const double nrm = std::sqrt(s);
    norms[ni] = nrm;
    const double div = std::max(nrm, static_cast<double>(eps));
    T* yp = y.data.data() + ni * d;
    for (size_t i = 0; i < d; ++i) yp[i] = static_cast<T>(xp[i] / div);
  }
}

template <typename T>
void l2_normalize_backward(const Tensor4<T>& x, const Tensor4<T>& y, T eps,
                           const std::vector<double>& norms,
                           const Tensor4<T>& dy, Tensor4<T>& dx) {
  dx = Tensor4<T>(x.n, x.c, x.h, x.w);
  const size_t d = static_cast<size_t>(x.c) * x.h * x.w;
  for (int ni = 0; ni < x.n; ++ni) {
    const T* yp = y.data.data() + ni * d;
    const T* dyp = dy.data.data() + ni * d;
    T* dxp = dx.data.data() + ni * d;
    if (norms[ni] > static_cast<double>(eps)) {
      double dot = 0;
      for (size_t i = 0; i < d; ++i)
        dot += static_cast<double>(yp[i]) * dyp[i];
      for (size_t i = 0; i < d; ++i)
        dxp[i] = static_cast<T>((static_cast<double>(dyp[i]) -
                                 static_cast<double>(yp[i]) * dot) /
                                norms[ni]);
    } else {
      for (size_t i = 0; i < d; ++i)
        dxp[i] = static_cast<T>(dyp[i] / static_cast<double>(eps));
    }
  }
}

}  // namespace coral::nn

#endif
