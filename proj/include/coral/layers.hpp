#ifndef CORAL_LAYERS_HPP
#define CORAL_LAYERS_HPP

#include <memory>
#include <string>
#include <vector>

#include "coral/rng.hpp"
#include "coral/tensor.hpp"

namespace coral::nn {

template <typename T>
struct Param {
  std::string name;
  std::vector<int> dims;
  std::vector<T> value;
  std::vector<T> grad;
  bool trainable = true;  // running stats are saved but not optimized

  Param() = default;
  Param(std::string n, std::vector<int> d, bool train = true)
      : name(std::move(n)), dims(std::move(d)), trainable(train) {
    size_t total = 1;
    for (int dim : dims) total *= static_cast<size_t>(dim);
    value.assign(total, T(0));
    grad.assign(total, T(0));
  }
  size_t size() const { return value.size(); }
  void zero_grad() { grad.assign(grad.size(), T(0)); }
};

template <typename T>
using ParamRefs = std::vector<Param<T>*>;

inline void kaiming_init_span(float* v, size_t n, int fan_in, Rng& rng) {
  const double stddev = std::sqrt(2.0 / fan_in);
  for (size_t i = 0; i < n; ++i) v[i] = static_cast<float>(rng.normal() * stddev);
}
inline void kaiming_init_span(double* v, size_t n, int fan_in, Rng& rng) {
  const double stddev = std::sqrt(2.0 / fan_in);
  for (size_t i = 0; i < n; ++i) v[i] = rng.normal() * stddev;
}

// ---- Conv2d -----------------------------------------------------------------

template <typename T>
class Conv2d {
 public:
  Conv2d(std::string name, int in_ch, int out_ch, int k, int stride, int pad,
         Rng& rng, bool bias = true)
      : in_ch_(in_ch), out_ch_(out_ch), k_(k), stride_(stride), pad_(pad),
        has_bias_(bias),
        w_(name + ".w", {out_ch, in_ch, k, k}),
        b_(name + ".b", {out_ch}) {
    kaiming_init_span(w_.value.data(), w_.size(), in_ch * k * k, rng);
  }

  Tensor4<T> forward(const Tensor4<T>& x) {
    if (x.c != in_ch_) throw_usage("conv2d channel mismatch");
    x_ = x;
    Tensor4<T> y;
    conv2d_forward(x, w_.value.data(), has_bias_ ? b_.value.data() : nullptr,
                   out_ch_, k_, stride_, pad_, y);
    return y;
  }
  Tensor4<T> backward(const Tensor4<T>& dy) {
    Tensor4<T> dx;
    conv2d_backward(x_, w_.value.data(), out_ch_, k_, stride_, pad_, dy, &dx,
                    w_.grad.data(), has_bias_ ? b_.grad.data() : nullptr);
    return dx;
  }
  void params(ParamRefs<T>& out) {
    out.push_back(&w_);
    if (has_bias_) out.push_back(&b_);
  }
  int out_channels() const { return out_ch_; }
  int kernel() const { return k_; }
  int stride() const { return stride_; }
  Param<T>& weight() { return w_; }
  Param<T>& bias() { return b_; }

 private:
  int in_ch_, out_ch_, k_, stride_, pad_;
  bool has_bias_;
  Param<T> w_, b_;
  Tensor4<T> x_;
};

// ---- BatchNorm2d --------------------------------------------------------------

template <typename T>
class BatchNorm2d {
 public:
  BatchNorm2d(std::string name, int channels, double momentum = 0.1,
              double eps = 1e-5)
      : channels_(channels), momentum_(momentum), eps_(eps),
        gamma_(name + ".gamma", {channels}),
        beta_(name + ".beta", {channels}),
        run_mean_(name + ".running_mean", {channels}, false),
        run_var_(name + ".running_var", {channels}, false) {
    for (auto& v : gamma_.value) v = T(1);
    for (auto& v : run_var_.value) v = T(1);
  }

  // update_running=false keeps forward side-effect free (gradient checks).
  Tensor4<T> forward(const Tensor4<T>& x, bool train, bool update_running = true) {
    if (x.c != channels_) throw_usage("batchnorm channel mismatch");
    x_ = x;
    train_ = train;
    const int hw = x.h * x.w;
    const size_t count = static_cast<size_t>(x.n) * hw;
    Tensor4<T> y(x.n, x.c, x.h, x.w);
    xhat_ = Tensor4<T>(x.n, x.c, x.h, x.w);
    mean_.assign(channels_, 0.0);
    inv_std_.assign(channels_, 0.0);
    for (int ci = 0; ci < channels_; ++ci) {
      double mean, var;
      if (train) {
        double s = 0, s2 = 0;
        for (int ni = 0; ni < x.n; ++ni) {
          const T* xp = x.plane(ni, ci);
          for (int i = 0; i < hw; ++i) {
            s += xp[i];
            s2 += static_cast<double>(xp[i]) * xp[i];
          }
        }
        mean = s / count;
        var = std::max(s2 / count - mean * mean, 0.0);
        if (update_running) {
          const double unbiased = count > 1 ? var * count / (count - 1.0) : var;
          run_mean_.value[ci] = static_cast<T>((1.0 - momentum_) * run_mean_.value[ci] +
                                               momentum_ * mean);
          run_var_.value[ci] = static_cast<T>((1.0 - momentum_) * run_var_.value[ci] +
                                              momentum_ * unbiased);
        }
      } else {
        mean = run_mean_.value[ci];
        var = run_var_.value[ci];
      }
      const double inv_std = 1.0 / std::sqrt(var + eps_);
      mean_[ci] = mean;
      inv_std_[ci] = inv_std;
      const double g = gamma_.value[ci], b = beta_.value[ci];
      for (int ni = 0; ni < x.n; ++ni) {
        const T* xp = x.plane(ni, ci);
        T* hp = xhat_.plane(ni, ci);
        T* yp = y.plane(ni, ci);
        for (int i = 0; i < hw; ++i) {
          const double h = (xp[i] - mean) * inv_std;
          hp[i] = static_cast<T>(h);
          yp[i] = static_cast<T>(g * h + b);
        }
      }
    }
    return y;
  }

  Tensor4<T> backward(const Tensor4<T>& dy) {
    const int hw = x_.h * x_.w;
    const double count = static_cast<double>(x_.n) * hw;
    Tensor4<T> dx(x_.n, x_.c, x_.h, x_.w);
    for (int ci = 0; ci < channels_; ++ci) {
      double sum_dy = 0, sum_dy_xhat = 0;
      for (int ni = 0; ni < x_.n; ++ni) {
        const T* dyp = dy.plane(ni, ci);
        const T* hp = xhat_.plane(ni, ci);
        for (int i = 0; i < hw; ++i) {
          sum_dy += dyp[i];
          sum_dy_xhat += static_cast<double>(dyp[i]) * hp[i];
        }
      }
      gamma_.grad[ci] += static_cast<T>(sum_dy_xhat);
      beta_.grad[ci] += static_cast<T>(sum_dy);
      const double g = gamma_.value[ci];
      const double inv_std = inv_std_[ci];
      for (int ni = 0; ni < x_.n; ++ni) {
        const T* dyp = dy.plane(ni, ci);
        const T* hp = xhat_.plane(ni, ci);
        T* dxp = dx.plane(ni, ci);
        if (train_) {
          for (int i = 0; i < hw; ++i)
            dxp[i] = static_cast<T>(
                g * inv_std *
                (dyp[i] - sum_dy / count - hp[i] * sum_dy_xhat / count));
        } else {
          for (int i = 0; i < hw; ++i)
            dxp[i] = static_cast<T>(g * inv_std * dyp[i]);
        }
      }
    }
    return dx;
  }

  void params(ParamRefs<T>& out) {
    out.push_back(&gamma_);
    out.push_back(&beta_);
    out.push_back(&run_mean_);
    out.push_back(&run_var_);
  }

 private:
  int channels_;
  double momentum_, eps_;
  Param<T> gamma_, beta_, run_mean_, run_var_;
  Tensor4<T> x_, xhat_;
  std::vector<double> mean_, inv_std_;
  bool train_ = true;
};

// ---- stateless-ish wrappers ---------------------------------------------------

template <typename T>
class ReLU {
 public:
  Tensor4<T> forward(const Tensor4<T>& x) {
    x_ = x;
    Tensor4<T> y;
    relu_forward(x, y);
    return y;
  }
  Tensor4<T> backward(const Tensor4<T>& dy) {
    Tensor4<T> dx;
    relu_backward(x_, dy, dx);
    return dx;
  }

 private:
  Tensor4<T> x_;
};

template <typename T>
class MaxPool2d {
 public:
  MaxPool2d(int k, int stride, int pad) : k_(k), stride_(stride), pad_(pad) {}
  Tensor4<T> forward(const Tensor4<T>& x) {
    x_ = x;
    Tensor4<T> y;
    maxpool_forward(x, k_, stride_, pad_, y, argmax_);
    return y;
  }
  Tensor4<T> backward(const Tensor4<T>& dy) {
    Tensor4<T> dx;
    maxpool_backward(x_, dy, argmax_, dx);
    return dx;
  }

 private:
  int k_, stride_, pad_;
  Tensor4<T> x_;
  std::vector<int> argmax_;
};

template <typename T>
class AvgPool2d {
 public:
  AvgPool2d(int k, int stride) : k_(k), stride_(stride) {}
  Tensor4<T> forward(const Tensor4<T>& x) {
    x_ = x;
    Tensor4<T> y;
    avgpool_forward(x, k_, stride_, y);
    return y;
  }
  Tensor4<T> backward(const Tensor4<T>& dy) {
    Tensor4<T> dx;
    avgpool_backward(x_, k_, stride_, dy, dx);
    return dx;
  }

 private:
  int k_, stride_;
  Tensor4<T> x_;
};

template <typename T>
class UpsampleNearest {
 public:
  Tensor4<T> forward(const Tensor4<T>& x, int out_h, int out_w) {
    x_ = x;
    Tensor4<T> y;
    upsample_nearest_forward(x, out_h, out_w, y);
    return y;
  }
  Tensor4<T> backward(const Tensor4<T>& dy) {
    Tensor4<T> dx;
    upsample_nearest_backward(x_, dy, dx);
    return dx;
  }

 private:
  Tensor4<T> x_;
};

template <typename T>
class Linear {
 public:
  Linear(std::string name, int in_dim, int out_dim, Rng& rng)
      : in_(in_dim), out_(out_dim),
        w_(name + ".w", {out_dim, in_dim}),
        b_(name + ".b", {out_dim}) {
    kaiming_init_span(w_.value.data(), w_.size(), in_dim, rng);
  }

  // x flattened per sample to (n, in_dim)
  Tensor4<T> forward(const Tensor4<T>& x) {
    if (static_cast<int>(x.size() / x.n) != in_)
      throw_usage("linear input dimension mismatch");
    x_ = x;
    Tensor4<T> y(x.n, out_, 1, 1);
    linear_forward(x.data.data(), x.n, in_, w_.value.data(), b_.value.data(),
                   out_, y.data.data());
    return y;
  }
  Tensor4<T> backward(const Tensor4<T>& dy) {
    Tensor4<T> dx(x_.n, x_.c, x_.h, x_.w);
    linear_backward(x_.data.data(), x_.n, in_, w_.value.data(), out_,
                    dy.data.data(), dx.data.data(), w_.grad.data(),
                    b_.grad.data());
    return dx;
  }
  void params(ParamRefs<T>& out) {
    out.push_back(&w_);
    out.push_back(&b_);
  }
  Param<T>& weight() { return w_; }
  Param<T>& bias() { return b_; }

 private:
  int in_, out_;
  Param<T> w_, b_;
  Tensor4<T> x_;
};

template <typename T>
class L2Normalize {
 public:
  explicit L2Normalize(T eps = static_cast<T>(1e-12)) : eps_(eps) {}
  Tensor4<T> forward(const Tensor4<T>& x) {
    x_ = x;
    Tensor4<T> y;
    l2_normalize_forward(x, eps_, y, norms_);
    y_ = y;
    return y;
  }
  Tensor4<T> backward(const Tensor4<T>& dy) {
    Tensor4<T> dx;
    l2_normalize_backward(x_, y_, eps_, norms_, dy, dx);
    return dx;
  }

 private:
  T eps_;
  Tensor4<T> x_, y_;
  std::vector<double> norms_;
};

// ---- NetVLAD -------------------------------------------------------------------

// Soft-assigned residual aggregation over all spatial sites. Input (n, D, H, W),
// output (n, K*D, 1, 1), intra-normalized per cluster then globally.
template <typename T>
class NetVlad {
 public:
  NetVlad(std::string name, int dim, int clusters, Rng& rng,
          double eps = 1e-12)
      : d_(dim), k_(clusters), eps_(eps),
        centers_(name + ".centers", {clusters, dim}),
        assign_w_(name + ".assign_w", {clusters, dim}),
        assign_b_(name + ".assign_b", {clusters}) {
    const double stddev = 1.0 / std::sqrt(static_cast<double>(dim));
    for (auto& v : centers_.value) v = static_cast<T>(rng.normal() * stddev);
    for (auto& v : assign_w_.value) v = static_cast<T>(rng.normal() * stddev);
  }

  Tensor4<T> forward(const Tensor4<T>& x) {
    if (x.c != d_) throw_usage("netvlad feature dimension mismatch");
    x_ = x;
    const int s_count = x.h * x.w;
    assign_.assign(static_cast<size_t>(x.n) * k_ * s_count, 0.0);
    raw_v_.assign(static_cast<size_t>(x.n) * k_ * d_, 0.0);
    assign_sum_.assign(static_cast<size_t>(x.n) * k_, 0.0);
    intra_norm_.assign(static_cast<size_t>(x.n) * k_, 0.0);
    global_norm_.assign(x.n, 0.0);
    Tensor4<T> out(x.n, k_ * d_, 1, 1);

    std::vector<double> logits(k_);
    for (int ni = 0; ni < x.n; ++ni) {
      double* a_n = assign_.data() + static_cast<size_t>(ni) * k_ * s_count;
      double* v_n = raw_v_.data() + static_cast<size_t>(ni) * k_ * d_;
      double* asum_n = assign_sum_.data() + static_cast<size_t>(ni) * k_;
      for (int s = 0; s < s_count; ++s) {
        double mx = -1e300;
        for (int kc = 0; kc < k_; ++kc) {
          double l = assign_b_.value[kc];
          const T* wr = assign_w_.value.data() + static_cast<size_t>(kc) * d_;
          for (int di = 0; di < d_; ++di)
            l += static_cast<double>(wr[di]) * x.plane(ni, di)[s];
          logits[kc] = l;
          mx = std::max(mx, l);
        }
        double denom = 0;
        for (int kc = 0; kc < k_; ++kc) denom += std::exp(logits[kc] - mx);
        for (int kc = 0; kc < k_; ++kc) {
          const double a = std::exp(logits[kc] - mx) / denom;
          a_n[static_cast<size_t>(kc) * s_count + s] = a;
          asum_n[kc] += a;
          double* vr = v_n + static_cast<size_t>(kc) * d_;
          const T* cr = centers_.value.data() + static_cast<size_t>(kc) * d_;
          // residual form keeps V exactly zero when x sits on the center
          for (int di = 0; di < d_; ++di)
            vr[di] += a * (static_cast<double>(x.plane(ni, di)[s]) - cr[di]);
        }
      }
      // intra + global normalization
      double g2 = 0;
      for (int kc = 0; kc < k_; ++kc) {
        double* vr = v_n + static_cast<size_t>(kc) * d_;
        double n2 = 0;
        for (int di = 0; di < d_; ++di) n2 += vr[di] * vr[di];
        const double nrm = std::sqrt(n2);
        intra_norm_[static_cast<size_t>(ni) * k_ + kc] = nrm;
        const double div = std::max(nrm, eps_);
        for (int di = 0; di < d_; ++di) {
          const double vn = vr[di] / div;
          out.data[(static_cast<size_t>(ni) * k_ + kc) * d_ + di] =
              static_cast<T>(vn);
          g2 += vn * vn;
        }
      }
      const double g = std::sqrt(g2);
      global_norm_[ni] = g;
      const double gdiv = std::max(g, eps_);
      for (int i = 0; i < k_ * d_; ++i)
        out.data[static_cast<size_t>(ni) * k_ * d_ + i] =
            static_cast<T>(out.data[static_cast<size_t>(ni) * k_ * d_ + i] / gdiv);
    }
    out_ = out;
    return out;
  }

  Tensor4<T> backward(const Tensor4<T>& dy) {
    const int s_count = x_.h * x_.w;
    Tensor4<T> dx(x_.n, x_.c, x_.h, x_.w);
    std::vector<double> d_vn(static_cast<size_t>(k_) * d_);
    std::vector<double> d_v(static_cast<size_t>(k_) * d_);
    std::vector<double> da(k_), dlogit(k_);
    for (int ni = 0; ni < x_.n; ++ni) {
      const double* a_n = assign_.data() + static_cast<size_t>(ni) * k_ * s_count;
      const double* v_n = raw_v_.data() + static_cast<size_t>(ni) * k_ * d_;
      const double* asum_n = assign_sum_.data() + static_cast<size_t>(ni) * k_;
      const T* out_n = out_.data.data() + static_cast<size_t>(ni) * k_ * d_;
      const T* dy_n = dy.data.data() + static_cast<size_t>(ni) * k_ * d_;

      // undo global normalization
      const double g = global_norm_[ni];
      if (g > eps_) {
        double dot = 0;
        for (int i = 0; i < k_ * d_; ++i)
          dot += static_cast<double>(out_n[i]) * dy_n[i];
        for (int i = 0; i < k_ * d_; ++i)
          d_vn[i] = (static_cast<double>(dy_n[i]) -
                     static_cast<double>(out_n[i]) * dot) / g;
      } else {
        for (int i = 0; i < k_ * d_; ++i) d_vn[i] = dy_n[i] / eps_;
      }
      // undo intra normalization per cluster
      for (int kc = 0; kc < k_; ++kc) {
        const double nrm = intra_norm_[static_cast<size_t>(ni) * k_ + kc];
        const double* vr = v_n + static_cast<size_t>(kc) * d_;
        const double* dvnr = d_vn.data() + static_cast<size_t>(kc) * d_;
        double* dvr = d_v.data() + static_cast<size_t>(kc) * d_;
        if (nrm > eps_) {
          double dot = 0;
          for (int di = 0; di < d_; ++di) dot += (vr[di] / nrm) * dvnr[di];
          for (int di = 0; di < d_; ++di)
            dvr[di] = (dvnr[di] - (vr[di] / nrm) * dot) / nrm;
        } else {
          for (int di = 0; di < d_; ++di) dvr[di] = dvnr[di] / eps_;
        }
        // centers see -asum * dV
        const size_t cbase = static_cast<size_t>(kc) * d_;
        for (int di = 0; di < d_; ++di)
          centers_.grad[cbase + di] -=
              static_cast<T>(asum_n[kc] * dvr[di]);
      }
      // per site: through residuals and softmax into x, w, b
      for (int s = 0; s < s_count; ++s) {
        for (int kc = 0; kc < k_; ++kc) {
          const double* dvr = d_v.data() + static_cast<size_t>(kc) * d_;
          const T* cr = centers_.value.data() + static_cast<size_t>(kc) * d_;
          const double a = a_n[static_cast<size_t>(kc) * s_count + s];
          double acc = 0;
          for (int di = 0; di < d_; ++di) {
            const double xv = x_.plane(ni, di)[s];
            acc += dvr[di] * (xv - cr[di]);
            dx.plane(ni, di)[s] += static_cast<T>(a * dvr[di]);
          }
          da[kc] = acc;
        }
        double adot = 0;
        for (int kc = 0; kc < k_; ++kc)
          adot += a_n[static_cast<size_t>(kc) * s_count + s] * da[kc];
        for (int kc = 0; kc < k_; ++kc) {
          const double a = a_n[static_cast<size_t>(kc) * s_count + s];
          dlogit[kc] = a * (da[kc] - adot);
        }
        for (int kc = 0; kc < k_; ++kc) {
          assign_b_.grad[kc] += static_cast<T>(dlogit[kc]);
          T* dwr = assign_w_.grad.data() + static_cast<size_t>(kc) * d_;
          const T* wr = assign_w_.value.data() + static_cast<size_t>(kc) * d_;
          for (int di = 0; di < d_; ++di) {
            const double xv = x_.plane(ni, di)[s];
            dwr[di] += static_cast<T>(dlogit[kc] * xv);
            dx.plane(ni, di)[s] += static_cast<T>(dlogit[kc] * wr[di]);
          }
        }
      }
    }
    return dx;
  }

  void params(ParamRefs<T>& out) {
    out.push_back(&centers_);
    out.push_back(&assign_w_);
    out.push_back(&assign_b_);
  }
  int clusters() const { return k_; }
  int dim() const { return d_; }

 private:
  int d_, k_;
  double eps_;
  Param<T> centers_, assign_w_, assign_b_;
  Tensor4<T> x_, out_;
  std::vector<double> assign_, raw_v_, assign_sum_, intra_norm_, global_norm_;
};

}  // namespace coral::nn

#endif
