#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "coral/grad_check.hpp"
#include "coral/layers.hpp"
#include "coral/rng.hpp"
#include "coral/tensor.hpp"

using namespace coral;
using namespace coral::nn;

namespace {

Tensor4d random_tensor(int n, int c, int h, int w, Rng& rng, double scale = 1.0) {
  Tensor4d t(n, c, h, w);
  for (auto& v : t.data) v = rng.uniform(-scale, scale);
  return t;
}

// independent six-nested-loop convolution
Tensor4d conv_oracle(const Tensor4d& x, const std::vector<double>& w,
                     const std::vector<double>& b, int co, int k, int stride,
                     int pad) {
  const int oh = conv_out_dim(x.h, k, stride, pad);
  const int ow = conv_out_dim(x.w, k, stride, pad);
  Tensor4d y(x.n, co, oh, ow);
  for (int ni = 0; ni < x.n; ++ni)
    for (int oc = 0; oc < co; ++oc)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double s = b.empty() ? 0.0 : b[oc];
          for (int ic = 0; ic < x.c; ++ic)
            for (int kh = 0; kh < k; ++kh)
              for (int kw = 0; kw < k; ++kw) {
                const int iy = oy * stride - pad + kh;
                const int ix = ox * stride - pad + kw;
                if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
                s += x.at(ni, ic, iy, ix) *
                     w[((static_cast<size_t>(oc) * x.c + ic) * k + kh) * k + kw];
              }
          y.at(ni, oc, oy, ox) = s;
        }
  return y;
}

double dot_project(const Tensor4d& y, const std::vector<double>& r) {
  double s = 0;
  for (size_t i = 0; i < y.size(); ++i) s += y.data[i] * r[i];
  return s;
}

std::vector<double> random_projection(size_t n, Rng& rng) {
  std::vector<double> r(n);
  for (auto& v : r) v = rng.uniform(-1, 1);
  return r;
}

}  // namespace

TEST_CASE("1x1 identity kernel reproduces the input") {
  Rng rng(301);
  Conv2d<double> conv("c", 2, 2, 1, 1, 0, rng);
  std::fill(conv.weight().value.begin(), conv.weight().value.end(), 0.0);
  conv.weight().value[0] = 1.0;  // (0,0)
  conv.weight().value[3] = 1.0;  // (1,1)
  const Tensor4d x = random_tensor(1, 2, 5, 6, rng);
  const Tensor4d y = conv.forward(x);
  REQUIRE(y.same_shape(x));
  for (size_t i = 0; i < x.size(); ++i)
    CHECK(y.data[i] == doctest::Approx(x.data[i]));
}

TEST_CASE("3x3 ones kernel on constant input gives 9c") {
  Rng rng(303);
  Conv2d<double> conv("c", 1, 1, 3, 1, 0, rng);
  std::fill(conv.weight().value.begin(), conv.weight().value.end(), 1.0);
  Tensor4d x(1, 1, 6, 7);
  x.fill(1.5);
  const Tensor4d y = conv.forward(x);
  CHECK(y.h == 4);
  CHECK(y.w == 5);
  for (auto v : y.data) CHECK(v == doctest::Approx(13.5));
}

TEST_CASE("conv2d matches the nested-loop oracle on random shapes") {
  Rng rng(307);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = rng.uniform_int(1, 2);
    const int ci = rng.uniform_int(1, 3);
    const int co = rng.uniform_int(1, 4);
    const int h = rng.uniform_int(3, 8), w = rng.uniform_int(3, 8);
    const int k = rng.uniform() < 0.5 ? 1 : 3;
    const int stride = rng.uniform_int(1, 2);
    const int pad = k == 3 ? rng.uniform_int(0, 1) : 0;
    if (conv_out_dim(h, k, stride, pad) < 1 || conv_out_dim(w, k, stride, pad) < 1)
      continue;
    Conv2d<double> conv("c", ci, co, k, stride, pad, rng);
    const Tensor4d x = random_tensor(n, ci, h, w, rng);
    const Tensor4d y = conv.forward(x);
    const Tensor4d want =
        conv_oracle(x, conv.weight().value, conv.bias().value, co, k, stride, pad);
    REQUIRE(y.same_shape(want));
    for (size_t i = 0; i < y.size(); ++i)
      REQUIRE(std::abs(y.data[i] - want.data[i]) < 1e-9);
  }
}

TEST_CASE("conv2d gradients pass central differences") {
  Rng rng(311);
  Conv2d<double> conv("c", 2, 3, 3, 2, 1, rng);
  Tensor4d x = random_tensor(2, 2, 6, 5, rng);
  const auto r = random_projection(
      static_cast<size_t>(2) * 3 * conv_out_dim(6, 3, 2, 1) * conv_out_dim(5, 3, 2, 1),
      rng);
  auto loss = [&]() { return dot_project(conv.forward(x), r); };

  conv.weight().zero_grad();
  conv.bias().zero_grad();
  Tensor4d y = conv.forward(x);
  Tensor4d dy(y.n, y.c, y.h, y.w);
  for (size_t i = 0; i < dy.size(); ++i) dy.data[i] = r[i];
  const Tensor4d dx = conv.backward(dy);

  auto wreport = grad_check<double>(loss, conv.weight().value,
                                    conv.weight().grad, 1e-6, 1e-4);
  CHECK(wreport.pass);
  auto breport = grad_check<double>(loss, conv.bias().value, conv.bias().grad,
                                    1e-6, 1e-4);
  CHECK(breport.pass);
  auto xreport = grad_check<double>(loss, std::span<double>(x.data),
                                    std::span<const double>(dx.data), 1e-6, 1e-4);
  CHECK(xreport.pass);
}

TEST_CASE("relu zeroes negative inputs and their gradients") {
  ReLU<double> relu;
  Tensor4d x(1, 1, 2, 3);
  x.fill(-2.0);
  const Tensor4d y = relu.forward(x);
  for (auto v : y.data) CHECK(v == 0.0);
  Tensor4d dy(1, 1, 2, 3);
  dy.fill(1.0);
  const Tensor4d dx = relu.backward(dy);
  for (auto v : dx.data) CHECK(v == 0.0);
}

TEST_CASE("avg pool of 2x2 blocks averages them") {
  AvgPool2d<double> pool(2, 2);
  Tensor4d x(1, 1, 2, 2);
  x.data = {1, 2, 3, 4};
  const Tensor4d y = pool.forward(x);
  REQUIRE(y.size() == 1);
  CHECK(y.data[0] == doctest::Approx(2.5));

  Tensor4d tiny(1, 1, 1, 1);
  AvgPool2d<double> big(2, 2);
  CHECK_THROWS_AS(big.forward(tiny), Error);
  std::vector<int> arg;
  Tensor4d out;
  CHECK_THROWS_AS(maxpool_forward(tiny, 4, 1, 0, out, arg), Error);
}

TEST_CASE("avg and max pooling gradients pass central differences") {
  Rng rng(313);
  Tensor4d x = random_tensor(2, 2, 6, 6, rng);
  {
    AvgPool2d<double> pool(2, 2);
    const auto r = random_projection(static_cast<size_t>(2) * 2 * 3 * 3, rng);
    auto loss = [&]() { return dot_project(pool.forward(x), r); };
    Tensor4d y = pool.forward(x);
    Tensor4d dy(y.n, y.c, y.h, y.w);
    for (size_t i = 0; i < dy.size(); ++i) dy.data[i] = r[i];
    const Tensor4d dx = pool.backward(dy);
    auto rep = grad_check<double>(loss, std::span<double>(x.data),
                                  std::span<const double>(dx.data), 1e-6, 1e-4);
    CHECK(rep.pass);
  }
  {
    MaxPool2d<double> pool(3, 2, 1);
    const auto r = random_projection(static_cast<size_t>(2) * 2 * 3 * 3, rng);
    auto loss = [&]() { return dot_project(pool.forward(x), r); };
    Tensor4d y = pool.forward(x);
    Tensor4d dy(y.n, y.c, y.h, y.w);
    for (size_t i = 0; i < dy.size(); ++i) dy.data[i] = r[i];
    const Tensor4d dx = pool.backward(dy);
    auto rep = grad_check<double>(loss, std::span<double>(x.data),
                                  std::span<const double>(dx.data), 1e-6, 1e-4);
    CHECK(rep.pass);
  }
}

TEST_CASE("batch norm normalizes and un-normalizes with its own statistics") {
  Rng rng(317);
  BatchNorm2d<float> bn("bn", 3);
  Tensor4f x(4, 3, 5, 5);
  for (auto& v : x.data) v = static_cast<float>(rng.uniform(-3, 7));
  const Tensor4f y = bn.forward(x, /*train=*/true);

  // recover the batch statistics independently and invert the transform
  for (int c = 0; c < 3; ++c) {
    double s = 0, s2 = 0;
    const size_t count = static_cast<size_t>(4) * 5 * 5;
    for (int ni = 0; ni < 4; ++ni)
      for (int i = 0; i < 25; ++i) {
        const double v = x.plane(ni, c)[i];
        s += v;
        s2 += v * v;
      }
    const double mean = s / count;
    const double var = s2 / count - mean * mean;
    for (int ni = 0; ni < 4; ++ni)
      for (int i = 0; i < 25; ++i) {
        const double rec = y.plane(ni, c)[i] * std::sqrt(var + 1e-5) + mean;
        CHECK(std::abs(rec - x.plane(ni, c)[i]) < 1e-6 * std::max(1.0, std::abs(mean)));
      }
  }
}

TEST_CASE("batch norm gradients pass central differences") {
  Rng rng(331);
  BatchNorm2d<double> bn("bn", 2);
  for (size_t i = 0; i < bn.forward(random_tensor(1, 2, 2, 2, rng), true).size();
       ++i) {
  }  // warm the running stats once; checks below freeze them
  Tensor4d x = random_tensor(3, 2, 4, 4, rng);
  const auto r = random_projection(x.size(), rng);
  auto loss = [&]() {
    return dot_project(bn.forward(x, true, /*update_running=*/false), r);
  };
  ParamRefs<double> ps;
  bn.params(ps);
  for (auto* p : ps) p->zero_grad();
  Tensor4d y = bn.forward(x, true, false);
  Tensor4d dy(y.n, y.c, y.h, y.w);
  for (size_t i = 0; i < dy.size(); ++i) dy.data[i] = r[i];
  const Tensor4d dx = bn.backward(dy);
  for (auto* p : ps) {
    if (!p->trainable) continue;
    auto rep = grad_check<double>(loss, p->value, p->grad, 1e-6, 1e-4);
    CHECK(rep.pass);
  }
  auto xrep = grad_check<double>(loss, std::span<double>(x.data),
                                 std::span<const double>(dx.data), 1e-6, 1e-4);
  CHECK(xrep.pass);
}

TEST_CASE("nearest upsample doubles pixels and routes gradients") {
  Rng rng(337);
  UpsampleNearest<double> up;
  Tensor4d x = random_tensor(1, 2, 3, 4, rng);
  const Tensor4d y = up.forward(x, 6, 8);
  for (int c = 0; c < 2; ++c)
    for (int oy = 0; oy < 6; ++oy)
      for (int ox = 0; ox < 8; ++ox)
        CHECK(y.at(0, c, oy, ox) == x.at(0, c, oy / 2, ox / 2));

  // odd target (7) still covers every source row
  const Tensor4d y2 = up.forward(x, 7, 9);
  CHECK(y2.h == 7);

  const auto r = random_projection(y.size(), rng);
  auto loss = [&]() { return dot_project(up.forward(x, 6, 8), r); };
  Tensor4d yy = up.forward(x, 6, 8);
  Tensor4d dy(yy.n, yy.c, yy.h, yy.w);
  for (size_t i = 0; i < dy.size(); ++i) dy.data[i] = r[i];
  const Tensor4d dx = up.backward(dy);
  auto rep = grad_check<double>(loss, std::span<double>(x.data),
                                std::span<const double>(dx.data), 1e-6, 1e-4);
  CHECK(rep.pass);
}

TEST_CASE("linear identity and scalar affine") {
  Rng rng(347);
  Linear<double> ident("l", 3, 3, rng);
  std::fill(ident.weight().value.begin(), ident.weight().value.end(), 0.0);
  for (int i = 0; i < 3; ++i) ident.weight().value[i * 3 + i] = 1.0;
  Tensor4d x(1, 3, 1, 1);
  x.data = {4.0, -2.0, 0.5};
  const Tensor4d y = ident.forward(x);
  for (int i = 0; i < 3; ++i) CHECK(y.data[i] == doctest::Approx(x.data[i]));

  Linear<double> affine("a", 1, 1, rng);
  affine.weight().value[0] = 2.0;
  affine.bias().value[0] = 3.0;
  Tensor4d s(1, 1, 1, 1);
  s.data = {5.0};
  CHECK(affine.forward(s).data[0] == doctest::Approx(13.0));
}

TEST_CASE("linear matches a loop oracle and passes finite differences") {
  Rng rng(349);
  Linear<double> lin("l", 6, 4, rng);
  Tensor4d x = random_tensor(3, 6, 1, 1, rng);
  const Tensor4d y = lin.forward(x);
  for (int row = 0; row < 3; ++row)
    for (int o = 0; o < 4; ++o) {
      double s = lin.bias().value[o];
      for (int i = 0; i < 6; ++i)
        s += lin.weight().value[o * 6 + i] * x.data[row * 6 + i];
      CHECK(std::abs(y.data[row * 4 + o] - s) < 1e-9);
    }

  const auto r = random_projection(y.size(), rng);
  auto loss = [&]() { return dot_project(lin.forward(x), r); };
  ParamRefs<double> ps;
  lin.params(ps);
  for (auto* p : ps) p->zero_grad();
  Tensor4d yy = lin.forward(x);
  Tensor4d dy(yy.n, yy.c, yy.h, yy.w);
  for (size_t i = 0; i < dy.size(); ++i) dy.data[i] = r[i];
  const Tensor4d dx = lin.backward(dy);
  for (auto* p : ps) {
    auto rep = grad_check<double>(loss, p->value, p->grad, 1e-6, 1e-4);
    CHECK(rep.pass);
  }
  auto xrep = grad_check<double>(loss, std::span<double>(x.data),
                                 std::span<const double>(dx.data), 1e-6, 1e-4);
  CHECK(xrep.pass);
}

TEST_CASE("softmax of equal logits is uniform, sums to one, stays positive") {
  Tensor4d x(1, 5, 1, 1);
  x.fill(0.7);
  Tensor4d y;
  softmax_channels_forward(x, y);
  for (auto v : y.data) CHECK(v == doctest::Approx(0.2));

  Rng rng(353);
  Tensor4d z = random_tensor(2, 7, 3, 3, rng, 4.0);
  softmax_channels_forward(z, y);
  for (int ni = 0; ni < 2; ++ni)
    for (int s = 0; s < 9; ++s) {
      double sum = 0;
      for (int c = 0; c < 7; ++c) {
        CHECK(y.plane(ni, c)[s] > 0.0);
        sum += y.plane(ni, c)[s];
      }
      CHECK(std::abs(sum - 1.0) < 1e-9);
    }
}

TEST_CASE("softmax gradients pass central differences") {
  Rng rng(359);
  Tensor4d x = random_tensor(1, 4, 2, 2, rng, 2.0);
  const auto r = random_projection(x.size(), rng);
  auto loss = [&]() {
    Tensor4d y;
    softmax_channels_forward(x, y);
    return dot_project(y, r);
  };
  Tensor4d y;
  softmax_channels_forward(x, y);
  Tensor4d dy(y.n, y.c, y.h, y.w);
  for (size_t i = 0; i < dy.size(); ++i) dy.data[i] = r[i];
  Tensor4d dx;
  softmax_channels_backward(y, dy, dx);
  auto rep = grad_check<double>(loss, std::span<double>(x.data),
                                std::span<const double>(dx.data), 1e-6, 1e-4);
  CHECK(rep.pass);
}

TEST_CASE("l2 normalize guards the zero vector and passes finite differences") {
  L2Normalize<double> l2(1e-8);
  Tensor4d zero(1, 4, 1, 1);
  const Tensor4d yz = l2.forward(zero);
  for (auto v : yz.data) CHECK(v == 0.0);

  Rng rng(367);
  Tensor4d x = random_tensor(2, 6, 1, 1, rng);
  const Tensor4d y = l2.forward(x);
  for (int ni = 0; ni < 2; ++ni) {
    double s = 0;
    for (int c = 0; c < 6; ++c) s += y.data[ni * 6 + c] * y.data[ni * 6 + c];
    CHECK(std::abs(std::sqrt(s) - 1.0) < 1e-9);
  }
  const auto r = random_projection(x.size(), rng);
  auto loss = [&]() { return dot_project(l2.forward(x), r); };
  Tensor4d yy = l2.forward(x);
  Tensor4d dy(yy.n, yy.c, yy.h, yy.w);
  for (size_t i = 0; i < dy.size(); ++i) dy.data[i] = r[i];
  const Tensor4d dx = l2.backward(dy);
  auto rep = grad_check<double>(loss, std::span<double>(x.data),
                                std::span<const double>(dx.data), 1e-6, 1e-4);
  CHECK(rep.pass);
}

TEST_CASE("grad_check flags a corrupted backward") {
  Rng rng(373);
  Linear<double> lin("l", 4, 2, rng);
  Tensor4d x = random_tensor(1, 4, 1, 1, rng);
  const auto r = random_projection(2, rng);
  auto loss = [&]() { return dot_project(lin.forward(x), r); };
  ParamRefs<double> ps;
  lin.params(ps);
  for (auto* p : ps) p->zero_grad();
  Tensor4d y = lin.forward(x);
  Tensor4d dy(1, 2, 1, 1);
  dy.data[0] = r[0];
  dy.data[1] = r[1];
  lin.backward(dy);
  auto& w = *ps[0];
  w.grad[0] += 1.0;  // deliberate corruption
  auto rep = grad_check<double>(loss, w.value, w.grad, 1e-6, 1e-4);
  CHECK_FALSE(rep.pass);
  CHECK(rep.max_rel_error > 1e-2);
}
