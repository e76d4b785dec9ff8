#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "coral/grad_check.hpp"
#include "coral/network.hpp"
#include "coral/rng.hpp"

using namespace coral;
using namespace coral::nn;

namespace {

// direct site-by-cluster loops, intra then global normalization
std::vector<double> netvlad_oracle(const Tensor4d& x,
                                   const std::vector<double>& centers,
                                   const std::vector<double>& w,
                                   const std::vector<double>& b, int K,
                                   double eps = 1e-12) {
  const int D = x.c;
  const int S = x.h * x.w;
  std::vector<double> V(static_cast<size_t>(K) * D, 0.0);
  for (int s = 0; s < S; ++s) {
    std::vector<double> logits(K);
    for (int k = 0; k < K; ++k) {
      double l = b[k];
      for (int d = 0; d < D; ++d) l += w[k * D + d] * x.plane(0, d)[s];
      logits[k] = l;
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double denom = 0;
    for (int k = 0; k < K; ++k) denom += std::exp(logits[k] - mx);
    for (int k = 0; k < K; ++k) {
      const double a = std::exp(logits[k] - mx) / denom;
      for (int d = 0; d < D; ++d)
        V[k * D + d] += a * (x.plane(0, d)[s] - centers[k * D + d]);
    }
  }
  for (int k = 0; k < K; ++k) {
    double n2 = 0;
    for (int d = 0; d < D; ++d) n2 += V[k * D + d] * V[k * D + d];
    const double div = std::max(std::sqrt(n2), eps);
    for (int d = 0; d < D; ++d) V[k * D + d] /= div;
  }
  double g2 = 0;
  for (double v : V) g2 += v * v;
  const double gdiv = std::max(std::sqrt(g2), eps);
  for (double& v : V) v /= gdiv;
  return V;
}

Tensor4d random_tensor(int n, int c, int h, int w, Rng& rng, double scale = 1.0) {
  Tensor4d t(n, c, h, w);
  for (auto& v : t.data) v = rng.uniform(-scale, scale);
  return t;
}

ArchConfig desk_arch(ArchConfig::Modality modality,
                     ArchConfig::Fusion fusion = ArchConfig::Fusion::concat,
                     ArchConfig::Depth depth = ArchConfig::Depth::four) {
  ArchConfig a;
  a.width = 0.125;
  a.fusion = fusion;
  a.depth = depth;
  a.modality = modality;
  a.clusters = 8;
  a.descriptor_dim = 64;
  a.visual_hw = 56;
  a.elev_hw = 40;
  return a;
}

// synthetic but geometrically plausible projection table covering part of
// the grid
ProjectionTable synthetic_table(int img, int grid, Rng& rng) {
  ProjectionTable t;
  t.src_width = t.src_height = img;
  t.grid_x = t.grid_y = grid;
  for (int j = 0; j < grid; ++j)
    for (int i = 0; i < grid; ++i) {
      if (rng.uniform() < 0.4) continue;
      ProjectionEntry e;
      e.cell_i = i;
      e.cell_j = j;
      e.u = rng.uniform(0.0, img - 1.0);
      e.v = rng.uniform(0.0, img - 1.0);
      e.x0 = std::min(static_cast<int>(e.u), img - 2);
      e.y0 = std::min(static_cast<int>(e.v), img - 2);
      const double fu = e.u - e.x0, fv = e.v - e.y0;
      e.w00 = (1 - fu) * (1 - fv);
      e.w10 = fu * (1 - fv);
      e.w01 = (1 - fu) * fv;
      e.w11 = fu * fv;
      t.entries.push_back(e);
    }
  return t;
}

BatchInputs random_batch(const ArchConfig& cfg, int batch,
                         const ProjectionTable* table, Rng& rng) {
  BatchInputs in;
  if (cfg.modality != ArchConfig::Modality::structure_only) {
    in.visual = Tensor4f(batch, 3, cfg.visual_hw, cfg.visual_hw);
    for (auto& v : in.visual.data) v = static_cast<float>(rng.uniform(0, 1));
  }
  if (cfg.modality != ArchConfig::Modality::vision_only) {
    in.elevation = Tensor4f(batch, 1, cfg.elev_hw, cfg.elev_hw);
    for (auto& v : in.elevation.data) v = static_cast<float>(rng.uniform(0, 1));
  }
  if (cfg.modality == ArchConfig::Modality::fusion)
    in.tables.assign(batch, table);
  return in;
}

}  // namespace

TEST_CASE("netvlad with one cluster reduces to a normalized residual sum") {
  Rng rng(401);
  const int D = 6, S = 4;
  NetVlad<double> vlad("v", D, 1, rng);
  Tensor4d x = random_tensor(1, D, 2, 2, rng);
  const Tensor4d out = vlad.forward(x);

  std::vector<double> expect(D, 0.0);
  ParamRefs<double> ps;
  vlad.params(ps);
  const auto& centers = ps[0]->value;
  for (int s = 0; s < S; ++s)
    for (int d = 0; d < D; ++d) expect[d] += x.plane(0, d)[s] - centers[d];
  double n2 = 0;
  for (double v : expect) n2 += v * v;
  for (double& v : expect) v /= std::sqrt(n2);
  // intra and global normalization coincide for K=1
  for (int d = 0; d < D; ++d)
    CHECK(std::abs(out.data[d] - expect[d]) < 1e-9);
}

TEST_CASE("netvlad zero residuals stay zero under the eps guard") {
  Rng rng(409);
  const int D = 4;
  NetVlad<double> vlad("v", D, 2, rng);
  ParamRefs<double> ps;
  vlad.params(ps);
  auto& centers = ps[0]->value;
  auto& assign_w = ps[1]->value;
  auto& assign_b = ps[2]->value;
  std::fill(assign_w.begin(), assign_w.end(), 0.0);
  assign_b[0] = 200.0;  // hard assignment to cluster 0
  assign_b[1] = 0.0;
  Tensor4d x(1, D, 3, 3);
  for (int d = 0; d < D; ++d)
    for (int s = 0; s < 9; ++s) x.plane(0, d)[s] = centers[d];
  const Tensor4d out = vlad.forward(x);
  for (auto v : out.data) CHECK(std::abs(v) < 1e-8);
}

TEST_CASE("netvlad matches the two-loop oracle and ignores site order") {
  Rng rng(419);
  for (int trial = 0; trial < 10; ++trial) {
    const int D = 5, K = 7;
    NetVlad<double> vlad("v", D, K, rng);
    Tensor4d x = random_tensor(1, D, 4, 5, rng, 2.0);
    const Tensor4d out = vlad.forward(x);
    ParamRefs<double> ps;
    vlad.params(ps);
    const auto expect =
        netvlad_oracle(x, ps[0]->value, ps[1]->value, ps[2]->value, K);
    REQUIRE(out.size() == expect.size());
    for (size_t i = 0; i < expect.size(); ++i)
      REQUIRE(std::abs(out.data[i] - expect[i]) < 1e-9);

    // permute spatial sites
    std::vector<int> perm(20);
    for (int i = 0; i < 20; ++i) perm[i] = i;
    rng.shuffle(perm);
    Tensor4d xp(1, D, 4, 5);
    for (int d = 0; d < D; ++d)
      for (int s = 0; s < 20; ++s) xp.plane(0, d)[perm[s]] = x.plane(0, d)[s];
    const Tensor4d out_p = vlad.forward(xp);
    for (size_t i = 0; i < out.size(); ++i)
      REQUIRE(std::abs(out.data[i] - out_p.data[i]) < 1e-9);
  }
}

TEST_CASE("netvlad spatial permutation invariance holds in float as well") {
  Rng rng(421);
  NetVlad<float> vlad("v", 8, 4, rng);
  Tensor4f x(2, 8, 5, 5);
  for (auto& v : x.data) v = static_cast<float>(rng.uniform(-2, 2));
  const Tensor4f out = vlad.forward(x);
  std::vector<int> perm(25);
  for (int i = 0; i < 25; ++i) perm[i] = i;
  rng.shuffle(perm);
  Tensor4f xp(2, 8, 5, 5);
  for (int n = 0; n < 2; ++n)
    for (int d = 0; d < 8; ++d)
      for (int s = 0; s < 25; ++s)
        xp.plane(n, d)[perm[s]] = x.plane(n, d)[s];
  const Tensor4f out_p = vlad.forward(xp);
  for (size_t i = 0; i < out.size(); ++i)
    CHECK(std::abs(static_cast<double>(out.data[i]) - out_p.data[i]) < 1e-9);
}

TEST_CASE("netvlad gradients pass central differences") {
  Rng rng(431);
  const int D = 4, K = 3;
  NetVlad<double> vlad("v", D, K, rng);
  Tensor4d x = random_tensor(1, D, 3, 3, rng);
  std::vector<double> r(static_cast<size_t>(K) * D);
  for (auto& v : r) v = rng.uniform(-1, 1);
  auto loss = [&]() {
    const Tensor4d y = vlad.forward(x);
    double s = 0;
    for (size_t i = 0; i < y.size(); ++i) s += r[i] * y.data[i];
    return s;
  };
  ParamRefs<double> ps;
  vlad.params(ps);
  for (auto* p : ps) p->zero_grad();
  Tensor4d y = vlad.forward(x);
  Tensor4d dy(1, K * D, 1, 1);
  for (size_t i = 0; i < dy.size(); ++i) dy.data[i] = r[i];
  const Tensor4d dx = vlad.backward(dy);
  for (auto* p : ps) {
    auto rep = grad_check<double>(loss, p->value, p->grad, 1e-6, 1e-4);
    CHECK(rep.pass);
  }
  auto xrep = grad_check<double>(loss, std::span<double>(x.data),
                                 std::span<const double>(dx.data), 1e-6, 1e-4);
  CHECK(xrep.pass);
}

TEST_CASE("average pooling of a constant field is that constant") {
  Tensor4f v(1, 2, 8, 8);
  v.fill(3.25f);
  for (int factor : {2, 4, 8}) {
    Tensor4f out;
    avgpool_forward(v, factor, factor, out);
    CHECK(out.h == 8 / factor);
    for (auto x : out.data) CHECK(x == doctest::Approx(3.25f));
  }
}

TEST_CASE("paper-scale architecture audit") {
  ArchConfig cfg;  // defaults are the paper preset
  CoralNetwork net(cfg, 99);
  const ArchReport r = net.architecture_report();
  CHECK(r.visual_input == 112);
  CHECK(r.descriptor_dim == 256);
  CHECK(r.fpn_output_hw == 28);
  REQUIRE(r.group_conv_counts.size() == 5);
  CHECK(r.group_conv_counts == std::vector<int>{2, 4, 4, 6, 6});
  CHECK(r.group_channels == std::vector<int>{64, 64, 128, 192, 256});
  CHECK(r.group_first_strides == std::vector<int>{1, 2, 2, 2, 2});
  CHECK(r.group_spatial == std::vector<int>{80, 40, 20, 10, 5});
  CHECK(r.vlad_input_dim == 256);
  CHECK(r.clusters == 64);

  // concat-four fusion widens each residual group's entry conv
  bool found_g2 = false;
  for (const auto& [name, dims] : r.params) {
    if (name == "struct.group2.block0.c1.w") {
      found_g2 = true;
      REQUIRE(dims.size() == 4);
      CHECK(dims[0] == 64);
      CHECK(dims[1] == 128);  // 64 structural + 64 projected channels
    }
  }
  CHECK(found_g2);
}

TEST_CASE("zero image yields a zero FPN map at initialization") {
  ArchConfig cfg = desk_arch(ArchConfig::Modality::vision_only);
  CoralNetwork net(cfg, 3);
  Tensor4f img(1, 3, 56, 56);
  const Tensor4f fpn = net.debug_fpn(img);
  CHECK(fpn.h == 14);
  CHECK(fpn.w == 14);
  CHECK(fpn.c == 8);
  for (auto v : fpn.data) CHECK(v == 0.0f);
}

TEST_CASE("fpn output is a quarter of the visual input at every width") {
  for (double width : {1.0, 0.5, 0.25, 0.125}) {
    ArchConfig cfg = desk_arch(ArchConfig::Modality::vision_only);
    cfg.width = width;
    CoralNetwork net(cfg, 5);
    Tensor4f img(1, 3, 56, 56);
    const Tensor4f fpn = net.debug_fpn(img);
    CHECK(fpn.h == 14);
    CHECK(fpn.c == std::max(1, static_cast<int>(std::lround(64 * width))));
  }
}

TEST_CASE("describe returns unit descriptors deterministically") {
  Rng rng(443);
  ArchConfig cfg = desk_arch(ArchConfig::Modality::fusion);
  CoralNetwork net(cfg, 17);
  const ProjectionTable table = synthetic_table(56, 40, rng);
  SampleInputs sample;
  sample.visual = Tensor4f(1, 3, 56, 56);
  sample.elevation = Tensor4f(1, 1, 40, 40);
  for (auto& v : sample.visual.data) v = static_cast<float>(rng.uniform(0, 1));
  for (auto& v : sample.elevation.data) v = static_cast<float>(rng.uniform(0, 1));
  sample.table = &table;

  const auto d1 = net.describe(sample);
  const auto d2 = net.describe(sample);
  REQUIRE(d1.size() == static_cast<size_t>(cfg.descriptor_dim));
  CHECK(d1 == d2);  // bit-for-bit
  double n2 = 0;
  for (float v : d1) n2 += static_cast<double>(v) * v;
  CHECK(std::abs(std::sqrt(n2) - 1.0) < 1e-6);
}

TEST_CASE("vision_only descriptors ignore the elevation input") {
  Rng rng(449);
  ArchConfig cfg = desk_arch(ArchConfig::Modality::vision_only);
  CoralNetwork net(cfg, 19);
  SampleInputs sample;
  sample.visual = Tensor4f(1, 3, 56, 56);
  for (auto& v : sample.visual.data) v = static_cast<float>(rng.uniform(0, 1));
  sample.elevation = Tensor4f(1, 1, 40, 40);
  const auto d1 = net.describe(sample);
  for (auto& v : sample.elevation.data) v = static_cast<float>(rng.uniform(0, 1));
  const auto d2 = net.describe(sample);
  CHECK(d1 == d2);
}

TEST_CASE("sum fusion with a zero visual branch equals structure_only") {
  Rng rng(457);
  ArchConfig fusion_cfg =
      desk_arch(ArchConfig::Modality::fusion, ArchConfig::Fusion::sum);
  ArchConfig structure_cfg = fusion_cfg;
  structure_cfg.modality = ArchConfig::Modality::structure_only;

  CoralNetwork fusion_net(fusion_cfg, 23);
  CoralNetwork structure_net(structure_cfg, 29);
  const auto ckpt =
      (std::filesystem::temp_directory_path() / "coral_fusion_share.ckpt").string();
  fusion_net.save_checkpoint(ckpt);
  structure_net.load_checkpoint(ckpt, /*allow_partial=*/true);

  const ProjectionTable table = synthetic_table(56, 40, rng);
  SampleInputs sample;
  sample.visual = Tensor4f(1, 3, 56, 56);  // all zeros
  sample.elevation = Tensor4f(1, 1, 40, 40);
  for (auto& v : sample.elevation.data) v = static_cast<float>(rng.uniform(0, 1));
  sample.table = &table;
  const auto df = fusion_net.describe(sample);

  SampleInputs structure_sample;
  structure_sample.elevation = sample.elevation;
  const auto ds = structure_net.describe(structure_sample);
  REQUIRE(df.size() == ds.size());
  for (size_t i = 0; i < df.size(); ++i)
    CHECK(std::abs(df[i] - ds[i]) < 1e-6);
  std::filesystem::remove(ckpt);
}

TEST_CASE("end-to-end gradients match finite differences in 32-bit") {
  Rng rng(461);
  ArchConfig cfg = desk_arch(ArchConfig::Modality::fusion);
  CoralNetwork net(cfg, 31);
  const ProjectionTable table = synthetic_table(56, 40, rng);
  BatchInputs in = random_batch(cfg, 1, &table, rng);

  std::vector<float> r(cfg.descriptor_dim);
  for (auto& v : r) v = static_cast<float>(rng.uniform(-1, 1));
  auto loss = [&]() {
    const Tensor4f y = net.forward(in, /*train=*/true, /*update_running=*/false);
    double s = 0;
    for (int i = 0; i < cfg.descriptor_dim; ++i) s += r[i] * y.data[i];
    return s;
  };

  net.zero_grad();
  const Tensor4f y = net.forward(in, true, false);
  Tensor4f dy(1, cfg.descriptor_dim, 1, 1);
  for (int i = 0; i < cfg.descriptor_dim; ++i) dy.data[i] = r[i];
  net.backward(dy);

  // Sample parameters across the whole graph. A candidate only counts where
  // float finite differences are locally meaningful: the FD at h and h/2 must
  // agree (ReLU kink flips and float rounding otherwise dominate the probe,
  // independent of the analytic gradient's correctness).
  auto fd_at = [&](nn::Param<float>* p, size_t idx, double h) {
    const float saved = p->value[idx];
    p->value[idx] = static_cast<float>(saved + h);
    const double up = loss();
    p->value[idx] = static_cast<float>(saved - h);
    const double down = loss();
    p->value[idx] = saved;
    return (up - down) / (2 * h);
  };

  auto params = net.parameters();
  Rng pick(71);
  int accepted = 0, matched = 0;
  std::set<std::string> modules;
  for (int attempt = 0; attempt < 4000 && accepted < 24; ++attempt) {
    auto* p = params[pick.uniform_int(0, static_cast<int>(params.size()) - 1)];
    if (!p->trainable || p->size() == 0) continue;
    const size_t idx =
        static_cast<size_t>(pick.uniform_int(0, static_cast<int>(p->size()) - 1));
    const double g = p->grad[idx];
    if (std::abs(g) < 0.05) continue;
    const double h = 1e-3 * std::max(1.0, std::abs(static_cast<double>(p->value[idx])));
    const double fd1 = fd_at(p, idx, h);
    const double fd2 = fd_at(p, idx, h / 2);
    if (std::abs(fd1 - fd2) > 2e-4 * std::max(std::abs(fd1), std::abs(fd2)))
      continue;  // kink or rounding inside the probe window
    ++accepted;
    modules.insert(p->name.substr(0, p->name.find('.')));
    const double rel =
        std::abs(fd2 - g) / std::max(std::abs(fd2), std::abs(g));
    if (rel < 1e-3) ++matched;
  }
  REQUIRE(accepted >= 20);
  CHECK(matched == accepted);
  // the accepted set must exercise both streams and the aggregation head
  CHECK(modules.size() >= 4);
}

TEST_CASE("batched training forward handles a whole tuple at once") {
  Rng rng(467);
  ArchConfig cfg = desk_arch(ArchConfig::Modality::fusion);
  CoralNetwork net(cfg, 37);
  const ProjectionTable table = synthetic_table(56, 40, rng);
  BatchInputs in = random_batch(cfg, 5, &table, rng);
  const Tensor4f out = net.forward(in, true);
  CHECK(out.n == 5);
  CHECK(out.c == cfg.descriptor_dim);
  net.zero_grad();
  Tensor4f dy(5, cfg.descriptor_dim, 1, 1);
  for (auto& v : dy.data) v = static_cast<float>(rng.uniform(-1, 1));
  net.backward(dy);  // shapes flow back without complaint
  double gsum = 0;
  for (auto* p : net.parameters())
    for (float g : p->grad) gsum += std::abs(g);
  CHECK(gsum > 0.0);
}
