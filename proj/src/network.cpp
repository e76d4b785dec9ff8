#include "coral/network.hpp"

#include <algorithm>
#include <cmath>

#include "coral/checkpoint.hpp"
#include "coral/error.hpp"
#include "coral/rng.hpp"

namespace coral {

using nn::BatchNorm2d;
using nn::Conv2d;
using nn::L2Normalize;
using nn::Linear;
using nn::MaxPool2d;
using nn::NetVlad;
using nn::Param;
using nn::ParamRefs;
using nn::ReLU;
using nn::Tensor4f;
using nn::UpsampleNearest;

ArchConfig ArchConfig::from_config(const Config& config) {
  ArchConfig a;
  a.width = config.net_width;
  a.fusion = config.net_fusion == "sum" ? Fusion::sum : Fusion::concat;
  a.depth = config.net_depth == "first" ? Depth::first : Depth::four;
  if (config.net_modality == "vision_only")
    a.modality = Modality::vision_only;
  else if (config.net_modality == "structure_only")
    a.modality = Modality::structure_only;
  else
    a.modality = Modality::fusion;
  a.clusters = config.net_clusters;
  a.descriptor_dim = config.net_descriptor;
  a.visual_hw = config.camera_height;
  a.elev_hw = config.grid_cells_x;
  a.fpn_width = config.net_fpn_width;
  a.merge_width = config.net_merge_width;
  a.mlp_layers = config.net_mlp_layers;
  a.validate();
  return a;
}

void ArchConfig::validate() const {
  const bool width_ok = std::abs(width - 1.0) < 1e-12 ||
                        std::abs(width - 0.5) < 1e-12 ||
                        std::abs(width - 0.25) < 1e-12 ||
                        std::abs(width - 0.125) < 1e-12;
  if (!width_ok) throw_usage("width multiplier must be 1, 1/2, 1/4 or 1/8");
  if (clusters < 1 || descriptor_dim < 1)
    throw_usage("clusters and descriptor_dim must be >= 1");
  if (visual_hw < 32 && modality != Modality::structure_only)
    throw_usage("visual input too small");
  if (elev_hw < 16 && modality != Modality::vision_only)
    throw_usage("elevation input too small");
  if (mlp_layers < 1) throw_usage("mlp needs at least one layer");
}

int ArchConfig::scaled(int channels) const {
  return std::max(1, static_cast<int>(std::lround(channels * width)));
}

namespace {

// conv(3x3)-bn-relu-conv(3x3)-bn + projection shortcut, relu
struct ResidualBlock {
  Conv2d<float> c1;
  BatchNorm2d<float> bn1;
  ReLU<float> relu1;
  Conv2d<float> c2;
  BatchNorm2d<float> bn2;
  bool has_proj;
  Conv2d<float> proj;
  BatchNorm2d<float> proj_bn;
  ReLU<float> out_relu;

  ResidualBlock(const std::string& name, int in_ch, int out_ch, int stride,
                Rng& rng)
      : c1(name + ".c1", in_ch, out_ch, 3, stride, 1, rng, false),
        bn1(name + ".bn1", out_ch),
        c2(name + ".c2", out_ch, out_ch, 3, 1, 1, rng, false),
        bn2(name + ".bn2", out_ch),
        has_proj(stride != 1 || in_ch != out_ch),
        proj(name + ".proj", in_ch, has_proj ? out_ch : 1, 1, stride, 0, rng,
             false),
        proj_bn(name + ".proj_bn", has_proj ? out_ch : 1) {}

  Tensor4f forward(const Tensor4f& x, bool train, bool upd) {
    Tensor4f main = bn2.forward(
        c2.forward(relu1.forward(bn1.forward(c1.forward(x), train, upd))),
        train, upd);
    Tensor4f skip =
        has_proj ? proj_bn.forward(proj.forward(x), train, upd) : x;
    if (!main.same_shape(skip)) throw_usage("residual shapes disagree");
    for (size_t i = 0; i < main.size(); ++i) main.data[i] += skip.data[i];
    return out_relu.forward(main);
  }

  Tensor4f backward(const Tensor4f& dy) {
    const Tensor4f dsum = out_relu.backward(dy);
    Tensor4f dx =
        c1.backward(bn1.backward(relu1.backward(c2.backward(bn2.backward(dsum)))));
    if (has_proj) {
      const Tensor4f dskip = proj.backward(proj_bn.backward(dsum));
      for (size_t i = 0; i < dx.size(); ++i) dx.data[i] += dskip.data[i];
    } else {
      for (size_t i = 0; i < dx.size(); ++i) dx.data[i] += dsum.data[i];
    }
    return dx;
  }

  void params(ParamRefs<float>& out) {
    c1.params(out);
    bn1.params(out);
    c2.params(out);
    bn2.params(out);
    if (has_proj) {
      proj.params(out);
      proj_bn.params(out);
    }
  }
};

struct ConvBnRelu {
  Conv2d<float> conv;
  BatchNorm2d<float> bn;
  ReLU<float> relu;

  ConvBnRelu(const std::string& name, int in_ch, int out_ch, int k, int stride,
             int pad, Rng& rng)
      : conv(name + ".conv", in_ch, out_ch, k, stride, pad, rng, false),
        bn(name + ".bn", out_ch) {}

  Tensor4f forward(const Tensor4f& x, bool train, bool upd) {
    return relu.forward(bn.forward(conv.forward(x), train, upd));
  }
  Tensor4f backward(const Tensor4f& dy) {
    return conv.backward(bn.backward(relu.backward(dy)));
  }
  void params(ParamRefs<float>& out) {
    conv.params(out);
    bn.params(out);
  }
};

Tensor4f add_tensors(const Tensor4f& a, const Tensor4f& b) {
  if (!a.same_shape(b)) throw_usage("tensor addition shape mismatch");
  Tensor4f out = a;
  for (size_t i = 0; i < out.size(); ++i) out.data[i] += b.data[i];
  return out;
}

// ResNet18 backbone + FPN merge back to the first residual block's scale.
struct VisualStream {
  Conv2d<float> conv1;
  BatchNorm2d<float> bn1;
  ReLU<float> relu1;
  MaxPool2d<float> pool;
  std::vector<ResidualBlock> layer1, layer2, layer3, layer4;
  Conv2d<float> lat1, lat2, lat3, lat4;
  UpsampleNearest<float> up43, up32, up21;
  Conv2d<float> smooth;
  int fpn_ch;

  VisualStream(const ArchConfig& cfg, Rng& rng)
      : conv1("visual.conv1", 3, cfg.scaled(64), 7, 2, 3, rng, false),
        bn1("visual.bn1", cfg.scaled(64)),
        pool(3, 2, 1),
        lat1("visual.fpn.lat1", cfg.scaled(64), cfg.scaled(cfg.fpn_width), 1, 1, 0, rng),
        lat2("visual.fpn.lat2", cfg.scaled(128), cfg.scaled(cfg.fpn_width), 1, 1, 0, rng),
        lat3("visual.fpn.lat3", cfg.scaled(256), cfg.scaled(cfg.fpn_width), 1, 1, 0, rng),
        lat4("visual.fpn.lat4", cfg.scaled(512), cfg.scaled(cfg.fpn_width), 1, 1, 0, rng),
        smooth("visual.fpn.smooth", cfg.scaled(cfg.fpn_width),
               cfg.scaled(cfg.fpn_width), 3, 1, 1, rng),
        fpn_ch(cfg.scaled(cfg.fpn_width)) {
    auto make_layer = [&](std::vector<ResidualBlock>& layer, const std::string& name,
                          int in_ch, int out_ch, int stride) {
      layer.emplace_back(name + ".block0", in_ch, out_ch, stride, rng);
      layer.emplace_back(name + ".block1", out_ch, out_ch, 1, rng);
    };
    make_layer(layer1, "visual.layer1", cfg.scaled(64), cfg.scaled(64), 1);
    make_layer(layer2, "visual.layer2", cfg.scaled(64), cfg.scaled(128), 2);
    make_layer(layer3, "visual.layer3", cfg.scaled(128), cfg.scaled(256), 2);
    make_layer(layer4, "visual.layer4", cfg.scaled(256), cfg.scaled(512), 2);
  }

  Tensor4f l1_, l2_, l3_, l4_;  // stage outputs cached for backward shapes

  Tensor4f forward(const Tensor4f& img, bool train, bool upd) {
    Tensor4f x = pool.forward(relu1.forward(bn1.forward(conv1.forward(img), train, upd)));
    for (auto& b : layer1) x = b.forward(x, train, upd);
    l1_ = x;
    for (auto& b : layer2) x = b.forward(x, train, upd);
    l2_ = x;
    for (auto& b : layer3) x = b.forward(x, train, upd);
    l3_ = x;
    for (auto& b : layer4) x = b.forward(x, train, upd);
    l4_ = x;

    Tensor4f p4 = lat4.forward(l4_);
    Tensor4f p3 = add_tensors(lat3.forward(l3_), up43.forward(p4, l3_.h, l3_.w));
    Tensor4f p2 = add_tensors(lat2.forward(l2_), up32.forward(p3, l2_.h, l2_.w));
    Tensor4f p1 = add_tensors(lat1.forward(l1_), up21.forward(p2, l1_.h, l1_.w));
    return smooth.forward(p1);
  }

  Tensor4f backward(const Tensor4f& d_out) {
    const Tensor4f dp1 = smooth.backward(d_out);
    Tensor4f dl1 = lat1.backward(dp1);
    const Tensor4f dp2 = up21.backward(dp1);
    Tensor4f dl2 = lat2.backward(dp2);
    const Tensor4f dp3 = up32.backward(dp2);
    Tensor4f dl3 = lat3.backward(dp3);
    const Tensor4f dp4 = up43.backward(dp3);
    Tensor4f dl4 = lat4.backward(dp4);

    for (auto it = layer4.rbegin(); it != layer4.rend(); ++it)
      dl4 = it->backward(dl4);
    dl3 = add_tensors(dl3, dl4);
    for (auto it = layer3.rbegin(); it != layer3.rend(); ++it)
      dl3 = it->backward(dl3);
    dl2 = add_tensors(dl2, dl3);
    for (auto it = layer2.rbegin(); it != layer2.rend(); ++it)
      dl2 = it->backward(dl2);
    dl1 = add_tensors(dl1, dl2);
    for (auto it = layer1.rbegin(); it != layer1.rend(); ++it)
      dl1 = it->backward(dl1);
    return conv1.backward(bn1.backward(relu1.backward(pool.backward(dl1))));
  }

  void params(ParamRefs<float>& out) {
    conv1.params(out);
    bn1.params(out);
    for (auto* layer : {&layer1, &layer2, &layer3, &layer4})
      for (auto& b : *layer) b.params(out);
    lat1.params(out);
    lat2.params(out);
    lat3.params(out);
    lat4.params(out);
    smooth.params(out);
  }
};

// Per-sample bilinear gather of the FPN map into the BEV grid, with the
// adjoint scatter for backward.
struct GatherModule {
  int grid_hw = 0;
  std::vector<ProjectionTable> scaled_tables;
  Tensor4f src_shape_;

  Tensor4f forward(const Tensor4f& fpn,
                   const std::vector<const ProjectionTable*>& tables,
                   int grid) {
    if (static_cast<int>(tables.size()) != fpn.n)
      throw_usage("one projection table per sample is required");
    grid_hw = grid;
    src_shape_ = Tensor4f(fpn.n, fpn.c, fpn.h, fpn.w);
    scaled_tables.clear();
    scaled_tables.reserve(tables.size());
    Tensor4f bev(fpn.n, fpn.c, grid, grid);
    for (int b = 0; b < fpn.n; ++b) {
      if (!tables[b]) throw_usage("missing projection table");
      scaled_tables.push_back(
          rescale_projection_table(*tables[b], fpn.w, fpn.h));
      gather_bev_kernel(scaled_tables[b], fpn.plane(b, 0), fpn.c,
                        bev.plane(b, 0));
    }
    return bev;
  }

  Tensor4f backward(const Tensor4f& d_bev) {
    Tensor4f d_fpn = src_shape_;
    d_fpn.zero();
    for (int b = 0; b < d_bev.n; ++b)
      scatter_bev_kernel(scaled_tables[b], d_bev.plane(b, 0), d_bev.c,
                         d_fpn.plane(b, 0));
    return d_fpn;
  }
};

// Conv(Pool(V)) matched to the structural map, then sum or concat.
struct FuseModule {
  ArchConfig::Fusion mode;
  int factor;
  Conv2d<float> conv;
  nn::AvgPool2d<float> pool;
  int s_channels;

  FuseModule(const std::string& name, ArchConfig::Fusion mode_, int v_ch,
             int s_ch, int factor_, Rng& rng)
      : mode(mode_), factor(factor_),
        conv(name + ".conv", v_ch, s_ch, 1, 1, 0, rng),
        pool(factor_, factor_), s_channels(s_ch) {}

  Tensor4f forward(const Tensor4f& s, const Tensor4f& v) {
    if (v.h % s.h != 0 || v.w % s.w != 0)
      throw_usage("BEV map size is not divisible by the fusion target size");
    if (v.h / s.h != factor)
      throw_usage("fusion pooling factor does not match the architecture");
    const Tensor4f pooled = factor == 1 ? v : pool.forward(v);
    const Tensor4f pv = conv.forward(pooled);
    if (mode == ArchConfig::Fusion::sum) return add_tensors(pv, s);
    Tensor4f out(s.n, pv.c + s.c, s.h, s.w);
    for (int b = 0; b < s.n; ++b) {
      std::copy(pv.plane(b, 0), pv.plane(b, 0) + static_cast<size_t>(pv.c) * pv.h * pv.w,
                out.plane(b, 0));
      std::copy(s.plane(b, 0), s.plane(b, 0) + static_cast<size_t>(s.c) * s.h * s.w,
                out.plane(b, pv.c));
    }
    return out;
  }

  // returns (d_s, d_v)
  std::pair<Tensor4f, Tensor4f> backward(const Tensor4f& d_out) {
    Tensor4f d_pv, d_s;
    if (mode == ArchConfig::Fusion::sum) {
      d_pv = d_out;
      d_s = d_out;
    } else {
      const int pv_c = s_channels;
      const int s_c = d_out.c - pv_c;
      d_pv = Tensor4f(d_out.n, pv_c, d_out.h, d_out.w);
      d_s = Tensor4f(d_out.n, s_c, d_out.h, d_out.w);
      for (int b = 0; b < d_out.n; ++b) {
        std::copy(d_out.plane(b, 0),
                  d_out.plane(b, 0) + static_cast<size_t>(pv_c) * d_out.h * d_out.w,
                  d_pv.plane(b, 0));
        std::copy(d_out.plane(b, pv_c),
                  d_out.plane(b, pv_c) + static_cast<size_t>(s_c) * d_out.h * d_out.w,
                  d_s.plane(b, 0));
      }
    }
    Tensor4f d_pooled = conv.backward(d_pv);
    Tensor4f d_v = factor == 1 ? d_pooled : pool.backward(d_pooled);
    return {std::move(d_s), std::move(d_v)};
  }

  void params(ParamRefs<float>& out) { conv.params(out); }
};

// Five structural groups plus the multi-scale merge of the last three.
struct StructuralStream {
  ConvBnRelu g1a, g1b;
  std::vector<ResidualBlock> g2, g3, g4, g5;
  std::vector<FuseModule> fuses;  // per fusion point, aligned with fuse_at
  std::vector<int> fuse_at;       // group index (2..5) of each fuse module
  Conv2d<float> lat3, lat4, lat5;
  UpsampleNearest<float> up54, up43;
  Conv2d<float> smooth;
  bool fusing;
  Tensor4f s3_, s4_, s5_;

  static int group_channels(const ArchConfig& cfg, int group) {
    static constexpr int base[5] = {64, 64, 128, 192, 256};
    return cfg.scaled(base[group - 1]);
  }

  StructuralStream(const ArchConfig& cfg, Rng& rng)
      : g1a("struct.group1.a", 1, group_channels(cfg, 1), 3, 1, 1, rng),
        g1b("struct.group1.b", group_channels(cfg, 1), group_channels(cfg, 1), 3,
            1, 1, rng),
        lat3("struct.merge.lat3", group_channels(cfg, 3),
             cfg.scaled(cfg.merge_width), 1, 1, 0, rng),
        lat4("struct.merge.lat4", group_channels(cfg, 4),
             cfg.scaled(cfg.merge_width), 1, 1, 0, rng),
        lat5("struct.merge.lat5", group_channels(cfg, 5),
             cfg.scaled(cfg.merge_width), 1, 1, 0, rng),
        smooth("struct.merge.smooth", cfg.scaled(cfg.merge_width),
               cfg.scaled(cfg.merge_width), 3, 1, 1, rng),
        fusing(cfg.modality == ArchConfig::Modality::fusion) {
    // blocks per residual group: 2,2,3,3 (4,4,6,6 3x3 convs)
    const int blocks[4] = {2, 2, 3, 3};
    const int v_ch = cfg.scaled(cfg.fpn_width);
    int in_ch = group_channels(cfg, 1);
    for (int g = 2; g <= 5; ++g) {
      const bool fuse_here =
          fusing && (cfg.depth == ArchConfig::Depth::four || g == 2);
      if (fuse_here) {
        // grid-size V pooled to this group's input scale: 1,2,4,8
        const int factor = 1 << (g - 2);
        fuses.emplace_back("fusion.g" + std::to_string(g), cfg.fusion, v_ch,
                           in_ch, factor, rng);
        fuse_at.push_back(g);
        if (cfg.fusion == ArchConfig::Fusion::concat) in_ch += in_ch;
      }
      auto& group = g == 2 ? g2 : g == 3 ? g3 : g == 4 ? g4 : g5;
      const int out_ch = group_channels(cfg, g);
      const std::string name = "struct.group" + std::to_string(g);
      for (int b = 0; b < blocks[g - 2]; ++b) {
        group.emplace_back(name + ".block" + std::to_string(b),
                           b == 0 ? in_ch : out_ch, out_ch, b == 0 ? 2 : 1,
                           rng);
      }
      in_ch = out_ch;
    }
  }

  FuseModule* fuse_for(int group) {
    for (size_t i = 0; i < fuse_at.size(); ++i)
      if (fuse_at[i] == group) return &fuses[i];
    return nullptr;
  }

  // v empty unless fusing; d_v accumulated in backward
  Tensor4f forward(const Tensor4f& elev, const Tensor4f& v, bool train, bool upd) {
    Tensor4f x = g1b.forward(g1a.forward(elev, train, upd), train, upd);
    for (int g = 2; g <= 5; ++g) {
      if (FuseModule* fuse = fuse_for(g)) x = fuse->forward(x, v);
      auto& group = g == 2 ? g2 : g == 3 ? g3 : g == 4 ? g4 : g5;
      for (auto& b : group) x = b.forward(x, train, upd);
      if (g == 3) s3_ = x;
      if (g == 4) s4_ = x;
      if (g == 5) s5_ = x;
    }
    Tensor4f m5 = lat5.forward(s5_);
    Tensor4f m4 = add_tensors(lat4.forward(s4_), up54.forward(m5, s4_.h, s4_.w));
    Tensor4f m3 = add_tensors(lat3.forward(s3_), up43.forward(m4, s3_.h, s3_.w));
    return smooth.forward(m3);
  }

  // returns (d_elev, d_v); d_v empty when not fusing
  std::pair<Tensor4f, Tensor4f> backward(const Tensor4f& d_out) {
    const Tensor4f dm3 = smooth.backward(d_out);
    Tensor4f ds3 = lat3.backward(dm3);
    const Tensor4f dm4 = up43.backward(dm3);
    Tensor4f ds4 = lat4.backward(dm4);
    const Tensor4f dm5 = up54.backward(dm4);
    Tensor4f ds5 = lat5.backward(dm5);

    Tensor4f d_v;
    auto group_backward = [&](int g, Tensor4f grad) {
      auto& group = g == 2 ? g2 : g == 3 ? g3 : g == 4 ? g4 : g5;
      for (auto it = group.rbegin(); it != group.rend(); ++it)
        grad = it->backward(grad);
      if (FuseModule* fuse = fuse_for(g)) {
        auto [d_s, d_v_part] = fuse->backward(grad);
        if (d_v.size() == 0)
          d_v = std::move(d_v_part);
        else
          d_v = add_tensors(d_v, d_v_part);
        return d_s;
      }
      return grad;
    };

    Tensor4f grad = group_backward(5, std::move(ds5));
    grad = add_tensors(grad, ds4);
    grad = group_backward(4, std::move(grad));
    grad = add_tensors(grad, ds3);
    grad = group_backward(3, std::move(grad));
    grad = group_backward(2, std::move(grad));
    const Tensor4f d_elev = g1a.backward(g1b.backward(grad));
    return {d_elev, std::move(d_v)};
  }

  void params(ParamRefs<float>& out) {
    g1a.params(out);
    g1b.params(out);
    for (size_t i = 0; i < fuses.size(); ++i) fuses[i].params(out);
    for (auto* group : {&g2, &g3, &g4, &g5})
      for (auto& b : *group) b.params(out);
    lat3.params(out);
    lat4.params(out);
    lat5.params(out);
    smooth.params(out);
  }
};

}  // namespace

struct CoralNetwork::Impl {
  ArchConfig cfg;
  std::unique_ptr<VisualStream> visual;
  std::unique_ptr<StructuralStream> structural;
  std::unique_ptr<GatherModule> gather;
  std::unique_ptr<NetVlad<float>> vlad;
  std::vector<Linear<float>> mlp;
  std::vector<ReLU<float>> mlp_relus;
  L2Normalize<float> norm;
  int vlad_dim = 0;

  explicit Impl(const ArchConfig& config, uint64_t seed) : cfg(config) {
    cfg.validate();
    Rng rng(seed);
    const bool needs_visual = cfg.modality != ArchConfig::Modality::structure_only;
    const bool needs_struct = cfg.modality != ArchConfig::Modality::vision_only;
    if (needs_visual) visual = std::make_unique<VisualStream>(cfg, rng);
    if (needs_struct) structural = std::make_unique<StructuralStream>(cfg, rng);
    if (cfg.modality == ArchConfig::Modality::fusion)
      gather = std::make_unique<GatherModule>();

    vlad_dim = cfg.modality == ArchConfig::Modality::vision_only
                   ? cfg.scaled(cfg.fpn_width)
                   : cfg.scaled(cfg.merge_width);
    vlad = std::make_unique<NetVlad<float>>("vlad", vlad_dim, cfg.clusters, rng);

    int in_dim = cfg.clusters * vlad_dim;
    for (int layer = 0; layer < cfg.mlp_layers; ++layer) {
      mlp.emplace_back("mlp.fc" + std::to_string(layer), in_dim,
                       cfg.descriptor_dim, rng);
      in_dim = cfg.descriptor_dim;
    }
    mlp_relus.resize(mlp.size() > 1 ? mlp.size() - 1 : 0);
  }

  Tensor4f forward(const BatchInputs& in, bool train, bool upd) {
    Tensor4f vlad_in;
    switch (cfg.modality) {
      case ArchConfig::Modality::vision_only: {
        check_visual(in.visual);
        vlad_in = visual->forward(in.visual, train, upd);
        break;
      }
      case ArchConfig::Modality::structure_only: {
        check_elev(in.elevation);
        vlad_in = structural->forward(in.elevation, {}, train, upd);
        break;
      }
      case ArchConfig::Modality::fusion: {
        check_visual(in.visual);
        check_elev(in.elevation);
        const Tensor4f fpn = visual->forward(in.visual, train, upd);
        const Tensor4f v = gather->forward(fpn, in.tables, cfg.elev_hw);
        vlad_in = structural->forward(in.elevation, v, train, upd);
        break;
      }
    }
    Tensor4f x = vlad->forward(vlad_in);
    for (size_t i = 0; i < mlp.size(); ++i) {
      x = mlp[i].forward(x);
      if (i + 1 < mlp.size()) x = mlp_relus[i].forward(x);
    }
    return norm.forward(x);
  }

  void backward(const Tensor4f& d_desc) {
    Tensor4f g = norm.backward(d_desc);
    for (size_t i = mlp.size(); i-- > 0;) {
      if (i + 1 < mlp.size()) g = mlp_relus[i].backward(g);
      g = mlp[i].backward(g);
    }
    g = vlad->backward(g);
    switch (cfg.modality) {
      case ArchConfig::Modality::vision_only:
        visual->backward(g);
        break;
      case ArchConfig::Modality::structure_only:
        structural->backward(g);
        break;
      case ArchConfig::Modality::fusion: {
        auto [d_elev, d_v] = structural->backward(g);
        (void)d_elev;
        const Tensor4f d_fpn = gather->backward(d_v);
        visual->backward(d_fpn);
        break;
      }
    }
  }

  void check_visual(const Tensor4f& t) const {
    if (t.c != 3 || t.h != cfg.visual_hw || t.w != cfg.visual_hw)
      throw_usage("visual input must be Bx3x" + std::to_string(cfg.visual_hw) +
                  "x" + std::to_string(cfg.visual_hw));
  }
  void check_elev(const Tensor4f& t) const {
    if (t.c != 1 || t.h != cfg.elev_hw || t.w != cfg.elev_hw)
      throw_usage("elevation input must be Bx1x" + std::to_string(cfg.elev_hw) +
                  "x" + std::to_string(cfg.elev_hw));
  }

  std::vector<Param<float>*> parameters() {
    ParamRefs<float> out;
    if (visual) visual->params(out);
    if (structural) structural->params(out);
    vlad->params(out);
    for (auto& fc : mlp) fc.params(out);
    return out;
  }
};

CoralNetwork::CoralNetwork(const ArchConfig& config, uint64_t seed)
    : impl_(std::make_unique<Impl>(config, seed)) {}
CoralNetwork::~CoralNetwork() = default;
CoralNetwork::CoralNetwork(CoralNetwork&&) noexcept = default;
CoralNetwork& CoralNetwork::operator=(CoralNetwork&&) noexcept = default;

Tensor4f CoralNetwork::forward(const BatchInputs& inputs, bool train,
                               bool update_running) {
  return impl_->forward(inputs, train, update_running);
}

void CoralNetwork::backward(const Tensor4f& d_descriptors) {
  impl_->backward(d_descriptors);
}

void CoralNetwork::zero_grad() {
  for (auto* p : impl_->parameters()) p->zero_grad();
}

std::vector<Param<float>*> CoralNetwork::parameters() {
  return impl_->parameters();
}

std::vector<float> CoralNetwork::describe(const SampleInputs& sample) {
  BatchInputs batch;
  batch.visual = sample.visual;
  batch.elevation = sample.elevation;
  if (impl_->cfg.modality == ArchConfig::Modality::fusion)
    batch.tables = {sample.table};
  const Tensor4f out = impl_->forward(batch, /*train=*/false, false);
  return {out.data.begin(), out.data.end()};
}

Tensor4f CoralNetwork::debug_fpn(const Tensor4f& visual) {
  if (!impl_->visual) throw_usage("this modality has no visual stream");
  return impl_->visual->forward(visual, /*train=*/false, false);
}

void CoralNetwork::save_checkpoint(const std::string& path) {
  std::vector<nn::NamedTensor> tensors;
  for (auto* p : impl_->parameters()) {
    nn::NamedTensor t;
    t.name = p->name;
    t.dims = p->dims;
    t.data = p->value;
    tensors.push_back(std::move(t));
  }
  nn::write_checkpoint(path, tensors);
}

void CoralNetwork::load_checkpoint(const std::string& path, bool allow_partial) {
  const auto tensors = nn::read_checkpoint(path);
  for (auto* p : impl_->parameters()) {
    const auto it = tensors.find(p->name);
    if (it == tensors.end()) {
      if (allow_partial) continue;
      throw_data("checkpoint is missing tensor '" + p->name + "'");
    }
    if (it->second.data.size() != p->value.size())
      throw_data("checkpoint tensor '" + p->name + "' has the wrong shape");
    p->value = it->second.data;
  }
}

const ArchConfig& CoralNetwork::config() const { return impl_->cfg; }

ArchReport CoralNetwork::architecture_report() {
  ArchReport r;
  const ArchConfig& cfg = impl_->cfg;
  r.visual_input = cfg.visual_hw;
  r.descriptor_dim = cfg.descriptor_dim;
  r.clusters = cfg.clusters;
  r.vlad_input_dim = impl_->vlad_dim;
  r.vlad_output_dim = cfg.clusters * impl_->vlad_dim;
  r.fpn_channels = cfg.scaled(cfg.fpn_width);
  r.fpn_output_hw = cfg.visual_hw / 4;

  if (impl_->structural) {
    StructuralStream& s = *impl_->structural;
    // counts and shapes read off the constructed layers, not the config
    r.group_conv_counts.push_back((s.g1a.conv.kernel() == 3 ? 1 : 0) +
                                  (s.g1b.conv.kernel() == 3 ? 1 : 0));
    r.group_channels.push_back(s.g1b.conv.out_channels());
    r.group_first_strides.push_back(s.g1a.conv.stride());
    int spatial = cfg.elev_hw;
    r.group_spatial.push_back(spatial);
    for (auto* group : {&s.g2, &s.g3, &s.g4, &s.g5}) {
      int count = 0;
      for (auto& block : *group) {
        if (block.c1.kernel() == 3) ++count;
        if (block.c2.kernel() == 3) ++count;
      }
      r.group_conv_counts.push_back(count);
      r.group_channels.push_back(group->back().c2.out_channels());
      r.group_first_strides.push_back(group->front().c1.stride());
      spatial = (spatial + 1) / 2;
      r.group_spatial.push_back(spatial);
    }
  }
  for (auto* p : impl_->parameters()) r.params.emplace_back(p->name, p->dims);
  return r;
}

}  // namespace coral
