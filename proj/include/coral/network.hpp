#ifndef CORAL_NETWORK_HPP
#define CORAL_NETWORK_HPP

#include <memory>
#include <string>
#include <vector>

#include "coral/bev_projection.hpp"
#include "coral/config.hpp"
#include "coral/layers.hpp"
#include "coral/tensor.hpp"

namespace coral {

struct ArchConfig {
  enum class Fusion { sum, concat };
  enum class Depth { first, four };
  enum class Modality { fusion, vision_only, structure_only };

  double width = 1.0;  // one of 1, 1/2, 1/4, 1/8
  Fusion fusion = Fusion::concat;
  Depth depth = Depth::four;
  Modality modality = Modality::fusion;
  int clusters = 64;
  int descriptor_dim = 256;
  int visual_hw = 112;
  int elev_hw = 80;
  int fpn_width = 64;    // lateral width before scaling
  int merge_width = 256; // structural merge width before scaling
  int mlp_layers = 1;

  static ArchConfig from_config(const Config& config);
  void validate() const;
  int scaled(int channels) const;
};

// One sample's network inputs. The projection table is the raw-image-scale
// one; the network rescales it to feature-map size itself.
struct SampleInputs {
  nn::Tensor4f visual;     // (1,3,H,W), empty for structure_only
  nn::Tensor4f elevation;  // (1,1,G,G), empty for vision_only
  const ProjectionTable* table = nullptr;
};

struct BatchInputs {
  nn::Tensor4f visual;
  nn::Tensor4f elevation;
  std::vector<const ProjectionTable*> tables;  // one per sample when fusing
};

struct ArchReport {
  std::vector<int> group_conv_counts;    // 3x3 convolutions per structural group
  std::vector<int> group_channels;       // output channels per structural group
  std::vector<int> group_first_strides;  // stride of each group's first conv
  std::vector<int> group_spatial;        // output spatial size per group
  int visual_input = 0;
  int fpn_output_hw = 0;
  int fpn_channels = 0;
  int vlad_input_dim = 0;
  int clusters = 0;
  int vlad_output_dim = 0;
  int descriptor_dim = 0;
  std::vector<std::pair<std::string, std::vector<int>>> params;
};

// The two-stream descriptor network: ResNet18-style visual stream with an
// FPN, a five-group structural stream over the elevation image, BEV fusion
// of the projected visual features, NetVLAD aggregation and an MLP head.
class CoralNetwork {
 public:
  CoralNetwork(const ArchConfig& config, uint64_t seed);
  ~CoralNetwork();
  CoralNetwork(CoralNetwork&&) noexcept;
  CoralNetwork& operator=(CoralNetwork&&) noexcept;

  // Batched forward to unit descriptors (B, descriptor_dim, 1, 1).
  // update_running=false keeps batch-norm state frozen (gradient checks).
  nn::Tensor4f forward(const BatchInputs& inputs, bool train,
                       bool update_running = true);
  void backward(const nn::Tensor4f& d_descriptors);

  void zero_grad();
  std::vector<nn::Param<float>*> parameters();

  // Single-sample inference-mode descriptor (unit L2 norm).
  std::vector<float> describe(const SampleInputs& sample);

  // Inference-mode FPN output of the visual stream, for inspection.
  nn::Tensor4f debug_fpn(const nn::Tensor4f& visual);

  void save_checkpoint(const std::string& path);
  // allow_partial loads the intersection of names (ablation comparisons).
  void load_checkpoint(const std::string& path, bool allow_partial = false);

  ArchReport architecture_report();
  const ArchConfig& config() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace coral

#endif
