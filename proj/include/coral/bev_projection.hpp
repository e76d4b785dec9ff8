#ifndef CORAL_BEV_PROJECTION_HPP
#define CORAL_BEV_PROJECTION_HPP

#include <string>
#include <vector>

#include "coral/elevation_map.hpp"
#include "coral/geometry.hpp"

namespace coral {

// Dense channel-major (CHW) feature grid shared by both network streams.
struct FeatureMap {
  int channels = 0, height = 0, width = 0;
  std::vector<float> data;

  FeatureMap() = default;
  FeatureMap(int c, int h, int w)
      : channels(c), height(h), width(w),
        data(static_cast<size_t>(c) * h * w, 0.0f) {}
  float& at(int c, int y, int x) {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  float at(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
};

// One BEV cell's bilinear footprint in the source image. Corner order:
// w00=(x0,y0), w10=(x0+1,y0), w01=(x0,y0+1), w11=(x0+1,y0+1).
struct ProjectionEntry {
  int cell_i = 0, cell_j = 0;
  double u = 0, v = 0;
  int x0 = 0, y0 = 0;
  double w00 = 0, w10 = 0, w01 = 0, w11 = 0;
};

struct ProjectionTable {
  int src_width = 0, src_height = 0;
  int grid_x = 0, grid_y = 0;
  std::vector<ProjectionEntry> entries;
};

// Projects every defined elevation pixel as a 3D point into the camera and
// keeps those landing inside the image. Cells without a projection are
// simply absent (their gathered features stay zero).
ProjectionTable build_projection_table(const ElevationImage& img,
                                       const Pose& sensor_to_world,
                                       const CameraModel& cam);

// Same correspondences re-expressed for a feature map of another size;
// pixel centers align via u' = (u + 0.5) * new_w / src_w - 0.5.
ProjectionTable rescale_projection_table(const ProjectionTable& table,
                                         int new_width, int new_height);

// Raw kernels, shared by the float pipeline and double-precision checks.
// src is CHW (channels, src_h, src_w); dst is CHW (channels, grid_y, grid_x).
template <typename T>
void gather_bev_kernel(const ProjectionTable& table, const T* src, int channels,
                       T* dst);
template <typename T>
void scatter_bev_kernel(const ProjectionTable& table, const T* bev_grad,
                        int channels, T* src_grad);

FeatureMap gather_bev_features(const ProjectionTable& table,
                               const FeatureMap& front_view);
// Adjoint of the gather: spreads BEV gradients back onto the source image.
FeatureMap scatter_bev_gradients(const ProjectionTable& table,
                                 const FeatureMap& bev_grad);

void dump_projection_table(const ProjectionTable& table,
                           const std::string& path);

}  // namespace coral

#endif
