#include "coral/bev_projection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "coral/error.hpp"

namespace coral {

namespace {

// Footprint with all four corners in bounds; u,v must lie in
// [0, w-1] x [0, h-1] and w,h must be >= 2.
void fill_footprint(ProjectionEntry& e, int w, int h) {
  e.x0 = std::min(static_cast<int>(std::floor(e.u)), w - 2);
  e.y0 = std::min(static_cast<int>(std::floor(e.v)), h - 2);
  if (e.x0 < 0) e.x0 = 0;
  if (e.y0 < 0) e.y0 = 0;
  const double fu = e.u - e.x0;
  const double fv = e.v - e.y0;
  e.w00 = (1.0 - fu) * (1.0 - fv);
  e.w10 = fu * (1.0 - fv);
  e.w01 = (1.0 - fu) * fv;
  e.w11 = fu * fv;
}

}  // namespace

ProjectionTable build_projection_table(const ElevationImage& img,
                                       const Pose& sensor_to_world,
                                       const CameraModel& cam) {
  cam.validate();
  const Pose cam_from_world = cam.extrinsic.compose(sensor_to_world.inverse());
  ProjectionTable table;
  table.src_width = cam.width;
  table.src_height = cam.height;
  table.grid_x = img.spec.cells_x;
  table.grid_y = img.spec.cells_y;
  for (int j = 0; j < img.spec.cells_y; ++j) {
    for (int i = 0; i < img.spec.cells_x; ++i) {
      if (!img.is_defined(i, j)) continue;
      Vec3 p_world = cell_center(img.spec, i, j);
      p_world.z = img.elevation_at(i, j);
      const Vec3 p_cam = transform_point(cam_from_world, p_world);
      const auto px = project_to_pixel(cam, p_cam);
      if (!px || !pixel_in_bounds(cam, *px)) continue;
      ProjectionEntry e;
      e.cell_i = i;
      e.cell_j = j;
      e.u = px->u;
      e.v = px->v;
      fill_footprint(e, cam.width, cam.height);
      table.entries.push_back(e);
    }
  }
  return table;
}

ProjectionTable rescale_projection_table(const ProjectionTable& table,
                                         int new_width, int new_height) {
  if (new_width < 2 || new_height < 2)
    throw_usage("projection table target size must be at least 2x2");
  ProjectionTable out;
  out.src_width = new_width;
  out.src_height = new_height;
  out.grid_x = table.grid_x;
  out.grid_y = table.grid_y;
  out.entries = table.entries;
  const double sx = static_cast<double>(new_width) / table.src_width;
  const double sy = static_cast<double>(new_height) / table.src_height;
  for (auto& e : out.entries) {
    e.u = std::clamp((e.u + 0.5) * sx - 0.5, 0.0, new_width - 1.0);
    e.v = std::clamp((e.v + 0.5) * sy - 0.5, 0.0, new_height - 1.0);
    fill_footprint(e, new_width, new_height);
  }
  return out;
}

template <typename T>
void gather_bev_kernel(const ProjectionTable& table, const T* src, int channels,
                       T* dst) {
  const size_t src_hw = static_cast<size_t>(table.src_height) * table.src_width;
  const size_t dst_hw = static_cast<size_t>(table.grid_y) * table.grid_x;
  for (const ProjectionEntry& e : table.entries) {
    const size_t p00 = static_cast<size_t>(e.y0) * table.src_width + e.x0;
    const size_t p10 = p00 + 1;
    const size_t p01 = p00 + table.src_width;
    const size_t p11 = p01 + 1;
    const size_t cell = static_cast<size_t>(e.cell_j) * table.grid_x + e.cell_i;
    for (int c = 0; c < channels; ++c) {
      const T* s = src + c * src_hw;
      const double v = e.w00 * static_cast<double>(s[p00]) +
                       e.w10 * static_cast<double>(s[p10]) +
                       e.w01 * static_cast<double>(s[p01]) +
                       e.w11 * static_cast<double>(s[p11]);
      dst[c * dst_hw + cell] = static_cast<T>(v);
    }
  }
}

template <typename T>
void scatter_bev_kernel(const ProjectionTable& table, const T* bev_grad,
                        int channels, T* src_grad) {
  const size_t src_hw = static_cast<size_t>(table.src_height) * table.src_width;
  const size_t dst_hw = static_cast<size_t>(table.grid_y) * table.grid_x;
  for (const ProjectionEntry& e : table.entries) {
    const size_t p00 = static_cast<size_t>(e.y0) * table.src_width + e.x0;
    const size_t p10 = p00 + 1;
    const size_t p01 = p00 + table.src_width;
    const size_t p11 = p01 + 1;
    const size_t cell = static_cast<size_t>(e.cell_j) * table.grid_x + e.cell_i;
    for (int c = 0; c < channels; ++c) {
      const T g = bev_grad[c * dst_hw + cell];
      T* s = src_grad + c * src_hw;
      s[p00] += static_cast<T>(e.w00 * g);
      s[p10] += static_cast<T>(e.w10 * g);
      s[p01] += static_cast<T>(e.w01 * g);
      s[p11] += static_cast<T>(e.w11 * g);
    }
  }
}

template void gather_bev_kernel<float>(const ProjectionTable&, const float*,
                                       int, float*);
template void gather_bev_kernel<double>(const ProjectionTable&, const double*,
                                        int, double*);
template void scatter_bev_kernel<float>(const ProjectionTable&, const float*,
                                        int, float*);
template void scatter_bev_kernel<double>(const ProjectionTable&, const double*,
                                         int, double*);

FeatureMap gather_bev_features(const ProjectionTable& table,
                               const FeatureMap& front_view) {
  if (front_view.width != table.src_width ||
      front_view.height != table.src_height)
    throw_usage("front view size does not match the projection table");
  FeatureMap out(front_view.channels, table.grid_y, table.grid_x);
  gather_bev_kernel(table, front_view.data.data(), front_view.channels,
                    out.data.data());
  return out;
}

FeatureMap scatter_bev_gradients(const ProjectionTable& table,
                                 const FeatureMap& bev_grad) {
  if (bev_grad.width != table.grid_x || bev_grad.height != table.grid_y)
    throw_usage("BEV gradient size does not match the projection table");
  FeatureMap out(bev_grad.channels, table.src_height, table.src_width);
  scatter_bev_kernel(table, bev_grad.data.data(), bev_grad.channels,
                     out.data.data());
  return out;
}

void dump_projection_table(const ProjectionTable& table,
                           const std::string& path) {
  std::ofstream out(path);
  if (!out) throw_data("cannot write projection table dump: " + path);
  char buf[256];
  for (const auto& e : table.entries) {
    std::snprintf(buf, sizeof(buf), "%d %d %.9g %.9g %.9g %.9g %.9g %.9g\n",
                  e.cell_i, e.cell_j, e.u, e.v, e.w00, e.w01, e.w10, e.w11);
    out << buf;
  }
}

}  // namespace coral
