#ifndef CORAL_ELEVATION_MAP_HPP
#define CORAL_ELEVATION_MAP_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "coral/geometry.hpp"

namespace coral {

// Range-dependent elevation measurement noise: var = sigma0^2 + k_range * r^2.
struct SensorNoiseModel {
  double sigma0 = 0.01;    // m
  double k_range = 1e-4;   // m^2 variance gained per m^2 of range
  double variance(double range_m) const {
    return sigma0 * sigma0 + k_range * range_m * range_m;
  }
};

constexpr double kVarianceFloor = 1e-6;  // m^2

struct ElevationMeasurement {
  double elevation = 0.0;  // m, world frame
  double variance = kVarianceFloor;
  CellIndex cell;
  Vec3 ray_origin;  // sensor position, world frame
};

struct ElevationCell {
  double elevation = 0.0;
  double variance = 0.0;
  bool valid = false;
  uint8_t outlier_count = 0;
};

struct FuseParams {
  double gate_sigma = 3.0;
  int outlier_limit = 3;
};

// One Mahalanobis-gated variance-weighted update of a single cell.
ElevationCell fuse(const ElevationCell& cell, const ElevationMeasurement& m,
                   const FuseParams& params);

struct HeightWindow {
  double h_min = 0.0;
  double h_max = 1.0;
};

struct ElevationImage {
  GridSpec spec;
  HeightWindow window;
  std::vector<uint8_t> pixels;   // row-major, index j * cells_x + i
  std::vector<uint8_t> defined;  // 1 where the pixel carries an elevation

  uint8_t at(int i, int j) const { return pixels[static_cast<size_t>(j) * spec.cells_x + i]; }
  bool is_defined(int i, int j) const {
    return defined[static_cast<size_t>(j) * spec.cells_x + i] != 0;
  }
  // Inverse of the render scaling for defined pixels.
  double elevation_at(int i, int j) const {
    return window.h_min +
           (window.h_max - window.h_min) * (at(i, j) / 255.0);
  }
};

class ElevationMap {
 public:
  ElevationMap() = default;
  explicit ElevationMap(const GridSpec& spec);

  const GridSpec& spec() const { return spec_; }
  const ElevationCell& cell(int i, int j) const {
    return cells_[static_cast<size_t>(j) * spec_.cells_x + i];
  }
  ElevationCell& cell(int i, int j) {
    return cells_[static_cast<size_t>(j) * spec_.cells_x + i];
  }
  int ray_clear_count(int i, int j) const {
    return ray_clears_[static_cast<size_t>(j) * spec_.cells_x + i];
  }

  // Eq-style single-point measurement: transform into world, take the third
  // component, look up the grid cell. Empty when the point leaves the grid.
  std::optional<ElevationMeasurement> measure(const Pose& sensor_to_world,
                                              const Point3& p_sensor,
                                              const SensorNoiseModel& noise) const;

  void apply(const ElevationMeasurement& m, const FuseParams& params);

  // Invalidate valid cells strictly between the ray's origin cell and endpoint
  // cell whose stored elevation pokes above the ray by more than the margin.
  void ray_trace_clear(const ElevationMeasurement& m, double clear_margin);

  // Full scan update: per point, clearing pass then endpoint fusion.
  void integrate_cloud(const Pose& sensor_to_world,
                       const std::vector<Vec3>& cloud_sensor,
                       const SensorNoiseModel& noise, const FuseParams& params,
                       double clear_margin);

  size_t valid_count() const;

 private:
  GridSpec spec_;
  std::vector<ElevationCell> cells_;
  std::vector<uint16_t> ray_clears_;
};

// Linear 0..255 scaling of valid cells over the window, then a single-pass
// 3x3 mean fill of invalid cells with >= 3 valid neighbors (reads only the
// pre-fill image). Unfilled pixels are 0 and stay undefined.
ElevationImage render_elevation_image(const ElevationMap& map,
                                      const HeightWindow& window);

// Grid anchored so the sensor position sits at the grid center.
GridSpec robot_centric_grid(int cells_x, int cells_y, double resolution,
                            const Vec3& sensor_position);

}  // namespace coral

#endif
