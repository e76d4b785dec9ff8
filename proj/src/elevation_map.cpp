#include "coral/elevation_map.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "coral/error.hpp"

namespace coral {

ElevationMap::ElevationMap(const GridSpec& spec) : spec_(spec) {
  spec_.validate();
  cells_.assign(static_cast<size_t>(spec_.cells_x) * spec_.cells_y, {});
  ray_clears_.assign(cells_.size(), 0);
}

ElevationCell fuse(const ElevationCell& cell, const ElevationMeasurement& m,
                   const FuseParams& params) {
  const double var_p = std::max(m.variance, kVarianceFloor);
  ElevationCell out = cell;
  if (!cell.valid) {
    out.elevation = m.elevation;
    out.variance = var_p;
    out.valid = true;
    out.outlier_count = 0;
    return out;
  }
  const double var_g = std::max(cell.variance, kVarianceFloor);
  const double maha =
      std::abs(m.elevation - cell.elevation) / std::sqrt(var_p + var_g);
  if (maha <= params.gate_sigma) {
    const double denom = var_p + var_g;
    out.elevation = (var_p * cell.elevation + var_g * m.elevation) / denom;
    out.variance = std::max(var_p * var_g / denom, kVarianceFloor);
    out.outlier_count = 0;
    return out;
  }
  out.outlier_count = static_cast<uint8_t>(cell.outlier_count + 1);
  if (out.outlier_count >= params.outlier_limit) {
    out.elevation = m.elevation;
    out.variance = var_p;
    out.valid = true;
    out.outlier_count = 0;
  }
  return out;
}

std::optional<ElevationMeasurement> ElevationMap::measure(
    const Pose& sensor_to_world, const Point3& p_sensor,
    const SensorNoiseModel& noise) const {
  const Point3 p_world = transform_point(sensor_to_world, p_sensor);
  const auto cell = world_to_cell(spec_, p_world);
  if (!cell) return std::nullopt;
  ElevationMeasurement m;
  m.elevation = p_world.z;
  m.variance = std::max(noise.variance(p_sensor.norm()), kVarianceFloor);
  m.cell = *cell;
  m.ray_origin = sensor_to_world.translation();
  return m;
}

void ElevationMap::apply(const ElevationMeasurement& m,
                         const FuseParams& params) {
  ElevationCell& c = cell(m.cell.i, m.cell.j);
  c = fuse(c, m, params);
}

void ElevationMap::ray_trace_clear(const ElevationMeasurement& m,
                                   double clear_margin) {
  const Vec3 origin = m.ray_origin;
  const Vec3 endpoint = cell_center(spec_, m.cell.i, m.cell.j);
  const auto start = world_to_cell(spec_, origin);
  if (!start) return;
  if (start->i == m.cell.i && start->j == m.cell.j) return;

  // Endpoint x/y for the traversal come from the measured cell; z endpoints
  // are the sensor height and the measured elevation.
  const double dx = endpoint.x - origin.x;
  const double dy = endpoint.y - origin.y;
  const double z0 = origin.z;
  const double z1 = m.elevation;
  const double len2 = dx * dx + dy * dy;
  if (len2 < 1e-18) return;

  // Amanatides-Woo walk in the t in [0,1] parametrization of the segment.
  int ci = start->i, cj = start->j;
  const int step_i = dx > 0 ? 1 : -1;
  const int step_j = dy > 0 ? 1 : -1;
  const double inv_dx = dx != 0.0 ? 1.0 / dx : 0.0;
  const double inv_dy = dy != 0.0 ? 1.0 / dy : 0.0;
  auto boundary_x = [&](int i) { return spec_.origin_x + i * spec_.resolution; };
  auto boundary_y = [&](int j) { return spec_.origin_y + j * spec_.resolution; };
  double t_max_x = dx != 0.0
                       ? (boundary_x(ci + (step_i > 0 ? 1 : 0)) - origin.x) * inv_dx
                       : std::numeric_limits<double>::infinity();
  double t_max_y = dy != 0.0
                       ? (boundary_y(cj + (step_j > 0 ? 1 : 0)) - origin.y) * inv_dy
                       : std::numeric_limits<double>::infinity();
  const double t_delta_x = dx != 0.0 ? spec_.resolution * std::abs(inv_dx)
                                     : std::numeric_limits<double>::infinity();
  const double t_delta_y = dy != 0.0 ? spec_.resolution * std::abs(inv_dy)
                                     : std::numeric_limits<double>::infinity();

  while (true) {
    double t_entry;  // segment time at which the walk enters the next cell
    if (t_max_x < t_max_y) {
      t_entry = t_max_x;
      t_max_x += t_delta_x;
      ci += step_i;
    } else {
      t_entry = t_max_y;
      t_max_y += t_delta_y;
      cj += step_j;
    }
    if (t_entry >= 1.0) break;
    if (ci < 0 || cj < 0 || ci >= spec_.cells_x || cj >= spec_.cells_y) break;
    if (ci == m.cell.i && cj == m.cell.j) break;  // endpoint cell is never cleared
    const double t_exit = std::min(std::min(t_max_x, t_max_y), 1.0);
    const double z_a = z0 + t_entry * (z1 - z0);
    const double z_b = z0 + t_exit * (z1 - z0);
    ElevationCell& c = cell(ci, cj);
    if (c.valid && c.elevation > std::min(z_a, z_b) + clear_margin) {
      c = ElevationCell{};
      ray_clears_[static_cast<size_t>(cj) * spec_.cells_x + ci]++;
    }
  }
}

void ElevationMap::integrate_cloud(const Pose& sensor_to_world,
                                   const std::vector<Vec3>& cloud_sensor,
                                   const SensorNoiseModel& noise,
                                   const FuseParams& params,
                                   double clear_margin) {
  for (const Vec3& p : cloud_sensor) {
    const auto m = measure(sensor_to_world, p, noise);
    if (!m) continue;
    ray_trace_clear(*m, clear_margin);
    apply(*m, params);
  }
}

size_t ElevationMap::valid_count() const {
  size_t n = 0;
  for (const auto& c : cells_)
    if (c.valid) ++n;
  return n;
}

ElevationImage render_elevation_image(const ElevationMap& map,
                                      const HeightWindow& window) {
  if (!(window.h_min < window.h_max))
    throw_usage("degenerate height window: h_min must be < h_max");
  const GridSpec& spec = map.spec();
  ElevationImage img;
  img.spec = spec;
  img.window = window;
  const size_t n = static_cast<size_t>(spec.cells_x) * spec.cells_y;
  img.pixels.assign(n, 0);
  img.defined.assign(n, 0);

  const double scale = 255.0 / (window.h_max - window.h_min);
  for (int j = 0; j < spec.cells_y; ++j)
    for (int i = 0; i < spec.cells_x; ++i) {
      const ElevationCell& c = map.cell(i, j);
      if (!c.valid) continue;
      double v = (c.elevation - window.h_min) * scale;
      v = std::clamp(v, 0.0, 255.0);
      img.pixels[static_cast<size_t>(j) * spec.cells_x + i] =
          static_cast<uint8_t>(std::lround(v));
      img.defined[static_cast<size_t>(j) * spec.cells_x + i] = 1;
    }

  // Fill pass reads only the pre-fill image; no cascade.
  std::vector<uint8_t> filled = img.pixels;
  std::vector<uint8_t> filled_def = img.defined;
  for (int j = 0; j < spec.cells_y; ++j)
    for (int i = 0; i < spec.cells_x; ++i) {
      if (map.cell(i, j).valid) continue;
      int count = 0, sum = 0;
      for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di) {
          if (di == 0 && dj == 0) continue;
          const int ni = i + di, nj = j + dj;
          if (ni < 0 || nj < 0 || ni >= spec.cells_x || nj >= spec.cells_y)
            continue;
          if (!map.cell(ni, nj).valid) continue;
          ++count;
          sum += img.pixels[static_cast<size_t>(nj) * spec.cells_x + ni];
        }
      if (count >= 3) {
        filled[static_cast<size_t>(j) * spec.cells_x + i] = static_cast<uint8_t>(
            std::lround(static_cast<double>(sum) / count));
        filled_def[static_cast<size_t>(j) * spec.cells_x + i] = 1;
      }
    }
  img.pixels = std::move(filled);
  img.defined = std::move(filled_def);
  return img;
}

GridSpec robot_centric_grid(int cells_x, int cells_y, double resolution,
                            const Vec3& sensor_position) {
  GridSpec spec;
  spec.cells_x = cells_x;
  spec.cells_y = cells_y;
  spec.resolution = resolution;
  spec.origin_x = sensor_position.x - 0.5 * cells_x * resolution;
  spec.origin_y = sensor_position.y - 0.5 * cells_y * resolution;
  spec.validate();
  return spec;
}

}  // namespace coral
