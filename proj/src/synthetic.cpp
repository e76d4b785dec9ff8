#include "coral/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "coral/error.hpp"

namespace coral {

namespace {

double smoothstep01(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

// 1 on the core, smooth ramp to 0 over edge_width outside the half extent
double box_ramp(double d, double half, double edge) {
  return smoothstep01((half + edge - d) / edge);
}

uint8_t quantize(double v) {
  return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

constexpr double kMarchStep = 0.12;    // m
constexpr double kMarchStart = 0.25;   // m
constexpr double kBisectTol = 1e-4;    // m along the ray

// First terrain crossing along origin + t*dir, bisection-refined.
bool ray_hit(const Heightfield& world, const Vec3& origin, const Vec3& dir,
             double max_range, Vec3& hit) {
  double t_prev = kMarchStart;
  Vec3 p = origin + dir * t_prev;
  if (p.z <= world.height(p.x, p.y)) return false;  // starts underground
  for (double t = t_prev + kMarchStep; t <= max_range; t += kMarchStep) {
    p = origin + dir * t;
    if (p.z <= world.height(p.x, p.y)) {
      double lo = t_prev, hi = t;
      while (hi - lo > kBisectTol) {
        const double mid = 0.5 * (lo + hi);
        const Vec3 m = origin + dir * mid;
        if (m.z <= world.height(m.x, m.y))
          hi = mid;
        else
          lo = mid;
      }
      hit = origin + dir * (0.5 * (lo + hi));
      return true;
    }
    t_prev = t;
  }
  return false;
}

}  // namespace

double Heightfield::height(double x, double y) const {
  double h = 0.0;
  for (const auto& b : bumps_) {
    const double dx = x - b.cx, dy = y - b.cy;
    const double r2 = dx * dx + dy * dy;
    if (r2 > 25.0 * b.sigma * b.sigma) continue;
    h += b.amplitude * std::exp(-r2 / (2.0 * b.sigma * b.sigma));
  }
  for (const auto& b : boxes_) {
    const double rx = box_ramp(std::abs(x - b.cx), b.half_x, b.edge_width);
    if (rx <= 0.0) continue;
    const double ry = box_ramp(std::abs(y - b.cy), b.half_y, b.edge_width);
    h += b.height * rx * ry;
  }
  return h;
}

Rgb Heightfield::color(double x, double y) const {
  const long long cx = static_cast<long long>(std::floor(x / checker_cell_));
  const long long cy = static_cast<long long>(std::floor(y / checker_cell_));
  Rgb c = ((cx + cy) & 1) ? checker_a_ : checker_b_;
  for (const auto& d : discs_) {
    const double dx = x - d.cx, dy = y - d.cy;
    if (dx * dx + dy * dy <= d.radius * d.radius) c = d.color;
  }
  return c;
}

double Heightfield::max_gradient() const {
  double g = 0.0;
  for (const auto& b : bumps_)
    g += std::abs(b.amplitude) * std::exp(-0.5) / b.sigma;
  for (const auto& b : boxes_)
    g += std::sqrt(2.0) * 1.5 * b.height / b.edge_width;
  return g;
}

LidarPattern make_uniform_ground_pattern(double sensor_height, double d_min,
                                         double d_max, int rings, int azimuths,
                                         double max_range) {
  LidarPattern p;
  p.azimuth_count = azimuths;
  p.max_range = max_range;
  p.elevation_rad.reserve(rings);
  for (int i = 0; i < rings; ++i) {
    const double d = d_min + (d_max - d_min) * i / std::max(1, rings - 1);
    p.elevation_rad.push_back(-std::atan2(sensor_height, d));
  }
  return p;
}

CameraModel make_camera(const Config& config) {
  CameraModel cam;
  cam.width = config.camera_width;
  cam.height = config.camera_height;
  cam.cx = config.camera_width / 2.0;
  cam.cy = config.camera_height / 2.0;
  const double half_fov = config.camera_fov_deg * M_PI / 360.0;
  cam.fx = cam.fy = (config.camera_width / 2.0) / std::tan(half_fov);
  // camera <- lidar: x_cam = -y_lidar, y_cam = -z_lidar, z_cam = x_lidar,
  // then pitched down by camera_pitch_deg about the camera x axis.
  Mat3 base;
  base.m = {0, -1, 0, 0, 0, -1, 1, 0, 0};
  const Mat3 r = Mat3::rot_x(config.camera_pitch_deg * M_PI / 180.0) * base;
  cam.extrinsic = Pose(r, {0, 0, 0}, "lidar", "camera");
  return cam;
}

std::vector<Vec3> simulate_lidar(const Heightfield& world,
                                 const Pose& sensor_to_world,
                                 const LidarPattern& pattern,
                                 double noise_sigma, double dropout, Rng& rng) {
  std::vector<Vec3> cloud;
  cloud.reserve(static_cast<size_t>(pattern.azimuth_count) *
                pattern.elevation_rad.size());
  const Pose world_to_sensor = sensor_to_world.inverse();
  const Vec3 origin = sensor_to_world.translation();
  for (int a = 0; a < pattern.azimuth_count; ++a) {
    const double az = 2.0 * M_PI * a / pattern.azimuth_count;
    for (const double el : pattern.elevation_rad) {
      const Vec3 dir_sensor{std::cos(el) * std::cos(az),
                            std::cos(el) * std::sin(az), std::sin(el)};
      const Vec3 dir_world = sensor_to_world.rotation() * dir_sensor;
      Vec3 hit;
      if (!ray_hit(world, origin, dir_world, pattern.max_range, hit)) continue;
      if (dropout > 0.0 && rng.uniform() < dropout) continue;
      if (noise_sigma > 0.0) {
        const double delta = rng.normal(0.0, noise_sigma);
        hit = hit + dir_world * delta;
      }
      cloud.push_back(transform_point(world_to_sensor, hit));
    }
  }
  return cloud;
}

RgbImage render_camera(const Heightfield& world, const Pose& sensor_to_world,
                       const CameraModel& cam, double gain) {
  cam.validate();
  const Pose cam_to_world = sensor_to_world.compose(cam.extrinsic.inverse());
  const Vec3 origin = cam_to_world.translation();
  const Rgb sky{0.53, 0.76, 0.92};
  RgbImage img;
  img.width = cam.width;
  img.height = cam.height;
  img.pixels.assign(static_cast<size_t>(cam.width) * cam.height * 3, 0);
  const double far = 120.0;
  for (int py = 0; py < cam.height; ++py) {
    for (int px = 0; px < cam.width; ++px) {
      Vec3 dir_cam{(px - cam.cx) / cam.fx, (py - cam.cy) / cam.fy, 1.0};
      const double n = dir_cam.norm();
      dir_cam = dir_cam * (1.0 / n);
      const Vec3 dir_world = cam_to_world.rotation() * dir_cam;
      Vec3 hit;
      Rgb c = sky;
      if (ray_hit(world, origin, dir_world, far, hit)) c = world.color(hit.x, hit.y);
      uint8_t* p = img.at(px, py);
      p[0] = quantize(c.r * gain);
      p[1] = quantize(c.g * gain);
      p[2] = quantize(c.b * gain);
    }
  }
  return img;
}

Pose sensor_pose_at(const Heightfield& world, double x, double y,
                    double heading_deg, double sensor_height) {
  const double z = world.height(x, y) + sensor_height;
  return Pose(Mat3::rot_z(heading_deg * M_PI / 180.0), {x, y, z}, "lidar",
              "world");
}

Rng sub_rng(uint64_t seed, uint64_t stream) {
  uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return Rng(z ^ (z >> 31));
}

Heightfield make_dataset_world(const Config& config) {
  Heightfield world;
  const int n = config.data_places;
  const double spacing = config.data_place_spacing;
  const double radius = n * spacing / (2.0 * M_PI);
  for (int k = 0; k < n; ++k) {
    Rng rng = sub_rng(config.seed, 1000 + k);
    const double theta = 2.0 * M_PI * k / n;
    const double px = radius * std::cos(theta);
    const double py = radius * std::sin(theta);

    // pastel ground tint marking the place for the visual stream
    const double hue = std::fmod(k * 0.61803398875, 1.0);
    auto hsv = [](double h, double s, double v) {
      const double c = v * s;
      const double hp = h * 6.0;
      const double xx = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
      double r = 0, g = 0, b = 0;
      if (hp < 1) { r = c; g = xx; }
      else if (hp < 2) { r = xx; g = c; }
      else if (hp < 3) { g = c; b = xx; }
      else if (hp < 4) { g = xx; b = c; }
      else if (hp < 5) { r = xx; b = c; }
      else { r = c; b = xx; }
      return Rgb{r + (v - c), g + (v - c), b + (v - c)};
    };
    world.add_disc({px, py, 20.0, hsv(hue, 0.25, 0.75)});

    // distinct local geometry per place
    const int bumps = 3 + rng.uniform_int(0, 2);
    for (int b = 0; b < bumps; ++b) {
      const double ang = rng.uniform(0, 2 * M_PI);
      const double dist = rng.uniform(3.5, 10.0);
      GaussianBump bump;
      bump.cx = px + dist * std::cos(ang);
      bump.cy = py + dist * std::sin(ang);
      bump.amplitude = rng.uniform(0.6, 2.0);
      bump.sigma = rng.uniform(1.5, 3.0);
      world.add_bump(bump);
    }

    // saturated landmark discs in a ring around the place
    const int discs = 5;
    for (int d = 0; d < discs; ++d) {
      const double ang = rng.uniform(0, 2 * M_PI);
      const double dist = rng.uniform(2.5, 9.0);
      world.add_disc({px + dist * std::cos(ang), py + dist * std::sin(ang),
                      rng.uniform(0.6, 1.1),
                      hsv(std::fmod(hue + 0.13 * (d + 1), 1.0), 0.9, 0.9)});
    }
  }
  return world;
}

GeneratedDataset make_dataset(const Config& config, const std::string& out_dir) {
  if (config.data_places < 2) throw_usage("data.places must be >= 2");
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "clouds");
  fs::create_directories(fs::path(out_dir) / "images");

  const Heightfield world = make_dataset_world(config);
  const int n = config.data_places;
  const double spacing = config.data_place_spacing;
  const double radius = n * spacing / (2.0 * M_PI);
  const auto gains = config.run_gain_list();

  const LidarPattern pattern = make_uniform_ground_pattern(
      config.data_sensor_height, 0.5,
      std::min(config.data_lidar_max_range,
               0.75 * config.grid_cells_x * config.grid_resolution),
      config.data_lidar_rings, config.data_lidar_azimuths,
      config.data_lidar_max_range);
  const CameraModel cam = make_camera(config);

  GeneratedDataset out;
  out.root = out_dir;
  std::vector<TimedPose> poses;
  char namebuf[64];
  for (int run = 0; run < config.data_revisits; ++run) {
    const double gain = gains[run % gains.size()];
    for (int k = 0; k < n; ++k) {
      const uint64_t id = static_cast<uint64_t>(run) * n + k;
      Rng rng = sub_rng(config.seed, 50000 + id);
      const double theta = 2.0 * M_PI * k / n;
      const double tangent = wrap_degrees(theta * 180.0 / M_PI + 90.0);

      // pose jitter inside the place
      const double jr = config.data_pos_jitter * std::sqrt(rng.uniform());
      const double ja = rng.uniform(0, 2 * M_PI);
      const double x = radius * std::cos(theta) + jr * std::cos(ja);
      const double y = radius * std::sin(theta) + jr * std::sin(ja);
      const double heading = wrap_degrees(
          tangent + rng.uniform(-config.data_heading_jitter,
                                config.data_heading_jitter));
      const Pose pose =
          sensor_pose_at(world, x, y, heading, config.data_sensor_height);

      const auto cloud = simulate_lidar(world, pose, pattern,
                                        config.data_noise_sigma,
                                        run == 0 ? 0.0 : config.data_dropout, rng);
      const RgbImage image = render_camera(world, pose, cam, gain);

      std::snprintf(namebuf, sizeof(namebuf), "clouds/%06llu.bin",
                    static_cast<unsigned long long>(id));
      const std::string cloud_rel = namebuf;
      std::snprintf(namebuf, sizeof(namebuf), "images/%06llu.png",
                    static_cast<unsigned long long>(id));
      const std::string image_rel = namebuf;
      write_point_cloud((fs::path(out_dir) / cloud_rel).string(), cloud);
      write_png((fs::path(out_dir) / image_rel).string(), image);

      SampleMeta meta;
      meta.id = id;
      meta.run = run;
      meta.x = x;
      meta.y = y;
      meta.heading = heading;
      meta.cloud_path = cloud_rel;
      meta.image_path = image_rel;
      out.metas.push_back(meta);
      poses.push_back({static_cast<double>(id), pose});
    }
  }
  write_poses_file((fs::path(out_dir) / "poses.txt").string(), poses);
  write_manifest((fs::path(out_dir) / "manifest.csv").string(), out.metas);
  return out;
}

}  // namespace coral
