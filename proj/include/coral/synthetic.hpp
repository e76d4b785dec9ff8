#ifndef CORAL_SYNTHETIC_HPP
#define CORAL_SYNTHETIC_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "coral/config.hpp"
#include "coral/dataset.hpp"
#include "coral/geometry.hpp"
#include "coral/io.hpp"
#include "coral/rng.hpp"

namespace coral {

struct Rgb {
  double r = 0, g = 0, b = 0;
};

struct GaussianBump {
  double cx = 0, cy = 0;
  double amplitude = 1.0;  // m
  double sigma = 2.0;      // m
};

// Flat-top obstacle with smoothstep side ramps so the terrain gradient stays
// bounded (the consistency bound needs a finite Lipschitz constant).
struct BoxObstacle {
  double cx = 0, cy = 0;
  double half_x = 1.0, half_y = 1.0;
  double height = 1.0;
  double edge_width = 0.5;
};

struct ColorDisc {
  double cx = 0, cy = 0;
  double radius = 1.0;
  Rgb color;
};

// Analytic terrain + color oracle. Height and color are exact functions, so
// every geometric claim downstream can be checked against them.
class Heightfield {
 public:
  double height(double x, double y) const;
  Rgb color(double x, double y) const;

  // conservative bound on |grad h| over the whole plane
  double max_gradient() const;

  void add_bump(const GaussianBump& b) { bumps_.push_back(b); }
  void add_box(const BoxObstacle& b) { boxes_.push_back(b); }
  void clear_boxes() { boxes_.clear(); }
  void add_disc(const ColorDisc& d) { discs_.push_back(d); }

  void set_checker(const Rgb& a, const Rgb& b, double cell) {
    checker_a_ = a;
    checker_b_ = b;
    checker_cell_ = cell;
  }

  const std::vector<BoxObstacle>& boxes() const { return boxes_; }

 private:
  std::vector<GaussianBump> bumps_;
  std::vector<BoxObstacle> boxes_;
  std::vector<ColorDisc> discs_;
  Rgb checker_a_{0.55, 0.55, 0.50};
  Rgb checker_b_{0.45, 0.47, 0.44};
  double checker_cell_ = 4.0;
};

struct LidarPattern {
  int azimuth_count = 240;
  std::vector<double> elevation_rad;  // negative looks down
  double max_range = 30.0;
};

// Ring elevations whose flat-ground hit distances are uniform in
// [d_min, d_max] for a sensor h meters above ground.
LidarPattern make_uniform_ground_pattern(double sensor_height, double d_min,
                                         double d_max, int rings,
                                         int azimuths, double max_range);

struct SensorRig {
  LidarPattern lidar;
  CameraModel camera;
};

CameraModel make_camera(const Config& config);

// Ray-marched scan; hits are bisection-refined to well under a millimeter and
// returned in the sensor frame. Optional Gaussian range noise and dropout.
std::vector<Vec3> simulate_lidar(const Heightfield& world,
                                 const Pose& sensor_to_world,
                                 const LidarPattern& pattern,
                                 double noise_sigma, double dropout, Rng& rng);

// Per-pixel ray cast; ground pixels take the terrain color, the rest sky.
// gain scales the lot before 8-bit quantization.
RgbImage render_camera(const Heightfield& world, const Pose& sensor_to_world,
                       const CameraModel& cam, double gain = 1.0);

// Pose of a level sensor standing on the terrain.
Pose sensor_pose_at(const Heightfield& world, double x, double y,
                    double heading_deg, double sensor_height);

struct GeneratedDataset {
  std::vector<SampleMeta> metas;
  std::string root;
};

// Procedural multi-run dataset: `data_revisits` passes over data_places
// places on a loop, pose-jittered per visit, with per-run illumination gain
// and cloud dropout. Writes clouds, images, poses and the manifest.
GeneratedDataset make_dataset(const Config& config, const std::string& out_dir);

// World used by make_dataset, reproducible from the same config; exposed so
// tests can compare map output against the analytic terrain.
Heightfield make_dataset_world(const Config& config);

// Deterministic per-stream child generator.
Rng sub_rng(uint64_t seed, uint64_t stream);

}  // namespace coral

#endif
