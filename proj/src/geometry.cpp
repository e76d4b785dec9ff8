#include "coral/geometry.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "coral/error.hpp"

namespace coral {

namespace {

constexpr double kOrthonormalTol = 1e-9;

bool is_orthonormal(const Mat3& r) {
  const Mat3 rtr = r.transposed() * r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double expect = (i == j) ? 1.0 : 0.0;
      if (std::abs(rtr(i, j) - expect) > kOrthonormalTol) return false;
    }
  return std::abs(r.determinant() - 1.0) <= kOrthonormalTol;
}

}  // namespace

Mat3 quaternion_to_matrix(const Quaternion& q) {
  const double n = std::sqrt(q.x * q.x + q.y * q.y + q.z * q.z + q.w * q.w);
  if (!(n > 0.0) || !std::isfinite(n))
    throw_numeric("quaternion has non-finite or zero norm");
  const double x = q.x / n, y = q.y / n, z = q.z / n, w = q.w / n;
  Mat3 r;
  r.m = {1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w),
         2 * (x * y + z * w),     1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
         2 * (x * z - y * w),     2 * (y * z + x * w), 1 - 2 * (x * x + y * y)};
  return r;
}

Quaternion matrix_to_quaternion(const Mat3& r) {
  Quaternion q;
  const double trace = r(0, 0) + r(1, 1) + r(2, 2);
  if (trace > 0.0) {
    double s = std::sqrt(trace + 1.0) * 2.0;
    q.w = 0.25 * s;
    q.x = (r(2, 1) - r(1, 2)) / s;
    q.y = (r(0, 2) - r(2, 0)) / s;
    q.z = (r(1, 0) - r(0, 1)) / s;
  } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2)) * 2.0;
    q.w = (r(2, 1) - r(1, 2)) / s;
    q.x = 0.25 * s;
    q.y = (r(0, 1) + r(1, 0)) / s;
    q.z = (r(0, 2) + r(2, 0)) / s;
  } else if (r(1, 1) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2)) * 2.0;
    q.w = (r(0, 2) - r(2, 0)) / s;
    q.x = (r(0, 1) + r(1, 0)) / s;
    q.y = 0.25 * s;
    q.z = (r(1, 2) + r(2, 1)) / s;
  } else {
    double s = std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1)) * 2.0;
    q.w = (r(1, 0) - r(0, 1)) / s;
    q.x = (r(0, 2) + r(2, 0)) / s;
    q.y = (r(1, 2) + r(2, 1)) / s;
    q.z = 0.25 * s;
  }
  return q;
}

Pose::Pose(const Mat3& rotation, const Vec3& translation, std::string from,
           std::string to)
    : rotation_(rotation),
      translation_(translation),
      from_(std::move(from)),
      to_(std::move(to)) {
  if (!translation_.finite()) throw_numeric("pose translation not finite");
  if (!is_orthonormal(rotation_))
    throw_numeric("pose rotation is not orthonormal with det +1");
}

Pose Pose::from_quaternion(const Quaternion& q, const Vec3& t,
                           std::string from, std::string to) {
  return Pose(quaternion_to_matrix(q), t, std::move(from), std::move(to));
}

Pose Pose::inverse() const {
  const Mat3 rt = rotation_.transposed();
  const Vec3 t = rt * translation_ * -1.0;
  return Pose(rt, t, to_, from_);
}

Pose Pose::compose(const Pose& other) const {
  if (!from_.empty() && !other.to_.empty() && from_ != other.to_)
    throw_usage("pose frame mismatch: composing to<-" + from_ + " with " +
                other.to_ + "<-" + other.from_);
  return Pose(rotation_ * other.rotation_,
              rotation_ * other.translation_ + translation_, other.from_, to_);
}

void CameraModel::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw_usage("camera focal lengths must be > 0");
  if (width < 2 || height < 2) throw_usage("camera image must be at least 2x2");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
    throw_usage("camera principal point outside the image");
}

std::optional<PixelProjection> project_to_pixel(const CameraModel& cam,
                                                const Point3& p_cam) {
  if (p_cam.z <= 1e-6) return std::nullopt;
  return PixelProjection{cam.fx * p_cam.x / p_cam.z + cam.cx,
                         cam.fy * p_cam.y / p_cam.z + cam.cy};
}

void GridSpec::validate() const {
  if (cells_x < 1 || cells_y < 1) throw_usage("grid needs at least one cell");
  if (!(resolution > 0.0)) throw_usage("grid resolution must be > 0");
}

std::optional<CellIndex> world_to_cell(const GridSpec& spec, const Point3& p) {
  const double fi = std::floor((p.x - spec.origin_x) / spec.resolution);
  const double fj = std::floor((p.y - spec.origin_y) / spec.resolution);
  if (fi < 0 || fj < 0 || fi >= spec.cells_x || fj >= spec.cells_y)
    return std::nullopt;
  return CellIndex{static_cast<int>(fi), static_cast<int>(fj)};
}

Vec3 cell_center(const GridSpec& spec, int i, int j) {
  return {spec.origin_x + (i + 0.5) * spec.resolution,
          spec.origin_y + (j + 0.5) * spec.resolution, 0.0};
}

std::vector<TimedPose> read_poses_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_data("cannot open poses file: " + path);
  std::vector<TimedPose> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    double ts, tx, ty, tz;
    Quaternion q;
    if (!(ss >> ts >> tx >> ty >> tz >> q.x >> q.y >> q.z >> q.w))
      throw_data("malformed pose line " + std::to_string(lineno) + " in " +
                 path);
    out.push_back({ts, Pose::from_quaternion(q, {tx, ty, tz})});
  }
  return out;
}

void write_poses_file(const std::string& path,
                      const std::vector<TimedPose>& poses) {
  std::ofstream out(path);
  if (!out) throw_data("cannot write poses file: " + path);
  char buf[256];
  for (const auto& tp : poses) {
    const Quaternion q = tp.pose.to_quaternion();
    const Vec3& t = tp.pose.translation();
    std::snprintf(buf, sizeof(buf),
                  "%.12g %.12g %.12g %.12g %.12g %.12g %.12g %.12g\n",
                  tp.timestamp, t.x, t.y, t.z, q.x, q.y, q.z, q.w);
    out << buf;
  }
  if (!out) throw_data("failed writing poses file: " + path);
}

double yaw_degrees(const Pose& pose) {
  const Mat3& r = pose.rotation();
  return wrap_degrees(std::atan2(r(1, 0), r(0, 0)) * 180.0 / M_PI);
}

double wrap_degrees(double deg) {
  double d = std::fmod(deg + 180.0, 360.0);
  if (d < 0) d += 360.0;
  return d - 180.0;
}

}  // namespace coral
