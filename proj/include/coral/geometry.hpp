#ifndef CORAL_GEOMETRY_HPP
#define CORAL_GEOMETRY_HPP

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace coral {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3() = default;
  Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
  bool finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }
};

using Point3 = Vec3;

// Row-major 3x3 matrix. Only what rigid-body math needs.
struct Mat3 {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Mat3 identity() { return Mat3{}; }
  double operator()(int r, int c) const { return m[r * 3 + c]; }
  double& operator()(int r, int c) { return m[r * 3 + c]; }

  Vec3 operator*(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
            m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }
  Mat3 operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0;
        for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
        r(i, j) = s;
      }
    return r;
  }
  Mat3 transposed() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
    return r;
  }
  double determinant() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) -
           m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
  }

  static Mat3 rot_z(double rad) {
    Mat3 r;
    const double c = std::cos(rad), s = std::sin(rad);
    r.m = {c, -s, 0, s, c, 0, 0, 0, 1};
    return r;
  }
  static Mat3 rot_y(double rad) {
    Mat3 r;
    const double c = std::cos(rad), s = std::sin(rad);
    r.m = {c, 0, s, 0, 1, 0, -s, 0, c};
    return r;
  }
  static Mat3 rot_x(double rad) {
    Mat3 r;
    const double c = std::cos(rad), s = std::sin(rad);
    r.m = {1, 0, 0, 0, c, -s, 0, s, c};
    return r;
  }
};

// Unit quaternion, scalar-last (x, y, z, w) to match the poses file layout.
struct Quaternion {
  double x = 0, y = 0, z = 0, w = 1;
};

Mat3 quaternion_to_matrix(const Quaternion& q);
Quaternion matrix_to_quaternion(const Mat3& r);

// Rigid transform mapping points expressed in `from` into `to`.
// Frame labels are advisory: composition checks them only when both sides
// carry non-empty labels.
class Pose {
 public:
  Pose() = default;
  Pose(const Mat3& rotation, const Vec3& translation, std::string from = "",
       std::string to = "");

  static Pose identity() { return Pose{}; }
  static Pose from_quaternion(const Quaternion& q, const Vec3& t,
                              std::string from = "", std::string to = "");

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }
  const std::string& frame_from() const { return from_; }
  const std::string& frame_to() const { return to_; }

  Pose inverse() const;
  // (*this) corresponds to to<-mid, other to mid<-from.
  Pose compose(const Pose& other) const;
  Quaternion to_quaternion() const { return matrix_to_quaternion(rotation_); }

 private:
  Mat3 rotation_;
  Vec3 translation_;
  std::string from_, to_;
};

inline Point3 transform_point(const Pose& pose, const Point3& p) {
  return pose.rotation() * p + pose.translation();
}

struct CameraModel {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int width = 0, height = 0;
  Pose extrinsic;  // camera <- lidar

  void validate() const;
};

struct PixelProjection {
  double u = 0, v = 0;
};

// Pinhole projection of a camera-frame point. Empty when the point sits at or
// behind the image plane (z <= 1e-6 m). Bounds are the caller's business.
std::optional<PixelProjection> project_to_pixel(const CameraModel& cam,
                                                const Point3& p_cam);

inline bool pixel_in_bounds(const CameraModel& cam, const PixelProjection& px) {
  return px.u >= 0.0 && px.u <= cam.width - 1.0 && px.v >= 0.0 &&
         px.v <= cam.height - 1.0;
}

struct GridSpec {
  int cells_x = 0, cells_y = 0;
  double resolution = 0.0;
  double origin_x = 0.0, origin_y = 0.0;  // world position of cell (0,0) corner

  void validate() const;
};

struct CellIndex {
  int i = 0, j = 0;
};

// Floor-partition grid lookup; empty when (x, y) falls outside the grid.
std::optional<CellIndex> world_to_cell(const GridSpec& spec, const Point3& p);

// World (x, y) of the center of cell (i, j).
Vec3 cell_center(const GridSpec& spec, int i, int j);

struct TimedPose {
  double timestamp = 0.0;
  Pose pose;
};

// Text format: one pose per line, `timestamp tx ty tz qx qy qz qw`.
std::vector<TimedPose> read_poses_file(const std::string& path);
void write_poses_file(const std::string& path,
                      const std::vector<TimedPose>& poses);

double yaw_degrees(const Pose& pose);
double wrap_degrees(double deg);  // into [-180, 180)

}  // namespace coral

#endif
