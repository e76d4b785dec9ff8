#ifndef CORAL_IO_HPP
#define CORAL_IO_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "coral/elevation_map.hpp"
#include "coral/geometry.hpp"

namespace coral {

// Binary cloud: magic 'PCL0', u32 count, then count records of 3x float32
// (x, y, z meters, sensor frame), little-endian.
void write_point_cloud(const std::string& path, const std::vector<Vec3>& points);
std::vector<Vec3> read_point_cloud(const std::string& path);

// 8-bit grayscale PGM (P5) with a comment line carrying the grid spec and
// height window. Reading restores geometry but not the per-pixel defined
// mask (all pixels come back defined).
void write_elevation_pgm(const std::string& path, const ElevationImage& img);
ElevationImage read_elevation_pgm(const std::string& path);

struct RgbImage {
  int width = 0, height = 0;
  std::vector<uint8_t> pixels;  // RGB8, row-major

  uint8_t* at(int x, int y) { return &pixels[(static_cast<size_t>(y) * width + x) * 3]; }
  const uint8_t* at(int x, int y) const {
    return &pixels[(static_cast<size_t>(y) * width + x) * 3];
  }
};

void write_png(const std::string& path, const RgbImage& img);
RgbImage read_png(const std::string& path);

// Descriptor bank: magic 'DESC', u32 dim, u32 count, then per record a u64
// sample id followed by dim float32 values.
struct DescriptorRecord {
  uint64_t id = 0;
  std::vector<float> values;
};
void write_descriptors(const std::string& path,
                       const std::vector<DescriptorRecord>& records);
std::vector<DescriptorRecord> read_descriptors(const std::string& path);

}  // namespace coral

#endif
