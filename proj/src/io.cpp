#include "coral/io.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "coral/error.hpp"

namespace coral {

namespace {

void write_u32(std::ostream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}
uint32_t read_u32(std::istream& in) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

static_assert(sizeof(float) == 4, "float32 file formats assume 4-byte float");

}  // namespace

void write_point_cloud(const std::string& path, const std::vector<Vec3>& points) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_data("cannot write point cloud: " + path);
  out.write("PCL0", 4);
  write_u32(out, static_cast<uint32_t>(points.size()));
  for (const Vec3& p : points) {
    const float xyz[3] = {static_cast<float>(p.x), static_cast<float>(p.y),
                          static_cast<float>(p.z)};
    out.write(reinterpret_cast<const char*>(xyz), 12);
  }
  if (!out) throw_data("failed writing point cloud: " + path);
}

std::vector<Vec3> read_point_cloud(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot open point cloud: " + path);
  char magic[4] = {};
  in.read(magic, 4);
  if (std::memcmp(magic, "PCL0", 4) != 0)
    throw_data("bad point cloud magic in " + path);
  const uint32_t count = read_u32(in);
  std::vector<Vec3> points;
  points.reserve(count);
  for (uint32_t k = 0; k < count; ++k) {
    float xyz[3];
    in.read(reinterpret_cast<char*>(xyz), 12);
    if (!in) throw_data("truncated point cloud: " + path);
    points.emplace_back(xyz[0], xyz[1], xyz[2]);
  }
  return points;
}

void write_elevation_pgm(const std::string& path, const ElevationImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_data("cannot write PGM: " + path);
  char comment[256];
  std::snprintf(comment, sizeof(comment),
                "# grid cells_x=%d cells_y=%d resolution=%.9g origin_x=%.9g "
                "origin_y=%.9g hmin=%.9g hmax=%.9g\n",
                img.spec.cells_x, img.spec.cells_y, img.spec.resolution,
                img.spec.origin_x, img.spec.origin_y, img.window.h_min,
                img.window.h_max);
  out << "P5\n" << comment << img.spec.cells_x << " " << img.spec.cells_y
      << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw_data("failed writing PGM: " + path);
}

ElevationImage read_elevation_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot open PGM: " + path);
  std::string magic;
  in >> magic;
  if (magic != "P5") throw_data("not a P5 PGM: " + path);
  in.ignore(1);
  ElevationImage img;
  std::string line;
  std::getline(in, line);
  if (line.rfind("# grid ", 0) != 0)
    throw_data("missing grid comment in PGM: " + path);
  {
    std::istringstream ss(line.substr(7));
    std::string kv;
    while (ss >> kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = kv.substr(0, eq);
      const double val = std::stod(kv.substr(eq + 1));
      if (key == "cells_x") img.spec.cells_x = static_cast<int>(val);
      else if (key == "cells_y") img.spec.cells_y = static_cast<int>(val);
      else if (key == "resolution") img.spec.resolution = val;
      else if (key == "origin_x") img.spec.origin_x = val;
      else if (key == "origin_y") img.spec.origin_y = val;
      else if (key == "hmin") img.window.h_min = val;
      else if (key == "hmax") img.window.h_max = val;
    }
  }
  int w = 0, h = 0, maxval = 0;
  in >> w >> h >> maxval;
  in.ignore(1);
  if (w != img.spec.cells_x || h != img.spec.cells_y || maxval != 255)
    throw_data("PGM header disagrees with grid comment: " + path);
  img.pixels.resize(static_cast<size_t>(w) * h);
  img.defined.assign(img.pixels.size(), 1);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (!in) throw_data("truncated PGM: " + path);
  return img;
}

void write_png(const std::string& path, const RgbImage& img) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw_data("cannot write PNG: " + path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw_data("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw_data("libpng write failed: " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y)
    rows[y] = const_cast<png_bytep>(img.pixels.data() +
                                    static_cast<size_t>(y) * img.width * 3);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

RgbImage read_png(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw_data("cannot open PNG: " + path);
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw_data("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw_data("libpng read failed: " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
      png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  RgbImage img;
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.pixels.resize(static_cast<size_t>(img.width) * img.height * 3);
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y)
    rows[y] = img.pixels.data() + static_cast<size_t>(y) * img.width * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return img;
}

void write_descriptors(const std::string& path,
                       const std::vector<DescriptorRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_data("cannot write descriptor file: " + path);
  const uint32_t dim = records.empty()
                           ? 0
                           : static_cast<uint32_t>(records.front().values.size());
  out.write("DESC", 4);
  write_u32(out, dim);
  write_u32(out, static_cast<uint32_t>(records.size()));
  for (const auto& r : records) {
    if (r.values.size() != dim)
      throw_data("descriptor dimension mismatch while writing " + path);
    out.write(reinterpret_cast<const char*>(&r.id), 8);
    out.write(reinterpret_cast<const char*>(r.values.data()),
              static_cast<std::streamsize>(dim * sizeof(float)));
  }
  if (!out) throw_data("failed writing descriptor file: " + path);
}

std::vector<DescriptorRecord> read_descriptors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot open descriptor file: " + path);
  char magic[4] = {};
  in.read(magic, 4);
  if (std::memcmp(magic, "DESC", 4) != 0)
    throw_data("bad descriptor magic in " + path);
  const uint32_t dim = read_u32(in);
  const uint32_t count = read_u32(in);
  std::vector<DescriptorRecord> records(count);
  for (uint32_t k = 0; k < count; ++k) {
    in.read(reinterpret_cast<char*>(&records[k].id), 8);
    records[k].values.resize(dim);
    in.read(reinterpret_cast<char*>(records[k].values.data()),
            static_cast<std::streamsize>(dim * sizeof(float)));
    if (!in) throw_data("truncated descriptor file: " + path);
  }
  return records;
}

}  // namespace coral
