#ifndef CORAL_DATASET_HPP
#define CORAL_DATASET_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace coral {

struct SampleMeta {
  uint64_t id = 0;
  int run = 0;
  double x = 0.0, y = 0.0;     // world position, meters
  double heading = 0.0;        // degrees in [-180, 180)
  std::string cloud_path;      // relative to the dataset root
  std::string image_path;
};

// CSV manifest: header, then id,run,x,y,heading,cloud_path,image_path
void write_manifest(const std::string& path, const std::vector<SampleMeta>& metas);
std::vector<SampleMeta> read_manifest(const std::string& path);

}  // namespace coral

#endif
