#include "coral/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "coral/error.hpp"

namespace coral {

void write_manifest(const std::string& path,
                    const std::vector<SampleMeta>& metas) {
  std::ofstream out(path);
  if (!out) throw_data("cannot write manifest: " + path);
  out << "id,run,x,y,heading,cloud_path,image_path\n";
  char buf[512];
  for (const auto& m : metas) {
    std::snprintf(buf, sizeof(buf), "%llu,%d,%.9g,%.9g,%.9g,%s,%s\n",
                  static_cast<unsigned long long>(m.id), m.run, m.x, m.y,
                  m.heading, m.cloud_path.c_str(), m.image_path.c_str());
    out << buf;
  }
  if (!out) throw_data("failed writing manifest: " + path);
}

std::vector<SampleMeta> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_data("cannot open manifest: " + path);
  std::vector<SampleMeta> metas;
  std::string line;
  if (!std::getline(in, line) || line.rfind("id,run,", 0) != 0)
    throw_data("manifest missing header: " + path);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 7)
      throw_data("manifest line " + std::to_string(lineno) + " malformed in " +
                 path);
    SampleMeta m;
    m.id = std::stoull(fields[0]);
    m.run = std::stoi(fields[1]);
    m.x = std::stod(fields[2]);
    m.y = std::stod(fields[3]);
    m.heading = std::stod(fields[4]);
    m.cloud_path = fields[5];
    m.image_path = fields[6];
    metas.push_back(std::move(m));
  }
  return metas;
}

}  // namespace coral
