#include "coral/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "coral/error.hpp"

namespace coral::nn {

namespace {
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}
uint32_t read_u32(std::istream& in) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
}  // namespace

void write_checkpoint(const std::string& path,
                      const std::vector<NamedTensor>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_data("cannot write checkpoint: " + path);
  out.write("CKPT", 4);
  write_u32(out, kVersion);
  write_u32(out, static_cast<uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    write_u32(out, static_cast<uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    write_u32(out, static_cast<uint32_t>(t.dims.size()));
    size_t total = 1;
    for (int d : t.dims) {
      write_u32(out, static_cast<uint32_t>(d));
      total *= static_cast<size_t>(d);
    }
    if (total != t.data.size())
      throw_data("checkpoint tensor '" + t.name + "' dims disagree with data");
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  }
  if (!out) throw_data("failed writing checkpoint: " + path);
}

std::map<std::string, NamedTensor> read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot open checkpoint: " + path);
  char magic[4] = {};
  in.read(magic, 4);
  if (std::memcmp(magic, "CKPT", 4) != 0)
    throw_data("bad checkpoint magic in " + path);
  const uint32_t version = read_u32(in);
  if (version != kVersion)
    throw_data("unsupported checkpoint version in " + path);
  const uint32_t count = read_u32(in);
  std::map<std::string, NamedTensor> out;
  for (uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    const uint32_t name_len = read_u32(in);
    t.name.resize(name_len);
    in.read(t.name.data(), name_len);
    const uint32_t rank = read_u32(in);
    size_t total = 1;
    for (uint32_t r = 0; r < rank; ++r) {
      const uint32_t d = read_u32(in);
      t.dims.push_back(static_cast<int>(d));
      total *= d;
    }
    t.data.resize(total);
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(total * sizeof(float)));
    if (!in) throw_data("truncated checkpoint: " + path);
    out.emplace(t.name, std::move(t));
  }
  return out;
}

}  // namespace coral::nn
