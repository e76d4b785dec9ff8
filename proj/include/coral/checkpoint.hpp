#ifndef CORAL_CHECKPOINT_HPP
#define CORAL_CHECKPOINT_HPP

#include <map>
#include <string>
#include <vector>

namespace coral::nn {

// Binary checkpoint: magic 'CKPT', version u32, count u32, then per tensor
// name length + UTF-8 name, rank u32, dims u32 each, float32 data. LE.
struct NamedTensor {
  std::string name;
  std::vector<int> dims;
  std::vector<float> data;
};

void write_checkpoint(const std::string& path,
                      const std::vector<NamedTensor>& tensors);
std::map<std::string, NamedTensor> read_checkpoint(const std::string& path);

}  // namespace coral::nn

#endif
