#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace handsplat {

// Single f32 tensor in the "JGCK" checkpoint container.
struct NamedTensor {
  std::string name;
  std::vector<uint32_t> shape;
  std::vector<float> data;

  size_t element_count() const {
    size_t n = 1;
    for (uint32_t d : shape) n *= d;
    return n;
  }
};

void save_checkpoint(const std::vector<NamedTensor>& tensors,
                     const std::string& path);
std::vector<NamedTensor> load_checkpoint(const std::string& path);

// Lookup by name; throws VersionError when missing.
const NamedTensor& find_tensor(const std::vector<NamedTensor>& tensors,
                               const std::string& name);

}  // namespace handsplat
