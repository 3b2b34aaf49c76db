#include "handsplat/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "handsplat/errors.hpp"

namespace handsplat {

namespace {
constexpr uint32_t kDtypeF32 = 0;
constexpr uint32_t kVersion = 1;
}  // namespace

void save_checkpoint(const std::vector<NamedTensor>& tensors,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write("JGCK", 4);
  uint32_t version = kVersion;
  uint32_t count = static_cast<uint32_t>(tensors.size());
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&count), 4);
  uint64_t offset = 0;
  for (const NamedTensor& t : tensors) {
    uint32_t name_len = static_cast<uint32_t>(t.name.size());
    out.write(reinterpret_cast<const char*>(&name_len), 4);
    out.write(t.name.data(), name_len);
    uint32_t dtype = kDtypeF32;
    out.write(reinterpret_cast<const char*>(&dtype), 4);
    uint32_t ndim = static_cast<uint32_t>(t.shape.size());
    out.write(reinterpret_cast<const char*>(&ndim), 4);
    out.write(reinterpret_cast<const char*>(t.shape.data()), 4 * ndim);
    out.write(reinterpret_cast<const char*>(&offset), 8);
    if (t.data.size() != t.element_count())
      throw IoError("tensor " + t.name + " shape/data mismatch");
    offset += t.data.size() * sizeof(float);
  }
  for (const NamedTensor& t : tensors)
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  if (!out) throw IoError("short write on checkpoint: " + path);
}

std::vector<NamedTensor> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[4];
  uint32_t version = 0, count = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&count), 4);
  if (!in || std::memcmp(magic, "JGCK", 4) != 0)
    throw IoError("not a checkpoint file: " + path);
  if (version != kVersion)
    throw VersionError("unsupported checkpoint version " +
                       std::to_string(version));
  std::vector<NamedTensor> tensors(count);
  std::vector<uint64_t> offsets(count);
  for (uint32_t i = 0; i < count; ++i) {
    uint32_t name_len = 0, dtype = 0, ndim = 0;
    in.read(reinterpret_cast<char*>(&name_len), 4);
    if (!in || name_len > 4096) throw IoError("corrupt checkpoint header");
    tensors[i].name.resize(name_len);
    in.read(tensors[i].name.data(), name_len);
    in.read(reinterpret_cast<char*>(&dtype), 4);
    in.read(reinterpret_cast<char*>(&ndim), 4);
    if (dtype != kDtypeF32)
      throw VersionError("unsupported tensor dtype in " + tensors[i].name);
    if (!in || ndim > 8) throw IoError("corrupt checkpoint header");
    tensors[i].shape.resize(ndim);
    in.read(reinterpret_cast<char*>(tensors[i].shape.data()), 4 * ndim);
    in.read(reinterpret_cast<char*>(&offsets[i]), 8);
  }
  std::streampos payload = in.tellg();
  for (uint32_t i = 0; i < count; ++i) {
    tensors[i].data.resize(tensors[i].element_count());
    in.seekg(payload + static_cast<std::streamoff>(offsets[i]));
    in.read(reinterpret_cast<char*>(tensors[i].data.data()),
            static_cast<std::streamsize>(tensors[i].data.size() * sizeof(float)));
  }
  if (!in) throw IoError("truncated checkpoint: " + path);
  return tensors;
}

const NamedTensor& find_tensor(const std::vector<NamedTensor>& tensors,
                               const std::string& name) {
  for (const NamedTensor& t : tensors)
    if (t.name == name) return t;
  throw VersionError("checkpoint is missing tensor \"" + name + "\"");
}

}  // namespace handsplat
