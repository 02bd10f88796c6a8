#include "cost/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace cost {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'C', 'O', 'S', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is, const std::filesystem::path& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw CheckpointError("checkpoint " + path.string() + ": unexpected end of file");
  return v;
}

std::string get_string(std::istream& is, std::size_t n, const std::filesystem::path& path) {
  std::string s(n, '\0');
  if (n && !is.read(s.data(), static_cast<std::streamsize>(n)))
    throw CheckpointError("checkpoint " + path.string() + ": unexpected end of file");
  return s;
}

}  // namespace

Checkpoint Checkpoint::from_parameters(const ParameterList& params, std::string metadata) {
  Checkpoint ckpt;
  ckpt.metadata = std::move(metadata);
  for (const auto& p : params) {
    if (!ckpt.tensors.emplace(p.name, p.tensor.detach()).second)
      throw CheckpointError("duplicate parameter name " + p.name);
  }
  return ckpt;
}

void Checkpoint::restore(const ParameterList& params) const {
  for (const auto& p : params) {
    auto it = tensors.find(p.name);
    if (it == tensors.end()) throw CheckpointError("checkpoint lacks parameter " + p.name);
    if (it->second.shape() != p.tensor.shape())
      throw CheckpointError("parameter " + p.name + " has shape " + shape_str(it->second.shape()) +
                            " in checkpoint but " + shape_str(p.tensor.shape()) + " in model");
    Tensor target = p.tensor;
    auto src = it->second.data();
    std::copy(src.begin(), src.end(), target.mutable_data().begin());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError("cannot open " + path.string() + " for writing");
  os.write(kMagic, sizeof(kMagic));
  put(os, kVersion);
  put<std::uint64_t>(os, ckpt.metadata.size());
  os.write(ckpt.metadata.data(), static_cast<std::streamsize>(ckpt.metadata.size()));
  put<std::uint64_t>(os, ckpt.tensors.size());
  for (const auto& [name, t] : ckpt.tensors) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put<std::uint64_t>(os, d);
    auto values = t.data();
    os.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
  }
  if (!os) throw CheckpointError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw CheckpointError(path.string() + " is not a checkpoint (bad magic)");
  const auto version = get<std::uint32_t>(is, path);
  if (version != kVersion)
    throw CheckpointError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.metadata = get_string(is, get<std::uint64_t>(is, path), path);
  const auto count = get<std::uint64_t>(is, path);
  for (std::uint64_t k = 0; k < count; ++k) {
    std::string name = get_string(is, get<std::uint32_t>(is, path), path);
    const auto rank = get<std::uint32_t>(is, path);
    if (rank == 0 || rank > 8) throw CheckpointError(path.string() + ": bad rank for " + name);
    Shape shape(rank);
    for (auto& d : shape) d = get<std::uint64_t>(is, path);
    std::vector<double> values(shape_numel(shape));
    if (!is.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double))))
      throw CheckpointError("checkpoint " + path.string() + ": truncated values for " + name);
    ckpt.tensors.emplace(std::move(name), Tensor::from(std::move(shape), std::move(values)));
  }
  return ckpt;
}

}  // namespace cost
