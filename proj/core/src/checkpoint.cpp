#include "dal/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace dal {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: truncated stream");
  return v;
}

}  // namespace

void write_checkpoint(const std::vector<std::pair<std::string, const Matrix*>>& groups,
                      std::ostream& out) {
  out.write(kCheckpointMagic, 8);
  write_pod<std::uint32_t>(out, kCheckpointVersion);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(groups.size()));
  for (const auto& [name, mat] : groups) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<std::uint64_t>(out, mat->rows());
    write_pod<std::uint64_t>(out, mat->cols());
    out.write(reinterpret_cast<const char*>(mat->data().data()),
              static_cast<std::streamsize>(mat->size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("checkpoint: write failure");
}

std::vector<std::pair<std::string, Matrix>> read_checkpoint(std::istream& in) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw std::runtime_error("checkpoint: bad magic");
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  const auto count = read_pod<std::uint32_t>(in);
  std::vector<std::pair<std::string, Matrix>> groups;
  groups.reserve(count);
  for (std::uint32_t g = 0; g < count; ++g) {
    const auto name_len = read_pod<std::uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto rows = read_pod<std::uint64_t>(in);
    const auto cols = read_pod<std::uint64_t>(in);
    Matrix m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data().data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint: truncated group " + name);
    groups.emplace_back(std::move(name), std::move(m));
  }
  return groups;
}

void write_checkpoint_file(const std::vector<std::pair<std::string, const Matrix*>>& groups,
                           const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  write_checkpoint(groups, out);
}

std::vector<std::pair<std::string, Matrix>> read_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  return read_checkpoint(in);
}

}  // namespace dal
