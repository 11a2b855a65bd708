#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "dal/matrix.hpp"

namespace dal {

// Binary container: magic, format version, then per named group:
// name length, name, rows, cols, raw little-endian 64-bit floats.
inline constexpr char kCheckpointMagic[] = "DALCKPT1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(const std::vector<std::pair<std::string, const Matrix*>>& groups,
                      std::ostream& out);
std::vector<std::pair<std::string, Matrix>> read_checkpoint(std::istream& in);

void write_checkpoint_file(const std::vector<std::pair<std::string, const Matrix*>>& groups,
                           const std::string& path);
std::vector<std::pair<std::string, Matrix>> read_checkpoint_file(const std::string& path);

}  // namespace dal
