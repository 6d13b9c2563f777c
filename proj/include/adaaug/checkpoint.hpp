#pragma once

// Flat binary parameter container.
//
//   "ADAAUG01"            8 bytes magic
//   version               u32
//   count                 u32
//   count records of:
//     name length         u32
//     name                bytes (no terminator)
//     rank                u32
//     extents             rank x u64
//     payload             prod(extents) x f64
//
// All integers and floats are little-endian.

#include "adaaug/tensor.hpp"

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace adaaug::num {

inline constexpr char kCheckpointMagic[8] = {'A', 'D', 'A', 'A', 'U', 'G', '0', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

void write_checkpoint(std::ostream& out, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

/// Copies values from `source` into same-named, same-shaped `targets`.
/// Every target must be present in `source`.
void assign_from(const std::vector<NamedTensor>& source, const std::vector<NamedTensor>& targets);

// Little-endian primitives shared with the magnitude store format.
namespace le {
void put_u32(std::ostream& out, std::uint32_t v);
void put_u64(std::ostream& out, std::uint64_t v);
void put_f64(std::ostream& out, double v);
std::uint32_t get_u32(std::istream& in, const char* what);
std::uint64_t get_u64(std::istream& in, const char* what);
double get_f64(std::istream& in, const char* what);
}  // namespace le

}  // namespace adaaug::num
