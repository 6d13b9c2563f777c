#include "adaaug/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace adaaug::num {

namespace le {

namespace {
template <typename T>
void put(std::ostream& out, T v) {
  std::array<char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get(std::istream& in, const char* what) {
  std::array<unsigned char, sizeof(T)> bytes{};
  const auto offset = static_cast<long long>(in.tellg());
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw CheckpointError(std::string("truncated input reading ") + what + " at offset " + std::to_string(offset));
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(bytes[i]) << (8 * i);
  return v;
}
}  // namespace

void put_u32(std::ostream& out, std::uint32_t v) { put(out, v); }
void put_u64(std::ostream& out, std::uint64_t v) { put(out, v); }
void put_f64(std::ostream& out, double v) { put(out, std::bit_cast<std::uint64_t>(v)); }
std::uint32_t get_u32(std::istream& in, const char* what) { return get<std::uint32_t>(in, what); }
std::uint64_t get_u64(std::istream& in, const char* what) { return get<std::uint64_t>(in, what); }
double get_f64(std::istream& in, const char* what) { return std::bit_cast<double>(get<std::uint64_t>(in, what)); }

}  // namespace le

void write_checkpoint(std::ostream& out, const std::vector<NamedTensor>& tensors) {
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  le::put_u32(out, kCheckpointVersion);
  le::put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) {
    le::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    le::put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
    for (auto e : tensor.shape()) le::put_u64(out, e);
    for (double v : tensor.data()) le::put_f64(out, v);
  }
  if (!out) throw CheckpointError("failed writing checkpoint stream");
}

std::vector<NamedTensor> read_checkpoint(std::istream& in) {
  char magic[sizeof kCheckpointMagic] = {};
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw CheckpointError("bad checkpoint magic at offset 0 (expected ADAAUG01)");
  }
  const auto version = le::get_u32(in, "version");
  if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto count = le::get_u32(in, "record count");
  std::vector<NamedTensor> out;
  out.reserve(count);
  for (std::uint32_t r = 0; r < count; ++r) {
    const auto len = le::get_u32(in, "name length");
    if (len > (1u << 16)) throw CheckpointError("implausible tensor name length " + std::to_string(len));
    std::string name(len, '\0');
    in.read(name.data(), len);
    if (!in) throw CheckpointError("truncated tensor name in record " + std::to_string(r));
    const auto rank = le::get_u32(in, "rank");
    if (rank > 8) throw CheckpointError("implausible rank " + std::to_string(rank) + " for tensor " + name);
    Shape shape(rank);
    for (auto& e : shape) {
      e = le::get_u64(in, "extent");
      if (e == 0 || e > (1ull << 32)) throw CheckpointError("invalid extent in tensor " + name);
    }
    std::vector<double> values(shape_size(shape));
    for (auto& v : values) v = le::get_f64(in, "payload");
    out.push_back({std::move(name), Tensor(std::move(shape), std::move(values))});
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  write_checkpoint(out, tensors);
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

void assign_from(const std::vector<NamedTensor>& source, const std::vector<NamedTensor>& targets) {
  for (const auto& target : targets) {
    const NamedTensor* match = nullptr;
    for (const auto& s : source)
      if (s.name == target.name) match = &s;
    if (!match) throw CheckpointError("checkpoint is missing tensor " + target.name);
    if (match->tensor.shape() != target.tensor.shape()) {
      throw CheckpointError("checkpoint tensor " + target.name + " has shape " + shape_string(match->tensor.shape()) +
                            ", model expects " + shape_string(target.tensor.shape()));
    }
    auto dst = Tensor(target.tensor).data();
    std::copy(match->tensor.data().begin(), match->tensor.data().end(), dst.begin());
  }
}

}  // namespace adaaug::num
