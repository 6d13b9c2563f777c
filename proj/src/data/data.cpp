#include "adaaug/data.hpp"

#include "adaaug/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

namespace adaaug::data {

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
constexpr std::size_t kCifarSide = 32;
constexpr std::size_t kCifarRecord = 1 + 3 * kCifarSide * kCifarSide;
constexpr char kStoreMagic[8] = {'A', 'D', 'A', 'M', 'A', 'G', '0', '1'};

std::uint32_t read_be32(std::istream& in, std::size_t offset, const char* what) {
  std::array<unsigned char, 4> b{};
  in.read(reinterpret_cast<char*>(b.data()), 4);
  if (in.gcount() != 4) {
    throw FormatError(std::string("truncated IDX header reading ") + what + " at offset " + std::to_string(offset));
  }
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                              static_cast<char>(v)};
  out.write(b.data(), 4);
}

std::ifstream open_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return in;
}

}  // namespace

std::optional<Format> format_from_name(std::string_view name) {
  if (name == "mnist-idx") return Format::mnist_idx;
  if (name == "cifar10-binary") return Format::cifar10_binary;
  return std::nullopt;
}

std::string_view format_name(Format format) {
  return format == Format::mnist_idx ? "mnist-idx" : "cifar10-binary";
}

// ---- IDX -------------------------------------------------------------------

std::vector<aug::Image> read_idx_images(std::istream& in) {
  const auto magic = read_be32(in, 0, "magic");
  if (magic != kIdxImagesMagic) {
    std::ostringstream os;
    os << "bad IDX image magic 0x" << std::hex << magic << " at offset 0 (expected 0x00000803)";
    throw FormatError(os.str());
  }
  const auto count = read_be32(in, 4, "image count");
  const auto rows = read_be32(in, 8, "row count");
  const auto cols = read_be32(in, 12, "column count");
  if (rows == 0 || cols == 0 || rows > 4096 || cols > 4096) {
    throw FormatError("implausible IDX image extent " + std::to_string(rows) + "x" + std::to_string(cols) +
                      " at offset 8");
  }
  const std::size_t plane = std::size_t{rows} * cols;
  std::vector<aug::Image> images;
  images.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::vector<std::uint8_t> px(plane);
    in.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(plane));
    if (static_cast<std::size_t>(in.gcount()) != plane) {
      throw FormatError("truncated IDX image data: record " + std::to_string(i) + " at offset " +
                        std::to_string(16 + i * plane));
    }
    images.emplace_back(1, static_cast<int>(rows), static_cast<int>(cols), std::move(px));
  }
  return images;
}

std::vector<int> read_idx_labels(std::istream& in) {
  const auto magic = read_be32(in, 0, "magic");
  if (magic != kIdxLabelsMagic) {
    std::ostringstream os;
    os << "bad IDX label magic 0x" << std::hex << magic << " at offset 0 (expected 0x00000801)";
    throw FormatError(os.str());
  }
  const auto count = read_be32(in, 4, "label count");
  std::vector<std::uint8_t> raw(count);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count));
  if (static_cast<std::size_t>(in.gcount()) != count) {
    throw FormatError("truncated IDX label data at offset " + std::to_string(8 + in.gcount()));
  }
  return {raw.begin(), raw.end()};
}

void write_idx_images(std::ostream& out, const std::vector<aug::Image>& images) {
  if (images.empty()) throw ContractError("write_idx_images: no images");
  const auto& first = images.front();
  write_be32(out, kIdxImagesMagic);
  write_be32(out, static_cast<std::uint32_t>(images.size()));
  write_be32(out, static_cast<std::uint32_t>(first.height));
  write_be32(out, static_cast<std::uint32_t>(first.width));
  for (const auto& img : images) {
    if (img.channels != 1 || !img.same_shape(first)) throw ContractError("write_idx_images: inconsistent image shapes");
    out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  }
}

void write_idx_labels(std::ostream& out, const std::vector<int>& labels) {
  write_be32(out, kIdxLabelsMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  for (int l : labels) {
    if (l < 0 || l > 255) throw ContractError("write_idx_labels: label out of byte range");
    out.put(static_cast<char>(l));
  }
}

// ---- CIFAR-10 binary -------------------------------------------------------

CifarRecords read_cifar_batch(std::istream& in) {
  CifarRecords out;
  std::vector<std::uint8_t> record(kCifarRecord);
  std::size_t offset = 0;
  while (true) {
    in.read(reinterpret_cast<char*>(record.data()), static_cast<std::streamsize>(kCifarRecord));
    const auto got = static_cast<std::size_t>(in.gcount());
    if (got == 0) break;
    if (got != kCifarRecord) {
      throw FormatError("truncated CIFAR-10 record at offset " + std::to_string(offset) + " (" + std::to_string(got) +
                        " of " + std::to_string(kCifarRecord) + " bytes)");
    }
    if (record[0] > 9) {
      throw FormatError("CIFAR-10 label " + std::to_string(record[0]) + " out of range at offset " +
                        std::to_string(offset));
    }
    out.labels.push_back(record[0]);
    out.images.emplace_back(3, static_cast<int>(kCifarSide), static_cast<int>(kCifarSide),
                            std::vector<std::uint8_t>(record.begin() + 1, record.end()));
    offset += kCifarRecord;
  }
  return out;
}

void write_cifar_batch(std::ostream& out, const std::vector<aug::Image>& images, const std::vector<int>& labels) {
  if (images.size() != labels.size()) throw ContractError("write_cifar_batch: image/label count mismatch");
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& img = images[i];
    if (img.channels != 3 || img.height != 32 || img.width != 32) {
      throw ContractError("write_cifar_batch: images must be 3x32x32");
    }
    out.put(static_cast<char>(labels[i]));
    out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  }
}

// ---- datasets ------------------------------------------------------------

ChannelStats compute_stats(const std::vector<aug::Image>& images) {
  if (images.empty()) throw ConfigError("cannot compute statistics of an empty dataset");
  const int channels = images.front().channels;
  ChannelStats stats{std::vector<double>(channels, 0.0), std::vector<double>(channels, 0.0)};
  std::vector<double> sum(channels, 0.0), sum_sq(channels, 0.0);
  double count = 0.0;
  for (const auto& img : images) {
    const std::size_t n = img.plane();
    for (int c = 0; c < channels; ++c)
      for (std::size_t i = 0; i < n; ++i) {
        const double v = img.pixels[c * n + i] / 255.0;
        sum[c] += v;
        sum_sq[c] += v * v;
      }
    count += static_cast<double>(n);
  }
  for (int c = 0; c < channels; ++c) {
    stats.mean[c] = sum[c] / count;
    stats.std[c] = std::sqrt(std::max(0.0, sum_sq[c] / count - stats.mean[c] * stats.mean[c]));
  }
  return stats;
}

void validate(const Dataset& dataset) {
  if (dataset.images.size() != dataset.labels.size()) {
    throw ConfigError("dataset has " + std::to_string(dataset.images.size()) + " images but " +
                      std::to_string(dataset.labels.size()) + " labels");
  }
  if (dataset.images.empty()) throw ConfigError("dataset is empty");
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset.labels[i] < 0 || dataset.labels[i] >= dataset.classes) {
      throw ConfigError("label " + std::to_string(dataset.labels[i]) + " at index " + std::to_string(i) +
                        " outside [0, " + std::to_string(dataset.classes) + ")");
    }
    if (!dataset.images[i].same_shape(dataset.images.front())) {
      throw ConfigError("image " + std::to_string(i) + " has a different shape from image 0");
    }
  }
}

std::vector<std::size_t> subset_indices(std::size_t n, const Subset& subset) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (subset.size >= n) return idx;
  Rng rng = make_stream(subset.seed, stream::subset);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(subset.size);
  std::sort(idx.begin(), idx.end());
  return idx;
}

Dataset select(const Dataset& dataset, std::span<const std::size_t> indices) {
  Dataset out;
  out.classes = dataset.classes;
  out.images.reserve(indices.size());
  out.labels.reserve(indices.size());
  for (auto i : indices) {
    if (i >= dataset.size()) throw ContractError("select: index " + std::to_string(i) + " out of range");
    out.images.push_back(dataset.images[i]);
    out.labels.push_back(dataset.labels[i]);
  }
  out.stats = compute_stats(out.images);
  return out;
}

Dataset load_dataset(const std::filesystem::path& dir, Format format, Split split, std::optional<Subset> subset) {
  Dataset ds;
  ds.classes = 10;
  if (format == Format::mnist_idx) {
    const char* prefix = split == Split::train ? "train" : "t10k";
    auto img_in = open_binary(dir / (std::string(prefix) + "-images-idx3-ubyte"));
    auto lbl_in = open_binary(dir / (std::string(prefix) + "-labels-idx1-ubyte"));
    ds.images = read_idx_images(img_in);
    ds.labels = read_idx_labels(lbl_in);
  } else {
    std::vector<std::filesystem::path> files;
    if (split == Split::train) {
      for (int i = 1; i <= 5; ++i) {
        auto p = dir / ("data_batch_" + std::to_string(i) + ".bin");
        if (std::filesystem::exists(p)) files.push_back(p);
      }
      if (files.empty()) throw FormatError("no data_batch_*.bin files in " + dir.string());
    } else {
      files.push_back(dir / "test_batch.bin");
    }
    for (const auto& f : files) {
      auto in = open_binary(f);
      auto recs = read_cifar_batch(in);
      std::move(recs.images.begin(), recs.images.end(), std::back_inserter(ds.images));
      ds.labels.insert(ds.labels.end(), recs.labels.begin(), recs.labels.end());
    }
  }
  validate(ds);
  if (subset) {
    const auto idx = subset_indices(ds.size(), *subset);
    return select(ds, idx);
  }
  ds.stats = compute_stats(ds.images);
  return ds;
}

// ---- preprocessing -----------------------------------------------------------

std::vector<double> normalize(const aug::Image& image, const ChannelStats& stats) {
  if (stats.mean.size() != static_cast<std::size_t>(image.channels) ||
      stats.std.size() != static_cast<std::size_t>(image.channels)) {
    throw ConfigError("normalization statistics have " + std::to_string(stats.mean.size()) +
                      " channels, image has " + std::to_string(image.channels));
  }
  for (int c = 0; c < image.channels; ++c) {
    if (!std::isfinite(stats.mean[c]) || !std::isfinite(stats.std[c]) || !(stats.std[c] > 0.0)) {
      throw ConfigError("normalization statistics for channel " + std::to_string(c) + " are degenerate (std " +
                        std::to_string(stats.std[c]) + ")");
    }
  }
  std::vector<double> out(image.pixels.size());
  const std::size_t n = image.plane();
  for (int c = 0; c < image.channels; ++c)
    for (std::size_t i = 0; i < n; ++i)
      out[c * n + i] = (image.pixels[c * n + i] / 255.0 - stats.mean[c]) / stats.std[c];
  return out;
}

num::Tensor to_batch_tensor(std::span<const aug::Image> images, const ChannelStats& stats) {
  if (images.empty()) throw ContractError("to_batch_tensor: empty batch");
  const auto& first = images.front();
  const std::size_t per = first.pixels.size();
  std::vector<double> values;
  values.reserve(images.size() * per);
  for (const auto& img : images) {
    if (!img.same_shape(first)) throw DimensionError("to_batch_tensor: inconsistent image shapes in batch");
    auto v = normalize(img, stats);
    values.insert(values.end(), v.begin(), v.end());
  }
  return num::Tensor({images.size(), static_cast<std::size_t>(first.channels), static_cast<std::size_t>(first.height),
                      static_cast<std::size_t>(first.width)},
                     std::move(values));
}

aug::Image pad_crop_flip(const aug::Image& image, int pad, Rng& rng) {
  std::uniform_int_distribution<int> offset(0, 2 * pad);
  std::uniform_int_distribution<int> coin(0, 1);
  const int oy = offset(rng) - pad, ox = offset(rng) - pad;
  const bool flip = coin(rng) == 1;
  aug::Image out(image.channels, image.height, image.width, 0);
  for (int c = 0; c < image.channels; ++c)
    for (int y = 0; y < image.height; ++y)
      for (int x = 0; x < image.width; ++x) {
        const int sy = y + oy;
        const int sx = (flip ? image.width - 1 - x : x) + ox;
        if (sy >= 0 && sy < image.height && sx >= 0 && sx < image.width) out.at(c, y, x) = image.at(c, sy, sx);
      }
  return out;
}

// ---- batching --------------------------------------------------------------

std::vector<Batch> epoch_batches(const Dataset& dataset, std::size_t batch_size, Rng& rng) {
  if (batch_size == 0) throw ContractError("batch size must be positive");
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    Batch b;
    b.indices.assign(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
    for (auto i : b.indices) {
      b.images.push_back(dataset.images[i]);
      b.labels.push_back(dataset.labels[i]);
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

// ---- magnitude store -------------------------------------------------------

MagnitudeStore::MagnitudeStore(std::size_t n) : values_(n, 0.0) {}

void MagnitudeStore::check_index(std::size_t index) const {
  if (index >= values_.size()) {
    throw ContractError("magnitude store index " + std::to_string(index) + " out of range (N = " +
                        std::to_string(values_.size()) + ")");
  }
}

std::vector<double> MagnitudeStore::read(std::span<const std::size_t> indices) const {
  std::vector<double> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(read(i));
  return out;
}

double MagnitudeStore::read(std::size_t index) const {
  check_index(index);
  return values_[index];
}

void MagnitudeStore::write(std::span<const std::size_t> indices, std::span<const double> values) {
  if (indices.size() != values.size()) throw ContractError("magnitude store write: index/value count mismatch");
  for (std::size_t k = 0; k < indices.size(); ++k) {
    check_index(indices[k]);
    if (!(values[k] >= 0.0 && values[k] <= 1.0)) {
      throw ContractError("magnitude store write: value " + std::to_string(values[k]) + " outside [0, 1]");
    }
  }
  for (std::size_t k = 0; k < indices.size(); ++k) values_[indices[k]] = values[k];
}

double MagnitudeStore::mean() const {
  if (values_.empty()) return 0.0;
  return std::accumulate(values_.begin(), values_.end(), 0.0) / static_cast<double>(values_.size());
}

void MagnitudeStore::write_to(std::ostream& out) const {
  out.write(kStoreMagic, sizeof kStoreMagic);
  num::le::put_u64(out, values_.size());
  for (double v : values_) num::le::put_f64(out, v);
}

MagnitudeStore MagnitudeStore::read_from(std::istream& in) {
  char magic[sizeof kStoreMagic] = {};
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kStoreMagic, sizeof magic) != 0) {
    throw FormatError("bad magnitude store magic at offset 0 (expected ADAMAG01)");
  }
  try {
    const auto n = num::le::get_u64(in, "store size");
    MagnitudeStore store(0);
    store.values_.resize(n);
    for (auto& v : store.values_) {
      v = num::le::get_f64(in, "magnitude");
      if (!(v >= 0.0 && v <= 1.0)) throw FormatError("stored magnitude outside [0, 1]");
    }
    return store;
  } catch (const num::CheckpointError& e) {
    throw FormatError(e.what());
  }
}

void MagnitudeStore::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_to(out);
}

MagnitudeStore MagnitudeStore::load(const std::filesystem::path& path) {
  auto in = open_binary(path);
  return read_from(in);
}

}  // namespace adaaug::data
