#pragma once

#include "adaaug/augment.hpp"
#include "adaaug/errors.hpp"
#include "adaaug/rng.hpp"
#include "adaaug/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace adaaug::data {

enum class Format { mnist_idx, cifar10_binary };
enum class Split { train, test };

std::optional<Format> format_from_name(std::string_view name);
std::string_view format_name(Format format);

struct ChannelStats {
  std::vector<double> mean;  // per channel, in [0, 1] units
  std::vector<double> std;
};

struct Dataset {
  std::vector<aug::Image> images;
  std::vector<int> labels;
  int classes = 0;
  ChannelStats stats;

  std::size_t size() const { return images.size(); }
};

struct Subset {
  std::size_t size;
  std::uint64_t seed;
};

/// Loads one split from a dataset directory.
///
/// mnist-idx expects train-images-idx3-ubyte / train-labels-idx1-ubyte and
/// t10k-images-idx3-ubyte / t10k-labels-idx1-ubyte. cifar10-binary expects
/// data_batch_1.bin .. data_batch_5.bin (whichever exist, at least one) and
/// test_batch.bin. Channel statistics are computed from what was loaded.
Dataset load_dataset(const std::filesystem::path& dir, Format format, Split split,
                     std::optional<Subset> subset = std::nullopt);

/// Checks N == labels, labels in [0, k), consistent image shapes.
void validate(const Dataset& dataset);
ChannelStats compute_stats(const std::vector<aug::Image>& images);
/// Seeded subset without replacement; kept indices stay in ascending order.
std::vector<std::size_t> subset_indices(std::size_t n, const Subset& subset);
Dataset select(const Dataset& dataset, std::span<const std::size_t> indices);

// ---- raw formats -----------------------------------------------------------

std::vector<aug::Image> read_idx_images(std::istream& in);
std::vector<int> read_idx_labels(std::istream& in);
void write_idx_images(std::ostream& out, const std::vector<aug::Image>& images);
void write_idx_labels(std::ostream& out, const std::vector<int>& labels);

struct CifarRecords {
  std::vector<aug::Image> images;
  std::vector<int> labels;
};
CifarRecords read_cifar_batch(std::istream& in);
void write_cifar_batch(std::ostream& out, const std::vector<aug::Image>& images, const std::vector<int>& labels);

// ---- preprocessing -----------------------------------------------------------

/// v = (p / 255 - mean_c) / std_c, returned as C x H x W.
std::vector<double> normalize(const aug::Image& image, const ChannelStats& stats);
/// Stacks normalized images into a [B x C x H x W] tensor.
num::Tensor to_batch_tensor(std::span<const aug::Image> images, const ChannelStats& stats);

/// Zero-pad by `pad`, random crop back to the original size, random horizontal flip.
aug::Image pad_crop_flip(const aug::Image& image, int pad, Rng& rng);

// ---- batching --------------------------------------------------------------

struct Batch {
  std::vector<std::size_t> indices;  // positions in the dataset
  std::vector<aug::Image> images;
  std::vector<int> labels;
};

/// One epoch of shuffled batches; the last batch may be short.
std::vector<Batch> epoch_batches(const Dataset& dataset, std::size_t batch_size, Rng& rng);

// ---- per-sample magnitude store ------------------------------------------

/// Magnitudes indexed by dataset position, carried across epochs.
///
/// Checkpoint layout: "ADAMAG01", u64 N, N little-endian f64.
class MagnitudeStore {
 public:
  explicit MagnitudeStore(std::size_t n);

  std::size_t size() const { return values_.size(); }
  std::vector<double> read(std::span<const std::size_t> indices) const;
  double read(std::size_t index) const;
  void write(std::span<const std::size_t> indices, std::span<const double> values);
  std::span<const double> values() const { return values_; }
  double mean() const;

  void save(const std::filesystem::path& path) const;
  static MagnitudeStore load(const std::filesystem::path& path);
  void write_to(std::ostream& out) const;
  static MagnitudeStore read_from(std::istream& in);

 private:
  void check_index(std::size_t index) const;
  std::vector<double> values_;
};

}  // namespace adaaug::data
