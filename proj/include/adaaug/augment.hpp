#pragma once

// The 14-operation augmentation space with continuous magnitudes.
//
// A magnitude m in [0, 1] scales each operation between "no change" (m = 0)
// and its maximum strength (m = 1). Symmetric operations (rotation,
// translation, shear) additionally take a randomly drawn direction.

#include "adaaug/errors.hpp"
#include "adaaug/rng.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace adaaug::aug {

/// Pixel-space image, planar channel-major (C x H x W) layout.
struct Image {
  int channels = 1;
  int height = 1;
  int width = 1;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int c, int h, int w, std::uint8_t fill = 0);
  Image(int c, int h, int w, std::vector<std::uint8_t> px);

  std::uint8_t& at(int c, int y, int x) { return pixels[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  std::uint8_t at(int c, int y, int x) const {
    return pixels[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  bool same_shape(const Image& other) const {
    return channels == other.channels && height == other.height && width == other.width;
  }
  friend bool operator==(const Image&, const Image&) = default;
};

enum class OpKind : std::uint8_t {
  identity,
  auto_contrast,
  equalize,
  color,
  contrast,
  brightness,
  sharpness,
  rotation,
  translate_x,
  translate_y,
  shear_x,
  shear_y,
  solarize,
  posterize,
};

inline constexpr std::size_t kNumOps = 14;

struct AugmentOp {
  OpKind kind;
  std::string_view name;
  std::optional<double> s_max;
  bool symmetric;
};

/// The augmentation space in canonical order.
const std::array<AugmentOp, kNumOps>& augmentation_space();
const AugmentOp& op_info(OpKind kind);
std::optional<OpKind> op_from_name(std::string_view name);

enum class Direction : int { negative = -1, positive = 1 };

struct SampledOp {
  OpKind kind;
  Direction direction;
};

/// Kind uniform over the 14 ops, direction uniform over {+1, -1}. Always
/// consumes exactly two draws so the stream stays aligned across kinds.
SampledOp sample_operation(Rng& rng);

/// The concrete parameter an op is applied with:
///   rotation           degrees, sign * 30 * m
///   translate-x/y      whole pixels, sign * round(10 * m)
///   shear-x/y          shear coefficient, sign * 0.3 * m
///   color family       enhancement factor 1 + 0.9 * m
///   solarize           threshold 256 * (1 - m)
///   posterize          kept bits 8 - round(4 * m)
///   identity, auto-contrast, equalize   blend weight m
struct Strength {
  OpKind kind;
  double value;
};

Strength magnitude_to_strength(OpKind kind, Direction direction, double m);

/// e(m, x). Bit-identical to `image` when m == 0. Pure: no randomness.
Image apply(OpKind kind, Direction direction, double m, const Image& image);
inline Image apply(const SampledOp& op, double m, const Image& image) { return apply(op.kind, op.direction, m, image); }

}  // namespace adaaug::aug
