#include "adaaug/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace adaaug::aug {

namespace {

constexpr std::array<AugmentOp, kNumOps> kSpace{{
    {OpKind::identity, "identity", std::nullopt, false},
    {OpKind::auto_contrast, "auto-contrast", std::nullopt, false},
    {OpKind::equalize, "equalize", std::nullopt, false},
    {OpKind::color, "color", 1.9, false},
    {OpKind::contrast, "contrast", 1.9, false},
    {OpKind::brightness, "brightness", 1.9, false},
    {OpKind::sharpness, "sharpness", 1.9, false},
    {OpKind::rotation, "rotation", 30.0, true},
    {OpKind::translate_x, "translate-x", 10.0, true},
    {OpKind::translate_y, "translate-y", 10.0, true},
    {OpKind::shear_x, "shear-x", 0.3, true},
    {OpKind::shear_y, "shear-y", 0.3, true},
    {OpKind::solarize, "solarize", 256.0, false},
    {OpKind::posterize, "posterize", 4.0, false},
}};

std::uint8_t clamp_round(double v) {
  if (!(v > 0.0)) return 0;
  if (v >= 255.0) return 255;
  return static_cast<std::uint8_t>(std::lround(v));
}

// ITU-R 601-2 luma with the integer rounding PIL uses for RGB -> L.
std::vector<std::uint8_t> luma(const Image& img) {
  std::vector<std::uint8_t> out(img.plane());
  if (img.channels < 3) {
    std::copy_n(img.pixels.begin(), img.plane(), out.begin());
    return out;
  }
  const std::size_t n = img.plane();
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t r = img.pixels[i], g = img.pixels[n + i], b = img.pixels[2 * n + i];
    out[i] = static_cast<std::uint8_t>((r * 19595 + g * 38470 + b * 7471 + 0x8000) >> 16);
  }
  return out;
}

// out = degenerate + factor * (img - degenerate)
Image enhance(const Image& img, const Image& degenerate, double factor) {
  Image out = img;
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const double d = degenerate.pixels[i];
    out.pixels[i] = clamp_round(d + factor * (static_cast<double>(img.pixels[i]) - d));
  }
  return out;
}

// round(x + w * (t - x)); exact identity at w = 0.
Image blend_toward(const Image& img, const Image& target, double weight) {
  Image out = img;
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const double x = img.pixels[i];
    out.pixels[i] = clamp_round(x + weight * (static_cast<double>(target.pixels[i]) - x));
  }
  return out;
}

Image auto_contrast_full(const Image& img) {
  Image out = img;
  const std::size_t n = img.plane();
  for (int c = 0; c < img.channels; ++c) {
    auto first = img.pixels.begin() + static_cast<std::ptrdiff_t>(c * n);
    const auto [lo_it, hi_it] = std::minmax_element(first, first + static_cast<std::ptrdiff_t>(n));
    const int lo = *lo_it, hi = *hi_it;
    if (hi <= lo) continue;
    const double scale = 255.0 / (hi - lo);
    const double offset = -lo * scale;
    for (std::size_t i = 0; i < n; ++i) {
      const int v = static_cast<int>(img.pixels[c * n + i] * scale + offset);
      out.pixels[c * n + i] = static_cast<std::uint8_t>(std::clamp(v, 0, 255));
    }
  }
  return out;
}

// Histogram equalization per channel, same lookup construction as PIL's ImageOps.equalize.
Image equalize_full(const Image& img) {
  Image out = img;
  const std::size_t n = img.plane();
  for (int c = 0; c < img.channels; ++c) {
    std::array<std::size_t, 256> hist{};
    for (std::size_t i = 0; i < n; ++i) ++hist[img.pixels[c * n + i]];
    std::size_t last_nonzero = 0, nonzero = 0;
    for (std::size_t v = 0; v < 256; ++v) {
      if (hist[v]) {
        last_nonzero = hist[v];
        ++nonzero;
      }
    }
    if (nonzero <= 1) continue;
    const std::size_t step = (n - last_nonzero) / 255;
    if (step == 0) continue;
    std::array<std::uint8_t, 256> lut{};
    std::size_t acc = step / 2;
    for (std::size_t v = 0; v < 256; ++v) {
      lut[v] = static_cast<std::uint8_t>(std::min<std::size_t>(acc / step, 255));
      acc += hist[v];
    }
    for (std::size_t i = 0; i < n; ++i) out.pixels[c * n + i] = lut[img.pixels[c * n + i]];
  }
  return out;
}

Image grayscale_degenerate(const Image& img) {
  Image out = img;
  const auto l = luma(img);
  for (int c = 0; c < img.channels; ++c) std::copy(l.begin(), l.end(), out.pixels.begin() + c * img.plane());
  return out;
}

Image mean_degenerate(const Image& img) {
  const auto l = luma(img);
  double total = 0.0;
  for (auto v : l) total += v;
  const auto mean = static_cast<std::uint8_t>(static_cast<int>(total / static_cast<double>(l.size()) + 0.5));
  return Image(img.channels, img.height, img.width, mean);
}

// 3x3 smoothing kernel [[1,1,1],[1,5,1],[1,1,1]] / 13; border pixels are kept.
Image smooth_degenerate(const Image& img) {
  Image out = img;
  for (int c = 0; c < img.channels; ++c)
    for (int y = 1; y + 1 < img.height; ++y)
      for (int x = 1; x + 1 < img.width; ++x) {
        int acc = 4 * img.at(c, y, x);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) acc += img.at(c, y + dy, x + dx);
        out.at(c, y, x) = clamp_round(acc / 13.0);
      }
  return out;
}

// Inverse-mapped affine warp about the image center with bilinear sampling.
// Samples falling outside the source contribute zero.
// Source coordinate: (a*dx + b*dy + cx + tx, c*dx + d*dy + cy + ty), with (dx, dy) the offset from center.
struct InverseAffine {
  double a, b, c, d, tx, ty;
};

Image warp(const Image& img, const InverseAffine& t) {
  Image out(img.channels, img.height, img.width, 0);
  const double cx = (img.width - 1) / 2.0, cy = (img.height - 1) / 2.0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const double dx = x - cx, dy = y - cy;
      const double sx = t.a * dx + t.b * dy + cx + t.tx;
      const double sy = t.c * dx + t.d * dy + cy + t.ty;
      const double fx0 = std::floor(sx), fy0 = std::floor(sy);
      const double wx = sx - fx0, wy = sy - fy0;
      const int x0 = static_cast<int>(fx0), y0 = static_cast<int>(fy0);
      for (int ch = 0; ch < img.channels; ++ch) {
        auto px = [&](int yy, int xx) -> double {
          if (xx < 0 || yy < 0 || xx >= img.width || yy >= img.height) return 0.0;
          return img.at(ch, yy, xx);
        };
        double v = (1 - wy) * ((1 - wx) * px(y0, x0) + wx * px(y0, x0 + 1));
        if (wy != 0.0) v += wy * ((1 - wx) * px(y0 + 1, x0) + wx * px(y0 + 1, x0 + 1));
        out.at(ch, y, x) = clamp_round(v);
      }
    }
  return out;
}

void check_magnitude(double m) {
  if (!(m >= 0.0 && m <= 1.0)) throw ContractError("augmentation magnitude " + std::to_string(m) + " outside [0, 1]");
}

double sign_of(Direction d) { return d == Direction::negative ? -1.0 : 1.0; }

}  // namespace

Image::Image(int c, int h, int w, std::uint8_t fill) : channels(c), height(h), width(w) {
  if (c <= 0 || h <= 0 || w <= 0) throw DimensionError("image extents must be positive");
  pixels.assign(static_cast<std::size_t>(c) * h * w, fill);
}

Image::Image(int c, int h, int w, std::vector<std::uint8_t> px) : channels(c), height(h), width(w), pixels(std::move(px)) {
  if (c <= 0 || h <= 0 || w <= 0) throw DimensionError("image extents must be positive");
  if (pixels.size() != static_cast<std::size_t>(c) * h * w) {
    throw DimensionError("image pixel buffer holds " + std::to_string(pixels.size()) + " values, expected " +
                         std::to_string(static_cast<std::size_t>(c) * h * w));
  }
}

const std::array<AugmentOp, kNumOps>& augmentation_space() { return kSpace; }

const AugmentOp& op_info(OpKind kind) { return kSpace[static_cast<std::size_t>(kind)]; }

std::optional<OpKind> op_from_name(std::string_view name) {
  for (const auto& op : kSpace)
    if (op.name == name) return op.kind;
  return std::nullopt;
}

SampledOp sample_operation(Rng& rng) {
  std::uniform_int_distribution<int> kind(0, static_cast<int>(kNumOps) - 1);
  std::uniform_int_distribution<int> coin(0, 1);
  const auto k = static_cast<OpKind>(kind(rng));
  const auto d = coin(rng) == 0 ? Direction::positive : Direction::negative;
  return {k, d};
}

Strength magnitude_to_strength(OpKind kind, Direction direction, double m) {
  check_magnitude(m);
  const double s = sign_of(direction);
  switch (kind) {
    case OpKind::rotation:
    case OpKind::shear_x:
    case OpKind::shear_y:
      return {kind, s * *op_info(kind).s_max * m};
    case OpKind::translate_x:
    case OpKind::translate_y:
      return {kind, s * std::round(*op_info(kind).s_max * m)};
    case OpKind::color:
    case OpKind::contrast:
    case OpKind::brightness:
    case OpKind::sharpness:
      return {kind, 1.0 + (*op_info(kind).s_max - 1.0) * m};
    case OpKind::solarize:
      return {kind, 256.0 * (1.0 - m)};
    case OpKind::posterize:
      return {kind, 8.0 - std::round(4.0 * m)};
    case OpKind::identity:
    case OpKind::auto_contrast:
    case OpKind::equalize:
      return {kind, m};
  }
  return {kind, m};
}

Image apply(OpKind kind, Direction direction, double m, const Image& image) {
  const Strength st = magnitude_to_strength(kind, direction, m);
  if (m == 0.0 || kind == OpKind::identity) return image;

  switch (kind) {
    case OpKind::identity:
      return image;
    case OpKind::auto_contrast:
      return blend_toward(image, auto_contrast_full(image), st.value);
    case OpKind::equalize:
      return blend_toward(image, equalize_full(image), st.value);
    case OpKind::color:
      return enhance(image, grayscale_degenerate(image), st.value);
    case OpKind::contrast:
      return enhance(image, mean_degenerate(image), st.value);
    case OpKind::brightness:
      return enhance(image, Image(image.channels, image.height, image.width, 0), st.value);
    case OpKind::sharpness:
      return enhance(image, smooth_degenerate(image), st.value);
    case OpKind::rotation: {
      const double rad = st.value * std::numbers::pi / 180.0;
      const double c = std::cos(rad), s = std::sin(rad);
      return warp(image, {c, s, -s, c, 0.0, 0.0});
    }
    case OpKind::translate_x:
      if (st.value == 0.0) return image;
      return warp(image, {1.0, 0.0, 0.0, 1.0, -st.value, 0.0});
    case OpKind::translate_y:
      if (st.value == 0.0) return image;
      return warp(image, {1.0, 0.0, 0.0, 1.0, 0.0, -st.value});
    case OpKind::shear_x:
      return warp(image, {1.0, st.value, 0.0, 1.0, 0.0, 0.0});
    case OpKind::shear_y:
      return warp(image, {1.0, 0.0, st.value, 1.0, 0.0, 0.0});
    case OpKind::solarize: {
      Image out = image;
      for (auto& p : out.pixels)
        if (static_cast<double>(p) >= st.value) p = static_cast<std::uint8_t>(255 - p);
      return out;
    }
    case OpKind::posterize: {
      const int bits = static_cast<int>(st.value);
      const auto mask = static_cast<std::uint8_t>(~((1u << (8 - bits)) - 1u));
      Image out = image;
      for (auto& p : out.pixels) p &= mask;
      return out;
    }
  }
  return image;
}

}  // namespace adaaug::aug
