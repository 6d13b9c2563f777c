#pragma once

#include "adaaug/data.hpp"

#include <algorithm>
#include <cmath>

namespace synthetic {

/// 12x12 grayscale images of `classes` classes; class y lights pixel row
/// 2 + 2y on a dim noisy background.
inline adaaug::data::Dataset stripes(std::size_t n, int classes, std::uint64_t seed) {
  adaaug::Rng rng(seed);
  std::uniform_int_distribution<int> noise(0, 60), label(0, classes - 1);
  adaaug::data::Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = label(rng);
    adaaug::aug::Image img(1, 12, 12);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(noise(rng));
    for (int x = 0; x < 12; ++x) img.at(0, 2 + 2 * y, x) = 220;
    d.images.push_back(std::move(img));
    d.labels.push_back(y);
  }
  d.classes = classes;
  d.stats = adaaug::data::compute_stats(d.images);
  return d;
}

/// Smooth, asymmetric, colourful 3x32x32 content: ramps plus a bright off-centre blob.
inline adaaug::aug::Image test_card() {
  adaaug::aug::Image img(3, 32, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      const double blob = 120.0 * std::exp(-((x - 20.0) * (x - 20.0) + (y - 11.0) * (y - 11.0)) / 40.0);
      img.at(0, y, x) = static_cast<std::uint8_t>(std::lround(std::min(255.0, 20.0 + 4.0 * x + blob)));
      img.at(1, y, x) = static_cast<std::uint8_t>(std::lround(std::min(255.0, 30.0 + 3.0 * y + 0.5 * blob)));
      img.at(2, y, x) = static_cast<std::uint8_t>(std::lround(std::min(255.0, 200.0 - 2.0 * x - 2.0 * y + blob / 4)));
    }
  return img;
}

inline double mean_abs_deviation(const adaaug::aug::Image& a, const adaaug::aug::Image& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) acc += std::abs(int(a.pixels[i]) - int(b.pixels[i]));
  return acc / static_cast<double>(a.pixels.size());
}

}  // namespace synthetic
