#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "cvl/embedding.hpp"
#include "cvl/grid.hpp"

namespace cvl {

struct PyramidLevel {
  Grid features;         // h x w x c
  Grid view_consistent;  // h x w x 1, V
  Grid on_ground;        // h x w x 1, O

  int height() const { return features.height(); }
  int width() const { return features.width(); }
  int channels() const { return features.channels(); }
  bool operator==(const PyramidLevel&) const = default;
};

/// Levels ordered coarse -> fine. Each level halves the resolution of the next.
struct FeaturePyramid {
  std::vector<PyramidLevel> levels;

  int size() const { return static_cast<int>(levels.size()); }
  const PyramidLevel& level(int l) const { return levels.at(l); }
  const PyramidLevel& finest() const { return levels.back(); }

  /// Coordinate scale of level `l` relative to the finest level.
  double scale(int l) const { return std::ldexp(1.0, l - (size() - 1)); }

  void validate() const {
    if (levels.empty()) throw ConfigError("pyramid: no levels");
    for (int l = 0; l < size(); ++l) {
      const PyramidLevel& lv = levels[l];
      if (lv.height() <= 0 || lv.width() <= 0 || lv.channels() <= 0)
        throw ConfigError("pyramid: empty level");
      if (lv.view_consistent.height() != lv.height() || lv.view_consistent.width() != lv.width() ||
          lv.view_consistent.channels() != 1 || !lv.on_ground.same_shape(lv.view_consistent))
        throw ConfigError("pyramid: confidence maps do not match the feature grid");
      if (l > 0 && (lv.height() <= levels[l - 1].height() || lv.width() <= levels[l - 1].width()))
        throw ConfigError("pyramid: level sizes must increase from coarse to fine");
      for (const Grid* g : {&lv.view_consistent, &lv.on_ground})
        for (float x : g->data())
          if (!(x >= 0.0f && x <= 1.0f)) throw ConfigError("pyramid: confidence outside [0,1]");
    }
  }

  bool operator==(const FeaturePyramid&) const = default;
};

/// V (x) O for one level.
inline Grid confidence_product(const PyramidLevel& level) {
  Grid out(level.height(), level.width(), 1);
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] = level.view_consistent.data()[i] * level.on_ground.data()[i];
  return out;
}

// Channel layout of the toy extractor's feature maps.
inline constexpr int kToyIntensity = 0;
inline constexpr int kToyGradU = 1;
inline constexpr int kToyGradV = 2;
inline constexpr int kToyGradMag = 3;
inline constexpr int kToyAppearanceChannels = 4;
inline constexpr int kToyChannels = kToyAppearanceChannels + 3;

namespace detail {

inline Grid to_intensity(const Grid& image, bool normalize) {
  Grid gray(image.height(), image.width(), 1);
  for (int r = 0; r < image.height(); ++r)
    for (int c = 0; c < image.width(); ++c) {
      double s = 0.0;
      for (int k = 0; k < image.channels(); ++k) s += image.at(r, c, k);
      gray.at(r, c) = static_cast<float>(s / image.channels());
    }
  if (!normalize) return gray;
  const auto [lo, hi] = std::minmax_element(gray.data().begin(), gray.data().end());
  const float min = *lo, range = *hi - *lo;
  for (float& x : gray.data()) x = range > 0.0f ? (x - min) / range : 0.0f;
  return gray;
}

inline float central_diff(const Grid& g, int r, int c, bool along_u) {
  const int n = along_u ? g.width() : g.height();
  const int i = along_u ? c : r;
  if (n < 2) return 0.0f;
  const int lo = std::max(i - 1, 0), hi = std::min(i + 1, n - 1);
  const float a = along_u ? g.at(r, lo) : g.at(lo, c);
  const float b = along_u ? g.at(r, hi) : g.at(hi, c);
  return (b - a) / static_cast<float>(hi - lo);
}

inline PyramidLevel toy_level(const Grid& intensity, const Grid& embedding, const Grid* mask) {
  PyramidLevel lv;
  const int h = intensity.height(), w = intensity.width();
  lv.features = Grid(h, w, kToyAppearanceChannels + embedding.channels());
  Grid magnitude(h, w, 1);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const float gu = central_diff(intensity, r, c, true);
      const float gv = central_diff(intensity, r, c, false);
      const float gm = std::sqrt(gu * gu + gv * gv);
      lv.features.at(r, c, kToyIntensity) = intensity.at(r, c);
      lv.features.at(r, c, kToyGradU) = gu;
      lv.features.at(r, c, kToyGradV) = gv;
      lv.features.at(r, c, kToyGradMag) = gm;
      for (int k = 0; k < embedding.channels(); ++k)
        lv.features.at(r, c, kToyAppearanceChannels + k) = embedding.at(r, c, k);
      magnitude.at(r, c) = gm;
    }
  lv.view_consistent = minmax_normalize(magnitude);
  lv.on_ground = mask ? *mask : Grid(h, w, 1, 1.0f);
  return lv;
}

}  // namespace detail

struct ToyExtractOptions {
  // Min-max normalize intensity per image.
  bool normalize_intensity = true;
};

/// Deterministic hand-crafted stand-in for a learned feature/confidence
/// extractor. `on_ground_mask`, when given, becomes O (pooled per level).
inline FeaturePyramid toy_extract(const Grid& image, const EmbeddingMap& embedding, int levels,
                                  const std::optional<Grid>& on_ground_mask = std::nullopt,
                                  const ToyExtractOptions& options = {}) {
  if (image.empty()) throw std::invalid_argument("toy_extract: empty image");
  if (levels < 1) throw std::invalid_argument("toy_extract: need at least one level");
  if (embedding.height() != image.height() || embedding.width() != image.width())
    throw std::invalid_argument("toy_extract: embedding size differs from image size");
  if (on_ground_mask && (on_ground_mask->height() != image.height() ||
                         on_ground_mask->width() != image.width() || on_ground_mask->channels() != 1))
    throw std::invalid_argument("toy_extract: mask size differs from image size");
  if ((image.height() >> (levels - 1)) < 1 || (image.width() >> (levels - 1)) < 1)
    throw std::invalid_argument("toy_extract: image too small for the requested level count");

  Grid intensity = detail::to_intensity(image, options.normalize_intensity);
  Grid emb = embedding;
  std::optional<Grid> mask = on_ground_mask;

  FeaturePyramid pyr;
  pyr.levels.resize(levels);
  for (int l = levels - 1; l >= 0; --l) {
    pyr.levels[l] = detail::toy_level(intensity, emb, mask ? &*mask : nullptr);
    if (l > 0) {
      intensity = avg_pool2(intensity);
      emb = avg_pool2(emb);
      if (mask) mask = avg_pool2(*mask);
    }
  }
  return pyr;
}

}  // namespace cvl
