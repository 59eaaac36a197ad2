#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Core>

namespace cvl {

/// Dense row-major, channel-last grid of float32 values.
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, int channels, float fill = 0.0f)
      : height_(height), width_(width), channels_(channels),
        data_(static_cast<std::size_t>(height) * width * channels, fill) {
    assert(height >= 0 && width >= 0 && channels >= 0);
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t size() const noexcept { return data_.size(); }

  float& at(int row, int col, int ch = 0) { return data_[index(row, col, ch)]; }
  float at(int row, int col, int ch = 0) const { return data_[index(row, col, ch)]; }

  std::vector<float>& data() noexcept { return data_; }
  const std::vector<float>& data() const noexcept { return data_; }

  bool same_shape(const Grid& o) const {
    return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
  }
  bool operator==(const Grid&) const = default;

 private:
  std::size_t index(int row, int col, int ch) const {
    assert(row >= 0 && row < height_ && col >= 0 && col < width_ && ch >= 0 && ch < channels_);
    return (static_cast<std::size_t>(row) * width_ + col) * channels_ + ch;
  }

  int height_ = 0, width_ = 0, channels_ = 0;
  std::vector<float> data_;
};

/// Bilinear cell footprint of a continuous point; grid value (row i, col j)
/// sits at continuous coordinate (u=j, v=i).
struct BilinearCell {
  int col = 0, row = 0;
  double fu = 0.0, fv = 0.0;
  bool in_bounds = false;
};

inline BilinearCell locate_cell(int height, int width, double u, double v) {
  BilinearCell c;
  if (!(u >= 0.0 && v >= 0.0 && u <= width - 1 && v <= height - 1)) return c;
  if (width < 2 && u != 0.0) return c;
  if (height < 2 && v != 0.0) return c;
  // The last row/column is reached from the cell before it with fraction 1.
  c.col = std::min(static_cast<int>(std::floor(u)), std::max(width - 2, 0));
  c.row = std::min(static_cast<int>(std::floor(v)), std::max(height - 2, 0));
  c.fu = u - c.col;
  c.fv = v - c.row;
  c.in_bounds = true;
  return c;
}

struct LookupResult {
  Eigen::VectorXd value;
  bool in_bounds = false;
};

struct GradientResult {
  Eigen::Matrix2Xd gradient;  // row 0: d/du, row 1: d/dv; one column per channel
  bool in_bounds = false;
};

namespace detail {
inline float corner(const Grid& g, const BilinearCell& c, int dr, int dc, int ch) {
  const int r = std::min(c.row + dr, g.height() - 1);
  const int col = std::min(c.col + dc, g.width() - 1);
  return g.at(r, col, ch);
}
}  // namespace detail

inline LookupResult bilinear_lookup(const Grid& map, const Eigen::Vector2d& point) {
  LookupResult out;
  out.value = Eigen::VectorXd::Zero(map.channels());
  const BilinearCell c = locate_cell(map.height(), map.width(), point.x(), point.y());
  if (!c.in_bounds) return out;
  out.in_bounds = true;
  for (int ch = 0; ch < map.channels(); ++ch) {
    const double f00 = detail::corner(map, c, 0, 0, ch), f01 = detail::corner(map, c, 0, 1, ch);
    const double f10 = detail::corner(map, c, 1, 0, ch), f11 = detail::corner(map, c, 1, 1, ch);
    out.value[ch] = (1 - c.fv) * ((1 - c.fu) * f00 + c.fu * f01) +
                    c.fv * ((1 - c.fu) * f10 + c.fu * f11);
  }
  return out;
}

/// Scalar lookup of channel `ch`; returns 0 out of bounds.
inline double bilinear_scalar(const Grid& map, const Eigen::Vector2d& point, int ch = 0,
                              bool* in_bounds = nullptr) {
  const BilinearCell c = locate_cell(map.height(), map.width(), point.x(), point.y());
  if (in_bounds) *in_bounds = c.in_bounds;
  if (!c.in_bounds) return 0.0;
  const double f00 = detail::corner(map, c, 0, 0, ch), f01 = detail::corner(map, c, 0, 1, ch);
  const double f10 = detail::corner(map, c, 1, 0, ch), f11 = detail::corner(map, c, 1, 1, ch);
  return (1 - c.fv) * ((1 - c.fu) * f00 + c.fu * f01) + c.fv * ((1 - c.fu) * f10 + c.fu * f11);
}

/// Analytic derivative of the bilinear surface.
inline GradientResult spatial_gradient(const Grid& map, const Eigen::Vector2d& point) {
  GradientResult out;
  out.gradient = Eigen::Matrix2Xd::Zero(2, map.channels());
  const BilinearCell c = locate_cell(map.height(), map.width(), point.x(), point.y());
  if (!c.in_bounds) return out;
  out.in_bounds = true;
  for (int ch = 0; ch < map.channels(); ++ch) {
    const double f00 = detail::corner(map, c, 0, 0, ch), f01 = detail::corner(map, c, 0, 1, ch);
    const double f10 = detail::corner(map, c, 1, 0, ch), f11 = detail::corner(map, c, 1, 1, ch);
    out.gradient(0, ch) = (1 - c.fv) * (f01 - f00) + c.fv * (f11 - f10);
    out.gradient(1, ch) = (1 - c.fu) * (f10 - f00) + c.fu * (f11 - f01);
  }
  return out;
}

/// Maps a finest-level coordinate onto a level downsampled by `scale` (0.5 per
/// halving), keeping pixel centers aligned with the average-pooling footprint.
inline Eigen::Vector2d to_level(const Eigen::Vector2d& p, double scale) {
  return (p.array() + 0.5) * scale - 0.5;
}

/// Inverse of to_level.
inline Eigen::Vector2d from_level(const Eigen::Vector2d& p, double scale) {
  return (p.array() + 0.5) / scale - 0.5;
}

/// 2x2 average pooling; odd trailing rows/columns are dropped.
inline Grid avg_pool2(const Grid& in) {
  Grid out(in.height() / 2, in.width() / 2, in.channels());
  for (int r = 0; r < out.height(); ++r)
    for (int c = 0; c < out.width(); ++c)
      for (int ch = 0; ch < in.channels(); ++ch)
        out.at(r, c, ch) = 0.25f * (in.at(2 * r, 2 * c, ch) + in.at(2 * r, 2 * c + 1, ch) +
                                    in.at(2 * r + 1, 2 * c, ch) + in.at(2 * r + 1, 2 * c + 1, ch));
  return out;
}

/// Min-max normalization of a single-channel grid; a constant grid maps to 0.5.
inline Grid minmax_normalize(const Grid& in) {
  Grid out(in.height(), in.width(), in.channels());
  if (in.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(in.data().begin(), in.data().end());
  const double lo = *lo_it, hi = *hi_it;
  for (std::size_t i = 0; i < in.size(); ++i)
    out.data()[i] = hi > lo ? static_cast<float>((in.data()[i] - lo) / (hi - lo)) : 0.5f;
  return out;
}

/// Bilinear resize with aligned pixel centers; samples clamp to the border.
inline Grid resize_bilinear(const Grid& in, int height, int width) {
  Grid out(height, width, in.channels());
  const double sv = static_cast<double>(in.height()) / height;
  const double su = static_cast<double>(in.width()) / width;
  for (int r = 0; r < height; ++r) {
    const double v = std::clamp((r + 0.5) * sv - 0.5, 0.0, in.height() - 1.0);
    for (int c = 0; c < width; ++c) {
      const double u = std::clamp((c + 0.5) * su - 0.5, 0.0, in.width() - 1.0);
      for (int ch = 0; ch < in.channels(); ++ch)
        out.at(r, c, ch) = static_cast<float>(bilinear_scalar(in, {u, v}, ch));
    }
  }
  return out;
}

}  // namespace cvl
