#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "bevfuse/box.hpp"
#include "bevfuse/grid.hpp"
#include "bevfuse/png.hpp"

namespace bevfuse::plot {

struct Rgb {
  std::uint8_t r, g, b;
};

// Small perceptual-ish ramp from dark blue through teal to yellow.
inline Rgb colormap(double t) {
  t = std::clamp(t, 0.0, 1.0);
  static const double stops[5][3] = {{0.05, 0.03, 0.25},
                                     {0.13, 0.30, 0.55},
                                     {0.10, 0.56, 0.55},
                                     {0.40, 0.79, 0.36},
                                     {0.99, 0.91, 0.14}};
  const double x = t * 4.0;
  const int i = std::min(static_cast<int>(x), 3);
  const double f = x - i;
  auto mix = [&](int c) {
    return static_cast<std::uint8_t>(std::lround(
        255.0 * (stops[i][c] + (stops[i + 1][c] - stops[i][c]) * f)));
  };
  return {mix(0), mix(1), mix(2)};
}

// RGB raster of one grid channel, `scale` image pixels per cell. The grid's
// +x (rows) points up in the image and +y (columns) right. Values are
// normalized by the channel max (zero channel renders as the low end).
class Canvas {
 public:
  Canvas(const GridSpec& spec, int scale)
      : spec_(spec), scale_(scale), width_(spec.cols() * scale),
        height_(spec.rows() * scale),
        pixels_(static_cast<std::size_t>(width_) * height_ * 3, 0) {}

  int width() const { return width_; }
  int height() const { return height_; }
  const std::vector<std::uint8_t>& pixels() const { return pixels_; }

  void fill_channel(const BevGrid& grid, int ch) {
    double peak = 0.0;
    for (int r = 0; r < grid.rows(); ++r)
      for (int c = 0; c < grid.cols(); ++c)
        peak = std::max(peak, grid.at(r, c, ch));
    for (int r = 0; r < grid.rows(); ++r) {
      for (int c = 0; c < grid.cols(); ++c) {
        const double t = peak > 0.0 ? grid.at(r, c, ch) / peak : 0.0;
        const Rgb rgb = colormap(t);
        for (int dy = 0; dy < scale_; ++dy) {
          for (int dx = 0; dx < scale_; ++dx) {
            set_pixel(c * scale_ + dx, (grid.rows() - 1 - r) * scale_ + dy,
                      rgb);
          }
        }
      }
    }
  }

  // Over-paints the channel-wise max across all channels.
  void fill_max(const BevGrid& grid) {
    double peak = 0.0;
    for (double v : grid.data()) peak = std::max(peak, v);
    for (int r = 0; r < grid.rows(); ++r) {
      for (int c = 0; c < grid.cols(); ++c) {
        double v = 0.0;
        for (int ch = 0; ch < grid.channels(); ++ch) {
          v = std::max(v, grid.at(r, c, ch));
        }
        const Rgb rgb = colormap(peak > 0.0 ? v / peak : 0.0);
        for (int dy = 0; dy < scale_; ++dy) {
          for (int dx = 0; dx < scale_; ++dx) {
            set_pixel(c * scale_ + dx, (grid.rows() - 1 - r) * scale_ + dy,
                      rgb);
          }
        }
      }
    }
  }

  void draw_box(const Box3D& box, Rgb color) {
    const double hw = box.size.x() / 2.0;
    const double hl = box.size.y() / 2.0;
    const double cy = std::cos(box.yaw), sy = std::sin(box.yaw);
    Eigen::Vector2d corners[4] = {{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}};
    for (auto& c : corners) {
      c = Eigen::Vector2d(box.center.x() + cy * c.x() - sy * c.y(),
                          box.center.y() + sy * c.x() + cy * c.y());
    }
    for (int e = 0; e < 4; ++e) {
      draw_segment(corners[e], corners[(e + 1) % 4], color);
    }
  }

 private:
  void set_pixel(int px, int py, Rgb color) {
    if (px < 0 || px >= width_ || py < 0 || py >= height_) return;
    const std::size_t i = (static_cast<std::size_t>(py) * width_ + px) * 3;
    pixels_[i] = color.r;
    pixels_[i + 1] = color.g;
    pixels_[i + 2] = color.b;
  }

  void draw_segment(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                    Rgb color) {
    const double len = (b - a).norm();
    const int n = std::max(2, static_cast<int>(len / spec_.cell_size *
                                               scale_ * 2.0));
    for (int i = 0; i <= n; ++i) {
      const Eigen::Vector2d p = a + (b - a) * (static_cast<double>(i) / n);
      const double col = (p.y() - spec_.y_min) / spec_.cell_size * scale_;
      const double row = (p.x() - spec_.x_min) / spec_.cell_size * scale_;
      set_pixel(static_cast<int>(col),
                height_ - 1 - static_cast<int>(row), color);
    }
  }

  GridSpec spec_;
  int scale_;
  int width_;
  int height_;
  std::vector<std::uint8_t> pixels_;
};

inline std::vector<std::uint8_t> render_heatmap_png(
    const BevGrid& grid, const std::vector<Box3D>& gts,
    const std::vector<Box3D>& dets, int scale = 4) {
  Canvas canvas(grid.spec(), scale);
  canvas.fill_max(grid);
  for (const auto& b : gts) canvas.draw_box(b, Rgb{255, 255, 255});
  for (const auto& b : dets) canvas.draw_box(b, Rgb{255, 64, 64});
  return png::encode_rgb8(canvas.width(), canvas.height(), canvas.pixels());
}

}  // namespace bevfuse::plot
