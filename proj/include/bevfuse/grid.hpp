#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "bevfuse/errors.hpp"

namespace bevfuse {

// Axis-aligned bird's-eye-view raster. Rows advance along +x, columns along
// +y; both extents must be integer multiples of cell_size. x covers
// [x_min, x_max) and y covers [y_min, y_max): points on the upper edges are
// out of bounds.
struct GridSpec {
  double x_min = 0.0;
  double x_max = 0.0;
  double y_min = 0.0;
  double y_max = 0.0;
  double cell_size = 1.0;
  int channels = 1;

  int rows() const {
    return static_cast<int>(std::llround((x_max - x_min) / cell_size));
  }
  int cols() const {
    return static_cast<int>(std::llround((y_max - y_min) / cell_size));
  }

  void validate() const {
    if (!(cell_size > 0.0)) throw ValidationError("cell_size must be > 0");
    if (channels < 1) throw ValidationError("channels must be >= 1");
    const double rx = (x_max - x_min) / cell_size;
    const double ry = (y_max - y_min) / cell_size;
    if (rx < 0.5 || ry < 0.5 || std::abs(rx - std::round(rx)) > 1e-9 ||
        std::abs(ry - std::round(ry)) > 1e-9) {
      throw ValidationError(
          "grid extent must be a positive integer multiple of cell_size");
    }
  }

  bool same_extent(const GridSpec& o) const {
    return x_min == o.x_min && x_max == o.x_max && y_min == o.y_min &&
           y_max == o.y_max;
  }
  bool same_raster(const GridSpec& o) const {
    return same_extent(o) && cell_size == o.cell_size;
  }
};

struct CellIndex {
  int row = 0;
  int col = 0;
  bool operator==(const CellIndex&) const = default;
};

// Half-open binning; returns nothing when (x, y) falls outside the extent.
inline std::optional<CellIndex> world_to_cell(const GridSpec& spec, double x,
                                              double y) {
  if (x < spec.x_min || x >= spec.x_max || y < spec.y_min || y >= spec.y_max) {
    return std::nullopt;
  }
  const int row = static_cast<int>(std::floor((x - spec.x_min) / spec.cell_size));
  const int col = static_cast<int>(std::floor((y - spec.y_min) / spec.cell_size));
  // Guard the x == x_max - epsilon case where division rounds up.
  const int r = std::min(row, spec.rows() - 1);
  const int c = std::min(col, spec.cols() - 1);
  return CellIndex{r, c};
}

// Center of the given cell in world coordinates.
inline std::pair<double, double> cell_to_world(const GridSpec& spec, int row,
                                               int col) {
  return {spec.x_min + (row + 0.5) * spec.cell_size,
          spec.y_min + (col + 0.5) * spec.cell_size};
}

// Dense multi-channel raster, channel-minor storage.
class BevGrid {
 public:
  explicit BevGrid(const GridSpec& spec) : spec_(spec) {
    spec_.validate();
    data_.assign(static_cast<std::size_t>(spec_.rows()) * spec_.cols() *
                     spec_.channels,
                 0.0);
  }

  const GridSpec& spec() const { return spec_; }
  int rows() const { return spec_.rows(); }
  int cols() const { return spec_.cols(); }
  int channels() const { return spec_.channels; }

  double& at(int row, int col, int ch) {
    return data_[index(row, col, ch)];
  }
  double at(int row, int col, int ch) const {
    return data_[index(row, col, ch)];
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  double channel_sum(int ch) const {
    double s = 0.0;
    for (int r = 0; r < rows(); ++r)
      for (int c = 0; c < cols(); ++c) s += at(r, c, ch);
    return s;
  }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  std::size_t index(int row, int col, int ch) const {
    return (static_cast<std::size_t>(row) * spec_.cols() +
            static_cast<std::size_t>(col)) *
               spec_.channels +
           static_cast<std::size_t>(ch);
  }

  GridSpec spec_;
  std::vector<double> data_;
};

// Resolution change by an exact factor of two. Downsampling (factor 0.5)
// averages each 2x2 block, so the sum over any region is preserved up to the
// 1/4 area weight; upsampling (factor 2) repeats each cell into a 2x2 block.
// Other factors are rejected until something needs them.
inline BevGrid resample(const BevGrid& grid, double factor) {
  const GridSpec& in = grid.spec();
  if (factor == 0.5) {
    if (in.rows() % 2 != 0 || in.cols() % 2 != 0) {
      throw IndivisibleShape("downsampling needs even row and column counts");
    }
    GridSpec out_spec = in;
    out_spec.cell_size = in.cell_size * 2.0;
    BevGrid out(out_spec);
    for (int r = 0; r < out.rows(); ++r) {
      for (int c = 0; c < out.cols(); ++c) {
        for (int ch = 0; ch < in.channels; ++ch) {
          const double s = grid.at(2 * r, 2 * c, ch) +
                           grid.at(2 * r, 2 * c + 1, ch) +
                           grid.at(2 * r + 1, 2 * c, ch) +
                           grid.at(2 * r + 1, 2 * c + 1, ch);
          out.at(r, c, ch) = 0.25 * s;
        }
      }
    }
    return out;
  }
  if (factor == 2.0) {
    GridSpec out_spec = in;
    out_spec.cell_size = in.cell_size * 0.5;
    BevGrid out(out_spec);
    for (int r = 0; r < out.rows(); ++r) {
      for (int c = 0; c < out.cols(); ++c) {
        for (int ch = 0; ch < in.channels; ++ch) {
          out.at(r, c, ch) = grid.at(r / 2, c / 2, ch);
        }
      }
    }
    return out;
  }
  throw ValidationError("resample supports factors 0.5 and 2 only");
}

}  // namespace bevfuse
