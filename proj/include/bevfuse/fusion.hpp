#pragma once

#include <cmath>
#include <vector>

#include "bevfuse/errors.hpp"
#include "bevfuse/grid.hpp"
#include "bevfuse/heatmap.hpp"
#include "bevfuse/radar.hpp"

namespace bevfuse {

// Dense convolution weights, (kh, kw, c_in, c_out) layout with c_out
// fastest. Kernels must have odd spatial extent so "same" padding is
// symmetric.
struct ConvKernel {
  int kh = 1;
  int kw = 1;
  int c_in = 1;
  int c_out = 1;
  std::vector<double> weights;
  std::vector<double> bias;

  static ConvKernel zeros(int kh, int kw, int c_in, int c_out) {
    ConvKernel k;
    k.kh = kh;
    k.kw = kw;
    k.c_in = c_in;
    k.c_out = c_out;
    k.weights.assign(static_cast<std::size_t>(kh) * kw * c_in * c_out, 0.0);
    k.bias.assign(c_out, 0.0);
    k.validate();
    return k;
  }

  // 1x1 kernel copying channel i of the input to channel i of the output.
  static ConvKernel identity_1x1(int channels) {
    ConvKernel k = zeros(1, 1, channels, channels);
    for (int c = 0; c < channels; ++c) k.at(0, 0, c, c) = 1.0;
    return k;
  }

  double& at(int i, int j, int ci, int co) {
    return weights[((static_cast<std::size_t>(i) * kw + j) * c_in + ci) *
                       c_out +
                   co];
  }
  double at(int i, int j, int ci, int co) const {
    return weights[((static_cast<std::size_t>(i) * kw + j) * c_in + ci) *
                       c_out +
                   co];
  }

  void validate() const {
    if (kh < 1 || kw < 1 || kh % 2 == 0 || kw % 2 == 0) {
      throw ValidationError("kernel spatial extent must be odd and positive");
    }
    if (c_in < 1 || c_out < 1) {
      throw ValidationError("kernel channel counts must be positive");
    }
    if (weights.size() !=
            static_cast<std::size_t>(kh) * kw * c_in * c_out ||
        bias.size() != static_cast<std::size_t>(c_out)) {
      throw ShapeMismatch("kernel buffer sizes disagree with declared shape");
    }
    for (double w : weights) {
      if (!std::isfinite(w)) throw ValidationError("non-finite kernel weight");
    }
    for (double b : bias) {
      if (!std::isfinite(b)) throw ValidationError("non-finite kernel bias");
    }
  }
};

// Same-size convolution with zero padding. Output raster equals the input
// raster; channels become k.c_out.
inline BevGrid conv2d(const BevGrid& grid, const ConvKernel& k) {
  k.validate();
  if (grid.channels() != k.c_in) {
    throw ChannelMismatch("grid channels do not match kernel input channels");
  }
  GridSpec out_spec = grid.spec();
  out_spec.channels = k.c_out;
  BevGrid out(out_spec);
  const int pr = k.kh / 2;
  const int pc = k.kw / 2;
  for (int r = 0; r < grid.rows(); ++r) {
    for (int c = 0; c < grid.cols(); ++c) {
      for (int co = 0; co < k.c_out; ++co) {
        double acc = k.bias[co];
        for (int i = 0; i < k.kh; ++i) {
          const int rr = r + i - pr;
          if (rr < 0 || rr >= grid.rows()) continue;
          for (int j = 0; j < k.kw; ++j) {
            const int cc = c + j - pc;
            if (cc < 0 || cc >= grid.cols()) continue;
            for (int ci = 0; ci < k.c_in; ++ci) {
              acc += k.at(i, j, ci, co) * grid.at(rr, cc, ci);
            }
          }
        }
        out.at(r, c, co) = acc;
      }
    }
  }
  return out;
}

// First fusion stage. The image BEV grid is pooled down one octave and the
// radar grid repeated up one octave so both land on the intermediate
// resolution (image cell * 2 == radar cell / 2); the radar channels are
// stacked in front of the image channels and mixed by `k`. The two inputs
// must share their spatial extent and end up on the same raster after
// alignment.
inline BevGrid point_fusion(const BevGrid& image_bev, const BevGrid& radar_bev,
                            const ConvKernel& k) {
  const BevGrid img = resample(image_bev, 0.5);
  const BevGrid rad = resample(radar_bev, 2.0);
  if (!img.spec().same_raster(rad.spec())) {
    throw SpecMismatch("image and radar grids disagree after alignment");
  }
  if (k.c_in != rad.channels() + img.channels()) {
    throw ChannelMismatch("fusion kernel input must cover radar + image");
  }
  GridSpec cat_spec = img.spec();
  cat_spec.channels = rad.channels() + img.channels();
  BevGrid cat(cat_spec);
  for (int r = 0; r < cat.rows(); ++r) {
    for (int c = 0; c < cat.cols(); ++c) {
      for (int ch = 0; ch < rad.channels(); ++ch) {
        cat.at(r, c, ch) = rad.at(r, c, ch);
      }
      for (int ch = 0; ch < img.channels(); ++ch) {
        cat.at(r, c, rad.channels() + ch) = img.at(r, c, ch);
      }
    }
  }
  return conv2d(cat, k);
}

// Projects fused features to per-class scores in (0, 1) with a convolution
// followed by the logistic squash.
inline BevGrid predict_heatmap(const BevGrid& fused, const ConvKernel& k) {
  BevGrid out = conv2d(fused, k);
  for (double& v : out.data()) v = 1.0 / (1.0 + std::exp(-v));
  return out;
}

// Second fusion stage. Every cell takes the outer product of its predicted
// class scores (C channels) with its radar heatmap vector (6 channels),
// giving C*6 channels ordered class-major (class c, radar a -> c*6 + a),
// then a 1x1 kernel mixes back down to C refined scores.
inline BevGrid roi_fusion(const BevGrid& pf_heatmap, const BevGrid& radar_heat,
                          const ConvKernel& k1x1) {
  if (!pf_heatmap.spec().same_raster(radar_heat.spec())) {
    throw SpecMismatch("heatmaps must share one raster");
  }
  if (radar_heat.channels() != kRadarHeatmapChannels) {
    throw ChannelMismatch("radar heatmap must have 6 channels");
  }
  const int c_cls = pf_heatmap.channels();
  if (k1x1.kh != 1 || k1x1.kw != 1) {
    throw ValidationError("refinement kernel must be 1x1");
  }
  if (k1x1.c_in != c_cls * kRadarHeatmapChannels || k1x1.c_out != c_cls) {
    throw ChannelMismatch("refinement kernel must map C*6 back to C");
  }
  GridSpec prod_spec = pf_heatmap.spec();
  prod_spec.channels = c_cls * kRadarHeatmapChannels;
  BevGrid prod(prod_spec);
  for (int r = 0; r < prod.rows(); ++r) {
    for (int c = 0; c < prod.cols(); ++c) {
      for (int ci = 0; ci < c_cls; ++ci) {
        for (int a = 0; a < kRadarHeatmapChannels; ++a) {
          prod.at(r, c, ci * kRadarHeatmapChannels + a) =
              pf_heatmap.at(r, c, ci) * radar_heat.at(r, c, a);
        }
      }
    }
  }
  return conv2d(prod, k1x1);
}

}  // namespace bevfuse
