#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "augmix/image.hpp"
#include "augmix/rng.hpp"

namespace augmix {

/// The nine augmentation primitives. The set is disjoint from the common
/// corruption benchmark: no contrast, color, brightness, sharpness, cutout,
/// noise, or blur operations.
enum class AugOpKind {
  rotate,
  shear_x,
  shear_y,
  translate_x,
  translate_y,
  posterize,
  solarize,
  equalize,
  autocontrast,
};

inline constexpr std::array<AugOpKind, 9> kOpCatalog = {
    AugOpKind::rotate,      AugOpKind::shear_x,  AugOpKind::shear_y,
    AugOpKind::translate_x, AugOpKind::translate_y, AugOpKind::posterize,
    AugOpKind::solarize,    AugOpKind::equalize, AugOpKind::autocontrast,
};

/// All nine op kinds, in the fixed catalog order above.
inline const std::array<AugOpKind, 9>& op_catalog() { return kOpCatalog; }

inline std::string_view to_string(AugOpKind kind) {
  switch (kind) {
    case AugOpKind::rotate: return "rotate";
    case AugOpKind::shear_x: return "shear_x";
    case AugOpKind::shear_y: return "shear_y";
    case AugOpKind::translate_x: return "translate_x";
    case AugOpKind::translate_y: return "translate_y";
    case AugOpKind::posterize: return "posterize";
    case AugOpKind::solarize: return "solarize";
    case AugOpKind::equalize: return "equalize";
    case AugOpKind::autocontrast: return "autocontrast";
  }
  return "unknown";
}

inline std::optional<AugOpKind> op_from_string(std::string_view name) {
  for (const AugOpKind kind : kOpCatalog) {
    if (to_string(kind) == name) return kind;
  }
  return std::nullopt;
}

/// Discrete intensity level in [1,10].
struct Severity {
  int level = 1;
};

inline void validate_severity(const Severity& s) {
  if (s.level < 1 || s.level > 10)
    throw std::invalid_argument("severity level " + std::to_string(s.level) +
                                " outside [1,10]");
}

/// Uniform severity on {1, ..., max_level}. Consumes exactly one draw.
inline Severity sample_severity(PhiloxRng& rng, int max_level) {
  if (max_level < 1 || max_level > 10)
    throw std::invalid_argument("max severity level " +
                                std::to_string(max_level) +
                                " outside [1,10]");
  return Severity{1 + static_cast<int>(
                          rng.uniform_index(static_cast<std::uint64_t>(max_level)))};
}

namespace detail {

constexpr double kFillValue = 0.5;  // mid-gray for out-of-frame samples

// Inverse-mapped affine resample with bilinear interpolation:
//   src_col = a*col + b*row + c,  src_row = d*col + e*row + f.
// Zero-magnitude transforms hit exact integer source coordinates and
// reproduce the input bit-for-bit.
inline Image affine_sample(const Image& img, double a, double b, double c,
                           double d, double e, double f) {
  Image out = Image::zeros(img.height, img.width, img.channels);
  for (int row = 0; row < img.height; ++row) {
    for (int col = 0; col < img.width; ++col) {
      const double sx = a * col + b * row + c;
      const double sy = d * col + e * row + f;
      const double fx = std::floor(sx);
      const double fy = std::floor(sy);
      const int x0 = static_cast<int>(fx);
      const int y0 = static_cast<int>(fy);
      const double wx = sx - fx;
      const double wy = sy - fy;
      for (int ch = 0; ch < img.channels; ++ch) {
        auto tap = [&](int y, int x) -> double {
          if (x < 0 || x >= img.width || y < 0 || y >= img.height)
            return kFillValue;
          return img.at(y, x, ch);
        };
        double value = (1.0 - wy) * (1.0 - wx) * tap(y0, x0);
        if (wx != 0.0) value += (1.0 - wy) * wx * tap(y0, x0 + 1);
        if (wy != 0.0) value += wy * (1.0 - wx) * tap(y0 + 1, x0);
        if (wx != 0.0 && wy != 0.0) value += wy * wx * tap(y0 + 1, x0 + 1);
        out.at(row, col, ch) = value;
      }
    }
  }
  return out;
}

}  // namespace detail

/// Rotate about the image center by `degrees` (counterclockwise positive).
inline Image rotate(const Image& img, double degrees) {
  const double rad = degrees * 3.14159265358979323846 / 180.0;
  const double cs = std::cos(rad);
  const double sn = std::sin(rad);
  const double cx = (img.width - 1) / 2.0;
  const double cy = (img.height - 1) / 2.0;
  // inverse rotation of (col-cx, row-cy)
  return detail::affine_sample(img, cs, sn, cx - cs * cx - sn * cy, -sn, cs,
                               cy + sn * cx - cs * cy);
}

/// Horizontal shear about the center row: output (row, col) samples source
/// column col + factor*(row - cy).
inline Image shear_x(const Image& img, double factor) {
  const double cy = (img.height - 1) / 2.0;
  return detail::affine_sample(img, 1.0, factor, -factor * cy, 0.0, 1.0, 0.0);
}

/// Vertical shear about the center column: output (row, col) samples source
/// row row + factor*(col - cx).
inline Image shear_y(const Image& img, double factor) {
  const double cx = (img.width - 1) / 2.0;
  return detail::affine_sample(img, 1.0, 0.0, 0.0, factor, 1.0, -factor * cx);
}

/// Shift right by `offset` pixels (may be fractional or negative).
inline Image translate_x(const Image& img, double offset) {
  return detail::affine_sample(img, 1.0, 0.0, -offset, 0.0, 1.0, 0.0);
}

/// Shift down by `offset` pixels (may be fractional or negative).
inline Image translate_y(const Image& img, double offset) {
  return detail::affine_sample(img, 1.0, 0.0, 0.0, 0.0, 1.0, -offset);
}

/// Quantize to 8 bits and keep only the top `keep_bits` bits of each byte.
/// keep_bits = 8 is the identity on 8-bit-quantized inputs.
inline Image posterize(const Image& img, int keep_bits) {
  if (keep_bits < 1 || keep_bits > 8)
    throw std::invalid_argument("posterize keep_bits outside [1,8]");
  const unsigned mask = (0xFFu << (8 - keep_bits)) & 0xFFu;
  Image out = img;
  for (double& p : out.pixels) {
    const auto byte = static_cast<unsigned>(
        std::lround(std::clamp(p, 0.0, 1.0) * 255.0));
    p = static_cast<double>(byte & mask) / 255.0;
  }
  return out;
}

/// Invert every pixel strictly above `threshold`. Threshold 1.0 is the
/// identity; threshold 0 inverts everything but exact black.
inline Image solarize(const Image& img, double threshold) {
  Image out = img;
  for (double& p : out.pixels) {
    if (p > threshold) p = 1.0 - p;
  }
  return out;
}

/// Histogram equalization per channel via the empirical value CDF:
///   out = (F(v) - F(v_min)) / (1 - F(v_min)).
/// Constant channels are left unchanged. The value-rank formulation makes a
/// second application reproduce the first bit-for-bit.
inline Image equalize(const Image& img) {
  Image out = img;
  const std::size_t n = static_cast<std::size_t>(img.height) * img.width;
  std::vector<double> sorted(n);
  for (int ch = 0; ch < img.channels; ++ch) {
    for (std::size_t p = 0; p < n; ++p)
      sorted[p] = img.pixels[p * img.channels + ch];
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() == sorted.back()) continue;  // degenerate histogram
    const double total = static_cast<double>(n);
    const auto cdf = [&](double v) {
      const auto upper = std::upper_bound(sorted.begin(), sorted.end(), v);
      return static_cast<double>(upper - sorted.begin()) / total;
    };
    const double low = cdf(sorted.front());
    const double span = 1.0 - low;
    for (std::size_t p = 0; p < n; ++p) {
      const double v = img.pixels[p * img.channels + ch];
      out.pixels[p * img.channels + ch] = (cdf(v) - low) / span;
    }
  }
  return out;
}

/// Stretch each channel linearly so its min maps to 0 and its max to 1.
/// Constant channels are left unchanged.
inline Image autocontrast(const Image& img) {
  Image out = img;
  const std::size_t n = static_cast<std::size_t>(img.height) * img.width;
  for (int ch = 0; ch < img.channels; ++ch) {
    double lo = 1.0, hi = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      const double v = img.pixels[p * img.channels + ch];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi <= lo) continue;
    const double span = hi - lo;
    for (std::size_t p = 0; p < n; ++p) {
      const double v = img.pixels[p * img.channels + ch];
      out.pixels[p * img.channels + ch] = (v - lo) / span;
    }
  }
  return out;
}

/// Severity -> physical magnitude map (AutoAugment-style ranges on unit
/// pixels): rotate up to 30 degrees, shear up to 0.3, translate up to
/// floor(dim/3) pixels, posterize keeps 8..4 bits, solarize threshold
/// 1 - level/10. equalize and autocontrast ignore severity.
inline double rotate_degrees(const Severity& s) { return 30.0 * s.level / 10.0; }
inline double shear_factor(const Severity& s) { return 0.3 * s.level / 10.0; }
inline double translate_offset(const Severity& s, int dim) {
  return std::floor(dim / 3.0) * s.level / 10.0;
}
inline int posterize_bits(const Severity& s) {
  return 8 - static_cast<int>(std::lround(4.0 * s.level / 10.0));
}
inline double solarize_threshold(const Severity& s) {
  return 1.0 - s.level / 10.0;
}

/// Apply one op at the given severity. Geometric ops consume exactly one
/// draw for the magnitude sign (+1/-1 equiprobable) before any other work;
/// the value ops consume none. Output shape equals input shape and pixels
/// stay in [0,1].
inline Image apply_op(AugOpKind kind, const Severity& severity,
                      const Image& img, PhiloxRng& rng) {
  validate_severity(severity);
  auto draw_sign = [&]() { return rng.uniform_index(2) == 0 ? 1.0 : -1.0; };
  Image out;
  switch (kind) {
    case AugOpKind::rotate:
      out = rotate(img, draw_sign() * rotate_degrees(severity));
      break;
    case AugOpKind::shear_x:
      out = shear_x(img, draw_sign() * shear_factor(severity));
      break;
    case AugOpKind::shear_y:
      out = shear_y(img, draw_sign() * shear_factor(severity));
      break;
    case AugOpKind::translate_x:
      out = translate_x(img,
                        draw_sign() * translate_offset(severity, img.width));
      break;
    case AugOpKind::translate_y:
      out = translate_y(img,
                        draw_sign() * translate_offset(severity, img.height));
      break;
    case AugOpKind::posterize:
      out = posterize(img, posterize_bits(severity));
      break;
    case AugOpKind::solarize:
      out = solarize(img, solarize_threshold(severity));
      break;
    case AugOpKind::equalize:
      out = equalize(img);
      break;
    case AugOpKind::autocontrast:
      out = autocontrast(img);
      break;
    default:
      throw std::invalid_argument("unknown op kind");
  }
  for (double& p : out.pixels) p = std::clamp(p, 0.0, 1.0);
  return out;
}

}  // namespace augmix
