#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "augmix/image.hpp"
#include "augmix/image_io.hpp"
#include "augmix/rng.hpp"

namespace augmix {

/// Unit-L2-norm real matrix whose spectrum is supported only at frequency
/// (freq_row, freq_col) and its conjugate mirror.
struct FourierBasis {
  int freq_row = 0;
  int freq_col = 0;
  int height = 0;
  int width = 0;
  std::vector<double> values;  // H x W, row-major

  double at(int r, int c) const {
    return values[static_cast<std::size_t>(r) * width + c];
  }
};

/// Real Fourier basis vector for frequency (i, j) on an H x W grid. The
/// canonical half of the frequency plane uses the cosine grid
/// cos(2*pi*(i*r/H + j*c/W)); mirror-half indices use the sine grid of the
/// same frequency so that all H*W basis vectors are pairwise orthogonal.
inline FourierBasis fourier_basis(int i, int j, int height, int width) {
  if (height <= 0 || width <= 0)
    throw std::invalid_argument("fourier_basis: grid dims must be positive");
  if (i < 0 || i >= height || j < 0 || j >= width)
    throw std::invalid_argument("fourier_basis: frequency index out of range");

  const int mirror_i = (height - i) % height;
  const int mirror_j = (width - j) % width;
  // Self-mirror frequencies (DC and Nyquist corners) only have the cosine
  // form; for the rest, exactly one of {(i,j), mirror} gets the cosine.
  const bool use_cosine =
      (i < mirror_i) || (i == mirror_i && j <= mirror_j);

  FourierBasis basis;
  basis.freq_row = i;
  basis.freq_col = j;
  basis.height = height;
  basis.width = width;
  basis.values.resize(static_cast<std::size_t>(height) * width);

  const double two_pi = 2.0 * 3.14159265358979323846;
  double norm_sq = 0.0;
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const double phase = two_pi * (static_cast<double>(i) * r / height +
                                     static_cast<double>(j) * c / width);
      const double v = use_cosine ? std::cos(phase) : std::sin(phase);
      basis.values[static_cast<std::size_t>(r) * width + c] = v;
      norm_sq += v * v;
    }
  }
  const double norm = std::sqrt(norm_sq);
  for (double& v : basis.values) v /= norm;
  return basis;
}

/// Add sign * epsilon * basis to every channel, clamped to [0,1].
inline Image perturb(const Image& img, const FourierBasis& basis,
                     double epsilon, int sign) {
  if (img.height != basis.height || img.width != basis.width)
    throw std::invalid_argument("perturb: basis/image dimension mismatch");
  if (sign != 1 && sign != -1)
    throw std::invalid_argument("perturb: sign must be +1 or -1");
  Image out = img;
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      const double delta = sign * epsilon * basis.at(r, c);
      for (int ch = 0; ch < img.channels; ++ch) {
        out.at(r, c, ch) = std::clamp(img.at(r, c, ch) + delta, 0.0, 1.0);
      }
    }
  }
  return out;
}

/// Grid of per-frequency error rates. When centered, cell
/// (rows/2, cols/2) is the DC frequency and distance from the center is
/// frequency magnitude.
struct SensitivityHeatmap {
  int rows = 0;
  int cols = 0;
  double epsilon = 0.0;
  bool centered = false;
  std::vector<double> grid;

  double at(int r, int c) const {
    return grid[static_cast<std::size_t>(r) * cols + c];
  }
};

/// Cyclic shift between the FFT cell layout (DC at [0,0]) and the centered
/// display layout (DC at [rows/2, cols/2]). Involutive for even dims.
inline SensitivityHeatmap fftshift(const SensitivityHeatmap& map) {
  SensitivityHeatmap out = map;
  out.centered = !map.centered;
  const int half_r = map.rows / 2;
  const int half_c = map.cols / 2;
  for (int r = 0; r < map.rows; ++r) {
    for (int c = 0; c < map.cols; ++c) {
      const int sr = (r + half_r) % map.rows;
      const int sc = (c + half_c) % map.cols;
      out.grid[static_cast<std::size_t>(sr) * map.cols + sc] = map.at(r, c);
    }
  }
  return out;
}

/// Error rate of `classify` on the dataset after perturbing every image by
/// each basis vector in an eval_rows x eval_cols frequency window around
/// DC. Cell (a, b) in the uncentered layout holds the signed frequency
/// offset (a fftwrapped, b fftwrapped) mapped onto the image grid. Each
/// image's perturbation sign comes from the per-cell substream
/// rng.child(a * eval_cols + b), so cells are independently reproducible.
inline SensitivityHeatmap sensitivity_heatmap(
    const std::function<int(const Image&)>& classify,
    const LabeledDataset& dataset, double epsilon, int eval_rows,
    int eval_cols, PhiloxRng& rng, bool center = true) {
  validate_dataset(dataset);
  if (dataset.size() == 0)
    throw std::invalid_argument("sensitivity_heatmap: empty dataset");
  if (eval_rows <= 0 || eval_cols <= 0)
    throw std::invalid_argument("sensitivity_heatmap: grid dims positive");
  const int img_h = dataset.images.front().height;
  const int img_w = dataset.images.front().width;
  if (eval_rows > img_h || eval_cols > img_w)
    throw std::invalid_argument(
        "sensitivity_heatmap: grid larger than image");

  SensitivityHeatmap map;
  map.rows = eval_rows;
  map.cols = eval_cols;
  map.epsilon = epsilon;
  map.centered = false;
  map.grid.assign(static_cast<std::size_t>(eval_rows) * eval_cols, 0.0);

  for (int a = 0; a < eval_rows; ++a) {
    // signed frequency offset of this cell, then wrapped onto [0, img dim)
    const int off_r = a < (eval_rows + 1) / 2 ? a : a - eval_rows;
    const int freq_r = ((off_r % img_h) + img_h) % img_h;
    for (int b = 0; b < eval_cols; ++b) {
      const int off_c = b < (eval_cols + 1) / 2 ? b : b - eval_cols;
      const int freq_c = ((off_c % img_w) + img_w) % img_w;
      const FourierBasis basis = fourier_basis(freq_r, freq_c, img_h, img_w);
      PhiloxRng cell_rng = rng.child(
          static_cast<std::uint64_t>(a) * eval_cols + b);
      std::size_t wrong = 0;
      for (std::size_t e = 0; e < dataset.size(); ++e) {
        const int sign = cell_rng.uniform_index(2) == 0 ? 1 : -1;
        if (classify(perturb(dataset.images[e], basis, epsilon, sign)) !=
            dataset.labels[e])
          ++wrong;
      }
      map.grid[static_cast<std::size_t>(a) * eval_cols + b] =
          static_cast<double>(wrong) / static_cast<double>(dataset.size());
    }
  }
  return center ? fftshift(map) : map;
}

/// CSV rendering: one row per heatmap row, comma-separated error rates.
inline void write_heatmap_csv(const SensitivityHeatmap& map,
                              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out.precision(17);
  for (int r = 0; r < map.rows; ++r) {
    for (int c = 0; c < map.cols; ++c) {
      if (c) out << ',';
      out << map.at(r, c);
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

/// 8-bit PGM rendering with the linear map [0,1] -> [0,255].
inline void write_heatmap_pgm(const SensitivityHeatmap& map,
                              const std::string& path) {
  Image img = Image::zeros(map.rows, map.cols, 1);
  img.pixels = map.grid;
  detail::save_pnm(img, path);
}

}  // namespace augmix
