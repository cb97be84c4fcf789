#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace augmix {

/// H x W x C grid of unit-interval intensities, row-major and
/// channel-interleaved: pixels[(r*width + c)*channels + ch].
///
/// Pixels stay real-valued through every transform; quantization to bytes
/// happens only at file I/O, so chained augmentations do not accumulate
/// rounding error.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> pixels;

  static Image filled(int height, int width, int channels, double value) {
    Image img;
    img.height = height;
    img.width = width;
    img.channels = channels;
    img.pixels.assign(
        static_cast<std::size_t>(height) * width * channels, value);
    return img;
  }

  static Image zeros(int height, int width, int channels) {
    return filled(height, width, channels, 0.0);
  }

  double& at(int row, int col, int channel) {
    return pixels[index(row, col, channel)];
  }

  double at(int row, int col, int channel) const {
    return pixels[index(row, col, channel)];
  }

  std::size_t index(int row, int col, int channel) const {
    return (static_cast<std::size_t>(row) * width + col) * channels + channel;
  }

  std::size_t size() const { return pixels.size(); }

  bool same_shape(const Image& other) const {
    return height == other.height && width == other.width &&
           channels == other.channels;
  }
};

inline bool image_is_valid(const Image& img) {
  if (img.height <= 0 || img.width <= 0) return false;
  if (img.channels != 1 && img.channels != 3) return false;
  const auto expected = static_cast<std::size_t>(img.height) * img.width *
                        img.channels;
  if (img.pixels.size() != expected) return false;
  for (const double p : img.pixels) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) return false;
  }
  return true;
}

inline void validate_image(const Image& img) {
  if (img.height <= 0 || img.width <= 0)
    throw std::invalid_argument("image has zero or negative dimension");
  if (img.channels != 1 && img.channels != 3)
    throw std::invalid_argument("image channel count must be 1 or 3, got " +
                                std::to_string(img.channels));
  const auto expected = static_cast<std::size_t>(img.height) * img.width *
                        img.channels;
  if (img.pixels.size() != expected)
    throw std::invalid_argument("image pixel array length " +
                                std::to_string(img.pixels.size()) +
                                " does not match shape");
  for (const double p : img.pixels) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0)
      throw std::invalid_argument(
          "image pixel out of [0,1]: " + std::to_string(p));
  }
}

/// Images with class labels in [0, num_classes). Shapes are uniform.
struct LabeledDataset {
  std::vector<Image> images;
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const { return images.size(); }
};

inline void validate_dataset(const LabeledDataset& ds) {
  if (ds.images.size() != ds.labels.size())
    throw std::invalid_argument("dataset images/labels length mismatch");
  if (ds.num_classes <= 0)
    throw std::invalid_argument("dataset num_classes must be positive");
  for (const int label : ds.labels) {
    if (label < 0 || label >= ds.num_classes)
      throw std::invalid_argument("dataset label " + std::to_string(label) +
                                  " outside [0," +
                                  std::to_string(ds.num_classes) + ")");
  }
  for (std::size_t i = 1; i < ds.images.size(); ++i) {
    if (!ds.images[i].same_shape(ds.images[0]))
      throw std::invalid_argument("dataset images have mixed shapes");
  }
}

/// Flatten to the canonical row-major, channel-interleaved feature vector.
inline std::vector<double> flatten(const Image& img) { return img.pixels; }

}  // namespace augmix
