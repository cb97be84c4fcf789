#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <png.h>

#include "augmix/image.hpp"

namespace augmix {

namespace detail {

inline std::vector<unsigned char> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::vector<unsigned char> bytes(
      (std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

struct PngReadCloser {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::FILE* fp = nullptr;
  ~PngReadCloser() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (fp) std::fclose(fp);
  }
};

inline Image load_png(const std::string& path) {
  PngReadCloser ctx;
  ctx.fp = std::fopen(path.c_str(), "rb");
  if (!ctx.fp) throw std::runtime_error("cannot open file: " + path);
  ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                   nullptr);
  if (!ctx.png) throw std::runtime_error("libpng init failed");
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.info) throw std::runtime_error("libpng init failed");
  if (setjmp(png_jmpbuf(ctx.png)))
    throw std::runtime_error("failed to decode PNG: " + path);

  png_init_io(ctx.png, ctx.fp);
  png_read_info(ctx.png, ctx.info);

  png_uint_32 width = 0, height = 0;
  int bit_depth = 0, color_type = 0;
  png_get_IHDR(ctx.png, ctx.info, &width, &height, &bit_depth, &color_type,
               nullptr, nullptr, nullptr);
  if (width == 0 || height == 0)
    throw std::runtime_error("zero-dimension PNG: " + path);

  // Normalize to 8- or 16-bit gray/RGB samples without alpha.
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(ctx.png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
    png_set_expand_gray_1_2_4_to_8(ctx.png);
  if (png_get_valid(ctx.png, ctx.info, PNG_INFO_tRNS))
    png_set_tRNS_to_alpha(ctx.png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(ctx.png);
  if (color_type == PNG_COLOR_TYPE_PALETTE && bit_depth < 8 &&
      png_get_valid(ctx.png, ctx.info, PNG_INFO_tRNS))
    png_set_strip_alpha(ctx.png);
  png_read_update_info(ctx.png, ctx.info);

  const int channels = png_get_channels(ctx.png, ctx.info);
  bit_depth = png_get_bit_depth(ctx.png, ctx.info);
  if (channels != 1 && channels != 3)
    throw std::runtime_error("unsupported PNG channel layout in " + path);
  if (bit_depth != 8 && bit_depth != 16)
    throw std::runtime_error("unsupported PNG bit depth in " + path);

  const std::size_t row_bytes = png_get_rowbytes(ctx.png, ctx.info);
  std::vector<unsigned char> data(row_bytes * height);
  std::vector<png_bytep> rows(height);
  for (png_uint_32 r = 0; r < height; ++r) rows[r] = data.data() + r * row_bytes;
  png_read_image(ctx.png, rows.data());
  png_read_end(ctx.png, nullptr);

  Image img = Image::zeros(static_cast<int>(height), static_cast<int>(width),
                           channels);
  const double max_value = bit_depth == 8 ? 255.0 : 65535.0;
  std::size_t out = 0;
  for (png_uint_32 r = 0; r < height; ++r) {
    const unsigned char* row = data.data() + r * row_bytes;
    const std::size_t samples = static_cast<std::size_t>(width) * channels;
    for (std::size_t s = 0; s < samples; ++s) {
      std::uint32_t v;
      if (bit_depth == 8) {
        v = row[s];
      } else {
        v = (static_cast<std::uint32_t>(row[2 * s]) << 8) | row[2 * s + 1];
      }
      img.pixels[out++] = static_cast<double>(v) / max_value;
    }
  }
  return img;
}

struct PngWriteCloser {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::FILE* fp = nullptr;
  ~PngWriteCloser() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    if (fp) std::fclose(fp);
  }
};

inline void save_png(const Image& img, const std::string& path) {
  PngWriteCloser ctx;
  ctx.fp = std::fopen(path.c_str(), "wb");
  if (!ctx.fp) throw std::runtime_error("cannot write file: " + path);
  ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                    nullptr);
  if (!ctx.png) throw std::runtime_error("libpng init failed");
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.info) throw std::runtime_error("libpng init failed");
  if (setjmp(png_jmpbuf(ctx.png)))
    throw std::runtime_error("failed to encode PNG: " + path);

  png_init_io(ctx.png, ctx.fp);
  const int color_type =
      img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(ctx.png, ctx.info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(ctx.png, ctx.info);

  const std::size_t row_samples =
      static_cast<std::size_t>(img.width) * img.channels;
  std::vector<unsigned char> row(row_samples);
  for (int r = 0; r < img.height; ++r) {
    for (std::size_t s = 0; s < row_samples; ++s) {
      const double p = img.pixels[static_cast<std::size_t>(r) * row_samples + s];
      row[s] = static_cast<unsigned char>(
          std::lround(std::clamp(p, 0.0, 1.0) * 255.0));
    }
    png_write_row(ctx.png, row.data());
  }
  png_write_end(ctx.png, nullptr);
}

// Binary PGM (P5) / PPM (P6), maxval up to 65535.
inline Image load_pnm(const std::vector<unsigned char>& bytes,
                      const std::string& path) {
  std::size_t pos = 0;
  auto peek = [&]() -> int {
    return pos < bytes.size() ? static_cast<int>(bytes[pos]) : -1;
  };
  auto skip_space_and_comments = [&]() {
    for (;;) {
      while (pos < bytes.size() && std::isspace(peek())) ++pos;
      if (peek() == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        return;
      }
    }
  };
  auto read_int = [&]() -> long {
    skip_space_and_comments();
    if (pos >= bytes.size() || !std::isdigit(peek()))
      throw std::runtime_error("malformed PNM header in " + path);
    long value = 0;
    while (pos < bytes.size() && std::isdigit(peek())) {
      value = value * 10 + (bytes[pos] - '0');
      ++pos;
    }
    return value;
  };

  if (bytes.size() < 2 || bytes[0] != 'P' ||
      (bytes[1] != '5' && bytes[1] != '6'))
    throw std::runtime_error("unsupported format: " + path);
  const int channels = bytes[1] == '5' ? 1 : 3;
  pos = 2;
  const long width = read_int();
  const long height = read_int();
  const long maxval = read_int();
  if (width <= 0 || height <= 0)
    throw std::runtime_error("zero-dimension PNM: " + path);
  if (maxval <= 0 || maxval > 65535)
    throw std::runtime_error("PNM maxval out of range in " + path);
  ++pos;  // single whitespace after maxval

  const int bytes_per_sample = maxval < 256 ? 1 : 2;
  const std::size_t samples =
      static_cast<std::size_t>(width) * height * channels;
  if (bytes.size() - pos < samples * bytes_per_sample)
    throw std::runtime_error("truncated PNM data in " + path);

  Image img = Image::zeros(static_cast<int>(height), static_cast<int>(width),
                           channels);
  for (std::size_t s = 0; s < samples; ++s) {
    std::uint32_t v;
    if (bytes_per_sample == 1) {
      v = bytes[pos + s];
    } else {
      v = (static_cast<std::uint32_t>(bytes[pos + 2 * s]) << 8) |
          bytes[pos + 2 * s + 1];
    }
    img.pixels[s] = static_cast<double>(std::min<std::uint32_t>(
                        v, static_cast<std::uint32_t>(maxval))) /
                    static_cast<double>(maxval);
  }
  return img;
}

inline void save_pnm(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << (img.channels == 1 ? "P5" : "P6") << "\n"
      << img.width << " " << img.height << "\n255\n";
  for (const double p : img.pixels) {
    const auto b = static_cast<unsigned char>(
        std::lround(std::clamp(p, 0.0, 1.0) * 255.0));
    out.put(static_cast<char>(b));
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace detail

/// Channel coercion: gray -> RGB by replication, RGB -> gray by Rec.601
/// luma (0.299, 0.587, 0.114).
inline Image convert_channels(const Image& img, int target_channels) {
  if (target_channels != 1 && target_channels != 3)
    throw std::invalid_argument("target_channels must be 1 or 3");
  if (img.channels == target_channels) return img;
  Image out = Image::zeros(img.height, img.width, target_channels);
  const std::size_t n = static_cast<std::size_t>(img.height) * img.width;
  if (img.channels == 1) {
    for (std::size_t p = 0; p < n; ++p) {
      const double v = img.pixels[p];
      out.pixels[p * 3 + 0] = v;
      out.pixels[p * 3 + 1] = v;
      out.pixels[p * 3 + 2] = v;
    }
  } else {
    for (std::size_t p = 0; p < n; ++p) {
      out.pixels[p] = 0.299 * img.pixels[p * 3 + 0] +
                      0.587 * img.pixels[p * 3 + 1] +
                      0.114 * img.pixels[p * 3 + 2];
    }
  }
  return out;
}

/// Decode a PNG or binary PGM/PPM file (sniffed by magic bytes) and coerce
/// to the requested channel count. Samples are scaled to [0,1] by the
/// format's full-scale value.
inline Image load_image(const std::string& path, int target_channels) {
  if (target_channels != 1 && target_channels != 3)
    throw std::invalid_argument("target_channels must be 1 or 3");
  const auto bytes = detail::read_file_bytes(path);
  if (bytes.size() >= 8 && bytes[0] == 0x89 && bytes[1] == 'P' &&
      bytes[2] == 'N' && bytes[3] == 'G') {
    return convert_channels(detail::load_png(path), target_channels);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' &&
      (bytes[1] == '5' || bytes[1] == '6')) {
    return convert_channels(detail::load_pnm(bytes, path), target_channels);
  }
  throw std::runtime_error("unsupported format: " + path);
}

/// 8-bit quantization by round(p * 255), written as PNG, PGM, or PPM by
/// file extension (default PNG). Loading the result back reproduces the
/// quantized pixels exactly.
inline void save_image(const Image& img, const std::string& path) {
  validate_image(img);
  const auto dot = path.rfind('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
  if (ext == ".pgm" || ext == ".ppm") {
    detail::save_pnm(img, path);
  } else {
    detail::save_png(img, path);
  }
}

constexpr std::size_t kCifarRecordBytes = 3073;  // 1 label + 3x1024 planes

/// Parse a CIFAR-10 binary batch: records of 3073 bytes, one label byte
/// followed by the R, G, B 32x32 planes.
inline LabeledDataset ingest_cifar10(const std::string& path) {
  const auto bytes = detail::read_file_bytes(path);
  if (bytes.empty() || bytes.size() % kCifarRecordBytes != 0)
    throw std::runtime_error(
        "CIFAR-10 batch length " + std::to_string(bytes.size()) +
        " is not a positive multiple of 3073: " + path);

  const std::size_t count = bytes.size() / kCifarRecordBytes;
  LabeledDataset ds;
  ds.num_classes = 10;
  ds.images.reserve(count);
  ds.labels.reserve(count);
  for (std::size_t rec = 0; rec < count; ++rec) {
    const unsigned char* p = bytes.data() + rec * kCifarRecordBytes;
    const int label = p[0];
    if (label >= 10)
      throw std::runtime_error("invalid label " + std::to_string(label) +
                               " in record " + std::to_string(rec) + " of " +
                               path);
    Image img = Image::zeros(32, 32, 3);
    for (int ch = 0; ch < 3; ++ch) {
      const unsigned char* plane = p + 1 + ch * 1024;
      for (int r = 0; r < 32; ++r) {
        for (int c = 0; c < 32; ++c) {
          img.at(r, c, ch) = static_cast<double>(plane[r * 32 + c]) / 255.0;
        }
      }
    }
    ds.images.push_back(std::move(img));
    ds.labels.push_back(label);
  }
  return ds;
}

/// Write a dataset of 32x32x3 images in the CIFAR-10 binary batch layout.
inline void write_cifar10(const LabeledDataset& ds, const std::string& path) {
  validate_dataset(ds);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Image& img = ds.images[i];
    if (img.height != 32 || img.width != 32 || img.channels != 3)
      throw std::invalid_argument("CIFAR-10 records require 32x32x3 images");
    if (ds.labels[i] > 9)
      throw std::invalid_argument("CIFAR-10 labels must be in [0,10)");
    out.put(static_cast<char>(ds.labels[i]));
    for (int ch = 0; ch < 3; ++ch) {
      for (int r = 0; r < 32; ++r) {
        for (int c = 0; c < 32; ++c) {
          const auto b = static_cast<unsigned char>(
              std::lround(std::clamp(img.at(r, c, ch), 0.0, 1.0) * 255.0));
          out.put(static_cast<char>(b));
        }
      }
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace augmix
