#pragma once

#include <filesystem>
#include <string>

#include "augmix/image.hpp"
#include "augmix/rng.hpp"

namespace augmix_test {

// Fresh scratch directory per fixture, removed on teardown.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    root_ = std::filesystem::temp_directory_path() /
            ("augmix_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(root_);
    std::filesystem::create_directories(root_);
  }
  ~TempDir() { std::filesystem::remove_all(root_); }

  std::string path(const std::string& name) const {
    return (root_ / name).string();
  }
  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
};

inline augmix::Image random_image(augmix::PhiloxRng& rng, int height,
                                  int width, int channels) {
  augmix::Image img = augmix::Image::zeros(height, width, channels);
  for (double& p : img.pixels) p = rng.next_double();
  return img;
}

// Snap pixels to the 8-bit grid, the fixed point of save -> load.
inline augmix::Image quantized(augmix::Image img) {
  for (double& p : img.pixels)
    p = static_cast<double>(std::lround(p * 255.0)) / 255.0;
  return img;
}

}  // namespace augmix_test
