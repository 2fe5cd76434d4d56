// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include "ageshift/tensor/autodiff.hpp"

namespace ageshift {

// RGB image with float channels nominally in [0, 1]. Pixel (x, y) lives at
// row y * width + x of `pixels`, one column per channel.
struct Image {
  int width = 0;
  int height = 0;
  Matrix pixels;

  Image() = default;
  Image(int w, int h) : width(w), height(h), pixels(Matrix::Zero(static_cast<Eigen::Index>(w) * h, 3)) {}

  double mean() const { return pixels.size() == 0 ? 0.0 : pixels.mean(); }
  // Quantised to 8 bits, clamped. Used for hashing and file output.
  std::string to_rgb8() const;
  static Image from_rgb8(int width, int height, const unsigned char* data);
};

// Format is chosen by extension: .png or .ppm. Output is quantised to 8 bits.
Image read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Image& image);

// Tiles images into a rows x cols grid; missing cells (empty images) stay black.
Image tile_grid(const std::vector<std::vector<Image>>& cells, int pad = 1);

// Resolves manifest image references to pixels.
class ImageStore {
 public:
  virtual ~ImageStore() = default;
  virtual Image load(const std::string& ref) const = 0;
};

// References are file paths, relative ones resolved against `base`.
class DirectoryImageStore : public ImageStore {
 public:
  explicit DirectoryImageStore(std::filesystem::path base) : base_(std::move(base)) {}
  Image load(const std::string& ref) const override;
  std::filesystem::path resolve(const std::string& ref) const;

 private:
  std::filesystem::path base_;
};

class MemoryImageStore : public ImageStore {
 public:
  void put(const std::string& ref, Image image) { images_[ref] = std::move(image); }
  Image load(const std::string& ref) const override;
  bool contains(const std::string& ref) const { return images_.count(ref) != 0; }

 private:
  std::map<std::string, Image> images_;
};

}  // namespace ageshift
