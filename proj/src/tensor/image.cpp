// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#include "ageshift/tensor/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include <png.h>

#include "ageshift/error.hpp"

namespace ageshift {

namespace {

unsigned char quantise(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<unsigned char>(std::lround(c * 255.0));
}

std::string lower_ext(const std::filesystem::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return e;
}

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  auto next_token = [&in]() {
    std::string tok;
    while (in) {
      int c = in.peek();
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
      } else if (std::isspace(c)) {
        in.get();
      } else {
        break;
      }
    }
    in >> tok;
    return tok;
  };
  if (next_token() != "P6") throw IoError(path.string() + ": only binary P6 PPM supported");
  const int w = std::stoi(next_token());
  const int h = std::stoi(next_token());
  const int maxval = std::stoi(next_token());
  in.get();
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw IoError(path.string() + ": bad PPM header");
  Image img(w, h);
  const std::size_t n = static_cast<std::size_t>(w) * h * 3;
  if (maxval < 256) {
    std::vector<unsigned char> buf(n);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
    if (!in) throw IoError(path.string() + ": truncated PPM data");
    for (std::size_t i = 0; i < n; ++i)
      img.pixels(static_cast<Eigen::Index>(i / 3), static_cast<Eigen::Index>(i % 3)) = buf[i] / static_cast<double>(maxval);
  } else {
    std::vector<unsigned char> buf(n * 2);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * 2));
    if (!in) throw IoError(path.string() + ": truncated PPM data");
    for (std::size_t i = 0; i < n; ++i)
      img.pixels(static_cast<Eigen::Index>(i / 3), static_cast<Eigen::Index>(i % 3)) =
          ((buf[2 * i] << 8) | buf[2 * i + 1]) / static_cast<double>(maxval);
  }
  return img;
}

void write_ppm(const std::filesystem::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  const std::string data = image.to_rgb8();
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

Image read_png(const std::filesystem::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.string().c_str()))
    throw IoError(path.string() + ": " + png.message);
  png.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&png);
    throw IoError(path.string() + ": " + png.message);
  }
  return Image::from_rgb8(static_cast<int>(png.width), static_cast<int>(png.height), buf.data());
}

void write_png(const std::filesystem::path& path, const Image& image) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;
  const std::string data = image.to_rgb8();
  if (!png_image_write_to_file(&png, path.string().c_str(), 0, data.data(), 0, nullptr))
    throw IoError(path.string() + ": " + png.message);
}

}  // namespace

std::string Image::to_rgb8() const {
  std::string out(static_cast<std::size_t>(pixels.rows()) * 3, '\0');
  for (Eigen::Index r = 0; r < pixels.rows(); ++r)
    for (int c = 0; c < 3; ++c) out[static_cast<std::size_t>(r) * 3 + c] = static_cast<char>(quantise(pixels(r, c)));
  return out;
}

Image Image::from_rgb8(int width, int height, const unsigned char* data) {
  Image img(width, height);
  for (Eigen::Index r = 0; r < img.pixels.rows(); ++r)
    for (int c = 0; c < 3; ++c) img.pixels(r, c) = data[r * 3 + c] / 255.0;
  return img;
}

Image read_image(const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".ppm") return read_ppm(path);
  throw IoError(path.string() + ": unsupported image format (use .png or .ppm)");
}

void write_image(const std::filesystem::path& path, const Image& image) {
  if (image.width <= 0 || image.height <= 0) throw IoError("write_image: empty image");
  const std::string ext = lower_ext(path);
  if (ext == ".png") return write_png(path, image);
  if (ext == ".ppm") return write_ppm(path, image);
  throw IoError(path.string() + ": unsupported image format (use .png or .ppm)");
}

Image tile_grid(const std::vector<std::vector<Image>>& cells, int pad) {
  int cell_w = 0, cell_h = 0;
  std::size_t ncols = 0;
  for (const auto& row : cells) {
    ncols = std::max(ncols, row.size());
    for (const auto& img : row) {
      cell_w = std::max(cell_w, img.width);
      cell_h = std::max(cell_h, img.height);
    }
  }
  const int nrows = static_cast<int>(cells.size());
  if (nrows == 0 || ncols == 0 || cell_w == 0) return {};
  const int w = static_cast<int>(ncols) * (cell_w + pad) + pad;
  const int h = nrows * (cell_h + pad) + pad;
  Image grid(w, h);
  grid.pixels.setConstant(1.0);
  for (int r = 0; r < nrows; ++r)
    for (std::size_t c = 0; c < ncols; ++c) {
      const int x0 = pad + static_cast<int>(c) * (cell_w + pad);
      const int y0 = pad + r * (cell_h + pad);
      for (int y = 0; y < cell_h; ++y)
        for (int x = 0; x < cell_w; ++x) grid.pixels.row(static_cast<Eigen::Index>(y0 + y) * w + x0 + x).setZero();
      if (c >= cells[r].size()) continue;
      const Image& img = cells[r][c];
      for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
          grid.pixels.row(static_cast<Eigen::Index>(y0 + y) * w + x0 + x) =
              img.pixels.row(static_cast<Eigen::Index>(y) * img.width + x);
    }
  return grid;
}

std::filesystem::path DirectoryImageStore::resolve(const std::string& ref) const {
  std::filesystem::path p(ref);
  return p.is_absolute() ? p : base_ / p;
}

Image DirectoryImageStore::load(const std::string& ref) const { return read_image(resolve(ref)); }

Image MemoryImageStore::load(const std::string& ref) const {
  auto it = images_.find(ref);
  if (it == images_.end()) throw IoError("no image registered for '" + ref + "'");
  return it->second;
}

}  // namespace ageshift
