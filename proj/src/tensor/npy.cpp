// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#include "ageshift/tensor/npy.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <regex>
#include <string>
#include <vector>

#include "ageshift/error.hpp"

namespace ageshift {

namespace {

constexpr char kMagic[] = "\x93NUMPY";

}  // namespace

void save_npy(const std::filesystem::path& path, const Matrix& m) {
  std::string header = "{'descr': '<f8', 'fortran_order': False, 'shape': (" +
                       std::to_string(m.rows()) + ", " + std::to_string(m.cols()) + "), }";
  // Pad so the data starts on a 64-byte boundary; header ends with '\n'.
  const std::size_t prefix = 6 + 2 + 2;
  const std::size_t total = prefix + header.size() + 1;
  header.append((64 - total % 64) % 64, ' ');
  header.push_back('\n');

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kMagic, 6);
  const char version[2] = {1, 0};
  out.write(version, 2);
  const auto len = static_cast<std::uint16_t>(header.size());
  const char len_bytes[2] = {static_cast<char>(len & 0xFF), static_cast<char>(len >> 8)};
  out.write(len_bytes, 2);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
  if (!out) throw IoError("write failed for " + path.string());
}

Matrix load_npy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[6];
  in.read(magic, 6);
  if (!in || std::memcmp(magic, kMagic, 6) != 0) throw IoError(path.string() + ": not an npy file");
  unsigned char version[2];
  in.read(reinterpret_cast<char*>(version), 2);
  std::uint32_t header_len = 0;
  if (version[0] == 1) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    header_len = b[0] | (b[1] << 8);
  } else {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    header_len = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }
  std::string header(header_len, '\0');
  in.read(header.data(), header_len);
  if (!in) throw IoError(path.string() + ": truncated header");

  std::smatch match;
  if (!std::regex_search(header, match, std::regex("'descr':\\s*'([<>|]?[fi][48])'")))
    throw IoError(path.string() + ": missing descr");
  const std::string descr = match[1];
  if (descr[0] == '>') throw IoError(path.string() + ": big-endian data unsupported");
  if (std::regex_search(header, std::regex("'fortran_order':\\s*True")))
    throw IoError(path.string() + ": fortran order unsupported");
  if (!std::regex_search(header, match, std::regex("'shape':\\s*\\(([^)]*)\\)")))
    throw IoError(path.string() + ": missing shape");
  std::vector<long long> dims;
  const std::string shape = match[1];
  std::regex num("\\d+");
  for (auto it = std::sregex_iterator(shape.begin(), shape.end(), num); it != std::sregex_iterator(); ++it)
    dims.push_back(std::stoll(it->str()));
  long long rows = 1, cols = 1;
  if (dims.size() == 1) {
    cols = dims[0];
  } else if (dims.size() == 2) {
    rows = dims[0];
    cols = dims[1];
  } else if (!dims.empty()) {
    throw IoError(path.string() + ": only 1-D and 2-D arrays supported");
  }

  Matrix m(rows, cols);
  const char kind = descr[descr.size() - 2];
  const char width = descr.back();
  for (long long r = 0; r < rows; ++r)
    for (long long c = 0; c < cols; ++c) {
      double v = 0.0;
      if (kind == 'f' && width == '8') {
        in.read(reinterpret_cast<char*>(&v), 8);
      } else if (kind == 'f' && width == '4') {
        float f;
        in.read(reinterpret_cast<char*>(&f), 4);
        v = f;
      } else if (kind == 'i' && width == '8') {
        std::int64_t i;
        in.read(reinterpret_cast<char*>(&i), 8);
        v = static_cast<double>(i);
      } else {
        std::int32_t i;
        in.read(reinterpret_cast<char*>(&i), 4);
        v = i;
      }
      m(r, c) = v;
    }
  if (!in) throw IoError(path.string() + ": truncated data");
  return m;
}

}  // namespace ageshift
