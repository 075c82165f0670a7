// SPDX-License-Identifier: Apache-2.0
#include "cdi3d/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "cdi3d/errors.hpp"

namespace cdi3d {

namespace {

uint8_t quantize8(double v) {
  const double q = std::lround(std::clamp(v, 0.0, 1.0) * 255.0);
  return static_cast<uint8_t>(q);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for read: " + path);
  return in;
}

// Reads one whitespace-delimited token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      while (in.get(c) && c != '\n') {
      }
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(c);
  }
  if (tok.empty()) throw IoError("unexpected end of header");
  return tok;
}

void write_netpbm(const std::string& path, const Image& img, const char* magic,
                  int channels) {
  if (img.channels != channels)
    throw IoError(std::string(magic) + " writer expects " +
                  std::to_string(channels) + " channel(s)");
  auto out = open_out(path);
  out << magic << "\n" << img.width << " " << img.height << "\n255\n";
  std::vector<uint8_t> row(static_cast<size_t>(img.width) * channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < channels; ++c)
        row[static_cast<size_t>(x) * channels + c] = quantize8(img.at(y, x, c));
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw IoError("write failed: " + path);
}

Image read_netpbm(const std::string& path, const char* magic, int channels) {
  auto in = open_in(path);
  if (next_token(in) != magic) throw IoError("bad magic in " + path);
  const int w = std::stoi(next_token(in));
  const int h = std::stoi(next_token(in));
  const int maxval = std::stoi(next_token(in));
  if (w <= 0 || h <= 0 || maxval != 255)
    throw IoError("unsupported netpbm header in " + path);
  Image img(h, w, channels);
  std::vector<uint8_t> row(static_cast<size_t>(w) * channels);
  for (int y = 0; y < h; ++y) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size()));
    if (!in) throw IoError("truncated pixel data in " + path);
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c)
        img.at(y, x, c) = row[static_cast<size_t>(x) * channels + c] / 255.0;
  }
  return img;
}

}  // namespace

void write_ppm(const std::string& path, const Image& rgb) {
  write_netpbm(path, rgb, "P6", 3);
}

Image read_ppm(const std::string& path) { return read_netpbm(path, "P6", 3); }

void write_pgm(const std::string& path, const Image& gray) {
  write_netpbm(path, gray, "P5", 1);
}

Image read_pgm(const std::string& path) { return read_netpbm(path, "P5", 1); }

void write_pfm(const std::string& path, const Image& img) {
  if (img.channels != 1 && img.channels != 3)
    throw IoError("PFM supports 1 or 3 channels");
  auto out = open_out(path);
  out << (img.channels == 3 ? "PF" : "Pf") << "\n"
      << img.width << " " << img.height << "\n-1.0\n";
  // scale -1.0 marks little-endian; rows stored bottom-to-top
  std::vector<float> row(static_cast<size_t>(img.width) * img.channels);
  for (int y = img.height - 1; y >= 0; --y) {
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c)
        row[static_cast<size_t>(x) * img.channels + c] =
            static_cast<float>(img.at(y, x, c));
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw IoError("write failed: " + path);
}

Image read_pfm(const std::string& path) {
  auto in = open_in(path);
  const std::string magic = next_token(in);
  int channels;
  if (magic == "PF")
    channels = 3;
  else if (magic == "Pf")
    channels = 1;
  else
    throw IoError("bad PFM magic in " + path);
  const int w = std::stoi(next_token(in));
  const int h = std::stoi(next_token(in));
  const double scale = std::stod(next_token(in));
  if (scale >= 0) throw IoError("big-endian PFM not supported: " + path);
  Image img(h, w, channels);
  std::vector<float> row(static_cast<size_t>(w) * channels);
  for (int y = h - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!in) throw IoError("truncated PFM data in " + path);
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c)
        img.at(y, x, c) = row[static_cast<size_t>(x) * channels + c];
  }
  return img;
}

}  // namespace cdi3d
