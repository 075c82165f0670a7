// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace cdi3d {

// Dense H x W x C raster of doubles, row-major with interleaved channels.
// rgb images live in [0,1]; depth in world units; masks in [0,1].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c),
        data(static_cast<size_t>(h) * w * c, fill) {}

  double& at(int y, int x, int c) {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }

  bool same_shape(const Image& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
  size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
};

// Binary netpbm / PFM writers. Headers are emitted bit-exactly:
//   PPM: "P6\n<w> <h>\n255\n", PGM: "P5\n<w> <h>\n255\n",
//   PFM: "PF\n<w> <h>\n-1.0\n" (3ch) or "Pf\n...\n-1.0\n" (1ch),
// PFM payload is little-endian float32, scanlines bottom-to-top.
void write_ppm(const std::string& path, const Image& rgb);
Image read_ppm(const std::string& path);

void write_pgm(const std::string& path, const Image& gray);
Image read_pgm(const std::string& path);

void write_pfm(const std::string& path, const Image& img);
Image read_pfm(const std::string& path);

}  // namespace cdi3d
