#include "geodepth/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <vector>

#include "geodepth/errors.hpp"

namespace geodepth {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) {
    throw IoError(std::string("cannot open ") + path +
                  (mode[0] == 'w' ? " for writing" : " for reading"));
  }
  return f;
}

[[noreturn]] void png_fail(png_structp, png_const_charp msg) {
  throw IoError(std::string("libpng: ") + msg);
}
void png_warn(png_structp, png_const_charp) {}

// Writes rows of `bit_depth` samples; 16-bit rows are big-endian already.
void write_png_rows(const std::string& path, int width, int height, int color_type,
                    int bit_depth, std::vector<std::uint8_t>& buffer) {
  FilePtr f = open_file(path, "wb");
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};
  png_init_io(png, f.get());
  png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const int channels = color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
  const std::size_t stride =
      static_cast<std::size_t>(width) * channels * (bit_depth / 8);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, buffer.data() + y * stride);
  }
  png_write_end(png, nullptr);
}

struct RawPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint8_t> data;  // 16-bit samples are big-endian
};

RawPng read_png_rows(const std::string& path) {
  FilePtr f = open_file(path, "rb");
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};
  png_init_io(png, f.get());
  png_read_info(png, info);
  const int color_type = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);

  RawPng raw;
  raw.width = static_cast<int>(png_get_image_width(png, info));
  raw.height = static_cast<int>(png_get_image_height(png, info));
  raw.channels = png_get_channels(png, info);
  raw.bit_depth = png_get_bit_depth(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  raw.data.resize(stride * raw.height);
  std::vector<png_bytep> rows(raw.height);
  for (int y = 0; y < raw.height; ++y) rows[y] = raw.data.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  return raw;
}

}  // namespace

void write_png8(const std::string& path, const Image& image) {
  const int nc = image.channels();
  if (nc != 1 && nc != 3) throw IoError("write_png8 supports 1 or 3 channels");
  std::vector<std::uint8_t> buf(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double v = std::clamp(image[i], 0.0, 1.0);
    buf[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  write_png_rows(path, image.width(), image.height(),
                 nc == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, 8, buf);
}

Image read_png8(const std::string& path) {
  const RawPng raw = read_png_rows(path);
  if (raw.bit_depth != 8) throw IoError(path + ": expected an 8-bit PNG");
  const int out_c = raw.channels >= 3 ? 3 : 1;
  Image img(raw.height, raw.width, out_c);
  for (int y = 0; y < raw.height; ++y) {
    for (int x = 0; x < raw.width; ++x) {
      const std::size_t base =
          (static_cast<std::size_t>(y) * raw.width + x) * raw.channels;
      for (int c = 0; c < out_c; ++c) img(y, x, c) = raw.data[base + c] / 255.0;
    }
  }
  return img;
}

void write_depth_png16(const std::string& path, const Image& depth) {
  if (depth.channels() != 1) throw IoError("depth maps must have one channel");
  std::vector<std::uint8_t> buf(depth.size() * 2);
  for (std::size_t i = 0; i < depth.size(); ++i) {
    const double mm = std::clamp(std::round(depth[i] * 1000.0), 0.0, 65535.0);
    const auto v = static_cast<std::uint16_t>(mm);
    buf[2 * i] = static_cast<std::uint8_t>(v >> 8);
    buf[2 * i + 1] = static_cast<std::uint8_t>(v & 0xff);
  }
  write_png_rows(path, depth.width(), depth.height(), PNG_COLOR_TYPE_GRAY, 16, buf);
}

Image read_depth_png16(const std::string& path) {
  const RawPng raw = read_png_rows(path);
  if (raw.bit_depth != 16 || raw.channels != 1) {
    throw IoError(path + ": expected a 16-bit single-channel PNG");
  }
  Image depth(raw.height, raw.width);
  for (std::size_t i = 0; i < depth.size(); ++i) {
    const unsigned v = (raw.data[2 * i] << 8) | raw.data[2 * i + 1];
    depth[i] = v / 1000.0;
  }
  return depth;
}

void write_pfm(const std::string& path, const Image& map) {
  if (map.channels() != 1) throw IoError("PFM export supports one channel");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "Pf\n" << map.width() << ' ' << map.height() << "\n-1.0\n";
  std::vector<float> row(map.width());
  // Scanlines are stored bottom to top.
  for (int y = map.height() - 1; y >= 0; --y) {
    for (int x = 0; x < map.width(); ++x) row[x] = static_cast<float>(map(y, x));
    if constexpr (std::endian::native == std::endian::big) {
      for (float& v : row) {
        std::uint32_t u;
        std::memcpy(&u, &v, 4);
        u = __builtin_bswap32(u);
        std::memcpy(&v, &u, 4);
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw IoError("failed writing " + path);
}

Image read_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path + " for reading");
  std::string magic;
  int width = 0;
  int height = 0;
  double scale = 0.0;
  in >> magic >> width >> height >> scale;
  in.get();
  if (magic != "Pf" || width <= 0 || height <= 0 || scale == 0.0) {
    throw IoError(path + ": not a single-channel PFM");
  }
  const bool file_little = scale < 0.0;
  const bool swap = file_little != (std::endian::native == std::endian::little);
  Image map(height, width);
  std::vector<float> row(width);
  for (int y = height - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!in) throw IoError(path + ": truncated PFM");
    for (int x = 0; x < width; ++x) {
      float v = row[x];
      if (swap) {
        std::uint32_t u;
        std::memcpy(&u, &v, 4);
        u = __builtin_bswap32(u);
        std::memcpy(&v, &u, 4);
      }
      map(y, x) = v;
    }
  }
  return map;
}

}  // namespace geodepth
