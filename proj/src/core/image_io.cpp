// Copyright Contributors to the hdrfield Project
// SPDX-License-Identifier: Apache-2.0
#include "core/image_io.hpp"

#include <png.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

namespace hdrf {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) fail(path + ": cannot open file");
  return f;
}

[[noreturn]] void png_error_handler(png_structp png, png_const_charp msg) {
  const char* path = static_cast<const char*>(png_get_error_ptr(png));
  fail(std::string(path ? path : "<png>") + ": " + (msg ? msg : "libpng error"));
}

void png_warning_handler(png_structp, png_const_charp) {}

std::uint8_t quantize(float z) {
  const double c = std::clamp(static_cast<double>(z), 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

void write_png_impl(const std::string& path, const std::uint8_t* rows, int width, int height,
                    int channels) {
  FilePtr file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING,
                                            const_cast<char*>(path.c_str()), png_error_handler,
                                            png_warning_handler);
  require(png != nullptr, path + ": png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail(path + ": png_create_info_struct failed");
  }
  try {
    png_init_io(png, file.get());
    png_set_IHDR(png, info, width, height, 8,
                 channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int v = 0; v < height; ++v) {
      png_write_row(png, const_cast<png_bytep>(rows + static_cast<std::size_t>(v) * width *
                                                          channels));
    }
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
}

std::vector<std::uint8_t> read_png_impl(const std::string& path, int& width, int& height,
                                        int want_channels) {
  FilePtr file = open_file(path, "rb");
  std::uint8_t header[8];
  if (std::fread(header, 1, 8, file.get()) != 8 || png_sig_cmp(header, 0, 8) != 0) {
    fail(path + ": not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING,
                                           const_cast<char*>(path.c_str()), png_error_handler,
                                           png_warning_handler);
  require(png != nullptr, path + ": png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail(path + ": png_create_info_struct failed");
  }
  std::vector<std::uint8_t> out;
  try {
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    png_set_strip_16(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    png_set_strip_alpha(png);
    if (want_channels == 3) {
      png_set_gray_to_rgb(png);
    } else {
      const int color = png_get_color_type(png, info);
      if (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_GRAY_ALPHA) {
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);
      }
    }
    png_read_update_info(png, info);

    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    const int channels = static_cast<int>(png_get_channels(png, info));
    require(channels == want_channels, path + ": unexpected channel count after decode");

    out.resize(static_cast<std::size_t>(width) * height * want_channels);
    for (int v = 0; v < height; ++v) {
      png_read_row(png, out.data() + static_cast<std::size_t>(v) * width * want_channels,
                   nullptr);
    }
    png_read_end(png, nullptr);
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

float byteswap_float(float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  bits = __builtin_bswap32(bits);
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

void write_png(const std::string& path, const ImageBuffer& img) {
  require(img.kind == ImageKind::LDR, "PNG output expects an LDR image");
  require(img.width > 0 && img.height > 0, "empty image");
  std::vector<std::uint8_t> bytes(img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i) bytes[i] = quantize(img.data[i]);
  write_png_impl(path, bytes.data(), img.width, img.height, 3);
}

ImageBuffer read_png(const std::string& path) {
  int width = 0, height = 0;
  const std::vector<std::uint8_t> bytes = read_png_impl(path, width, height, 3);
  ImageBuffer img(width, height, ImageKind::LDR);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    img.data[i] = static_cast<float>(bytes[i]) / 255.0f;
  }
  return img;
}

void write_pfm(const std::string& path, const ImageBuffer& img) {
  require(img.kind == ImageKind::HDR, "PFM output expects an HDR image");
  require(img.width > 0 && img.height > 0, "empty image");
  FilePtr file = open_file(path, "wb");
  std::fprintf(file.get(), "PF\n%d %d\n-1.0\n", img.width, img.height);
  // Rows bottom-to-top per PFM convention.
  for (int v = img.height - 1; v >= 0; --v) {
    const float* row = img.pixel(0, v);
    if (std::fwrite(row, sizeof(float), static_cast<std::size_t>(img.width) * 3, file.get()) !=
        static_cast<std::size_t>(img.width) * 3) {
      fail(path + ": short write");
    }
  }
}

ImageBuffer read_pfm(const std::string& path) {
  FilePtr file = open_file(path, "rb");
  char tag[3] = {0, 0, 0};
  if (std::fscanf(file.get(), "%2s", tag) != 1) fail(path + ": truncated PFM header");
  int channels = 0;
  if (std::strcmp(tag, "PF") == 0) {
    channels = 3;
  } else if (std::strcmp(tag, "Pf") == 0) {
    channels = 1;
  } else {
    fail(path + ": not a PFM file");
  }
  int width = 0, height = 0;
  double scale = 0.0;
  if (std::fscanf(file.get(), "%d %d %lf", &width, &height, &scale) != 3 || width <= 0 ||
      height <= 0 || scale == 0.0) {
    fail(path + ": malformed PFM header");
  }
  if (std::fgetc(file.get()) == EOF) fail(path + ": truncated PFM header");
  const bool little_endian = scale < 0.0;

  ImageBuffer img(width, height, ImageKind::HDR);
  std::vector<float> row(static_cast<std::size_t>(width) * channels);
  for (int v = height - 1; v >= 0; --v) {
    if (std::fread(row.data(), sizeof(float), row.size(), file.get()) != row.size()) {
      fail(path + ": truncated PFM pixel data");
    }
    if (little_endian != (std::endian::native == std::endian::little)) {
      for (float& f : row) f = byteswap_float(f);
    }
    float* dst = img.pixel(0, v);
    if (channels == 3) {
      std::memcpy(dst, row.data(), row.size() * sizeof(float));
    } else {
      for (int u = 0; u < width; ++u) dst[u * 3] = dst[u * 3 + 1] = dst[u * 3 + 2] = row[u];
    }
  }
  return img;
}

void write_mask_png(const std::string& path, const std::vector<std::uint8_t>& mask, int width,
                    int height) {
  require(mask.size() == static_cast<std::size_t>(width) * height, "mask size mismatch");
  std::vector<std::uint8_t> bytes(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) bytes[i] = mask[i] ? 255 : 0;
  write_png_impl(path, bytes.data(), width, height, 1);
}

std::vector<std::uint8_t> read_mask_png(const std::string& path, int& width, int& height) {
  std::vector<std::uint8_t> bytes = read_png_impl(path, width, height, 1);
  for (std::uint8_t& b : bytes) b = b >= 128 ? 1 : 0;
  return bytes;
}

void write_image(const std::string& path, const ImageBuffer& img) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".pfm") == 0) {
    write_pfm(path, img);
  } else if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".png") == 0) {
    write_png(path, img);
  } else {
    fail(path + ": unsupported image extension (use .png or .pfm)");
  }
}

ImageBuffer read_image(const std::string& path) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".pfm") == 0) return read_pfm(path);
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".png") == 0) return read_png(path);
  fail(path + ": unsupported image extension (use .png or .pfm)");
}

}  // namespace hdrf
