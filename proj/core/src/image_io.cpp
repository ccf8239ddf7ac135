#include "oef/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>

#include "oef/errors.hpp"

namespace oef {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void on_png_error(png_structp, png_const_charp msg) { throw DataError(msg); }
void on_png_warning(png_structp, png_const_charp) {}

struct Decoded {
  int width = 0, height = 0, channels = 0, depth = 0;
  std::vector<png_byte> bytes;
};

// Decodes to either gray or RGB, 8 or 16 bits, without alpha or palette.
Decoded decode(const std::filesystem::path& path, bool want_rgb, bool keep16) {
  FilePtr file(std::fopen(path.string().c_str(), "rb"));
  if (!file) throw DataError("cannot open " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw DataError("not a PNG file: " + path.string());
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, on_png_error, on_png_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("libpng initialization failed");
  }
  Decoded out;
  try {
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    if (depth == 16 && !keep16) png_set_strip_16(png);
    const bool is_gray = color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA;
    if (want_rgb && is_gray) png_set_gray_to_rgb(png);
    if (!want_rgb && !is_gray) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    if (keep16 && depth == 16) png_set_swap(png);  // host little-endian samples
    png_read_update_info(png, info);
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.channels = png_get_channels(png, info);
    out.depth = png_get_bit_depth(png, info);
    const size_t rowbytes = png_get_rowbytes(png, info);
    out.bytes.resize(rowbytes * out.height);
    std::vector<png_bytep> rows(out.height);
    for (int y = 0; y < out.height; ++y) rows[y] = out.bytes.data() + rowbytes * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void encode(const std::filesystem::path& path, int width, int height, int channels, int depth,
            std::vector<png_bytep> rows) {
  FilePtr file(std::fopen(path.string().c_str(), "wb"));
  if (!file) throw DataError("cannot write " + path.string());
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, on_png_error, on_png_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("libpng initialization failed");
  }
  try {
    png_init_io(png, file.get());
    png_set_IHDR(png, info, width, height, depth,
                 channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (depth == 16) png_set_swap(png);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
}

}  // namespace

ImageU8 read_png_rgb(const std::filesystem::path& path) {
  const Decoded d = decode(path, true, false);
  ImageU8 img(d.width, d.height, 3);
  std::copy(d.bytes.begin(), d.bytes.end(), img.data().begin());
  return img;
}

ImageU16 read_png_gray16(const std::filesystem::path& path) {
  const Decoded d = decode(path, false, true);
  ImageU16 img(d.width, d.height, 1);
  auto dst = img.data();
  if (d.depth == 16) {
    for (size_t i = 0; i < dst.size(); ++i)
      dst[i] = static_cast<std::uint16_t>(d.bytes[2 * i] | (d.bytes[2 * i + 1] << 8));
  } else {
    for (size_t i = 0; i < dst.size(); ++i) dst[i] = d.bytes[i];
  }
  return img;
}

void write_png(const std::filesystem::path& path, const ImageU8& image) {
  if (image.channels() != 1 && image.channels() != 3)
    throw std::invalid_argument("write_png: need 1 or 3 channels");
  std::vector<png_bytep> rows(image.height());
  ImageU8 copy = image;
  for (int y = 0; y < image.height(); ++y) rows[y] = copy.row(y).data();
  encode(path, image.width(), image.height(), image.channels(), 8, std::move(rows));
}

void write_png(const std::filesystem::path& path, const ImageU16& image) {
  if (image.channels() != 1) throw std::invalid_argument("write_png: 16-bit output is grayscale");
  ImageU16 copy = image;
  std::vector<png_bytep> rows(image.height());
  for (int y = 0; y < image.height(); ++y)
    rows[y] = reinterpret_cast<png_bytep>(copy.row(y).data());
  encode(path, image.width(), image.height(), 1, 16, std::move(rows));
}

SegmentationMap to_segmentation(const ImageU16& ids) {
  SegmentationMap seg(ids.width(), ids.height());
  auto src = ids.data();
  auto dst = seg.data();
  std::copy(src.begin(), src.end(), dst.begin());
  return seg;
}

ImageU16 from_segmentation(const SegmentationMap& seg) {
  ImageU16 out(seg.width(), seg.height());
  auto src = seg.data();
  auto dst = out.data();
  for (size_t i = 0; i < src.size(); ++i) {
    if (src[i] < 0 || src[i] > 65535) throw DataError("segment id outside 16-bit range");
    dst[i] = static_cast<std::uint16_t>(src[i]);
  }
  return out;
}

ImageU16 encode_strength(const ImageF& map, double full_scale) {
  if (map.channels() != 1) throw std::invalid_argument("encode_strength: single channel only");
  ImageU16 out(map.width(), map.height());
  auto src = map.data();
  auto dst = out.data();
  for (size_t i = 0; i < src.size(); ++i) {
    const double v = std::clamp(src[i] / full_scale, 0.0, 1.0);
    dst[i] = static_cast<std::uint16_t>(std::lround(v * 65535.0));
  }
  return out;
}

ImageF decode_strength(const ImageU16& map, double full_scale) {
  ImageF out(map.width(), map.height());
  auto src = map.data();
  auto dst = out.data();
  for (size_t i = 0; i < src.size(); ++i)
    dst[i] = static_cast<float>(src[i] / 65535.0 * full_scale);
  return out;
}

}  // namespace oef
