#pragma once

#include <filesystem>

#include "oef/image.hpp"

namespace oef {

// Reads any PNG as 8-bit RGB (gray is replicated, alpha dropped, 16-bit
// samples reduced). Throws DataError on unreadable files.
ImageU8 read_png_rgb(const std::filesystem::path& path);

// Reads a grayscale PNG as 16-bit values (8-bit files are widened).
ImageU16 read_png_gray16(const std::filesystem::path& path);

// 1-channel (gray) or 3-channel (RGB) 8-bit output.
void write_png(const std::filesystem::path& path, const ImageU8& image);
// 16-bit grayscale output.
void write_png(const std::filesystem::path& path, const ImageU16& image);

SegmentationMap to_segmentation(const ImageU16& ids);
ImageU16 from_segmentation(const SegmentationMap& seg);

// Fixed-point encoding of non-negative strength maps: v / full_scale clamped
// to [0, 1] and scaled to 65535.
ImageU16 encode_strength(const ImageF& map, double full_scale);
ImageF decode_strength(const ImageU16& map, double full_scale);

}  // namespace oef
