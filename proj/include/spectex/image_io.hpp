#ifndef SPECTEX_IMAGE_IO_HPP_
#define SPECTEX_IMAGE_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "spectex/image.hpp"

namespace spectex {

using Bytes = std::vector<std::uint8_t>;

/// Reads PNG (8/16-bit gray or RGB; alpha is dropped) or binary/ASCII
/// PGM/PPM. Samples are scaled to [0,1].
ColorImage load_image(const std::filesystem::path& path);
ColorImage decode_image(std::span<const std::uint8_t> data);

/// Format follows the extension: .png writes 8-bit, .pgm/.ppm write 16-bit.
/// Values are clamped to [0,1] before quantisation. Gray images go out as
/// single-channel files, colour .pgm keeps only luma.
void save_image(const ColorImage& img, const std::filesystem::path& path);
void save_image(const ScalarField& img, const std::filesystem::path& path);

Bytes encode_png(const ColorImage& img);
Bytes encode_png(const ScalarField& img);
Bytes encode_pgm16(const ScalarField& img);

/// Little-endian float32 samples, row-major, no header.
Bytes encode_raw_f32(const ScalarField& field);
ScalarField decode_raw_f32(std::span<const std::uint8_t> data, int width,
                           int height);
void write_raw_f32(const ScalarField& field, const std::filesystem::path& path);
ScalarField read_raw_f32(const std::filesystem::path& path, int width,
                         int height);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path,
                std::span<const std::uint8_t> data);

}  // namespace spectex

#endif  // SPECTEX_IMAGE_IO_HPP_
