#ifndef SPECTEX_STACK_IO_HPP_
#define SPECTEX_STACK_IO_HPP_

#include <filesystem>

#include "spectex/spectral.hpp"

namespace spectex {

// On-disk layout:
//   manifest.json        grid times, mean, dimensions, file names
//   phi_0000.f32 ...     one float32 raster per layer
//   residual.f32
//   terminal_rate.f32
// Layers are stored as float32, so a saved stack reloads as the float-rounded
// original and re-saving it reproduces the files byte for byte.
void save_stack(const SpectralStack& stack, const std::filesystem::path& dir);
SpectralStack load_stack(const std::filesystem::path& dir);

}  // namespace spectex

#endif  // SPECTEX_STACK_IO_HPP_
