#ifndef SPECTEX_PIPELINE_HPP_
#define SPECTEX_PIPELINE_HPP_

// Rendering shared by the CLI and the HTTP service, so both produce the same
// bytes for the same inputs.

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "spectex/image_io.hpp"
#include "spectex/run_config.hpp"
#include "spectex/spectral.hpp"
#include "spectex/surface.hpp"

namespace spectex {

/// Header `t,S`, one row per layer, 17 significant digits.
std::string spectrum_csv(const Spectrum& s);
nlohmann::json spectrum_json(const Spectrum& s);
/// Line plot of S against log t on a white canvas.
Bytes spectrum_plot_png(const Spectrum& s, int width = 512, int height = 256);

struct BandRender {
  ScalarField field;  // raw filter output
  Bytes png;
  double energy = 0.0;         // ‖field‖²
  double mass_fraction = 0.0;  // share of the spectrum mass inside the band
  std::size_t layers = 0;
};

/// Band-pass over layers with t1 ≤ t ≤ t2. Without the residual the result is
/// rendered around mid-gray (0.5 + value); with it the value is shown directly.
BandRender render_band(const SpectralStack& stack, double t1, double t2,
                       bool include_residual);

/// Result of decompose on a colour image. residual = luma − texture.
struct DecomposeRun {
  Decomposition d;
  Bytes texture_png;
  Bytes residual_png;
  nlohmann::json manifest;
  std::map<std::string, Bytes> rasters;  // file name → contents
};

DecomposeRun run_decompose(const ColorImage& f, const SpectralStack& stack,
                           const RunConfig& config);
void write_decompose(const DecomposeRun& run, const std::filesystem::path& dir);

/// Mask raster from an image: luma ≥ 0.5 selects the pixel.
ScalarField mask_from_image(const ColorImage& img);

Bytes run_manipulate(const ColorImage& f, const SpectralStack& stack,
                     const RunConfig& config, const std::optional<ScalarField>& mask);

/// Exit codes shared by the CLI and the service error mapping.
enum class ExitCode { ok = 0, io = 1, insufficient_data = 2, invalid_config = 3 };
ExitCode classify(const std::exception& e);

}  // namespace spectex

#endif  // SPECTEX_PIPELINE_HPP_
