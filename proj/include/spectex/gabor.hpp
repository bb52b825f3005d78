#ifndef SPECTEX_GABOR_HPP_
#define SPECTEX_GABOR_HPP_

#include <complex>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "spectex/image.hpp"
#include "spectex/image_io.hpp"

namespace spectex {

/// σ = factor / W along each kernel axis; support radius ceil(radius_sigmas·σ).
struct SigmaPolicy {
  double x_factor = 0.56;
  double y_factor = 0.56;
  double radius_sigmas = 3.0;
};

struct GaborFilter {
  int orientation = 0;  // μ
  double angle = 0.0;   // μπ/M, radians
  double frequency = 0.0;
  double sigma_x = 0.0;
  double sigma_y = 0.0;
  int radius = 0;
  /// (2r+1)² complex taps, row-major, tap (x, y) at index (y+r)(2r+1)+(x+r).
  std::vector<std::complex<double>> taps;
  /// When σx == σy the kernel factors as row(x)·col(y).
  std::vector<std::complex<double>> row;
  std::vector<std::complex<double>> col;

  int size() const { return 2 * radius + 1; }
  std::complex<double> tap(int x, int y) const {
    return taps[static_cast<std::size_t>(y + radius) * size() + (x + radius)];
  }
  bool separable() const { return !row.empty(); }
  /// |Σ taps|: response to a unit constant image.
  double dc_gain() const;
  /// |Σ taps·e^{−2πjW x̃}|: response to a matched unit complex carrier.
  double peak_gain() const;
};

class GaborBank {
 public:
  GaborBank(int orientations, std::vector<double> frequencies,
            std::vector<GaborFilter> filters);

  int orientations() const { return orientations_; }
  const std::vector<double>& frequencies() const { return frequencies_; }
  const GaborFilter& filter(std::size_t scale, int mu) const {
    return filters_[scale * orientations_ + mu];
  }
  const std::vector<GaborFilter>& filters() const { return filters_; }

  /// Orientation (degrees, [0,180)) of the pattern lines a filter responds
  /// to: the carrier direction turned by 90°.
  double line_orientation_deg(int mu) const;
  double bin_width_deg() const { return 180.0 / orientations_; }
  /// Largest constant-image response over the bank.
  double max_dc_gain() const;

 private:
  int orientations_;
  std::vector<double> frequencies_;
  std::vector<GaborFilter> filters_;
};

inline const std::vector<double> kDefaultGaborFrequencies{1.0 / 4, 1.0 / 8,
                                                          1.0 / 16, 1.0 / 32};

GaborBank build_bank(int orientations = 30,
                     std::vector<double> frequencies = kDefaultGaborFrequencies,
                     SigmaPolicy sigma = {});

/// |layer ⊛ g| with replicate boundary; result[s][μ].
std::vector<std::vector<ScalarField>> bank_response(const ScalarField& layer,
                                                    const GaborBank& bank);

struct OrientationMap {
  ScalarField orientation_deg;
  ScalarField magnitude;
  std::vector<int> bin;
  std::vector<int> scale;
  std::vector<std::uint8_t> confident;
  double robust_max = 0.0;

  std::size_t confident_count() const;
};

struct SodOptions {
  double confidence = 0.05;
  /// Percentile of the magnitude used as the layer's robust maximum.
  double robust_percentile = 99.0;
};

/// Per pixel: best orientation within each scale, then best scale.
std::vector<OrientationMap> scale_orientation_descriptor(
    const std::vector<ScalarField>& layers, const GaborBank& bank,
    const SodOptions& options = {});

/// Hue = orientation, value = magnitude / robust max; unconfident pixels black.
ColorImage orientation_color_image(const OrientationMap& map);
void export_orientation_map(const OrientationMap& map,
                            const std::filesystem::path& png_path,
                            const std::filesystem::path& raw_prefix);

}  // namespace spectex

#endif  // SPECTEX_GABOR_HPP_
