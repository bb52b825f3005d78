#ifndef SPECTEX_SURFACE_HPP_
#define SPECTEX_SURFACE_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spectex/image.hpp"
#include "spectex/spectral.hpp"

namespace spectex {

/// Per-pixel time of the strongest |φ| inside a chosen band.
struct TimeMap {
  ScalarField time;      // 0 where absent
  ScalarField salience;  // max |φ| over the band
  std::vector<std::uint8_t> present;
  double band_lo = 0.0;   // first layer time inside the band
  double band_hi = 0.0;   // last layer time inside the band
  double grid_lo = 0.0;   // first layer time of the stack
  double grid_hi = 0.0;   // last layer time of the stack

  int width() const { return time.width(); }
  int height() const { return time.height(); }
  std::size_t present_count() const;
};

struct Sample {
  double x = 0.0;
  double y = 0.0;
  double t = 0.0;
  double weight = 1.0;
};

struct SampleSet {
  int width = 0;
  int height = 0;
  double grid_lo = 0.0;
  double grid_hi = 0.0;
  std::vector<Sample> samples;
};

enum class FitKind { plane, local };

std::string to_string(FitKind kind);
FitKind fit_kind_from_string(const std::string& name);

struct PlaneCoefficients {
  double a = 0.0;  // ∂T/∂x
  double b = 0.0;  // ∂T/∂y
  double c = 0.0;  // T at the origin
};

struct SurfaceField {
  ScalarField time;
  FitKind kind = FitKind::plane;
  /// The robust global plane; for local fits it is the fallback surface.
  PlaneCoefficients plane;
  double residual_scale = 0.0;
  double inlier_fraction = 1.0;
  double fallback_fraction = 0.0;
  double bandwidth = 0.0;
};

/// Per-pixel integration interval around the separation surface. The layer
/// nearest to the surface (anchor) always belongs to the stratum.
struct Stratum {
  ScalarField lower;
  ScalarField upper;
  ScalarField half_width;
  ScalarField surface;
  std::vector<int> anchor_layer;

  bool contains(std::size_t pixel, std::size_t layer, double t) const {
    return static_cast<int>(layer) == anchor_layer[pixel] ||
           (t >= lower[pixel] && t <= upper[pixel]);
  }
};

struct PlaneFitOptions {
  int irls_rounds = 5;
  /// Tukey bisquare cut-off in units of the robust residual scale
  /// (1.4826·MAD).
  double tukey_c = 4.685;
};

struct LocalFitOptions {
  /// Below this total kernel weight (in samples) the global plane is used.
  double min_local_mass = 5.0;
};

struct SeparationConfig {
  FitKind fit = FitKind::plane;
  double alpha = 0.35;
  double upper_factor = 1.5;
  double pct_lo = 85.0;
  double pct_hi = 95.0;
  int boundary_margin = 8;
  /// Local-regression bandwidth in pixels; 0 selects image diagonal / 6.
  double bandwidth = 0.0;
  PlaneFitOptions plane;
  LocalFitOptions local;

  void validate() const;
};

TimeMap salient_time_map(const SpectralStack& stack, double t1, double t2);

SampleSet filter_time_map(const TimeMap& tm, double pct_lo = 85.0,
                          double pct_hi = 95.0, int boundary_margin = 8);

/// Robust plane through the samples, evaluated over the image and clamped to
/// the grid's layer range.
SurfaceField fit_plane(const SampleSet& samples, const PlaneFitOptions& options = {});

SurfaceField fit_surface_local(const SampleSet& samples, double bandwidth,
                               const LocalFitOptions& options = {},
                               const PlaneFitOptions& plane_options = {});

/// Half-width w = alpha·T_s below the surface and upper_factor·w above,
/// clipped to [t1/2, 2·t2] and to the grid's layer range.
Stratum make_stratum(const SurfaceField& surface, const TimeGrid& grid,
                     double alpha, double t1, double t2,
                     double upper_factor = 1.5);

struct StratumSplit {
  ScalarField texture;
  ScalarField residual;
};

/// texture = Σ_k H(t_k; x)·φ_k·w_k with H the stratum indicator;
/// residual = f − texture where f is the stack's reconstruction.
StratumSplit extract_stratum(const SpectralStack& stack, const Stratum& stratum);

struct Decomposition {
  ScalarField texture;
  ScalarField residual;
  Spectrum spectrum;
  TimeMap time_map;
  SampleSet samples;
  SurfaceField surface;
  Stratum stratum;
};

Decomposition decompose_stack(const SpectralStack& stack, double t1, double t2,
                              const SeparationConfig& config);
Decomposition decompose(const ScalarField& f, const TimeGrid& grid,
                        const FlowParams& flow, double t1, double t2,
                        const SeparationConfig& config);

}  // namespace spectex

#endif  // SPECTEX_SURFACE_HPP_
