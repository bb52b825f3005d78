#ifndef SPECTEX_IMAGE_HPP_
#define SPECTEX_IMAGE_HPP_

#include <cstddef>
#include <span>
#include <vector>

namespace spectex {

/// Dense row-major 2-D grid of doubles. Used for images, spectral layers,
/// time maps and every other per-pixel quantity.
class ScalarField {
 public:
  ScalarField(int width, int height, double fill = 0.0);
  ScalarField(int width, int height, std::vector<double> values);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return values_.size(); }

  double& operator()(int x, int y) { return values_[index(x, y)]; }
  double operator()(int x, int y) const { return values_[index(x, y)]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  bool same_shape(const ScalarField& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  double mean() const;
  double min() const;
  double max() const;
  bool all_finite() const;

  ScalarField& operator+=(const ScalarField& rhs);
  ScalarField& operator-=(const ScalarField& rhs);
  ScalarField& operator*=(double s);

  friend bool operator==(const ScalarField&, const ScalarField&) = default;

 private:
  int width_;
  int height_;
  std::vector<double> values_;
};

ScalarField operator+(ScalarField lhs, const ScalarField& rhs);
ScalarField operator-(ScalarField lhs, const ScalarField& rhs);
ScalarField operator+(ScalarField lhs, double v);
ScalarField operator*(ScalarField lhs, double s);
ScalarField operator*(double s, ScalarField rhs);

double dot(const ScalarField& a, const ScalarField& b);
double l2_norm(const ScalarField& a);
double l1_norm(const ScalarField& a);
double max_abs_diff(const ScalarField& a, const ScalarField& b);

/// ‖a − b‖₂ / ‖b‖₂; returns ‖a‖₂ when b is zero.
double relative_l2(const ScalarField& a, const ScalarField& b);

// Fixed luma weights; chroma is the scaled colour difference, centred at 0.5.
inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;
inline constexpr double kNeutralChroma = 0.5;

/// Luminance plus two chroma planes (Cb, Cr). Spectral processing only ever
/// touches luma; chroma rides along untouched.
class ColorImage {
 public:
  ColorImage(ScalarField luma, ScalarField cb, ScalarField cr);

  static ColorImage from_gray(ScalarField gray);
  static ColorImage from_rgb(const ScalarField& r, const ScalarField& g,
                             const ScalarField& b);

  int width() const { return luma_.width(); }
  int height() const { return luma_.height(); }

  const ScalarField& luma() const { return luma_; }
  const ScalarField& cb() const { return cb_; }
  const ScalarField& cr() const { return cr_; }

  /// True when both chroma planes are exactly neutral.
  bool is_gray() const;

  /// Returns {R, G, B}.
  std::vector<ScalarField> to_rgb() const;

  ColorImage with_luma(ScalarField luma) const;

 private:
  ScalarField luma_;
  ScalarField cb_;
  ScalarField cr_;
};

ScalarField to_luminance(const ColorImage& img);

ScalarField clamped(ScalarField f, double lo = 0.0, double hi = 1.0);

}  // namespace spectex

#endif  // SPECTEX_IMAGE_HPP_
