#include "spectex/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "spectex/errors.hpp"

namespace spectex {

namespace {

void check_dims(int width, int height) {
  if (width < 1 || height < 1) {
    throw ContractError("field dimensions must be positive, got " +
                        std::to_string(width) + "x" + std::to_string(height));
  }
}

void check_same(const ScalarField& a, const ScalarField& b) {
  if (!a.same_shape(b)) throw ContractError("field shape mismatch");
}

}  // namespace

ScalarField::ScalarField(int width, int height, double fill)
    : width_(width), height_(height) {
  check_dims(width, height);
  values_.assign(static_cast<std::size_t>(width) * height, fill);
}

ScalarField::ScalarField(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
  check_dims(width, height);
  if (values_.size() != static_cast<std::size_t>(width) * height) {
    throw ContractError("value count does not match field dimensions");
  }
}

double ScalarField::mean() const {
  return std::accumulate(values_.begin(), values_.end(), 0.0) /
         static_cast<double>(values_.size());
}

double ScalarField::min() const {
  return *std::min_element(values_.begin(), values_.end());
}

double ScalarField::max() const {
  return *std::max_element(values_.begin(), values_.end());
}

bool ScalarField::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

ScalarField& ScalarField::operator+=(const ScalarField& rhs) {
  check_same(*this, rhs);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += rhs.values_[i];
  return *this;
}

ScalarField& ScalarField::operator-=(const ScalarField& rhs) {
  check_same(*this, rhs);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= rhs.values_[i];
  return *this;
}

ScalarField& ScalarField::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

ScalarField operator+(ScalarField lhs, const ScalarField& rhs) {
  lhs += rhs;
  return lhs;
}

ScalarField operator-(ScalarField lhs, const ScalarField& rhs) {
  lhs -= rhs;
  return lhs;
}

ScalarField operator+(ScalarField lhs, double v) {
  for (double& x : lhs.values()) x += v;
  return lhs;
}

ScalarField operator*(ScalarField lhs, double s) {
  lhs *= s;
  return lhs;
}

ScalarField operator*(double s, ScalarField rhs) {
  rhs *= s;
  return rhs;
}

double dot(const ScalarField& a, const ScalarField& b) {
  check_same(a, b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double l2_norm(const ScalarField& a) { return std::sqrt(dot(a, a)); }

double l1_norm(const ScalarField& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += std::abs(v);
  return acc;
}

double max_abs_diff(const ScalarField& a, const ScalarField& b) {
  check_same(a, b);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]));
  }
  return m;
}

double relative_l2(const ScalarField& a, const ScalarField& b) {
  const double num = l2_norm(a - b);
  const double den = l2_norm(b);
  return den > 0.0 ? num / den : num;
}

ColorImage::ColorImage(ScalarField luma, ScalarField cb, ScalarField cr)
    : luma_(std::move(luma)), cb_(std::move(cb)), cr_(std::move(cr)) {
  if (!luma_.same_shape(cb_) || !luma_.same_shape(cr_)) {
    throw ContractError("colour channels must share dimensions");
  }
}

ColorImage ColorImage::from_gray(ScalarField gray) {
  const int w = gray.width();
  const int h = gray.height();
  return ColorImage(std::move(gray), ScalarField(w, h, kNeutralChroma),
                    ScalarField(w, h, kNeutralChroma));
}

ColorImage ColorImage::from_rgb(const ScalarField& r, const ScalarField& g,
                                const ScalarField& b) {
  check_same(r, g);
  check_same(r, b);
  const int w = r.width();
  const int h = r.height();
  ScalarField y(w, h), cb(w, h), cr(w, h);
  for (std::size_t i = 0; i < r.size(); ++i) {
    // Achromatic pixels take the exact grey value so that Y(gray) == gray.
    if (r[i] == g[i] && g[i] == b[i]) {
      y[i] = r[i];
      cb[i] = kNeutralChroma;
      cr[i] = kNeutralChroma;
      continue;
    }
    const double yy = kLumaR * r[i] + kLumaG * g[i] + kLumaB * b[i];
    y[i] = yy;
    cb[i] = (b[i] - yy) / (2.0 * (1.0 - kLumaB)) + kNeutralChroma;
    cr[i] = (r[i] - yy) / (2.0 * (1.0 - kLumaR)) + kNeutralChroma;
  }
  return ColorImage(std::move(y), std::move(cb), std::move(cr));
}

bool ColorImage::is_gray() const {
  auto neutral = [](const ScalarField& c) {
    return std::all_of(c.values().begin(), c.values().end(),
                       [](double v) { return v == kNeutralChroma; });
  };
  return neutral(cb_) && neutral(cr_);
}

std::vector<ScalarField> ColorImage::to_rgb() const {
  const int w = width();
  const int h = height();
  ScalarField r(w, h), g(w, h), b(w, h);
  for (std::size_t i = 0; i < luma_.size(); ++i) {
    const double y = luma_[i];
    const double dcb = cb_[i] - kNeutralChroma;
    const double dcr = cr_[i] - kNeutralChroma;
    if (dcb == 0.0 && dcr == 0.0) {
      r[i] = g[i] = b[i] = y;
      continue;
    }
    const double rr = y + 2.0 * (1.0 - kLumaR) * dcr;
    const double bb = y + 2.0 * (1.0 - kLumaB) * dcb;
    r[i] = rr;
    b[i] = bb;
    g[i] = (y - kLumaR * rr - kLumaB * bb) / kLumaG;
  }
  return {std::move(r), std::move(g), std::move(b)};
}

ColorImage ColorImage::with_luma(ScalarField luma) const {
  return ColorImage(std::move(luma), cb_, cr_);
}

ScalarField to_luminance(const ColorImage& img) { return img.luma(); }

ScalarField clamped(ScalarField f, double lo, double hi) {
  for (double& v : f.values()) v = std::clamp(v, lo, hi);
  return f;
}

}  // namespace spectex
