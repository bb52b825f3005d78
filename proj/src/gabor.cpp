#include "spectex/gabor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "spectex/errors.hpp"
#include "spectex/stats.hpp"

namespace spectex {

using cplx = std::complex<double>;

double GaborFilter::dc_gain() const {
  cplx acc = 0.0;
  for (const cplx& t : taps) acc += t;
  return std::abs(acc);
}

double GaborFilter::peak_gain() const {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  cplx acc = 0.0;
  for (int y = -radius; y <= radius; ++y) {
    for (int x = -radius; x <= radius; ++x) {
      const double xr = x * c + y * s;
      acc += tap(x, y) * std::polar(1.0, -2.0 * std::numbers::pi * frequency * xr);
    }
  }
  return std::abs(acc);
}

GaborBank::GaborBank(int orientations, std::vector<double> frequencies,
                     std::vector<GaborFilter> filters)
    : orientations_(orientations),
      frequencies_(std::move(frequencies)),
      filters_(std::move(filters)) {
  if (filters_.size() != frequencies_.size() * static_cast<std::size_t>(orientations_)) {
    throw ContractError("gabor bank filter count mismatch");
  }
}

double GaborBank::line_orientation_deg(int mu) const {
  return std::fmod(mu * bin_width_deg() + 90.0, 180.0);
}

double GaborBank::max_dc_gain() const {
  double m = 0.0;
  for (const auto& f : filters_) m = std::max(m, f.dc_gain());
  return m;
}

GaborBank build_bank(int orientations, std::vector<double> frequencies,
                     SigmaPolicy sigma) {
  if (orientations < 2) throw ParameterError("gabor bank needs at least 2 orientations");
  if (frequencies.empty()) throw ParameterError("gabor bank needs a frequency");
  for (double w : frequencies) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw ParameterError("gabor frequencies must be positive");
    }
  }
  if (!(sigma.x_factor > 0.0) || !(sigma.y_factor > 0.0) || !(sigma.radius_sigmas > 0.0)) {
    throw ParameterError("degenerate gabor sigma policy");
  }

  const double pi = std::numbers::pi;
  std::vector<GaborFilter> filters;
  for (double w : frequencies) {
    const double sx = sigma.x_factor / w;
    const double sy = sigma.y_factor / w;
    if (sx < 0.25 || sy < 0.25) throw ParameterError("gabor sigma below a quarter pixel");
    const int radius = static_cast<int>(std::ceil(sigma.radius_sigmas * std::max(sx, sy)));
    for (int mu = 0; mu < orientations; ++mu) {
      GaborFilter g;
      g.orientation = mu;
      g.angle = mu * pi / orientations;
      g.frequency = w;
      g.sigma_x = sx;
      g.sigma_y = sy;
      g.radius = radius;
      const double c = std::cos(g.angle);
      const double s = std::sin(g.angle);
      const double norm = 1.0 / (2.0 * pi * sx * sy);
      g.taps.resize(static_cast<std::size_t>(g.size()) * g.size());
      for (int y = -radius; y <= radius; ++y) {
        for (int x = -radius; x <= radius; ++x) {
          const double xr = x * c + y * s;
          const double yr = -x * s + y * c;
          const double envelope =
              -0.5 * (xr * xr / (sx * sx) + yr * yr / (sy * sy));
          g.taps[static_cast<std::size_t>(y + radius) * g.size() + (x + radius)] =
              norm * std::exp(cplx(envelope, 2.0 * pi * w * xr));
        }
      }
      if (sx == sy) {
        // exp(−(x²+y²)/2σ²) is rotation invariant, so the kernel splits into
        // an x factor and a y factor.
        const double k = 1.0 / (std::sqrt(2.0 * pi) * sx);
        g.row.resize(g.size());
        g.col.resize(g.size());
        for (int i = -radius; i <= radius; ++i) {
          const double gauss = k * std::exp(-0.5 * i * i / (sx * sx));
          g.row[i + radius] = gauss * std::polar(1.0, 2.0 * pi * w * i * c);
          g.col[i + radius] = gauss * std::polar(1.0, 2.0 * pi * w * i * s);
        }
      }
      filters.push_back(std::move(g));
    }
  }
  return GaborBank(orientations, std::move(frequencies), std::move(filters));
}

namespace {

ScalarField filter_magnitude(const ScalarField& layer, const GaborFilter& g) {
  const int w = layer.width();
  const int h = layer.height();
  const int r = g.radius;
  ScalarField out(w, h);
  auto clampx = [w](int x) { return std::clamp(x, 0, w - 1); };
  auto clampy = [h](int y) { return std::clamp(y, 0, h - 1); };

  if (g.separable()) {
    std::vector<cplx> tmp(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        cplx acc = 0.0;
        for (int i = -r; i <= r; ++i) acc += g.row[i + r] * layer(clampx(x + i), y);
        tmp[static_cast<std::size_t>(y) * w + x] = acc;
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        cplx acc = 0.0;
        for (int j = -r; j <= r; ++j) {
          acc += g.col[j + r] * tmp[static_cast<std::size_t>(clampy(y + j)) * w + x];
        }
        out(x, y) = std::abs(acc);
      }
    }
    return out;
  }

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      cplx acc = 0.0;
      for (int j = -r; j <= r; ++j) {
        const int yy = clampy(y + j);
        for (int i = -r; i <= r; ++i) acc += g.tap(i, j) * layer(clampx(x + i), yy);
      }
      out(x, y) = std::abs(acc);
    }
  }
  return out;
}

}  // namespace

std::vector<std::vector<ScalarField>> bank_response(const ScalarField& layer,
                                                    const GaborBank& bank) {
  if (!layer.all_finite()) throw ContractError("gabor input contains non-finite values");
  std::vector<std::vector<ScalarField>> out(bank.frequencies().size());
  for (std::size_t s = 0; s < bank.frequencies().size(); ++s) {
    out[s].reserve(bank.orientations());
    for (int mu = 0; mu < bank.orientations(); ++mu) {
      out[s].push_back(filter_magnitude(layer, bank.filter(s, mu)));
    }
  }
  return out;
}

std::size_t OrientationMap::confident_count() const {
  return static_cast<std::size_t>(std::count(confident.begin(), confident.end(), 1));
}

std::vector<OrientationMap> scale_orientation_descriptor(
    const std::vector<ScalarField>& layers, const GaborBank& bank,
    const SodOptions& options) {
  if (layers.empty()) throw ContractError("descriptor needs at least one layer");
  std::vector<OrientationMap> maps;
  const double dc_gain = bank.max_dc_gain();
  for (const ScalarField& layer : layers) {
    const auto responses = bank_response(layer, bank);
    const int w = layer.width();
    const int h = layer.height();
    OrientationMap map{ScalarField(w, h), ScalarField(w, h),
                       std::vector<int>(layer.size(), 0),
                       std::vector<int>(layer.size(), 0),
                       std::vector<std::uint8_t>(layer.size(), 0), 0.0};
    for (std::size_t i = 0; i < layer.size(); ++i) {
      double best = -1.0;
      for (std::size_t s = 0; s < responses.size(); ++s) {
        int best_mu = 0;
        double best_in_scale = -1.0;
        for (int mu = 0; mu < bank.orientations(); ++mu) {
          const double m = responses[s][mu][i];
          if (m > best_in_scale) {
            best_in_scale = m;
            best_mu = mu;
          }
        }
        if (best_in_scale > best) {
          best = best_in_scale;
          map.bin[i] = best_mu;
          map.scale[i] = static_cast<int>(s);
        }
      }
      map.magnitude[i] = best;
      map.orientation_deg[i] = bank.line_orientation_deg(map.bin[i]);
    }

    map.robust_max = percentile(map.magnitude.values(), options.robust_percentile);
    double peak_value = 0.0;
    for (double v : layer.values()) peak_value = std::max(peak_value, std::abs(v));
    // Anything a flat patch of the same amplitude could produce is not a
    // texture response.
    const double floor = 2.0 * dc_gain * peak_value;
    const double threshold = std::max(options.confidence * map.robust_max, floor);
    for (std::size_t i = 0; i < layer.size(); ++i) {
      map.confident[i] = map.magnitude[i] > 0.0 && map.magnitude[i] >= threshold &&
                         map.magnitude[i] > floor;
    }
    maps.push_back(std::move(map));
  }
  return maps;
}

ColorImage orientation_color_image(const OrientationMap& map) {
  const int w = map.magnitude.width();
  const int h = map.magnitude.height();
  ScalarField r(w, h), g(w, h), b(w, h);
  for (std::size_t i = 0; i < map.magnitude.size(); ++i) {
    if (!map.confident[i] || map.robust_max <= 0.0) continue;
    const double value = std::min(1.0, map.magnitude[i] / map.robust_max);
    const double hue = map.orientation_deg[i] / 30.0;  // sextant in [0, 6)
    const int sector = static_cast<int>(std::floor(hue)) % 6;
    const double frac = hue - std::floor(hue);
    const double rise = value * frac;
    const double fall = value * (1.0 - frac);
    double rgb[3] = {0.0, 0.0, 0.0};
    switch (sector) {
      case 0: rgb[0] = value; rgb[1] = rise; break;
      case 1: rgb[0] = fall; rgb[1] = value; break;
      case 2: rgb[1] = value; rgb[2] = rise; break;
      case 3: rgb[1] = fall; rgb[2] = value; break;
      case 4: rgb[0] = rise; rgb[2] = value; break;
      default: rgb[0] = value; rgb[2] = fall; break;
    }
    r[i] = rgb[0];
    g[i] = rgb[1];
    b[i] = rgb[2];
  }
  return ColorImage::from_rgb(r, g, b);
}

void export_orientation_map(const OrientationMap& map,
                            const std::filesystem::path& png_path,
                            const std::filesystem::path& raw_prefix) {
  write_file(png_path, encode_png(orientation_color_image(map)));
  write_raw_f32(map.orientation_deg, raw_prefix.string() + "_orientation.f32");
  write_raw_f32(map.magnitude, raw_prefix.string() + "_magnitude.f32");
}

}  // namespace spectex
