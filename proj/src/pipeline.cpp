#include "spectex/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "spectex/errors.hpp"
#include "spectex/texture_ops.hpp"

namespace spectex {

using nlohmann::json;

std::string spectrum_csv(const Spectrum& s) {
  std::string out = "t,S\n";
  char line[80];
  for (std::size_t k = 0; k < s.times.size(); ++k) {
    std::snprintf(line, sizeof line, "%.17g,%.17g\n", s.times[k], s.values[k]);
    out += line;
  }
  return out;
}

json spectrum_json(const Spectrum& s) {
  json pts = json::array();
  for (std::size_t k = 0; k < s.times.size(); ++k) pts.push_back({s.times[k], s.values[k]});
  return json{{"t", s.times}, {"S", s.values}, {"points", pts}};
}

Bytes spectrum_plot_png(const Spectrum& s, int width, int height) {
  ScalarField canvas(width, height, 1.0);
  const int pad = 8;
  for (int x = pad; x < width - pad; ++x) canvas(x, height - pad) = 0.6;
  for (int y = pad; y <= height - pad; ++y) canvas(pad, y) = 0.6;
  if (s.times.size() >= 2) {
    const double l0 = std::log(s.times.front());
    const double l1 = std::log(s.times.back());
    const double smax = *std::max_element(s.values.begin(), s.values.end());
    auto px = [&](std::size_t k) {
      return pad + (std::log(s.times[k]) - l0) / (l1 - l0) * (width - 2 * pad - 1);
    };
    auto py = [&](std::size_t k) {
      const double v = smax > 0.0 ? s.values[k] / smax : 0.0;
      return (height - pad) - v * (height - 2 * pad);
    };
    for (std::size_t k = 0; k + 1 < s.times.size(); ++k) {
      const double x0 = px(k), y0 = py(k), x1 = px(k + 1), y1 = py(k + 1);
      const int n = 1 + static_cast<int>(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0))));
      for (int i = 0; i <= n; ++i) {
        const double a = double(i) / n;
        const int x = static_cast<int>(std::lround(x0 + a * (x1 - x0)));
        const int y = static_cast<int>(std::lround(y0 + a * (y1 - y0)));
        if (x >= 0 && y >= 0 && x < width && y < height) canvas(x, y) = 0.0;
      }
    }
  }
  return encode_png(canvas);
}

BandRender render_band(const SpectralStack& stack, double t1, double t2,
                       bool include_residual) {
  if (!(t1 <= t2)) throw RangeError("band needs t1 <= t2");
  const TransferFunction h = TransferFunction::band(stack, t1, t2);
  BandRender out{filter(stack, h, include_residual), {}, 0.0, 0.0, 0};
  out.energy = dot(out.field, out.field);

  const Spectrum s = spectrum(stack);
  double inside = 0.0, total = 0.0;
  for (std::size_t j = 0; j < stack.layer_count(); ++j) {
    const double m = s.values[j] * stack.weight(j);
    total += m;
    if (h.scalar_gains()[j] != 0.0) {
      inside += m;
      ++out.layers;
    }
  }
  out.mass_fraction = total > 0.0 ? inside / total : 0.0;
  out.png = encode_png(include_residual ? out.field : out.field + 0.5);
  return out;
}

namespace {

// Log-time rendering of a time raster on [lo, hi]; absent pixels stay black.
ScalarField log_time_image(const ScalarField& t, double lo, double hi) {
  ScalarField img(t.width(), t.height(), 0.0);
  const double l0 = std::log(lo), l1 = std::log(hi);
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] > 0.0 && l1 > l0) img[i] = (std::log(t[i]) - l0) / (l1 - l0);
  }
  return img;
}

}  // namespace

DecomposeRun run_decompose(const ColorImage& f, const SpectralStack& stack,
                           const RunConfig& config) {
  config.validate();
  config.require_band();
  if (f.width() != stack.width() || f.height() != stack.height()) {
    throw ContractError("stack does not match the input image");
  }
  Decomposition d =
      decompose_stack(stack, config.band_lo, config.band_hi, config.separation);
  d.residual = f.luma() - d.texture;

  DecomposeRun run{std::move(d), {}, {}, {}, {}};
  const Decomposition& r = run.d;
  run.texture_png = encode_png(r.texture + 0.5);
  run.residual_png = encode_png(f.with_luma(clamped(r.residual)));

  const double lo = r.time_map.grid_lo;
  const double hi = r.time_map.grid_hi;
  run.rasters["time_map.f32"] = encode_raw_f32(r.time_map.time);
  run.rasters["salience.f32"] = encode_raw_f32(r.time_map.salience);
  run.rasters["surface.f32"] = encode_raw_f32(r.surface.time);
  run.rasters["stratum_lo.f32"] = encode_raw_f32(r.stratum.lower);
  run.rasters["stratum_hi.f32"] = encode_raw_f32(r.stratum.upper);
  run.rasters["texture.f32"] = encode_raw_f32(r.texture);
  run.rasters["residual.f32"] = encode_raw_f32(r.residual);
  run.rasters["time_map.png"] = encode_png(log_time_image(r.time_map.time, lo, hi));
  run.rasters["surface.png"] = encode_png(log_time_image(r.surface.time, lo, hi));

  const double tex_energy = dot(r.texture, r.texture);
  run.manifest = json{
      {"width", f.width()},
      {"height", f.height()},
      {"band", {config.band_lo, config.band_hi}},
      {"fit",
       {{"kind", to_string(r.surface.kind)},
        {"plane", {{"a", r.surface.plane.a}, {"b", r.surface.plane.b}, {"c", r.surface.plane.c}}},
        {"residual_scale", r.surface.residual_scale},
        {"inlier_fraction", r.surface.inlier_fraction},
        {"fallback_fraction", r.surface.fallback_fraction},
        {"bandwidth", r.surface.bandwidth}}},
      {"samples", r.samples.samples.size()},
      {"time_map_present", r.time_map.present_count()},
      {"texture_energy", tex_energy},
      {"converged", stack.converged},
      {"rasters",
       {{"format", "float32 little-endian row-major"},
        {"files", {"time_map.f32", "salience.f32", "surface.f32", "stratum_lo.f32",
                   "stratum_hi.f32", "texture.f32", "residual.f32"}}}},
      {"config", to_json(config)},
  };
  return run;
}

void write_decompose(const DecomposeRun& run, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir / "texture.png", run.texture_png);
  write_file(dir / "residual.png", run.residual_png);
  for (const auto& [name, bytes] : run.rasters) write_file(dir / name, bytes);
  const std::string text = run.manifest.dump(2) + "\n";
  write_file(dir / "manifest.json",
             std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

ScalarField mask_from_image(const ColorImage& img) {
  ScalarField m(img.width(), img.height(), 0.0);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = img.luma()[i] >= 0.5 ? 1.0 : 0.0;
  return m;
}

Bytes run_manipulate(const ColorImage& f, const SpectralStack& stack,
                     const RunConfig& config, const std::optional<ScalarField>& mask) {
  const DecomposeRun run = run_decompose(f, stack, config);
  ManipulationSpec spec{config.gain, mask, config.clamp};
  return encode_png(manipulate(f, run.d.texture, spec));
}

ExitCode classify(const std::exception& e) {
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const FormatError*>(&e)) {
    return ExitCode::io;
  }
  if (dynamic_cast<const InsufficientDataError*>(&e) ||
      dynamic_cast<const DegenerateGeometryError*>(&e)) {
    return ExitCode::insufficient_data;
  }
  if (dynamic_cast<const ParameterError*>(&e) || dynamic_cast<const RangeError*>(&e) ||
      dynamic_cast<const ContractError*>(&e)) {
    return ExitCode::invalid_config;
  }
  if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return ExitCode::io;
  return ExitCode::io;
}

}  // namespace spectex
