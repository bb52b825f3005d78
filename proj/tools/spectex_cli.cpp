#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <iostream>
#include <optional>

#include "spectex/errors.hpp"
#include "spectex/gabor.hpp"
#include "spectex/image_io.hpp"
#include "spectex/pipeline.hpp"
#include "spectex/run_config.hpp"
#include "spectex/service.hpp"
#include "spectex/stack_io.hpp"
#include "spectex/texture_ops.hpp"

namespace fs = std::filesystem;
using namespace spectex;

namespace {

// Flags as parsed; unset flags leave the config file (or defaults) alone.
struct Flags {
  std::string config_file;
  std::optional<double> t_min, t_max, band_lo, band_hi, alpha, pct_lo, pct_hi, gain;
  std::optional<int> steps, margin;
  std::optional<std::string> grid, fit, mask, out, solver;
  std::optional<int> max_inner_iters;
  std::optional<double> inner_tol;
};

void add_grid_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config_file, "JSON run configuration; flags override it");
  cmd->add_option("--t-min", f.t_min, "first positive time of a geometric grid");
  cmd->add_option("--t-max", f.t_max, "time horizon T");
  cmd->add_option("--steps", f.steps, "number of positive grid nodes");
  cmd->add_option("--grid", f.grid, "grid spacing")->check(CLI::IsMember({"uniform", "geometric"}));
  cmd->add_option("--solver", f.solver, "dual solver")->check(CLI::IsMember({"accelerated", "chambolle"}));
  cmd->add_option("--max-iters", f.max_inner_iters, "inner iterations per time step");
  cmd->add_option("--tol", f.inner_tol, "inner relative tolerance");
  cmd->add_option("--out", f.out, "output directory");
}

void add_band_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--band-lo", f.band_lo, "lower edge t1 of the texture band");
  cmd->add_option("--band-hi", f.band_hi, "upper edge t2 of the texture band");
}

void add_separation_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--fit", f.fit, "separation surface model")->check(CLI::IsMember({"plane", "local"}));
  cmd->add_option("--alpha", f.alpha, "stratum half-width relative to the surface time");
  cmd->add_option("--pct-lo", f.pct_lo, "lower salience percentile kept for fitting");
  cmd->add_option("--pct-hi", f.pct_hi, "upper salience percentile kept for fitting");
  cmd->add_option("--margin", f.margin, "border pixels ignored when fitting");
}

RunConfig resolve(const Flags& f) {
  RunConfig c;
  if (!f.config_file.empty()) c = load_run_config(f.config_file, c);
  nlohmann::json j = nlohmann::json::object();
  auto put = [&j](const char* key, const auto& v) {
    if (v) j[key] = *v;
  };
  put("t_min", f.t_min);
  put("t_max", f.t_max);
  put("steps", f.steps);
  put("grid", f.grid);
  put("solver", f.solver);
  put("max_inner_iters", f.max_inner_iters);
  put("inner_tol", f.inner_tol);
  put("band_lo", f.band_lo);
  put("band_hi", f.band_hi);
  put("fit", f.fit);
  put("alpha", f.alpha);
  put("pct_lo", f.pct_lo);
  put("pct_hi", f.pct_hi);
  put("margin", f.margin);
  put("gain", f.gain);
  put("mask", f.mask);
  put("out", f.out);
  c = merge_json(c, j);
  c.validate();
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void echo_config(const RunConfig& c, const fs::path& dir, const std::string& input,
                 const std::string& stack_dir) {
  nlohmann::json j = to_json(c);
  j["input"] = input;
  if (!stack_dir.empty()) j["stack"] = stack_dir;
  write_text(dir / "config.json", j.dump(2) + "\n");
}

SpectralStack obtain_stack(const ColorImage& img, const RunConfig& c, const std::string& stack_dir) {
  if (stack_dir.empty()) return transform(img.luma(), c.grid.make(), c.flow);
  SpectralStack s = load_stack(stack_dir);
  if (s.width() != img.width() || s.height() != img.height()) {
    throw ContractError("stack " + stack_dir + " does not match the input size");
  }
  return s;
}

void warn_unconverged(const SpectralStack& s) {
  if (!s.converged) {
    std::cerr << "warning: some flow steps hit the inner iteration limit\n";
  }
}

int cmd_transform(const std::string& input, const Flags& flags) {
  const RunConfig c = resolve(flags);
  const ColorImage img = load_image(input);
  const SpectralStack stack = transform(img.luma(), c.grid.make(), c.flow);
  warn_unconverged(stack);
  const fs::path dir = c.out;
  fs::create_directories(dir);
  save_stack(stack, dir / "stack");
  const Spectrum s = spectrum(stack);
  write_text(dir / "spectrum.csv", spectrum_csv(s));
  write_file(dir / "spectrum.png", spectrum_plot_png(s));
  echo_config(c, dir, input, "");
  std::cout << "layers " << stack.layer_count() << ", peak at t = " << s.times[s.argmax()]
            << "\n";
  return 0;
}

int cmd_decompose(const std::string& input, const std::string& stack_dir, const Flags& flags) {
  const RunConfig c = resolve(flags);
  c.require_band();
  const ColorImage img = load_image(input);
  const SpectralStack stack = obtain_stack(img, c, stack_dir);
  warn_unconverged(stack);
  const DecomposeRun run = run_decompose(img, stack, c);
  const fs::path dir = c.out;
  write_decompose(run, dir);
  write_text(dir / "spectrum.csv", spectrum_csv(run.d.spectrum));
  echo_config(c, dir, input, stack_dir);
  const auto& p = run.d.surface.plane;
  std::cout << "surface " << to_string(run.d.surface.kind) << ": T = " << p.a << "·x + " << p.b
            << "·y + " << p.c << " (" << run.d.samples.samples.size() << " samples)\n";
  return 0;
}

int cmd_manipulate(const std::string& input, const std::string& stack_dir, const Flags& flags) {
  const RunConfig c = resolve(flags);
  c.require_band();
  const ColorImage img = load_image(input);
  std::optional<ScalarField> mask;
  if (!c.mask.empty()) mask = mask_from_image(load_image(c.mask));
  if (mask && (mask->width() != img.width() || mask->height() != img.height())) {
    throw ContractError("mask size differs from the input image");
  }
  const SpectralStack stack = obtain_stack(img, c, stack_dir);
  warn_unconverged(stack);
  const fs::path dir = c.out;
  fs::create_directories(dir);
  write_file(dir / "output.png", run_manipulate(img, stack, c, mask));
  echo_config(c, dir, input, stack_dir);
  return 0;
}

int cmd_sod(const std::string& input, const std::string& stack_dir, const Flags& flags,
            int orientations, double confidence) {
  const RunConfig c = resolve(flags);
  const ColorImage img = load_image(input);
  const SpectralStack stack = obtain_stack(img, c, stack_dir);
  const bool banded = c.band_lo < c.band_hi;
  std::vector<ScalarField> layers;
  std::vector<std::size_t> index;
  for (std::size_t j = 0; j < stack.layer_count(); ++j) {
    const double t = stack.time(j);
    if (banded && (t < c.band_lo || t > c.band_hi)) continue;
    layers.push_back(stack.layers[j]);
    index.push_back(j);
  }
  if (layers.empty()) throw RangeError("no layer inside the requested band");
  const GaborBank bank = build_bank(orientations);
  const auto maps = scale_orientation_descriptor(layers, bank, SodOptions{confidence, 99.0});
  const fs::path dir = c.out;
  fs::create_directories(dir);
  nlohmann::json summary = nlohmann::json::array();
  for (std::size_t i = 0; i < maps.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "sod_%04zu", index[i]);
    export_orientation_map(maps[i], dir / (std::string(name) + ".png"), dir / name);
    summary.push_back({{"layer", index[i]},
                       {"t", stack.time(index[i])},
                       {"confident", maps[i].confident_count()},
                       {"robust_max", maps[i].robust_max}});
  }
  write_text(dir / "sod.json", summary.dump(2) + "\n");
  echo_config(c, dir, input, stack_dir);
  return 0;
}

Service* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

int cmd_serve(const Flags& flags, const std::string& host, int port, int ttl_minutes,
              const std::string& static_dir) {
  ServiceOptions options;
  options.defaults = resolve(flags);
  options.host = host;
  options.port = port;
  options.session_ttl = std::chrono::minutes(ttl_minutes);
  options.static_dir = static_dir;
  Service service(options);
  const int bound = service.bind();
  g_service = &service;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "listening on http://" << host << ":" << bound << std::endl;
  service.run();
  g_service = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral TV texture decomposition"};
  app.require_subcommand(1);
  Flags flags;
  std::string input, stack_dir, host = "127.0.0.1", static_dir;
  int orientations = 30, port = 8080, ttl = 30;
  double confidence = 0.05;

  auto* transform_cmd = app.add_subcommand("transform", "compute the spectral stack and spectrum");
  transform_cmd->add_option("input", input, "input image")->required();
  add_grid_flags(transform_cmd, flags);

  auto* decompose_cmd = app.add_subcommand("decompose", "extract the texture inside a band");
  decompose_cmd->add_option("input", input, "input image")->required();
  decompose_cmd->add_option("--stack", stack_dir, "reuse a stack written by transform");
  add_grid_flags(decompose_cmd, flags);
  add_band_flags(decompose_cmd, flags);
  add_separation_flags(decompose_cmd, flags);

  auto* manipulate_cmd = app.add_subcommand("manipulate", "rescale the extracted texture");
  manipulate_cmd->add_option("input", input, "input image")->required();
  manipulate_cmd->add_option("--stack", stack_dir, "reuse a stack written by transform");
  manipulate_cmd->add_option("--gain", flags.gain, "texture gain (0 removes, <0 inverts)");
  manipulate_cmd->add_option("--mask", flags.mask, "mask image; bright pixels are manipulated");
  add_grid_flags(manipulate_cmd, flags);
  add_band_flags(manipulate_cmd, flags);
  add_separation_flags(manipulate_cmd, flags);

  auto* sod_cmd = app.add_subcommand("sod", "scale-orientation descriptor per layer");
  sod_cmd->add_option("input", input, "input image")->required();
  sod_cmd->add_option("--stack", stack_dir, "reuse a stack written by transform");
  sod_cmd->add_option("--orientations", orientations, "Gabor orientations")->check(CLI::Range(2, 360));
  sod_cmd->add_option("--confidence", confidence, "confidence threshold relative to the robust max");
  add_grid_flags(sod_cmd, flags);
  add_band_flags(sod_cmd, flags);

  auto* serve_cmd = app.add_subcommand("serve", "run the HTTP service");
  serve_cmd->add_option("--host", host, "bind address");
  serve_cmd->add_option("--port", port, "port (0 picks a free one)")->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--ttl", ttl, "session idle timeout in minutes")->check(CLI::PositiveNumber);
  serve_cmd->add_option("--static", static_dir, "directory served at /");
  add_grid_flags(serve_cmd, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::invalid_config);
  }

  try {
    if (*transform_cmd) return cmd_transform(input, flags);
    if (*decompose_cmd) return cmd_decompose(input, stack_dir, flags);
    if (*manipulate_cmd) return cmd_manipulate(input, stack_dir, flags);
    if (*sod_cmd) return cmd_sod(input, stack_dir, flags, orientations, confidence);
    if (*serve_cmd) return cmd_serve(flags, host, port, ttl, static_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(classify(e));
  }
  return 0;
}
