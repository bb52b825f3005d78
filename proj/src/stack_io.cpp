#include "spectex/stack_io.hpp"

#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <string>

#include "spectex/errors.hpp"
#include "spectex/image_io.hpp"

namespace spectex {

namespace {

constexpr const char* kFormat = "spectex-stack";
constexpr int kVersion = 1;

std::string layer_name(std::size_t j) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "phi_%04zu.f32", j);
  return buf;
}

}  // namespace

void save_stack(const SpectralStack& stack, const std::filesystem::path& dir) {
  stack.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create stack directory " + dir.string());

  nlohmann::json manifest;
  manifest["format"] = kFormat;
  manifest["version"] = kVersion;
  manifest["width"] = stack.width();
  manifest["height"] = stack.height();
  manifest["mean_value"] = stack.mean_value;
  manifest["converged"] = stack.converged;
  manifest["times"] = stack.grid.times();
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t j = 0; j < stack.layer_count(); ++j) {
    layers.push_back(layer_name(j));
    write_raw_f32(stack.layers[j], dir / layer_name(j));
  }
  manifest["layers"] = layers;
  manifest["residual"] = "residual.f32";
  manifest["terminal_rate"] = "terminal_rate.f32";
  write_raw_f32(stack.residual, dir / "residual.f32");
  write_raw_f32(stack.terminal_rate, dir / "terminal_rate.f32");

  const std::string text = manifest.dump(2) + "\n";
  write_file(dir / "manifest.json",
             std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

SpectralStack load_stack(const std::filesystem::path& dir) {
  const Bytes raw = read_file(dir / "manifest.json");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(raw.begin(), raw.end());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed stack manifest: " + std::string(e.what()));
  }
  try {
    if (manifest.at("format").get<std::string>() != kFormat ||
        manifest.at("version").get<int>() != kVersion) {
      throw FormatError("unrecognised stack manifest format");
    }
    const int w = manifest.at("width").get<int>();
    const int h = manifest.at("height").get<int>();
    TimeGrid grid(manifest.at("times").get<std::vector<double>>());
    std::vector<ScalarField> layers;
    for (const auto& name : manifest.at("layers")) {
      layers.push_back(read_raw_f32(dir / name.get<std::string>(), w, h));
    }
    ScalarField residual =
        read_raw_f32(dir / manifest.at("residual").get<std::string>(), w, h);
    ScalarField rate =
        read_raw_f32(dir / manifest.at("terminal_rate").get<std::string>(), w, h);
    SpectralStack stack{std::move(grid), std::move(layers), std::move(residual),
                        std::move(rate), manifest.at("mean_value").get<double>(),
                        manifest.value("converged", true)};
    stack.validate();
    return stack;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("incomplete stack manifest: " + std::string(e.what()));
  }
}

}  // namespace spectex
