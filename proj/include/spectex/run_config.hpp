#ifndef SPECTEX_RUN_CONFIG_HPP_
#define SPECTEX_RUN_CONFIG_HPP_

#include <filesystem>
#include <string>

#include <json.hpp>

#include "spectex/surface.hpp"
#include "spectex/tvflow.hpp"

namespace spectex {

enum class GridKind { geometric, uniform };

std::string to_string(GridKind kind);
GridKind grid_kind_from_string(const std::string& name);
std::string to_string(DualSolver solver);
DualSolver dual_solver_from_string(const std::string& name);

struct GridPolicy {
  GridKind kind = GridKind::geometric;
  double t_min = 0.05;  // ignored by the uniform grid
  double t_max = 8.0;
  int steps = 60;

  void validate() const;
  TimeGrid make() const;
};

/// Everything a CLI run or a service request needs, resolved.
struct RunConfig {
  GridPolicy grid;
  FlowParams flow;
  double band_lo = 0.0;
  double band_hi = 0.0;
  SeparationConfig separation;
  double gain = 1.0;
  bool clamp = true;
  std::string mask;  // empty: whole image
  std::string out = "out";

  /// Ranges owned by every module; the band is checked by require_band.
  void validate() const;
  void require_band() const;
};

nlohmann::json to_json(const RunConfig& config);
/// Missing keys keep the values already in `base`. Unknown keys are rejected.
RunConfig merge_json(RunConfig base, const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

}  // namespace spectex

#endif  // SPECTEX_RUN_CONFIG_HPP_
