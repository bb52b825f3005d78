#include "spectex/run_config.hpp"

#include <cmath>
#include <set>

#include "spectex/errors.hpp"
#include "spectex/image_io.hpp"

namespace spectex {

using nlohmann::json;

std::string to_string(GridKind kind) {
  return kind == GridKind::geometric ? "geometric" : "uniform";
}

GridKind grid_kind_from_string(const std::string& name) {
  if (name == "geometric") return GridKind::geometric;
  if (name == "uniform") return GridKind::uniform;
  throw ParameterError("unknown grid '" + name + "' (expected uniform or geometric)");
}

std::string to_string(DualSolver solver) {
  return solver == DualSolver::accelerated ? "accelerated" : "chambolle";
}

DualSolver dual_solver_from_string(const std::string& name) {
  if (name == "accelerated") return DualSolver::accelerated;
  if (name == "chambolle") return DualSolver::chambolle;
  throw ParameterError("unknown solver '" + name + "' (expected accelerated or chambolle)");
}

void GridPolicy::validate() const {
  if (steps < 3) throw ParameterError("steps must be >= 3");
  if (!(t_max > 0.0) || !std::isfinite(t_max)) throw ParameterError("t_max must be positive");
  if (kind == GridKind::geometric && !(t_min > 0.0 && t_min < t_max)) {
    throw ParameterError("geometric grid needs 0 < t_min < t_max");
  }
}

TimeGrid GridPolicy::make() const {
  validate();
  return kind == GridKind::geometric ? TimeGrid::geometric(t_min, t_max, steps)
                                     : TimeGrid::uniform(t_max, steps);
}

void RunConfig::validate() const {
  grid.validate();
  flow.validate();
  separation.validate();
  if (!std::isfinite(gain)) throw ParameterError("gain must be finite");
  if (!std::isfinite(band_lo) || !std::isfinite(band_hi) || band_lo < 0.0) {
    throw ParameterError("band edges must be finite and non-negative");
  }
}

void RunConfig::require_band() const {
  if (!(band_lo < band_hi)) {
    throw ParameterError("band needs --band-lo < --band-hi");
  }
}

json to_json(const RunConfig& c) {
  return json{
      {"grid", to_string(c.grid.kind)},
      {"t_min", c.grid.t_min},
      {"t_max", c.grid.t_max},
      {"steps", c.grid.steps},
      {"solver", to_string(c.flow.solver)},
      {"max_inner_iters", c.flow.max_inner_iters},
      {"dual_step", c.flow.dual_step},
      {"inner_tol", c.flow.inner_tol},
      {"band_lo", c.band_lo},
      {"band_hi", c.band_hi},
      {"fit", to_string(c.separation.fit)},
      {"alpha", c.separation.alpha},
      {"upper_factor", c.separation.upper_factor},
      {"pct_lo", c.separation.pct_lo},
      {"pct_hi", c.separation.pct_hi},
      {"margin", c.separation.boundary_margin},
      {"bandwidth", c.separation.bandwidth},
      {"irls_rounds", c.separation.plane.irls_rounds},
      {"tukey_c", c.separation.plane.tukey_c},
      {"min_local_mass", c.separation.local.min_local_mass},
      {"gain", c.gain},
      {"clamp", c.clamp},
      {"mask", c.mask},
      {"out", c.out},
  };
}

namespace {

template <typename T>
void take(const json& j, const char* key, T& slot) {
  if (!j.contains(key)) return;
  try {
    slot = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParameterError(std::string("config key '") + key + "' has the wrong type");
  }
}

}  // namespace

RunConfig merge_json(RunConfig c, const json& j) {
  if (!j.is_object()) throw ParameterError("config must be a JSON object");
  static const std::set<std::string> known = {
      "grid", "t_min", "t_max", "steps", "solver", "max_inner_iters", "dual_step",
      "inner_tol", "band_lo", "band_hi", "fit", "alpha", "upper_factor", "pct_lo",
      "pct_hi", "margin", "bandwidth", "irls_rounds", "tukey_c", "min_local_mass",
      "gain", "clamp", "mask", "out"};
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) throw ParameterError("unknown config key '" + item.key() + "'");
  }
  std::string name;
  if (j.contains("grid")) {
    take(j, "grid", name);
    c.grid.kind = grid_kind_from_string(name);
  }
  take(j, "t_min", c.grid.t_min);
  take(j, "t_max", c.grid.t_max);
  take(j, "steps", c.grid.steps);
  if (j.contains("solver")) {
    take(j, "solver", name);
    c.flow.solver = dual_solver_from_string(name);
  }
  take(j, "max_inner_iters", c.flow.max_inner_iters);
  take(j, "dual_step", c.flow.dual_step);
  take(j, "inner_tol", c.flow.inner_tol);
  take(j, "band_lo", c.band_lo);
  take(j, "band_hi", c.band_hi);
  if (j.contains("fit")) {
    take(j, "fit", name);
    c.separation.fit = fit_kind_from_string(name);
  }
  take(j, "alpha", c.separation.alpha);
  take(j, "upper_factor", c.separation.upper_factor);
  take(j, "pct_lo", c.separation.pct_lo);
  take(j, "pct_hi", c.separation.pct_hi);
  take(j, "margin", c.separation.boundary_margin);
  take(j, "bandwidth", c.separation.bandwidth);
  take(j, "irls_rounds", c.separation.plane.irls_rounds);
  take(j, "tukey_c", c.separation.plane.tukey_c);
  take(j, "min_local_mass", c.separation.local.min_local_mass);
  take(j, "gain", c.gain);
  take(j, "clamp", c.clamp);
  take(j, "mask", c.mask);
  take(j, "out", c.out);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  const Bytes raw = read_file(path);
  json j = json::parse(raw.begin(), raw.end(), nullptr, false);
  if (j.is_discarded()) throw ParameterError("config file " + path.string() + " is not valid JSON");
  return merge_json(std::move(base), j);
}

}  // namespace spectex
