#include "spectex/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "spectex/errors.hpp"

namespace spectex {

void SpectralStack::validate() const {
  if (layers.size() + 2 != grid.size()) {
    throw ContractError("stack layer count must equal grid size minus 2");
  }
  for (const auto& layer : layers) {
    if (!layer.same_shape(residual)) throw ContractError("stack layer shape mismatch");
  }
  if (!terminal_rate.same_shape(residual)) {
    throw ContractError("stack terminal rate shape mismatch");
  }
}

double Spectrum::mass(const std::vector<double>& weights) const {
  if (weights.size() != values.size()) throw ContractError("weight count mismatch");
  double m = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) m += values[k] * weights[k];
  return m;
}

std::size_t Spectrum::argmax() const {
  return static_cast<std::size_t>(
      std::max_element(values.begin(), values.end()) - values.begin());
}

TransferFunction::TransferFunction(std::vector<double> gains)
    : gains_(std::move(gains)) {
  for (double g : std::get<0>(gains_)) {
    if (!std::isfinite(g)) throw ContractError("transfer function must be finite");
  }
}

TransferFunction::TransferFunction(std::vector<ScalarField> gains)
    : gains_(std::move(gains)) {
  for (const auto& g : std::get<1>(gains_)) {
    if (!g.all_finite()) throw ContractError("transfer function must be finite");
  }
}

TransferFunction TransferFunction::constant(std::size_t layers, double value) {
  return TransferFunction(std::vector<double>(layers, value));
}

TransferFunction TransferFunction::band(const SpectralStack& stack, double lo,
                                        double hi) {
  std::vector<double> gains(stack.layer_count(), 0.0);
  for (std::size_t j = 0; j < gains.size(); ++j) {
    const double t = stack.time(j);
    if (t >= lo && t <= hi) gains[j] = 1.0;
  }
  return TransferFunction(std::move(gains));
}

std::size_t TransferFunction::size() const {
  return std::visit([](const auto& v) { return v.size(); }, gains_);
}

const std::vector<double>& TransferFunction::scalar_gains() const {
  return std::get<0>(gains_);
}

const std::vector<ScalarField>& TransferFunction::field_gains() const {
  return std::get<1>(gains_);
}

namespace {

// φ_k = t_k · 2[(u₊ − u)/h₊ − (u − u₋)/h₋] / (h₊ + h₋)
ScalarField second_difference_layer(const ScalarField& prev, const ScalarField& cur,
                                    const ScalarField& next, double t_prev,
                                    double t_cur, double t_next) {
  const double h_minus = t_cur - t_prev;
  const double h_plus = t_next - t_cur;
  const double scale = 2.0 * t_cur / (h_plus + h_minus);
  ScalarField phi(cur.width(), cur.height());
  for (std::size_t i = 0; i < cur.size(); ++i) {
    const double slope_plus = (next[i] - cur[i]) / h_plus;
    const double slope_minus = (cur[i] - prev[i]) / h_minus;
    phi[i] = scale * (slope_plus - slope_minus);
  }
  return phi;
}

struct StackBuilder {
  const TimeGrid& grid;
  std::vector<ScalarField> layers;
  std::optional<ScalarField> prev;
  std::optional<ScalarField> cur;
  std::optional<ScalarField> first;
  bool converged = true;

  void push(std::size_t k, const ScalarField& u, FlowStepStats stats) {
    if (k == 0) first = u;
    converged = converged && stats.converged;
    if (prev && cur) {
      layers.push_back(second_difference_layer(*prev, *cur, u, grid[k - 2],
                                               grid[k - 1], grid[k]));
    }
    prev = std::move(cur);
    cur = u;
  }

  SpectralStack finish() {
    const std::size_t n = grid.size() - 1;
    const double horizon = grid[n];
    const double h = grid.step(n - 1);
    ScalarField rate(cur->width(), cur->height());
    ScalarField residual(cur->width(), cur->height());
    for (std::size_t i = 0; i < cur->size(); ++i) {
      rate[i] = ((*cur)[i] - (*prev)[i]) / h;
      residual[i] = (*cur)[i] - horizon * rate[i];
    }
    SpectralStack stack{grid, std::move(layers), std::move(residual),
                        std::move(rate), first->mean(), converged};
    return stack;
  }
};

}  // namespace

SpectralStack transform(const ScalarField& f, const TimeGrid& grid,
                        const FlowParams& params) {
  StackBuilder builder{grid, {}, {}, {}, {}};
  builder.layers.reserve(grid.size() - 2);
  evolve_streaming(f, grid, params,
                   [&](std::size_t k, const ScalarField& u, FlowStepStats s) {
                     builder.push(k, u, s);
                   });
  return builder.finish();
}

SpectralStack transform_trajectory(const FlowTrajectory& trajectory) {
  if (trajectory.states.size() != trajectory.grid.size()) {
    throw ContractError("trajectory does not cover its grid");
  }
  StackBuilder builder{trajectory.grid, {}, {}, {}, {}};
  for (std::size_t k = 0; k < trajectory.states.size(); ++k) {
    const FlowStepStats stats =
        k == 0 ? FlowStepStats{true, 0} : trajectory.steps[k - 1];
    builder.push(k, trajectory.states[k], stats);
  }
  return builder.finish();
}

Spectrum spectrum(const SpectralStack& stack) {
  Spectrum s{stack.layer_times(), {}};
  s.values.reserve(stack.layer_count());
  for (const auto& layer : stack.layers) s.values.push_back(l1_norm(layer));
  return s;
}

ScalarField filter(const SpectralStack& stack, const TransferFunction& h,
                   bool include_residual) {
  if (h.size() != stack.layer_count()) {
    throw ContractError("transfer function length " + std::to_string(h.size()) +
                        " does not match " + std::to_string(stack.layer_count()) +
                        " layers");
  }
  if (h.spatial()) {
    for (const auto& g : h.field_gains()) {
      if (!g.same_shape(stack.residual)) {
        throw ContractError("spatial transfer function shape mismatch");
      }
    }
  }
  ScalarField out(stack.width(), stack.height(), 0.0);
  for (std::size_t j = 0; j < stack.layer_count(); ++j) {
    const double w = stack.weight(j);
    const ScalarField& phi = stack.layers[j];
    if (!h.spatial()) {
      const double g = h.scalar_gains()[j];
      if (g == 0.0) continue;
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += g * phi[i] * w;
    } else {
      const ScalarField& g = h.field_gains()[j];
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += g[i] * phi[i] * w;
    }
  }
  if (include_residual) out += stack.residual;
  return out;
}

ScalarField reconstruct(const SpectralStack& stack) {
  return filter(stack, TransferFunction::constant(stack.layer_count(), 1.0), true);
}

ScalarField flow_from_stack(const SpectralStack& stack, double t) {
  if (!(t >= 0.0 && t <= stack.grid.horizon())) {
    throw RangeError("flow time " + std::to_string(t) + " outside grid [0, " +
                     std::to_string(stack.grid.horizon()) + "]");
  }
  std::vector<double> gains(stack.layer_count());
  for (std::size_t j = 0; j < gains.size(); ++j) {
    const double tau = stack.time(j);
    gains[j] = tau > t ? (tau - t) / tau : 0.0;
  }
  ScalarField out = filter(stack, TransferFunction(std::move(gains)), true);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += t * stack.terminal_rate[i];
  return out;
}

double orthogonality_defect(const SpectralStack& stack,
                            const FlowTrajectory& trajectory, std::size_t j) {
  if (j >= stack.layer_count()) throw RangeError("layer index out of range");
  if (trajectory.states.size() != stack.grid.size()) {
    throw ContractError("trajectory does not match stack grid");
  }
  const ScalarField& phi = stack.layers[j];
  ScalarField u = trajectory.states[j + 1];
  for (double& v : u.values()) v -= stack.mean_value;

  double strongest = 0.0;
  for (const auto& layer : stack.layers) strongest = std::max(strongest, l2_norm(layer));
  const double phi_norm = l2_norm(phi);
  if (phi_norm <= 1e-6 * strongest || phi_norm == 0.0) return 0.0;
  constexpr double kEps = 1e-12;
  return std::abs(dot(u, phi)) / (l2_norm(u) * phi_norm + kEps);
}

}  // namespace spectex
