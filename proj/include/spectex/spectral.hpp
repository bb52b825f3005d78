#ifndef SPECTEX_SPECTRAL_HPP_
#define SPECTEX_SPECTRAL_HPP_

#include <variant>
#include <vector>

#include "spectex/image.hpp"
#include "spectex/tvflow.hpp"

namespace spectex {

/// Spectral TV decomposition of an image on a finite time grid.
///
/// layers[j] is φ at interior grid node j+1, φ = t·u_tt, with u_tt the
/// three-point divided difference on the (possibly non-uniform) grid.
/// Integrating by parts over [0, T] gives the exact finite-horizon identity
///
///   f = Σ_j w_j φ_j + residual,   residual = u(T) − T·u_t(T),
///
/// where w_j are trapezoid weights and u_t(T) is the backward difference
/// kept in `terminal_rate`. The identity holds to rounding for any grid.
struct SpectralStack {
  TimeGrid grid;
  std::vector<ScalarField> layers;
  ScalarField residual;
  ScalarField terminal_rate;
  double mean_value = 0.0;
  bool converged = true;

  int width() const { return residual.width(); }
  int height() const { return residual.height(); }
  std::size_t layer_count() const { return layers.size(); }
  /// Time of layer j.
  double time(std::size_t j) const { return grid[j + 1]; }
  /// Quadrature weight of layer j.
  double weight(std::size_t j) const { return grid.quadrature_weight(j + 1); }
  std::vector<double> layer_times() const { return grid.interior(); }

  void validate() const;
};

struct Spectrum {
  std::vector<double> times;
  std::vector<double> values;

  /// Σ S_k·w_k with the stack's quadrature weights.
  double mass(const std::vector<double>& weights) const;
  std::size_t argmax() const;
};

/// Either one gain per layer, or one gain field per layer.
class TransferFunction {
 public:
  explicit TransferFunction(std::vector<double> gains);
  explicit TransferFunction(std::vector<ScalarField> gains);

  static TransferFunction constant(std::size_t layers, double value);
  /// 1 on layers with lo ≤ t ≤ hi, 0 elsewhere.
  static TransferFunction band(const SpectralStack& stack, double lo, double hi);

  std::size_t size() const;
  bool spatial() const { return std::holds_alternative<std::vector<ScalarField>>(gains_); }
  const std::vector<double>& scalar_gains() const;
  const std::vector<ScalarField>& field_gains() const;

 private:
  std::variant<std::vector<double>, std::vector<ScalarField>> gains_;
};

SpectralStack transform(const ScalarField& f, const TimeGrid& grid,
                        const FlowParams& params);
SpectralStack transform_trajectory(const FlowTrajectory& trajectory);

Spectrum spectrum(const SpectralStack& stack);

/// Σ_k H_k(x)·φ_k(x)·w_k, plus the residual when requested.
ScalarField filter(const SpectralStack& stack, const TransferFunction& h,
                   bool include_residual);

ScalarField reconstruct(const SpectralStack& stack);

/// TV-flow state at time t recovered from the stack with
/// H^t(τ) = max(0, (τ − t)/τ). The finite-horizon correction t·u_t(T) is
/// added so the result is exact at grid nodes and linear between them.
ScalarField flow_from_stack(const SpectralStack& stack, double t);

/// |⟨u(t_k) − f̄, φ_k⟩| / (‖u(t_k) − f̄‖·‖φ_k‖ + ε) for layer j (grid node
/// j+1). Layers whose norm is negligible against the strongest layer are
/// treated as zero and report 0.
double orthogonality_defect(const SpectralStack& stack,
                            const FlowTrajectory& trajectory, std::size_t j);

}  // namespace spectex

#endif  // SPECTEX_SPECTRAL_HPP_
