#ifndef SPECTEX_TVFLOW_HPP_
#define SPECTEX_TVFLOW_HPP_

#include <vector>

#include "spectex/image.hpp"

namespace spectex {

/// Strictly increasing evolution times starting at 0, at least 4 nodes.
class TimeGrid {
 public:
  explicit TimeGrid(std::vector<double> times);

  /// {0, t_min, t_min·ρ, …, t_max} with `steps` positive nodes.
  static TimeGrid geometric(double t_min, double t_max, int steps);
  /// {0, Δ, 2Δ, …, t_max} with `steps` positive nodes.
  static TimeGrid uniform(double t_max, int steps);

  const std::vector<double>& times() const { return times_; }
  std::size_t size() const { return times_.size(); }
  double operator[](std::size_t k) const { return times_[k]; }
  double step(std::size_t k) const { return times_[k + 1] - times_[k]; }
  double horizon() const { return times_.back(); }

  /// Times of the nodes that carry a spectral layer (all but the ends).
  std::vector<double> interior() const;

  /// Trapezoid weight (t_{k+1} − t_{k−1}) / 2 of interior node k (1-based
  /// grid index).
  double quadrature_weight(std::size_t k) const;

  TimeGrid scaled(double factor) const;

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  std::vector<double> times_;
};

enum class DualSolver {
  /// Chambolle's semi-implicit fixed-point iteration.
  chambolle,
  /// Projected dual gradient with Nesterov momentum and adaptive restart.
  /// Runs at half the configured dual step so the step stays ≤ 1/8.
  accelerated,
};

struct FlowParams {
  int max_inner_iters = 200;
  double dual_step = 0.248;
  /// Stop once ‖p_{n+1} − p_n‖ ≤ inner_tol·‖p_{n+1}‖ on the dual field.
  double inner_tol = 1e-5;
  DualSolver solver = DualSolver::accelerated;

  void validate() const;
};

/// Chambolle dual variable; kept between time steps as a warm start.
struct DualField {
  DualField(int width, int height)
      : px(width, height, 0.0), py(width, height, 0.0) {}
  ScalarField px;
  ScalarField py;
};

struct ProxResult {
  ScalarField u;
  bool converged = false;
  int iterations = 0;
};

/// Approximately minimises J(u) + ‖u − g‖² / (2θ) with J the isotropic
/// discrete TV (Neumann boundary). `dual` is used as the starting point and
/// overwritten with the final dual field when supplied.
ProxResult rof_prox(const ScalarField& g, double theta, const FlowParams& params,
                    DualField* dual = nullptr);

struct FlowStepStats {
  bool converged = false;
  int iterations = 0;
};

struct FlowTrajectory {
  TimeGrid grid;
  std::vector<ScalarField> states;   // u(t_k), one per grid node
  std::vector<FlowStepStats> steps;  // one per transition k → k+1

  bool all_converged() const;
};

/// Implicit TV-flow: u(t₀) = f, u(t_{k+1}) = prox_{dt_k·J}(u(t_k)).
FlowTrajectory evolve(const ScalarField& f, const TimeGrid& grid,
                      const FlowParams& params);

/// Visits each state as it is produced instead of storing the trajectory.
/// The callback receives (k, u(t_k), step stats for k−1 → k).
template <typename Visitor>
void evolve_streaming(const ScalarField& f, const TimeGrid& grid,
                      const FlowParams& params, Visitor&& visit);

/// Σ sqrt(∂x u² + ∂y u²) with forward differences, zero across the border.
double tv_energy(const ScalarField& u);

namespace detail {
void check_flow_inputs(const ScalarField& f, const FlowParams& params);
}

template <typename Visitor>
void evolve_streaming(const ScalarField& f, const TimeGrid& grid,
                      const FlowParams& params, Visitor&& visit) {
  detail::check_flow_inputs(f, params);
  DualField dual(f.width(), f.height());
  ScalarField u = f;
  visit(std::size_t{0}, static_cast<const ScalarField&>(u), FlowStepStats{true, 0});
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    ProxResult step = rof_prox(u, grid.step(k), params, &dual);
    u = std::move(step.u);
    visit(k + 1, static_cast<const ScalarField&>(u),
          FlowStepStats{step.converged, step.iterations});
  }
}

}  // namespace spectex

#endif  // SPECTEX_TVFLOW_HPP_
