#include "spectex/tvflow.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spectex/errors.hpp"

namespace spectex {

TimeGrid::TimeGrid(std::vector<double> times) : times_(std::move(times)) {
  if (times_.size() < 4) {
    throw ParameterError("time grid needs at least 4 nodes");
  }
  if (times_.front() != 0.0) throw ParameterError("time grid must start at 0");
  for (std::size_t k = 1; k < times_.size(); ++k) {
    if (!std::isfinite(times_[k]) || !(times_[k] > times_[k - 1])) {
      throw ParameterError("time grid must be strictly increasing");
    }
  }
}

TimeGrid TimeGrid::geometric(double t_min, double t_max, int steps) {
  if (!(t_min > 0.0) || !(t_max > t_min) || steps < 3) {
    throw ParameterError("geometric grid needs 0 < t_min < t_max and steps >= 3");
  }
  const double ratio = std::pow(t_max / t_min, 1.0 / (steps - 1));
  std::vector<double> times{0.0};
  for (int k = 0; k < steps - 1; ++k) times.push_back(t_min * std::pow(ratio, k));
  times.push_back(t_max);
  return TimeGrid(std::move(times));
}

TimeGrid TimeGrid::uniform(double t_max, int steps) {
  if (!(t_max > 0.0) || steps < 3) {
    throw ParameterError("uniform grid needs t_max > 0 and steps >= 3");
  }
  std::vector<double> times{0.0};
  for (int k = 1; k < steps; ++k) times.push_back(t_max * k / steps);
  times.push_back(t_max);
  return TimeGrid(std::move(times));
}

std::vector<double> TimeGrid::interior() const {
  return {times_.begin() + 1, times_.end() - 1};
}

double TimeGrid::quadrature_weight(std::size_t k) const {
  if (k == 0 || k + 1 >= times_.size()) {
    throw RangeError("quadrature weight requested for a boundary node");
  }
  return 0.5 * (times_[k + 1] - times_[k - 1]);
}

TimeGrid TimeGrid::scaled(double factor) const {
  if (!(factor > 0.0)) throw ParameterError("grid scale factor must be positive");
  std::vector<double> times = times_;
  for (double& t : times) t *= factor;
  return TimeGrid(std::move(times));
}

void FlowParams::validate() const {
  if (max_inner_iters < 1) throw ParameterError("max_inner_iters must be >= 1");
  if (!(dual_step > 0.0 && dual_step <= 0.25)) {
    throw ParameterError("dual_step must lie in (0, 0.25]");
  }
  if (!(inner_tol > 0.0)) throw ParameterError("inner_tol must be positive");
}

namespace detail {

void check_flow_inputs(const ScalarField& f, const FlowParams& params) {
  params.validate();
  if (!f.all_finite()) throw ContractError("input field contains non-finite values");
}

}  // namespace detail

namespace {

// Divergence as the negative adjoint of the forward-difference gradient with
// zero flux across the image border.
void divergence(const ScalarField& px, const ScalarField& py, ScalarField& out) {
  const int w = px.width();
  const int h = px.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double d = 0.0;
      if (x < w - 1) d += px(x, y);
      if (x > 0) d -= px(x - 1, y);
      if (y < h - 1) d += py(x, y);
      if (y > 0) d -= py(x, y - 1);
      out(x, y) = d;
    }
  }
}

// v ← div p − g/θ
void dual_residual(const ScalarField& px, const ScalarField& py,
                   const ScalarField& g, double inv_theta, ScalarField& v) {
  divergence(px, py, v);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] -= g[i] * inv_theta;
}

template <typename Update>
void for_each_gradient(const ScalarField& v, Update&& update) {
  const int w = v.width();
  const int h = v.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double vc = v(x, y);
      const double gx = x < w - 1 ? v(x + 1, y) - vc : 0.0;
      const double gy = y < h - 1 ? v(x, y + 1) - vc : 0.0;
      update(v.index(x, y), gx, gy);
    }
  }
}

bool chambolle_iterations(const ScalarField& g, double inv_theta,
                          const FlowParams& params, DualField& p, int& iters) {
  const double tau = params.dual_step;
  const double tol2 = params.inner_tol * params.inner_tol;
  ScalarField v(g.width(), g.height());
  for (int it = 1; it <= params.max_inner_iters; ++it) {
    dual_residual(p.px, p.py, g, inv_theta, v);
    double change = 0.0;
    double norm = 0.0;
    for_each_gradient(v, [&](std::size_t i, double gx, double gy) {
      const double denom = 1.0 + tau * std::sqrt(gx * gx + gy * gy);
      const double nx = (p.px[i] + tau * gx) / denom;
      const double ny = (p.py[i] + tau * gy) / denom;
      change += (nx - p.px[i]) * (nx - p.px[i]) + (ny - p.py[i]) * (ny - p.py[i]);
      norm += nx * nx + ny * ny;
      p.px[i] = nx;
      p.py[i] = ny;
    });
    iters = it;
    if (change <= tol2 * norm) return true;
  }
  return false;
}

bool accelerated_iterations(const ScalarField& g, double inv_theta,
                            const FlowParams& params, DualField& p, int& iters) {
  const double tau = 0.5 * params.dual_step;
  const double tol2 = params.inner_tol * params.inner_tol;
  const int w = g.width();
  const int h = g.height();
  ScalarField v(w, h);
  DualField q = p;  // extrapolated point
  DualField next(w, h);
  double momentum = 1.0;
  for (int it = 1; it <= params.max_inner_iters; ++it) {
    dual_residual(q.px, q.py, g, inv_theta, v);
    for_each_gradient(v, [&](std::size_t i, double gx, double gy) {
      double nx = q.px[i] + tau * gx;
      double ny = q.py[i] + tau * gy;
      const double n = std::sqrt(nx * nx + ny * ny);
      if (n > 1.0) {
        nx /= n;
        ny /= n;
      }
      next.px[i] = nx;
      next.py[i] = ny;
    });

    double change = 0.0;
    double norm = 0.0;
    double restart = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double dx = next.px[i] - p.px[i];
      const double dy = next.py[i] - p.py[i];
      change += dx * dx + dy * dy;
      norm += next.px[i] * next.px[i] + next.py[i] * next.py[i];
      restart += (q.px[i] - next.px[i]) * dx + (q.py[i] - next.py[i]) * dy;
    }
    // Gradient-based adaptive restart: drop momentum once it points uphill.
    if (restart > 0.0) momentum = 1.0;
    const double momentum_next =
        0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    const double beta = (momentum - 1.0) / momentum_next;
    momentum = momentum_next;
    for (std::size_t i = 0; i < v.size(); ++i) {
      q.px[i] = next.px[i] + beta * (next.px[i] - p.px[i]);
      q.py[i] = next.py[i] + beta * (next.py[i] - p.py[i]);
    }
    std::swap(p, next);
    iters = it;
    if (change <= tol2 * norm) return true;
  }
  return false;
}

constexpr int kExtraRounds = 9;

}  // namespace

ProxResult rof_prox(const ScalarField& g, double theta, const FlowParams& params,
                    DualField* dual) {
  detail::check_flow_inputs(g, params);
  if (!(theta > 0.0) || !std::isfinite(theta)) {
    throw ParameterError("prox step theta must be positive");
  }
  DualField local(g.width(), g.height());
  DualField& p = dual != nullptr ? *dual : local;
  if (!p.px.same_shape(g)) throw ContractError("dual field shape mismatch");

  const double inv_theta = 1.0 / theta;
  ProxResult result{g, false, 0};
  ScalarField div(g.width(), g.height());
  auto solve = [&] {
    int iters = 0;
    result.converged =
        params.solver == DualSolver::chambolle
            ? chambolle_iterations(g, inv_theta, params, p, iters)
            : accelerated_iterations(g, inv_theta, params, p, iters);
    result.iterations += iters;
    divergence(p.px, p.py, div);
    for (std::size_t i = 0; i < div.size(); ++i) result.u[i] = g[i] - theta * div[i];
  };
  auto objective = [&] {
    double fidelity = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      fidelity += (result.u[i] - g[i]) * (result.u[i] - g[i]);
    }
    return tv_energy(result.u) + 0.5 * inv_theta * fidelity;
  };

  // A cold dual has to carry edge information across flat regions, which
  // takes far more iterations than a warm-started step; it gets the extra
  // budget up front.
  const bool cold = std::all_of(p.px.values().begin(), p.px.values().end(),
                                [](double v) { return v == 0.0; }) &&
                    std::all_of(p.py.values().begin(), p.py.values().end(),
                                [](double v) { return v == 0.0; });
  solve();
  for (int round = 0; cold && round < kExtraRounds && !result.converged; ++round) solve();

  // g scores J(g) on the prox objective, so any acceptable iterate has
  // J(u) <= J(g). A worse iterate gets more iterations from its dual; if it
  // is still worse after the extra budget the step keeps g.
  const double tv_g = tv_energy(g);
  for (int round = 0; round < kExtraRounds && objective() > tv_g; ++round) solve();
  if (objective() > tv_g) {
    result.u = g;
    result.converged = false;
  }
  return result;
}

bool FlowTrajectory::all_converged() const {
  for (const auto& s : steps) {
    if (!s.converged) return false;
  }
  return true;
}

FlowTrajectory evolve(const ScalarField& f, const TimeGrid& grid,
                      const FlowParams& params) {
  FlowTrajectory traj{grid, {}, {}};
  traj.states.reserve(grid.size());
  evolve_streaming(f, grid, params,
                   [&](std::size_t k, const ScalarField& u, FlowStepStats s) {
                     traj.states.push_back(u);
                     if (k > 0) traj.steps.push_back(s);
                   });
  return traj;
}

double tv_energy(const ScalarField& u) {
  const int w = u.width();
  const int h = u.height();
  double acc = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = x < w - 1 ? u(x + 1, y) - u(x, y) : 0.0;
      const double gy = y < h - 1 ? u(x, y + 1) - u(x, y) : 0.0;
      acc += std::sqrt(gx * gx + gy * gy);
    }
  }
  return acc;
}

}  // namespace spectex
