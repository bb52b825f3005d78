#include "spectex/surface.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "spectex/errors.hpp"
#include "spectex/stats.hpp"

namespace spectex {

std::string to_string(FitKind kind) {
  return kind == FitKind::plane ? "plane" : "local";
}

FitKind fit_kind_from_string(const std::string& name) {
  if (name == "plane") return FitKind::plane;
  if (name == "local") return FitKind::local;
  throw ParameterError("unknown fit kind '" + name + "' (expected plane or local)");
}

void SeparationConfig::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ParameterError("alpha must be >= 0");
  if (!(upper_factor >= 1.0)) throw ParameterError("upper factor must be >= 1");
  if (!(pct_lo >= 0.0 && pct_lo < pct_hi && pct_hi <= 100.0)) {
    throw ParameterError("percentiles must satisfy 0 <= pct_lo < pct_hi <= 100");
  }
  if (boundary_margin < 0) throw ParameterError("boundary margin must be >= 0");
  if (!(bandwidth >= 0.0)) throw ParameterError("bandwidth must be >= 0");
  if (plane.irls_rounds < 0 || !(plane.tukey_c > 0.0)) {
    throw ParameterError("invalid robust plane options");
  }
}

std::size_t TimeMap::present_count() const {
  return static_cast<std::size_t>(std::count(present.begin(), present.end(), 1));
}

TimeMap salient_time_map(const SpectralStack& stack, double t1, double t2) {
  if (!(t1 < t2)) throw RangeError("salient band needs t1 < t2");
  std::vector<std::size_t> band;
  for (std::size_t j = 0; j < stack.layer_count(); ++j) {
    if (stack.time(j) >= t1 && stack.time(j) <= t2) band.push_back(j);
  }
  if (band.empty()) {
    throw RangeError("band [" + std::to_string(t1) + ", " + std::to_string(t2) +
                     "] contains no grid layer");
  }
  const int w = stack.width();
  const int h = stack.height();
  TimeMap tm{ScalarField(w, h), ScalarField(w, h),
             std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h, 0),
             stack.time(band.front()), stack.time(band.back()),
             stack.time(0), stack.time(stack.layer_count() - 1)};
  for (std::size_t i = 0; i < tm.time.size(); ++i) {
    double best = 0.0;
    for (std::size_t j : band) {
      // Strict comparison keeps the earliest time on ties.
      const double s = std::abs(stack.layers[j][i]);
      if (s > best) {
        best = s;
        tm.time[i] = stack.time(j);
      }
    }
    tm.salience[i] = best;
    tm.present[i] = best > 0.0;
  }
  return tm;
}

SampleSet filter_time_map(const TimeMap& tm, double pct_lo, double pct_hi,
                          int boundary_margin) {
  if (!(pct_lo >= 0.0 && pct_lo < pct_hi && pct_hi <= 100.0)) {
    throw ParameterError("percentiles must satisfy 0 <= pct_lo < pct_hi <= 100");
  }
  const int w = tm.width();
  const int h = tm.height();
  auto interior = [&](int x, int y) {
    return x >= boundary_margin && y >= boundary_margin && x < w - boundary_margin &&
           y < h - boundary_margin;
  };
  std::vector<double> saliences;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = tm.time.index(x, y);
      if (tm.present[i] && interior(x, y)) saliences.push_back(tm.salience[i]);
    }
  }
  SampleSet set{w, h, tm.grid_lo, tm.grid_hi, {}};
  if (!saliences.empty()) {
    const double lo = percentile(saliences, pct_lo);
    const double hi = percentile(saliences, pct_hi);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = tm.time.index(x, y);
        if (!tm.present[i] || !interior(x, y)) continue;
        const double s = tm.salience[i];
        if (s >= lo && s <= hi) set.samples.push_back({double(x), double(y), tm.time[i], s});
      }
    }
  }
  if (set.samples.size() < 10) {
    throw InsufficientDataError("only " + std::to_string(set.samples.size()) +
                                " time-map samples survive filtering (need 10)");
  }
  return set;
}

namespace {

struct PlaneSolve {
  PlaneCoefficients coef;
  double residual_scale = 0.0;
  double inlier_fraction = 1.0;
};

void check_samples(const SampleSet& set) {
  if (set.samples.size() < 10) {
    throw InsufficientDataError("surface fit needs at least 10 samples");
  }
  if (set.width < 1 || set.height < 1) throw ContractError("sample set without image size");
  for (const Sample& s : set.samples) {
    if (!(s.weight >= 0.0) || !std::isfinite(s.t)) {
      throw ContractError("samples need finite times and non-negative weights");
    }
  }
}

// Weighted least squares in centred coordinates; the centring keeps (a, b)
// independent of a translation of the samples.
PlaneCoefficients weighted_plane(const std::vector<Sample>& samples,
                                 const std::vector<double>& weights) {
  double wsum = 0.0, mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    wsum += weights[i];
    mx += weights[i] * samples[i].x;
    my += weights[i] * samples[i].y;
  }
  if (!(wsum > 0.0)) throw DegenerateGeometryError("all sample weights are zero");
  mx /= wsum;
  my /= wsum;

  Eigen::MatrixXd design(samples.size(), 3);
  Eigen::VectorXd rhs(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double sw = std::sqrt(weights[i]);
    design(i, 0) = sw * (samples[i].x - mx);
    design(i, 1) = sw * (samples[i].y - my);
    design(i, 2) = sw;
    rhs(i) = sw * samples[i].t;
  }
  // Scale-aware rank test: columns are normalised before the QR.
  Eigen::Vector3d scale = design.colwise().norm().transpose();
  for (int k = 0; k < 3; ++k) {
    if (!(scale(k) > 0.0)) throw DegenerateGeometryError("samples are collinear in (x, y)");
  }
  Eigen::MatrixXd normalised = design * scale.cwiseInverse().asDiagonal();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(normalised);
  qr.setThreshold(1e-9);
  if (qr.rank() < 3) throw DegenerateGeometryError("samples are collinear in (x, y)");
  const Eigen::Vector3d sol = qr.solve(rhs).cwiseQuotient(scale);
  return {sol(0), sol(1), sol(2) - sol(0) * mx - sol(1) * my};
}

PlaneSolve robust_plane(const SampleSet& set, const PlaneFitOptions& options) {
  const auto& samples = set.samples;
  std::vector<double> robust(samples.size(), 1.0);
  std::vector<double> weights(samples.size());
  std::vector<double> residuals(samples.size());
  PlaneSolve out;

  for (int round = 0; round <= options.irls_rounds; ++round) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      weights[i] = samples[i].weight * robust[i];
    }
    out.coef = weighted_plane(samples, weights);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      residuals[i] = samples[i].t - (out.coef.a * samples[i].x +
                                     out.coef.b * samples[i].y + out.coef.c);
    }
    const double mid = median(residuals);
    std::vector<double> dev(residuals.size());
    for (std::size_t i = 0; i < dev.size(); ++i) dev[i] = std::abs(residuals[i] - mid);
    out.residual_scale = 1.4826 * median(dev);
    const double tiny = 1e-12 * (1.0 + std::abs(out.coef.c));
    if (round == options.irls_rounds || out.residual_scale <= tiny) break;

    const double cut = options.tukey_c * out.residual_scale;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const double u = residuals[i] / cut;
      robust[i] = std::abs(u) < 1.0 ? (1.0 - u * u) * (1.0 - u * u) : 0.0;
    }
  }
  std::size_t inliers = 0;
  for (double r : robust) inliers += r > 0.0;
  out.inlier_fraction = static_cast<double>(inliers) / static_cast<double>(samples.size());
  return out;
}

double clamp_time(double t, const SampleSet& set) {
  return std::clamp(t, set.grid_lo, set.grid_hi);
}

}  // namespace

SurfaceField fit_plane(const SampleSet& samples, const PlaneFitOptions& options) {
  check_samples(samples);
  const PlaneSolve solve = robust_plane(samples, options);
  ScalarField time(samples.width, samples.height);
  for (int y = 0; y < samples.height; ++y) {
    for (int x = 0; x < samples.width; ++x) {
      time(x, y) = clamp_time(solve.coef.a * x + solve.coef.b * y + solve.coef.c, samples);
    }
  }
  SurfaceField out{std::move(time), FitKind::plane, solve.coef, solve.residual_scale,
                   solve.inlier_fraction, 0.0, 0.0};
  return out;
}

SurfaceField fit_surface_local(const SampleSet& samples, double bandwidth,
                               const LocalFitOptions& options,
                               const PlaneFitOptions& plane_options) {
  check_samples(samples);
  if (!(bandwidth > 0.0)) throw ParameterError("local bandwidth must be positive");
  const PlaneSolve global = robust_plane(samples, plane_options);
  const int w = samples.width;
  const int h = samples.height;

  // Local fits are evaluated on a lattice and interpolated bilinearly; both
  // steps reproduce affine data exactly.
  const int stride = std::max(1, static_cast<int>(bandwidth / 4.0));
  std::vector<int> xs, ys;
  for (int x = 0; x < w - 1; x += stride) xs.push_back(x);
  xs.push_back(w - 1);
  for (int y = 0; y < h - 1; y += stride) ys.push_back(y);
  ys.push_back(h - 1);

  const double inv_two_bw2 = 1.0 / (2.0 * bandwidth * bandwidth);
  const double cutoff2 = 16.0 * bandwidth * bandwidth;
  std::vector<double> lattice(xs.size() * ys.size());
  std::size_t fallbacks = 0;
  for (std::size_t iy = 0; iy < ys.size(); ++iy) {
    for (std::size_t ix = 0; ix < xs.size(); ++ix) {
      const double cx = xs[ix];
      const double cy = ys[iy];
      Eigen::Matrix3d normal = Eigen::Matrix3d::Zero();
      Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
      double mass = 0.0;
      for (const Sample& s : samples.samples) {
        const double dx = s.x - cx;
        const double dy = s.y - cy;
        const double d2 = dx * dx + dy * dy;
        if (d2 > cutoff2) continue;
        const double k = std::exp(-d2 * inv_two_bw2);
        mass += k;
        const double wk = k * s.weight;
        const Eigen::Vector3d row(1.0, dx, dy);
        normal += wk * row * row.transpose();
        rhs += wk * s.t * row;
      }
      double value = global.coef.a * cx + global.coef.b * cy + global.coef.c;
      bool local_ok = mass >= options.min_local_mass;
      if (local_ok) {
        Eigen::LDLT<Eigen::Matrix3d> ldlt(normal);
        const Eigen::Vector3d diag = normal.diagonal();
        const bool conditioned =
            ldlt.info() == Eigen::Success && diag.minCoeff() > 0.0 &&
            ldlt.vectorD().cwiseAbs().minCoeff() > 1e-10 * diag.maxCoeff();
        if (conditioned) {
          value = ldlt.solve(rhs)(0);
        } else {
          local_ok = false;
        }
      }
      if (!local_ok) ++fallbacks;
      lattice[iy * xs.size() + ix] = value;
    }
  }

  ScalarField time(w, h);
  std::size_t ix = 0;
  std::size_t iy = 0;
  for (int y = 0; y < h; ++y) {
    while (iy + 2 < ys.size() && y > ys[iy + 1]) ++iy;
    const std::size_t iy1 = std::min(iy + 1, ys.size() - 1);
    const double fy = iy1 == iy ? 0.0 : double(y - ys[iy]) / double(ys[iy1] - ys[iy]);
    ix = 0;
    for (int x = 0; x < w; ++x) {
      while (ix + 2 < xs.size() && x > xs[ix + 1]) ++ix;
      const std::size_t ix1 = std::min(ix + 1, xs.size() - 1);
      const double fx = ix1 == ix ? 0.0 : double(x - xs[ix]) / double(xs[ix1] - xs[ix]);
      const double v00 = lattice[iy * xs.size() + ix];
      const double v10 = lattice[iy * xs.size() + ix1];
      const double v01 = lattice[iy1 * xs.size() + ix];
      const double v11 = lattice[iy1 * xs.size() + ix1];
      const double v = (1 - fy) * ((1 - fx) * v00 + fx * v10) + fy * ((1 - fx) * v01 + fx * v11);
      time(x, y) = clamp_time(v, samples);
    }
  }
  SurfaceField out{std::move(time), FitKind::local, global.coef, global.residual_scale,
                   global.inlier_fraction,
                   static_cast<double>(fallbacks) / static_cast<double>(lattice.size()),
                   bandwidth};
  return out;
}

Stratum make_stratum(const SurfaceField& surface, const TimeGrid& grid,
                     double alpha, double t1, double t2, double upper_factor) {
  if (!(alpha >= 0.0)) throw ParameterError("alpha must be >= 0");
  if (!(upper_factor >= 1.0)) throw ParameterError("upper factor must be >= 1");
  const std::vector<double> times = grid.interior();
  const double lo_clip = std::max(0.5 * t1, times.front());
  const double hi_clip = std::min(2.0 * t2, times.back());
  const int w = surface.time.width();
  const int h = surface.time.height();
  Stratum st{ScalarField(w, h), ScalarField(w, h), ScalarField(w, h), surface.time,
             std::vector<int>(surface.time.size(), 0)};
  for (std::size_t i = 0; i < surface.time.size(); ++i) {
    const double ts = surface.time[i];
    const double half = alpha * ts;
    st.half_width[i] = half;
    st.lower[i] = std::min(ts, std::max(lo_clip, ts - half));
    st.upper[i] = std::max(ts, std::min(hi_clip, ts + upper_factor * half));
    const auto it = std::lower_bound(times.begin(), times.end(), ts);
    std::size_t k = static_cast<std::size_t>(it - times.begin());
    if (k == times.size()) {
      k = times.size() - 1;
    } else if (k > 0 && ts - times[k - 1] <= times[k] - ts) {
      --k;
    }
    st.anchor_layer[i] = static_cast<int>(k);
  }
  return st;
}

StratumSplit extract_stratum(const SpectralStack& stack, const Stratum& stratum) {
  if (!stratum.lower.same_shape(stack.residual)) {
    throw ContractError("stratum and stack dimensions differ");
  }
  std::vector<ScalarField> gains;
  gains.reserve(stack.layer_count());
  for (std::size_t j = 0; j < stack.layer_count(); ++j) {
    ScalarField g(stack.width(), stack.height(), 0.0);
    const double t = stack.time(j);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = stratum.contains(i, j, t) ? 1.0 : 0.0;
    gains.push_back(std::move(g));
  }
  ScalarField texture = filter(stack, TransferFunction(std::move(gains)), false);
  ScalarField residual = reconstruct(stack) - texture;
  return {std::move(texture), std::move(residual)};
}

Decomposition decompose_stack(const SpectralStack& stack, double t1, double t2,
                              const SeparationConfig& config) {
  config.validate();
  if (!(t1 < t2)) throw RangeError("decomposition band needs t1 < t2");
  TimeMap tm = salient_time_map(stack, t1, t2);
  SampleSet samples = filter_time_map(tm, config.pct_lo, config.pct_hi, config.boundary_margin);
  const double diag = std::hypot(double(stack.width()), double(stack.height()));
  const double bw = config.bandwidth > 0.0 ? config.bandwidth : diag / 6.0;
  SurfaceField surface = config.fit == FitKind::plane
                             ? fit_plane(samples, config.plane)
                             : fit_surface_local(samples, bw, config.local, config.plane);
  Stratum stratum = make_stratum(surface, stack.grid, config.alpha, t1, t2, config.upper_factor);
  StratumSplit split = extract_stratum(stack, stratum);
  return {std::move(split.texture), std::move(split.residual), spectrum(stack),
          std::move(tm), std::move(samples), std::move(surface), std::move(stratum)};
}

Decomposition decompose(const ScalarField& f, const TimeGrid& grid,
                        const FlowParams& flow, double t1, double t2,
                        const SeparationConfig& config) {
  config.validate();
  if (!(t1 < t2)) throw RangeError("decomposition band needs t1 < t2");
  const SpectralStack stack = transform(f, grid, flow);
  Decomposition d = decompose_stack(stack, t1, t2, config);
  d.residual = f - d.texture;
  return d;
}

}  // namespace spectex
