#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

#include "fixtures.hpp"
#include "spectex/errors.hpp"
#include "spectex/image_io.hpp"
#include "spectex/spectral.hpp"
#include "spectex/stack_io.hpp"

using namespace spectex;
namespace fs = std::filesystem;

namespace {

const TimeGrid& default_grid() {
  static const TimeGrid g = TimeGrid::geometric(0.05, 8, 60);
  return g;
}

const SpectralStack& composite_stack() {
  static const SpectralStack s =
      transform(fixtures::two_scale_composite(64), default_grid(), FlowParams{});
  return s;
}

ScalarField smooth_random(int n, std::uint64_t seed) {
  fixtures::Lcg rng{seed};
  ScalarField f(n, n, 0.5);
  for (int k = 0; k < 6; ++k) {
    const double fx = 1 + 3 * rng.next(), fy = 1 + 3 * rng.next();
    const double phase = 2 * fixtures::kPi * rng.next();
    const double amp = 0.05 + 0.05 * rng.next();
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        f(x, y) += amp * std::sin(2 * fixtures::kPi * (fx * x + fy * y) / n + phase);
      }
    }
  }
  return f;
}

FlowParams precise() {
  FlowParams p;
  p.max_inner_iters = 1000;
  p.inner_tol = 1e-6;
  return p;
}

std::vector<std::size_t> local_peaks(const std::vector<double>& v, double floor) {
  std::vector<std::size_t> peaks;
  for (std::size_t k = 1; k + 1 < v.size(); ++k) {
    if (v[k] > floor && v[k] >= v[k - 1] && v[k] > v[k + 1]) peaks.push_back(k);
  }
  return peaks;
}

}  // namespace

TEST_CASE("constant image has no spectral content") {
  const ScalarField c(32, 32, 0.3);
  const SpectralStack s = transform(c, default_grid(), FlowParams{});
  CHECK(s.layer_count() == default_grid().size() - 2);
  for (const auto& layer : s.layers) CHECK(layer.max() == 0.0);
  for (double v : spectrum(s).values) CHECK(v == 0.0);
  CHECK(max_abs_diff(s.residual, c) < 1e-12);
  CHECK(max_abs_diff(reconstruct(s), c) < 1e-12);
  CHECK(s.mean_value == doctest::Approx(0.3));
}

TEST_CASE("layers are zero mean and reconstruction is exact") {
  const SpectralStack& s = composite_stack();
  for (const auto& layer : s.layers) CHECK(std::abs(layer.mean()) <= 1e-8);
  const ScalarField f = fixtures::two_scale_composite(64);
  CHECK(max_abs_diff(reconstruct(s), f) <= 1e-10);
  CHECK(max_abs_diff(filter(s, TransferFunction::constant(s.layer_count(), 0.0), true),
                     s.residual) == 0.0);
}

TEST_CASE("smooth random image reconstructs") {
  const ScalarField f = smooth_random(48, 11);
  const SpectralStack s = transform(f, default_grid(), FlowParams{});
  CHECK(relative_l2(reconstruct(s), f) <= 0.02);
  CHECK(max_abs_diff(reconstruct(s), f) <= 0.02);
}

TEST_CASE("filter is linear in the transfer function") {
  const SpectralStack& s = composite_stack();
  const std::size_t n = s.layer_count();
  std::vector<double> h1(n), h2(n), sum(n);
  for (std::size_t j = 0; j < n; ++j) {
    h1[j] = std::sin(0.3 * j);
    h2[j] = j < n / 2 ? 1.0 : -0.5;
    sum[j] = h1[j] + h2[j];
  }
  const ScalarField a = filter(s, TransferFunction(h1), false);
  const ScalarField b = filter(s, TransferFunction(h2), false);
  const ScalarField ab = filter(s, TransferFunction(sum), false);
  CHECK(max_abs_diff(ab, a + b) <= 1e-12);

  // A spatial transfer function that is uniform equals the scalar one.
  std::vector<ScalarField> fields;
  for (double g : h1) fields.emplace_back(s.width(), s.height(), g);
  CHECK(max_abs_diff(filter(s, TransferFunction(fields), true),
                     filter(s, TransferFunction(h1), true)) <= 1e-12);
}

TEST_CASE("transfer function contracts") {
  const SpectralStack& s = composite_stack();
  CHECK_THROWS_AS(filter(s, TransferFunction::constant(3, 1.0), true), ContractError);
  std::vector<ScalarField> wrong(s.layer_count(), ScalarField(4, 4, 1.0));
  CHECK_THROWS_AS(filter(s, TransferFunction(wrong), true), ContractError);
  CHECK_THROWS_AS(TransferFunction(std::vector<double>{1.0, std::nan("")}), ContractError);

  const TransferFunction band = TransferFunction::band(s, 0.5, 2.0);
  for (std::size_t j = 0; j < s.layer_count(); ++j) {
    const bool inside = s.time(j) >= 0.5 && s.time(j) <= 2.0;
    CHECK(band.scalar_gains()[j] == (inside ? 1.0 : 0.0));
  }
}

TEST_CASE("spectrum is homogeneous in the stack") {
  const SpectralStack& s = composite_stack();
  SpectralStack scaled = s;
  for (auto& layer : scaled.layers) layer *= 3.0;
  const Spectrum a = spectrum(s), b = spectrum(scaled);
  for (std::size_t k = 0; k < a.values.size(); ++k) {
    CHECK(a.values[k] >= 0.0);
    CHECK(b.values[k] == doctest::Approx(3.0 * a.values[k]));
  }
}

TEST_CASE("two discs give a bimodal spectrum") {
  // Each disc's extinction time comes from its own raster: h / (P/A + P/(|Ω|−A)).
  auto extinction = [](double r) {
    const ScalarField d = fixtures::disc_image(128, r, 1.0);
    double area = 0.0;
    for (double v : d.values()) area += v;
    const double p = tv_energy(d);
    return 1.0 / (p / area + p / (128.0 * 128.0 - area));
  };
  ScalarField f(128, 128, 0.0);
  fixtures::add_disc(f, 40, 40, 20, 1.0);
  fixtures::add_disc(f, 100, 100, 5, 1.0);
  const SpectralStack s = transform(f, TimeGrid::geometric(0.05, 16, 60), precise());
  const Spectrum sp = spectrum(s);
  const double top = *std::max_element(sp.values.begin(), sp.values.end());
  const auto peaks = local_peaks(sp.values, 0.1 * top);
  REQUIRE(peaks.size() == 2);
  CHECK(sp.times[peaks[0]] == doctest::Approx(extinction(5)).epsilon(0.2));
  CHECK(sp.times[peaks[1]] == doctest::Approx(extinction(20)).epsilon(0.2));
}

TEST_CASE("single disc spectrum peaks at its extinction time") {
  const SpectralStack s =
      transform(fixtures::disc_image(96, 12, 1.0), TimeGrid::geometric(0.05, 16, 60),
                FlowParams{});
  const Spectrum sp = spectrum(s);
  CHECK(sp.times[sp.argmax()] == doctest::Approx(6.0).epsilon(0.2));

  // Just past extinction the recovered flow is flat.
  const ScalarField late = flow_from_stack(s, 8.0);
  CHECK(late.max() - late.min() < 0.02);
}

TEST_CASE("flow recovered from the stack") {
  const ScalarField f = fixtures::two_scale_composite(64);
  const FlowTrajectory traj = evolve(f, default_grid(), FlowParams{});
  const SpectralStack s = transform_trajectory(traj);
  CHECK(max_abs_diff(flow_from_stack(s, 0.0), f) <= 1e-10);
  CHECK(relative_l2(flow_from_stack(s, default_grid().horizon()), traj.states.back()) <=
        0.02);
  for (std::size_t k : {10u, 40u}) {
    CHECK(max_abs_diff(flow_from_stack(s, default_grid()[k]), traj.states[k]) <= 1e-10);
  }
  CHECK_THROWS_AS(flow_from_stack(s, -0.1), RangeError);
  CHECK_THROWS_AS(flow_from_stack(s, 9.0), RangeError);
}

TEST_CASE("streamed and stored trajectories give the same stack") {
  const ScalarField f = fixtures::two_scale_composite(64);
  const SpectralStack a = transform(f, default_grid(), FlowParams{});
  const SpectralStack b = transform_trajectory(evolve(f, default_grid(), FlowParams{}));
  CHECK(a.layers == b.layers);
  CHECK(a.residual == b.residual);
}

TEST_CASE("orthogonality defect conventions") {
  const ScalarField c(16, 16, 0.5);
  const TimeGrid grid = TimeGrid::geometric(0.1, 4, 10);
  const FlowTrajectory traj = evolve(c, grid, FlowParams{});
  const SpectralStack s = transform_trajectory(traj);
  CHECK(orthogonality_defect(s, traj, 3) == 0.0);
  CHECK_THROWS_AS((void)orthogonality_defect(s, traj, 99), RangeError);

  // Near extinction u(t) − f̄ shrinks to solver noise and the ratio is 0/0,
  // so only nodes where the disc still carries 5% of its initial norm count.
  const ScalarField f = fixtures::disc_image(64, 10, 1.0);
  const FlowTrajectory dt = evolve(f, TimeGrid::geometric(0.05, 8, 40), precise());
  const SpectralStack ds = transform_trajectory(dt);
  const double initial = l2_norm(fixtures::mean_removed(f));
  int checked = 0;
  for (std::size_t j = 0; j < ds.layer_count(); ++j) {
    if (l2_norm(fixtures::mean_removed(dt.states[j + 1])) < 0.05 * initial) continue;
    CHECK(orthogonality_defect(ds, dt, j) <= 0.05);
    ++checked;
  }
  CHECK(checked >= 30);
}

TEST_CASE("stack serialisation round trip") {
  const fs::path dir = fs::temp_directory_path() / "spectex_test_stack";
  fs::remove_all(dir);
  const SpectralStack& s = composite_stack();
  save_stack(s, dir / "a");
  const SpectralStack back = load_stack(dir / "a");
  CHECK(back.grid == s.grid);
  CHECK(back.mean_value == s.mean_value);
  CHECK(back.layer_count() == s.layer_count());
  for (std::size_t j = 0; j < s.layer_count(); ++j) {
    CHECK(max_abs_diff(back.layers[j], s.layers[j]) <= 1e-6 * (1 + l2_norm(s.layers[j])));
  }
  save_stack(back, dir / "b");
  for (const auto& entry : fs::directory_iterator(dir / "a")) {
    CHECK(read_file(entry.path()) == read_file(dir / "b" / entry.path().filename()));
  }
  const SpectralStack again = load_stack(dir / "b");
  CHECK(again.layers == back.layers);
  CHECK(again.residual == back.residual);

  CHECK_THROWS_AS(load_stack(dir / "missing"), IoError);
}
