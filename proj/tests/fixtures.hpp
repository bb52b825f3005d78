#ifndef SPECTEX_TESTS_FIXTURES_HPP_
#define SPECTEX_TESTS_FIXTURES_HPP_

// Synthetic images with known structure, shared by the unit tests and the
// acceptance suite.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include "spectex/image.hpp"
#include "spectex/spectral.hpp"

namespace fixtures {

using spectex::ScalarField;

inline constexpr double kPi = std::numbers::pi;

/// Coverage of a disc with a 2-px linear edge ramp. The ramp keeps the
/// discrete perimeter (forward-difference TV) within 4% of 2πr.
inline double soft_disc_coverage(double dist, double r) {
  return std::clamp(0.5 - (dist - r) / 2.0, 0.0, 1.0);
}

inline void add_disc(ScalarField& f, double cx, double cy, double r, double h) {
  for (int y = 0; y < f.height(); ++y) {
    for (int x = 0; x < f.width(); ++x) {
      f(x, y) += h * soft_disc_coverage(std::hypot(x - cx, y - cy), r);
    }
  }
}

inline ScalarField disc_image(int size, double r, double h, double background = 0.0) {
  ScalarField f(size, size, background);
  add_disc(f, (size - 1) / 2.0, (size - 1) / 2.0, r, h);
  return f;
}

/// Square wave of the given period with a 1-px linear transition, ±amp.
inline double square_wave(double s, double period, double amp) {
  double phase = s / period - std::floor(s / period) - 0.25;
  if (phase > 0.5) phase -= 1.0;
  const double dist = std::abs(phase) * period;  // to the nearest crest centre
  return amp * (2.0 * std::clamp(0.5 - (dist - period / 4.0), 0.0, 1.0) - 1.0);
}

/// `angle` is the direction along which the wave varies, in radians.
inline ScalarField stripes(int w, int h, double period, double amp, double angle = 0.0,
                           double offset = 0.5) {
  ScalarField f(w, h, offset);
  const double c = std::cos(angle), s = std::sin(angle);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) f(x, y) += square_wave(x * c + y * s, period, amp);
  }
  return f;
}

/// Vertical bars whose border pieces are half a bar wide. Mirrored at the
/// edge they match the interior bars, so every bar vanishes at the same time;
/// full bars touching the border behave like bars of twice the width.
inline ScalarField edge_matched_stripes(int n, double period = 8, double amp = 0.2) {
  ScalarField f(n, n, 0.5);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) f(x, y) += square_wave(x + period / 4.0, period, amp);
  }
  return f;
}

/// 0.5 + 0.5·cos(2π·r / period) rings around the centre.
inline ScalarField concentric_circles(int size, double period, double cx, double cy) {
  ScalarField f(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      f(x, y) = 0.5 + 0.5 * std::cos(2.0 * kPi * std::hypot(x - cx, y - cy) / period);
    }
  }
  return f;
}

/// Disc of radius 24 plus a small disc of radius 5.
inline ScalarField two_scale_composite(int size = 128) {
  ScalarField f(size, size, 0.2);
  add_disc(f, 44, 44, 24, 0.5);
  add_disc(f, 96, 92, 5, 0.5);
  return f;
}

/// 64-bit LCG so scenes are identical across standard libraries.
struct Lcg {
  std::uint64_t state;
  double next() {
    state = state * 6364136223846793005ULL + 1442695040888963407ULL;
    return static_cast<double>(state >> 11) * 0x1.0p-53;
  }
};

/// A synthetic image together with the two layers it was built from.
struct Scene {
  ScalarField image;
  ScalarField target;  // the layer a separation should recover
  ScalarField other;   // the layer that must stay out of it
};

/// `count` soft-edged discs at random positions, radius in [r_min, r_max],
/// contrast ±(0.1 … 0.3), over a 0.5 background.
inline ScalarField disc_field(int size, int count, double r_min, double r_max,
                              std::uint64_t seed) {
  ScalarField f(size, size, 0.5);
  Lcg rng{seed};
  for (int i = 0; i < count; ++i) {
    const double cx = rng.next() * size;
    const double cy = rng.next() * size;
    const double r = r_min + (r_max - r_min) * rng.next();
    const double h = 0.1 + 0.2 * rng.next();
    add_disc(f, cx, cy, r, rng.next() < 0.5 ? -h : h);
  }
  return f;
}

/// Checkerboard of w-px blocks; each block gets amplitude amp(x)·(1 ± spread).
template <typename Amp>
ScalarField checker_blocks(int width, int height, int w, double spread, Amp amp,
                           std::uint64_t seed) {
  ScalarField f(width, height, 0.0);
  Lcg rng{seed};
  for (int by = 0; by * w < height; ++by) {
    for (int bx = 0; bx * w < width; ++bx) {
      const double jitter = 1.0 - spread + 2.0 * spread * rng.next();
      const double sign = (bx + by) % 2 ? 1.0 : -1.0;
      for (int y = by * w; y < std::min(height, (by + 1) * w); ++y) {
        for (int x = bx * w; x < std::min(width, (bx + 1) * w); ++x) {
          f(x, y) = amp(x) * jitter * sign;
        }
      }
    }
  }
  return f;
}

/// Hard-edged discs of radius r on a square lattice, alternating sign, with
/// contrast rising linearly from h0 at the left edge to h1 at the right, over
/// a fine checkerboard. The discs are the target layer.
inline Scene circles_on_texture(int size = 128) {
  ScalarField discs(size, size, 0.0);
  constexpr double kSpacing = 24.0, kRadius = 8.0, kH0 = 0.1, kH1 = 0.6;
  int index = 0;
  for (double cy = kSpacing / 2; cy < size; cy += kSpacing) {
    for (double cx = kSpacing / 2; cx < size; cx += kSpacing, ++index) {
      const double h = (kH0 + (kH1 - kH0) * cx / size) * (index % 2 ? 1.0 : -1.0);
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          if (std::hypot(x - cx, y - cy) <= kRadius) discs(x, y) += h;
        }
      }
    }
  }
  ScalarField base = checker_blocks(size, size, 8, 0.2, [](int) { return 0.12; }, 1);
  return {discs + base + 0.5, discs, base};
}

/// Same block texture on both halves, weak on the left and strong on the
/// right, plus a disc on the left whose scale matches the right half. The
/// blocks are the target layer.
inline Scene split_blocks(int size = 128) {
  const int half = size / 2;
  ScalarField blocks = checker_blocks(
      size, size, 8, 0.2, [half](int x) { return x < half ? 0.1 : 0.4; }, 1);
  ScalarField disc(size, size, 0.0);
  add_disc(disc, size / 4.0, size / 2.0, 20.0, 0.13);
  return {blocks + disc + 0.5, blocks, disc};
}

/// Vertical bars whose period grows linearly from p0 at the top to p1 at the
/// bottom, bar edges symmetric about the vertical centre line.
inline ScalarField graded_stripes(int size = 128, double p0 = 4.0, double p1 = 16.0,
                                  double amp = 0.2) {
  ScalarField f(size, size, 0.5);
  double y = 0.0;
  while (y < size) {
    const double w = p0 + (p1 - p0) * y / size;
    const int y0 = static_cast<int>(std::lround(y));
    const int y1 = std::min(size, static_cast<int>(std::lround(y + w)));
    for (int yy = y0; yy < y1; ++yy) {
      for (int x = 0; x < size; ++x) {
        const int col = static_cast<int>(std::floor((x + 0.5 - size / 2.0) / w));
        f(x, yy) += (col % 2 != 0) ? amp : -amp;
      }
    }
    y += w;
  }
  return f;
}

inline ScalarField mean_removed(ScalarField f) {
  const double m = f.mean();
  for (double& v : f.values()) v -= m;
  return f;
}

/// ⟨e, g⟩ / ‖g‖² for mean-removed fields: the share of g present in e.
inline double projection_ratio(const ScalarField& e, const ScalarField& g) {
  const ScalarField ec = mean_removed(e);
  const ScalarField gc = mean_removed(g);
  const double n = spectex::dot(gc, gc);
  return n > 0.0 ? spectex::dot(ec, gc) / n : 0.0;
}

inline double relative_l1(const ScalarField& a, const ScalarField& b) {
  const double n = spectex::l1_norm(b);
  return spectex::l1_norm(a - b) / (n > 0.0 ? n : 1.0);
}

}  // namespace fixtures

#endif  // SPECTEX_TESTS_FIXTURES_HPP_
