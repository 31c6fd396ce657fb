#include "wafer/synth/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "wafer/errors.hpp"
#include "wafer/rng.hpp"

namespace wafer::synth {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kBackground = 15.0;

struct Point {
  double x, y;
};

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

double segment_distance(Point p, Point a, Point b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

double polyline_distance(Point p, const std::vector<Point>& line) {
  double d = INFINITY;
  for (std::size_t i = 0; i + 1 < line.size(); ++i) d = std::min(d, segment_distance(p, line[i], line[i + 1]));
  return d;
}

bool inside_polygon(Point p, const std::vector<Point>& poly) {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Point a = poly[i], b = poly[j];
    if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) in = !in;
  }
  return in;
}

/// Pseudo-square plate: a square with corners clipped by a concentric circle.
struct Plate {
  Point center;
  double half;    // half side length
  double radius;  // clipping circle

  /// Signed distance proxy (positive inside), in pixels.
  double inside_depth(Point p) const {
    const double dx = p.x - center.x, dy = p.y - center.y;
    return std::min({half - std::fabs(dx), half - std::fabs(dy), radius - std::hypot(dx, dy)});
  }
  double coverage(Point p) const { return clamp01(inside_depth(p) + 0.5); }
};

struct Blob {
  Point c;
  double sigma, amp;
};

double blobs_at(Point p, const std::vector<Blob>& blobs) {
  double s = 0;
  for (const auto& b : blobs) {
    const double dx = p.x - b.c.x, dy = p.y - b.c.y;
    s += b.amp * std::exp(-(dx * dx + dy * dy) / (2 * b.sigma * b.sigma));
  }
  return s;
}

/// Thin dark line geometry shared by cracks and scratches so that the two
/// classes differ only in path shape.
struct LineStyle {
  double thickness, strength;
};

LineStyle draw_line_style(Rng& rng, int size) {
  return {rng.uniform(0.010, 0.022) * size, rng.uniform(0.45, 0.75)};
}

double line_profile(double dist, double thickness) { return clamp01(thickness / 2 + 0.5 - dist); }

Point point_on_boundary(const Plate& plate, Rng& rng, double& inward_angle) {
  const int side = static_cast<int>(rng.index(4));
  const double t = rng.uniform(-0.7, 0.7) * plate.half;
  const double h = plate.half - 1.0;
  switch (side) {
    case 0: inward_angle = kPi / 2; return {plate.center.x + t, plate.center.y - h};   // top
    case 1: inward_angle = -kPi / 2; return {plate.center.x + t, plate.center.y + h};  // bottom
    case 2: inward_angle = 0.0; return {plate.center.x - h, plate.center.y + t};       // left
    default: inward_angle = kPi; return {plate.center.x + h, plate.center.y + t};      // right
  }
}

}  // namespace

GeneratedWafer generate_wafer(WaferClass cls, std::uint64_t seed, int size, const GeneratorParams& params) {
  if (size < 32) throw ConfigError("wafer image size must be >= 32, got " + std::to_string(size));
  Rng rng(derive_seed({seed, static_cast<std::uint64_t>(code(cls))}));
  const double S = size;

  Plate plate;
  plate.half = 0.48 * S * rng.uniform(0.98, 1.0);
  plate.center = {S / 2 + rng.uniform(-0.01, 0.01) * S, S / 2 + rng.uniform(-0.01, 0.01) * S};
  plate.radius = plate.half * rng.uniform(1.28, 1.36);

  if (cls == WaferClass::Displaced) {
    // Push the plate off-frame along one or both axes until 15-35% of its
    // square extent falls outside.
    const double frac = rng.uniform(0.18, 0.35);
    const double side = 2 * plate.half;
    const double angle = rng.uniform(0, 2 * kPi);
    const double ux = std::cos(angle), uy = std::sin(angle);
    // Bisection on shift length for the outside fraction of the bounding square.
    auto outside = [&](double len) {
      auto overlap = [&](double c) {
        const double lo = std::max(0.0, c - plate.half), hi = std::min(S, c + plate.half);
        return std::max(0.0, hi - lo) / side;
      };
      return 1.0 - overlap(plate.center.x + ux * len) * overlap(plate.center.y + uy * len);
    };
    double lo = 0, hi = S;
    for (int it = 0; it < 60; ++it) {
      const double mid = (lo + hi) / 2;
      (outside(mid) < frac ? lo : hi) = mid;
    }
    plate.center.x += ux * hi;
    plate.center.y += uy * hi;
  }

  const double base = rng.uniform(190.0, 215.0);
  std::vector<Blob> blotches;
  for (int i = 0, n = 2 + static_cast<int>(rng.index(3)); i < n; ++i) {
    const double amp = rng.uniform(5.0, 15.0) * (rng.bernoulli(0.5) ? 1 : -1);
    blotches.push_back({{plate.center.x + rng.uniform(-0.8, 0.8) * plate.half,
                         plate.center.y + rng.uniform(-0.8, 0.8) * plate.half},
                        rng.uniform(0.15, 0.35) * plate.half * 2, amp});
  }

  // Plate gain: a global multiplier on the plate's glow.
  double gain = 1.0;
  if (cls == WaferClass::LowLevel) gain = rng.uniform(0.25, 0.4);
  if (cls == WaferClass::WaferOnPin) gain = rng.uniform(0.08, 0.15);

  std::vector<Blob> glow;  // WaferOnPin bright spots
  if (cls == WaferClass::WaferOnPin) {
    for (int i = 0, n = 2 + static_cast<int>(rng.index(3)); i < n; ++i) {
      glow.push_back({{plate.center.x + rng.uniform(-0.65, 0.65) * plate.half,
                       plate.center.y + rng.uniform(-0.65, 0.65) * plate.half},
                      rng.uniform(0.10, 0.22) * plate.half, rng.uniform(0.75, 1.0)});
    }
  }

  // Local defect profile in [0, 1] per pixel and its darkening strength.
  std::vector<double> profile(static_cast<std::size_t>(size) * size, 0.0);
  double strength = 0;
  auto for_pixels = [&](auto&& fn) {
    for (int r = 0; r < size; ++r)
      for (int c = 0; c < size; ++c) profile[static_cast<std::size_t>(r) * size + c] = fn(Point{c + 0.5, r + 0.5});
  };

  switch (cls) {
    case WaferClass::Circle: {
      const Point c{plate.center.x + rng.uniform(-0.45, 0.45) * plate.half,
                    plate.center.y + rng.uniform(-0.45, 0.45) * plate.half};
      const double radius = rng.uniform(0.18, 0.5) * plate.half;
      const double width = std::max(1.2, rng.uniform(0.02, 0.045) * S);
      strength = rng.uniform(0.45, 0.7);
      for_pixels([&](Point p) {
        return line_profile(std::fabs(std::hypot(p.x - c.x, p.y - c.y) - radius), width);
      });
      break;
    }
    case WaferClass::Crack: {
      const LineStyle style = draw_line_style(rng, size);
      strength = style.strength;
      double heading = 0;
      std::vector<Point> path{point_on_boundary(plate, rng, heading)};
      heading += rng.uniform(-0.6, 0.6);
      const int steps = 8 + static_cast<int>(rng.index(9));
      const double step = rng.uniform(0.05, 0.09) * plate.half;
      for (int i = 0; i < steps; ++i) {
        heading += rng.normal(0.0, 0.55);
        const Point last = path.back();
        path.push_back({last.x + step * std::cos(heading), last.y + step * std::sin(heading)});
      }
      for_pixels([&](Point p) { return line_profile(polyline_distance(p, path), style.thickness); });
      break;
    }
    case WaferClass::Scratch: {
      const LineStyle style = draw_line_style(rng, size);
      strength = style.strength;
      const double len = rng.uniform(0.5, 1.4) * plate.half;
      const double angle = rng.uniform(0, kPi);
      const Point mid{plate.center.x + rng.uniform(-0.4, 0.4) * plate.half,
                      plate.center.y + rng.uniform(-0.4, 0.4) * plate.half};
      const Point a{mid.x - len / 2 * std::cos(angle), mid.y - len / 2 * std::sin(angle)};
      const Point b{mid.x + len / 2 * std::cos(angle), mid.y + len / 2 * std::sin(angle)};
      for_pixels([&](Point p) { return line_profile(segment_distance(p, a, b), style.thickness); });
      break;
    }
    case WaferClass::Splinter: {
      strength = rng.uniform(0.6, 0.9);
      Point anchor;
      if (rng.bernoulli(0.5)) {
        // clipped corner region
        const double sx = rng.bernoulli(0.5) ? 1 : -1, sy = rng.bernoulli(0.5) ? 1 : -1;
        const double d = plate.radius / std::sqrt(2.0);
        anchor = {plate.center.x + sx * d, plate.center.y + sy * d};
      } else {
        double unused = 0;
        anchor = point_on_boundary(plate, rng, unused);
      }
      const double radius = rng.uniform(0.12, 0.25) * plate.half;
      const int n = 4 + static_cast<int>(rng.index(4));
      std::vector<Point> poly;
      const double phase = rng.uniform(0, 2 * kPi);
      for (int i = 0; i < n; ++i) {
        const double a = phase + 2 * kPi * (i + rng.uniform(-0.3, 0.3)) / n;
        const double rr = radius * rng.uniform(0.5, 1.0);
        poly.push_back({anchor.x + rr * std::cos(a), anchor.y + rr * std::sin(a)});
      }
      // 4x4 supersampling for soft polygon edges
      for_pixels([&](Point p) {
        int hits = 0;
        for (int i = 0; i < 4; ++i)
          for (int j = 0; j < 4; ++j)
            hits += inside_polygon({p.x - 0.375 + 0.25 * j, p.y - 0.375 + 0.25 * i}, poly);
        return hits / 16.0;
      });
      break;
    }
    default: break;
  }
  strength = std::min(1.0, strength * params.defect_contrast);

  GeneratedWafer out{ImageU8(size, size), ImageU8(size, size), cls};
  const double norm_r2 = 2 * plate.half * plate.half;
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      const Point p{c + 0.5, r + 0.5};
      const std::size_t idx = static_cast<std::size_t>(r) * size + c;
      const double cover = plate.coverage(p);
      const double dx = p.x - plate.center.x, dy = p.y - plate.center.y;
      double plate_v = (base * (1 - 0.12 * (dx * dx + dy * dy) / norm_r2) + blobs_at(p, blotches)) * gain;
      if (!glow.empty()) plate_v += base * std::min(1.0, blobs_at(p, glow));
      plate_v *= 1 - strength * profile[idx];
      const double noise = rng.normal(0.0, 1.0);
      const double v = kBackground + cover * (plate_v - kBackground) +
                       noise * (cover > 0 ? params.noise_sigma * std::max(gain, 0.3) : 3.0);
      out.image.pixels[idx] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
      const double m = profile[idx] * cover;
      out.mask.pixels[idx] = static_cast<std::uint8_t>(std::lround(255 * clamp01(m)));
    }
  }
  return out;
}

}  // namespace wafer::synth
