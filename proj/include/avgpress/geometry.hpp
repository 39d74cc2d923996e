#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace avgpress {

inline constexpr double kMinRadius = 0.1;
inline constexpr double kMaxRadius = 0.5;
inline constexpr int kNetworkInputs = 5;

using Point = Eigen::Vector2d;

// Piecewise-linear half-width a(x1) on [0, 1] given by radii at the uniform
// breakpoints x1 = j / (k - 1). A single radius describes a uniform cylinder.
class RadialProfile {
 public:
  // Throws ParameterError when k is not in {1, 2, 3, 5, 19} or a radius lies
  // outside [kMinRadius, kMaxRadius]. Radii are never clamped.
  explicit RadialProfile(std::vector<double> radii);

  int breakpoint_count() const { return static_cast<int>(radii_.size()); }
  std::span<const double> radii() const { return radii_; }

  double radius_at(double x1) const;
  // Slope of the segment containing x1 (right-continuous; left limit at 1).
  double slope_at(double x1) const;
  bool is_uniform() const;
  // Concave a(x1) is equivalent to a convex cylinder.
  bool is_concave() const;

  // Radii at the five uniform network inputs. Exact for k in {1, 2, 3, 5};
  // for k = 19 the profile is interpolated (a downsample).
  std::array<double, kNetworkInputs> network_input() const;

  std::string to_csv_row() const;

 private:
  std::vector<double> radii_;
};

// Parses "r1,r2,...". Throws ParameterError on malformed input.
RadialProfile parse_profile(const std::string& text);

// Omega = {x1 in (0,1), |x2| < a(x1)} as a counterclockwise polygon.
struct CylinderDomain {
  RadialProfile profile;
  std::vector<Point> polygon;
  // Indices into polygon: edge e joins polygon[e] and polygon[(e + 1) % n].
  std::vector<int> gamma_d;
  std::vector<int> gamma_n;
};

// k i.i.d. Uniform(kMinRadius, kMaxRadius) radii from a generator seeded with
// rng_seed. k must be one of {1, 2, 3, 5}.
RadialProfile sample_profile(std::uint64_t rng_seed, int k);

CylinderDomain domain_from_profile(const RadialProfile& profile);

// |Omega| = integral of 2 a(x1); the trapezoid rule is exact here.
double area(const CylinderDomain& domain);
double area(const RadialProfile& profile);

// Circular arc through (0, 0.1), (1/2, mid_radius), (1, 0.1).
struct ArcParam {
  double mid_radius = 0.3;
  int sample_points = 19;
};

double arc_radius(double mid_radius, double x1);
RadialProfile arc_profile(const ArcParam& p);

}  // namespace avgpress
