#include "avgpress/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "avgpress/errors.hpp"
#include "avgpress/rng.hpp"

namespace avgpress {

namespace {

bool allowed_breakpoint_count(std::size_t k) {
  return k == 1 || k == 2 || k == 3 || k == 5 || k == 19;
}

}  // namespace

RadialProfile::RadialProfile(std::vector<double> radii) : radii_(std::move(radii)) {
  if (!allowed_breakpoint_count(radii_.size())) {
    throw ParameterError("profile must have 1, 2, 3, 5 or 19 radii, got " +
                         std::to_string(radii_.size()));
  }
  for (double r : radii_) {
    if (!std::isfinite(r) || r < kMinRadius || r > kMaxRadius) {
      throw ParameterError("radius " + std::to_string(r) + " outside [0.1, 0.5]");
    }
  }
}

double RadialProfile::radius_at(double x1) const {
  const int k = breakpoint_count();
  if (k == 1) return radii_[0];
  const double t = std::clamp(x1, 0.0, 1.0) * (k - 1);
  const int j = std::min(static_cast<int>(t), k - 2);
  const double f = t - j;
  return radii_[j] * (1.0 - f) + radii_[j + 1] * f;
}

double RadialProfile::slope_at(double x1) const {
  const int k = breakpoint_count();
  if (k == 1) return 0.0;
  const double t = std::clamp(x1, 0.0, 1.0) * (k - 1);
  const int j = std::min(static_cast<int>(t), k - 2);
  return (radii_[j + 1] - radii_[j]) * (k - 1);
}

bool RadialProfile::is_uniform() const {
  return std::all_of(radii_.begin(), radii_.end(),
                     [&](double r) { return r == radii_.front(); });
}

bool RadialProfile::is_concave() const {
  for (std::size_t j = 1; j + 1 < radii_.size(); ++j) {
    if (radii_[j + 1] - radii_[j] > radii_[j] - radii_[j - 1] + 1e-14) return false;
  }
  return true;
}

std::array<double, kNetworkInputs> RadialProfile::network_input() const {
  std::array<double, kNetworkInputs> out{};
  for (int i = 0; i < kNetworkInputs; ++i) {
    out[i] = radius_at(static_cast<double>(i) / (kNetworkInputs - 1));
  }
  return out;
}

std::string RadialProfile::to_csv_row() const {
  std::string row;
  char buf[32];
  for (std::size_t i = 0; i < radii_.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", radii_[i]);
    if (i) row += ',';
    row += buf;
  }
  return row;
}

RadialProfile parse_profile(const std::string& text) {
  std::vector<double> radii;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      radii.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ParameterError("cannot parse radius '" + item + "'");
    }
  }
  return RadialProfile(std::move(radii));
}

RadialProfile sample_profile(std::uint64_t rng_seed, int k) {
  if (k != 1 && k != 2 && k != 3 && k != 5) {
    throw ParameterError("sample_profile: k must be 1, 2, 3 or 5, got " + std::to_string(k));
  }
  Rng rng(rng_seed);
  std::vector<double> radii(k);
  for (double& r : radii) r = rng.uniform(kMinRadius, kMaxRadius);
  return RadialProfile(std::move(radii));
}

CylinderDomain domain_from_profile(const RadialProfile& profile) {
  const auto r = profile.radii();
  const int k = profile.breakpoint_count();
  std::vector<double> xs;
  std::vector<double> as;
  if (k == 1) {
    xs = {0.0, 1.0};
    as = {r[0], r[0]};
  } else {
    for (int j = 0; j < k; ++j) {
      xs.push_back(static_cast<double>(j) / (k - 1));
      as.push_back(r[j]);
    }
  }
  // Counterclockwise: lower boundary left to right, upper boundary right to left.
  CylinderDomain d{profile, {}, {}, {}};
  const int m = static_cast<int>(xs.size());
  for (int j = 0; j < m; ++j) d.polygon.emplace_back(xs[j], -as[j]);
  for (int j = m - 1; j >= 0; --j) d.polygon.emplace_back(xs[j], as[j]);
  const int n = static_cast<int>(d.polygon.size());
  for (int e = 0; e < n; ++e) {
    const Point& p = d.polygon[e];
    const Point& q = d.polygon[(e + 1) % n];
    if (p.x() == 0.0 && q.x() == 0.0) {
      d.gamma_d.push_back(e);
    } else {
      d.gamma_n.push_back(e);
    }
  }
  return d;
}

double area(const RadialProfile& profile) {
  const auto r = profile.radii();
  const int k = profile.breakpoint_count();
  if (k == 1) return 2.0 * r[0];
  double s = 0.0;
  for (int j = 0; j + 1 < k; ++j) s += r[j] + r[j + 1];
  return s / (k - 1);  // 2 * sum of (r_j + r_{j+1}) / 2 * (1 / (k - 1))
}

double area(const CylinderDomain& domain) { return area(domain.profile); }

double arc_radius(double mid_radius, double x1) {
  if (mid_radius < kMinRadius || mid_radius > kMaxRadius) {
    throw ParameterError("arc mid radius must lie in [0.1, 0.5]");
  }
  if (mid_radius == kMinRadius) return kMinRadius;
  // Circle centred on x1 = 1/2 through (0, r0) and (1/2, m).
  const double r0 = kMinRadius;
  const double m = mid_radius;
  const double yc = (m * m - r0 * r0 - 0.25) / (2.0 * (m - r0));
  const double rho = m - yc;
  const double dx = x1 - 0.5;
  if (dx == 0.0) return m;
  return yc + std::sqrt(std::max(0.0, rho * rho - dx * dx));
}

RadialProfile arc_profile(const ArcParam& p) {
  if (p.sample_points != 5 && p.sample_points != 19) {
    throw ParameterError("arc profiles use 5 or 19 sample points");
  }
  std::vector<double> radii(p.sample_points);
  for (int j = 0; j < p.sample_points; ++j) {
    const double x = static_cast<double>(j) / (p.sample_points - 1);
    // Endpoints are pinned so round-off never pushes them below the minimum.
    radii[j] = (j == 0 || j == p.sample_points - 1)
                   ? kMinRadius
                   : std::clamp(arc_radius(p.mid_radius, x), kMinRadius, p.mid_radius);
  }
  return RadialProfile(std::move(radii));
}

}  // namespace avgpress
