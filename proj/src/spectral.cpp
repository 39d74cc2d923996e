#include "avgpress/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "avgpress/errors.hpp"
#include "avgpress/log.hpp"

namespace avgpress {

namespace {

constexpr double kPi = std::numbers::pi;

bool contributes(double mean) { return mean * mean > kMeanSquaredTol; }

void check_pole(double lambda, std::span<const double> kappas, std::span<const double> means) {
  for (std::size_t i = 0; i < kappas.size(); ++i) {
    if (!contributes(means[i])) continue;
    const double gap = std::abs(kappas[i] - lambda);
    if (gap <= kGapTol) throw PoleAtEndpoint(kappas[i], gap);
  }
}

}  // namespace

void FrequencyRange::validate() const {
  if (!std::isfinite(lambda_min) || !std::isfinite(lambda_max) || lambda_min < 0.0 ||
      !(lambda_max > lambda_min)) {
    throw ParameterError("frequency range needs 0 <= lambda_min < lambda_max");
  }
}

ObjectiveResult psi_from_modes(std::span<const double> kappas, std::span<const double> means,
                               double omega_area, double cutoff, const FrequencyRange& range) {
  range.validate();
  if (kappas.size() != means.size()) throw ParameterError("kappas and means differ in length");
  ObjectiveResult out;
  out.cutoff = cutoff;
  out.n_modes_used = static_cast<int>(kappas.size());
  out.min_endpoint_gap = std::numeric_limits<double>::infinity();
  const double width = range.width();
  double sum = 0.0;
  for (std::size_t i = 0; i < kappas.size(); ++i) {
    if (!contributes(means[i])) continue;
    const double k = kappas[i];
    const double gap = std::min(std::abs(k - range.lambda_min), std::abs(range.lambda_max - k));
    out.min_endpoint_gap = std::min(out.min_endpoint_gap, gap);
    if (gap <= kGapTol) throw PoleAtEndpoint(k, gap);
    const double term = k / width * std::log(std::abs((k - range.lambda_min) / (range.lambda_max - k))) - 1.0;
    sum += term * means[i] * means[i];
  }
  out.psi = 1.0 + omega_area * sum;
  return out;
}

ObjectiveResult psi_objective(const DiscreteEigenBasis& basis, const FrequencyRange& range) {
  if (basis.cutoff < 10.0 * range.lambda_max) {
    warn_once(fmt::format("spectral cutoff {} is below 10 * lambda_max = {}", basis.cutoff,
                          10.0 * range.lambda_max));
  }
  return psi_from_modes(basis.kappas, basis.means, basis.omega_area, basis.cutoff, range);
}

Eigen::VectorXd response(const DiscreteEigenBasis& basis, double lambda) {
  check_pole(lambda, basis.kappas, basis.means);
  Eigen::VectorXd p = Eigen::VectorXd::Ones(basis.modes.rows());
  for (int i = 0; i < basis.size(); ++i) {
    if (!contributes(basis.means[i])) continue;
    p += basis.omega_area * lambda / (basis.kappas[i] - lambda) * basis.means[i] * basis.modes.col(i);
  }
  return p;
}

double mean_response(std::span<const double> kappas, std::span<const double> means,
                     double omega_area, double lambda) {
  check_pole(lambda, kappas, means);
  double s = 0.0;
  for (std::size_t i = 0; i < kappas.size(); ++i) {
    if (!contributes(means[i])) continue;
    s += lambda / (kappas[i] - lambda) * means[i] * means[i];
  }
  return 1.0 + omega_area * s;
}

double mean_response(const DiscreteEigenBasis& basis, double lambda) {
  return mean_response(basis.kappas, basis.means, basis.omega_area, lambda);
}

std::vector<double> pole_locations(const DiscreteEigenBasis& basis) {
  std::vector<double> out;
  for (int i = 0; i < basis.size(); ++i) {
    if (contributes(basis.means[i])) out.push_back(basis.kappas[i]);
  }
  return out;
}

double dirichlet_neumann_eigenvalue(int k) {
  const double s = (2 * k + 1) * kPi / 2;
  return s * s;
}

std::vector<AnalyticMode> uniform_eigenvalues(double a, double cutoff) {
  if (!(a >= kMinRadius && a <= kMaxRadius)) throw ParameterError("uniform radius outside [0.1, 0.5]");
  std::vector<AnalyticMode> out;
  for (int k = 0; dirichlet_neumann_eigenvalue(k) <= cutoff; ++k) {
    const double mu = dirichlet_neumann_eigenvalue(k);
    // Mean over Omega of sqrt(1/a) sin(sqrt(mu) x1) is sqrt(1/a) / sqrt(mu).
    const double mean0 = std::sqrt(1.0 / a) / std::sqrt(mu);
    for (int l = 0;; ++l) {
      const double even = mu + std::pow(l * kPi / a, 2);
      const double odd = mu + std::pow((2 * l + 1) * kPi / (2 * a), 2);
      if (even > cutoff && odd > cutoff) break;
      if (even <= cutoff) {
        const double norm = l == 0 ? std::sqrt(1.0 / a) : std::sqrt(2.0 / a);
        out.push_back({even, 1, k, l, norm, l == 0 ? mean0 : 0.0});
      }
      if (odd <= cutoff) out.push_back({odd, 2, k, l, std::sqrt(2.0 / a), 0.0});
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const AnalyticMode& x, const AnalyticMode& y) { return x.kappa < y.kappa; });
  return out;
}

double uniform_mean_response_exact(double lambda) {
  if (lambda == 0.0) return 1.0;
  const double s = std::sqrt(lambda);
  return std::tan(s) / s;
}

double uniform_psi_exact(const FrequencyRange& range) {
  range.validate();
  for (int k = 0;; ++k) {
    const double mu = dirichlet_neumann_eigenvalue(k);
    if (mu > range.lambda_max + 1.0) break;
    for (double e : {range.lambda_min, range.lambda_max}) {
      if (std::abs(mu - e) <= kGapTol) throw PoleAtEndpoint(mu, std::abs(mu - e));
    }
  }
  const double lo = std::cos(std::sqrt(range.lambda_min));
  const double hi = std::cos(std::sqrt(range.lambda_max));
  return 2.0 / range.width() * std::log(std::abs(lo / hi));
}

ObjectiveResult uniform_psi_truncated(double a, double cutoff, const FrequencyRange& range) {
  std::vector<double> kappas;
  std::vector<double> means;
  for (const auto& m : uniform_eigenvalues(a, cutoff)) {
    kappas.push_back(m.kappa);
    means.push_back(m.mean);
  }
  return psi_from_modes(kappas, means, 2.0 * a, cutoff, range);
}

double trapezoid_reference(const FrequencyRange& range, int n_steps) {
  range.validate();
  if (n_steps < 2) throw ParameterError("trapezoid rule needs at least 2 steps");
  const double h = range.width() / n_steps;
  double s = 0.5 * (uniform_mean_response_exact(range.lambda_min) +
                    uniform_mean_response_exact(range.lambda_max));
  for (int i = 1; i < n_steps; ++i) s += uniform_mean_response_exact(range.lambda_min + i * h);
  return s * h / range.width();
}

std::vector<SweepPoint> mean_response_sweep(const DiscreteEigenBasis& basis,
                                            const FrequencyRange& range, int n) {
  range.validate();
  if (n < 2) throw ParameterError("sweep needs at least 2 points");
  std::vector<SweepPoint> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double lambda = range.lambda_min + range.width() * i / (n - 1);
    double v = std::numeric_limits<double>::quiet_NaN();
    try {
      v = mean_response(basis, lambda);
    } catch (const PoleAtEndpoint&) {
    }
    out.push_back({lambda, v});
  }
  return out;
}

std::vector<SweepPoint> psi_sweep(const DiscreteEigenBasis& basis, double lambda_min,
                                  std::span<const double> maxima) {
  std::vector<SweepPoint> out;
  out.reserve(maxima.size());
  for (double lmax : maxima) {
    double v = std::numeric_limits<double>::quiet_NaN();
    try {
      v = psi_from_modes(basis.kappas, basis.means, basis.omega_area, basis.cutoff,
                         {lambda_min, lmax})
              .psi;
    } catch (const PoleAtEndpoint&) {
    }
    out.push_back({lmax, v});
  }
  return out;
}

void LabelConfig::validate() const {
  range.validate();
  if (!(cutoff_factor >= 1.0) || !std::isfinite(cutoff_factor)) {
    throw ParameterError("cutoff factor must be >= 1");
  }
}

ObjectiveResult compute_psi(const RadialProfile& profile, const LabelConfig& config) {
  config.validate();
  const auto spectrum = compute_spectrum(build_mesh(domain_from_profile(profile), config.mesh),
                                         config.cutoff(), config.sector);
  return psi_objective(spectrum.basis, config.range);
}

}  // namespace avgpress
