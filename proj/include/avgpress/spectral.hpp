#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "avgpress/fem.hpp"

namespace avgpress {

// Pole guard: a contributing eigenvalue closer than this to a range endpoint
// raises PoleAtEndpoint.
inline constexpr double kGapTol = 1e-6;
// Modes with mean^2 at or below this carry no weight in the objective.
inline constexpr double kMeanSquaredTol = 1e-12;

// Averaging interval for the nondimensional spectral parameter
// lambda = omega^2 rho / c^2.
struct FrequencyRange {
  double lambda_min = 0.0;
  double lambda_max = 60.0;

  // Throws ParameterError unless 0 <= lambda_min < lambda_max (finite).
  void validate() const;
  double width() const { return lambda_max - lambda_min; }
};

struct ObjectiveResult {
  double psi = 0.0;
  int n_modes_used = 0;
  // Smallest distance from a contributing kappa to {lambda_min, lambda_max}.
  double min_endpoint_gap = 0.0;
  double cutoff = 0.0;
};

// Truncated objective from eigenvalues and means. Throws PoleAtEndpoint when a
// contributing kappa lies within kGapTol of an endpoint.
ObjectiveResult psi_from_modes(std::span<const double> kappas, std::span<const double> means,
                               double omega_area, double cutoff, const FrequencyRange& range);

// Same, from a FEM basis; warns when the cutoff is below 10 lambda_max.
ObjectiveResult psi_objective(const DiscreteEigenBasis& basis, const FrequencyRange& range);

// Nodal values of the truncated response 1 + |Omega| sum lambda/(kappa-lambda) <psi> psi.
Eigen::VectorXd response(const DiscreteEigenBasis& basis, double lambda);

// Truncated mean response <p_lambda>.
double mean_response(const DiscreteEigenBasis& basis, double lambda);
double mean_response(std::span<const double> kappas, std::span<const double> means,
                     double omega_area, double lambda);

// Contributing eigenvalues (mean^2 above kMeanSquaredTol): the poles of <p_lambda>.
std::vector<double> pole_locations(const DiscreteEigenBasis& basis);

// Eigenpair of the uniform cylinder (0,1) x (-a,a) with Dirichlet data on x1 = 0.
// Family 1 is even in x2 (cos(l pi x2 / a)), family 2 odd.
struct AnalyticMode {
  double kappa = 0.0;
  int family = 1;
  int k = 0;
  int l = 0;
  double normalization = 0.0;
  double mean = 0.0;
};

// All analytic modes with kappa <= cutoff, ascending by kappa.
std::vector<AnalyticMode> uniform_eigenvalues(double a, double cutoff);

// Dirichlet-Neumann eigenvalue mu_k = ((2k+1) pi / 2)^2.
double dirichlet_neumann_eigenvalue(int k);

// Closed-form <p_lambda> = tan(sqrt lambda) / sqrt(lambda) of the uniform cylinder
// (any radius).
double uniform_mean_response_exact(double lambda);

// Closed-form objective of the uniform cylinder. Throws PoleAtEndpoint when an
// endpoint is within kGapTol of some mu_k.
double uniform_psi_exact(const FrequencyRange& range);

// Objective from the analytic modes truncated at `cutoff` (the series a FEM
// basis with the same cutoff converges to).
ObjectiveResult uniform_psi_truncated(double a, double cutoff, const FrequencyRange& range);

// Composite trapezoid rule on the closed-form <p_lambda>. Past the first pole
// this is not a convergent approximation; NaN/Inf propagate.
double trapezoid_reference(const FrequencyRange& range, int n_steps);

struct SweepPoint {
  double lambda = 0.0;
  double value = 0.0;
};

// <p_lambda> on n uniform points of the range. Points within kGapTol of a pole
// get value NaN.
std::vector<SweepPoint> mean_response_sweep(const DiscreteEigenBasis& basis,
                                            const FrequencyRange& range, int n);

// Psi(0, lambda_max) for each lambda_max in `maxima` (NaN where the endpoint hits a pole).
std::vector<SweepPoint> psi_sweep(const DiscreteEigenBasis& basis, double lambda_min,
                                  std::span<const double> maxima);

// End-to-end label settings: mesh, range, cutoff rule and eigen sector.
struct LabelConfig {
  MeshParams mesh;
  FrequencyRange range;
  // Eigenpairs up to cutoff_factor * lambda_max are kept.
  double cutoff_factor = 10.0;
  Sector sector = Sector::kSymmetric;

  double cutoff() const { return cutoff_factor * range.lambda_max; }
  void validate() const;
};

// Meshes the profile, solves the eigenproblem and evaluates the objective.
ObjectiveResult compute_psi(const RadialProfile& profile, const LabelConfig& config);

}  // namespace avgpress
