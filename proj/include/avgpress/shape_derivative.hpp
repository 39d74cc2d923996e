#pragma once

#include <array>
#include <functional>
#include <string>
#include <variant>

#include <Eigen/Core>

#include "avgpress/spectral.hpp"

namespace avgpress {

// V(x) = A x + b with tr A = 0.
struct AffineField {
  Eigen::Matrix2d A = Eigen::Matrix2d::Zero();
  Eigen::Vector2d b = Eigen::Vector2d::Zero();
};

// Field V = (f(x1), -f'(x1) x2) with stream function x2 f(x1), f = q / a and
// q(x1) = -int_0^x1 delta. To first order x + tV maps the cylinder with
// half-width a to the one with half-width a + t delta, keeping x1 in [0, 1].
// delta is piecewise linear on the profile's breakpoint grid. V is Lipschitz
// only when q vanishes at every interior kink of a, which is validated.
struct AxialStreamField {
  std::vector<double> base_radii;
  std::vector<double> delta;
};

using VectorField = std::variant<AffineField, AxialStreamField>;

// Throws ParameterError for a non-solenoidal affine field or an axial field
// whose delta has nonzero mean or breaks Lipschitz continuity.
void validate_field(const VectorField& field);

Point field_value(const VectorField& field, const Point& x);
// (grad V)_{ab} = d V_a / d x_b. For axial fields evaluated away from kinks
// (one-sided at a breakpoint).
Eigen::Matrix2d field_gradient(const VectorField& field, const Point& x);

// Parses "affine a11=1 a12=0 a21=0 a22=-1 b1=0 b2=0" (missing entries are 0)
// or "axial d=0.1,-0.1,0.1,-0.1,0.1" (the base profile is supplied separately).
VectorField parse_field(const std::string& text, const RadialProfile& base);

// Zigzag perturbation delta = (1, -1, 1, ...) on the profile grid, the only
// direction (up to scale) admissible for a generic profile with kinks.
AxialStreamField zigzag_field(const RadialProfile& base);

// Profile with radii a + t delta. Throws ParameterError if radii leave [0.1, 0.5].
RadialProfile perturbed_profile(const AxialStreamField& field, double t);

// Lemma coefficient 2|Omega|^2/(lmax-lmin) * int lambda / ((ki - lambda)(kj - lambda)),
// the integral taken as a finite part when a pole lies inside the range.
double coeff_c(double kappa_i, double kappa_j, const FrequencyRange& range, double omega_area);

struct ShapeDerivativeOptions {
  // Strict: require a convex domain and no contributing eigenvalue in
  // [lambda_min, lambda_max]. Relaxed: only the endpoint gap is required.
  bool strict = true;
};

struct ShapeDerivativeResult {
  double psi_prime = 0.0;
  int pair_count = 0;
  bool strict = true;
  // Whether the Lemma hypotheses actually hold for this input.
  bool hypotheses_hold = true;
  // Contributing modes (basis indices) and their eigenvalue derivatives
  // kappa' = -2 int grad psi . (grad V) grad psi for solenoidal V.
  std::vector<int> modes;
  std::vector<double> kappa_prime;
};

// Polygon boundary of the mesh is convex (to round-off).
bool mesh_is_convex(const TriangleMesh& mesh);

ShapeDerivativeResult psi_shape_derivative(const DiscreteEigenBasis& basis, const TriangleMesh& mesh,
                                           const VectorField& field, const FrequencyRange& range,
                                           const ShapeDerivativeOptions& options = {});

// Second-order size of psi + t psi' - psi(t) from the eigenvalue motion alone:
// 1/2 sum |Omega| <psi_i>^2 phi''(kappa_i) (t kappa_i')^2 with phi the series
// term. Infinite when t kappa_i' reaches an endpoint.
double linearization_remainder(const DiscreteEigenBasis& basis, const ShapeDerivativeResult& d,
                               const FrequencyRange& range, double t);

// Uniform cylinder (any radius) under a field whose dV1/dx1 depends on x1 only:
// finite-part boundary term integrated against dV1/dx1 with a 256-panel
// composite Simpson rule in x1.
double uniform_shape_derivative(const FrequencyRange& range,
                                const std::function<double(double)>& dv1_dx1);

// Central difference (Psi(T_t) - Psi(T_-t)) / 2t with mesh nodes mapped by
// x -> x +- t V(x). The symmetric eigen sector is used only when the mapped
// meshes stay mirror-symmetric.
double fd_shape_derivative(const CylinderDomain& domain, const VectorField& field,
                           const FrequencyRange& range, double t, const MeshParams& mesh_params,
                           double cutoff);

}  // namespace avgpress
