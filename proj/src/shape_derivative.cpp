#include "avgpress/shape_derivative.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/gauss.hpp>

#include "avgpress/errors.hpp"

namespace avgpress {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kMeanTol = 1e-10;

// Piecewise-linear function on a uniform grid of [0, 1]; one value is constant.
class PiecewiseLinear {
 public:
  explicit PiecewiseLinear(std::span<const double> values) : v_(values.begin(), values.end()) {}

  int segments() const { return static_cast<int>(v_.size()) - 1; }
  double value(double x) const {
    if (v_.size() == 1) return v_[0];
    const auto [j, f] = locate(x);
    return v_[j] * (1 - f) + v_[j + 1] * f;
  }
  double slope(double x) const {
    if (v_.size() == 1) return 0.0;
    const int j = locate(x).first;
    return (v_[j + 1] - v_[j]) * segments();
  }
  // Exact integral over [0, x].
  double integral(double x) const {
    if (v_.size() == 1) return v_[0] * x;
    const double h = 1.0 / segments();
    const auto [j, f] = locate(x);
    double s = 0.0;
    for (int i = 0; i < j; ++i) s += 0.5 * h * (v_[i] + v_[i + 1]);
    const double vx = v_[j] * (1 - f) + v_[j + 1] * f;
    return s + 0.5 * f * h * (v_[j] + vx);
  }
  double max_abs() const {
    double m = 0.0;
    for (double v : v_) m = std::max(m, std::abs(v));
    return m;
  }
  // Interior grid points where the slope changes.
  std::vector<double> kinks() const {
    std::vector<double> out;
    const int n = segments();
    for (int j = 1; j < n; ++j) {
      const double left = v_[j] - v_[j - 1];
      const double right = v_[j + 1] - v_[j];
      if (std::abs(right - left) > 1e-14) out.push_back(static_cast<double>(j) / n);
    }
    return out;
  }

 private:
  std::pair<int, double> locate(double x) const {
    const int n = segments();
    const double t = std::clamp(x, 0.0, 1.0) * n;
    const int j = std::min(static_cast<int>(t), n - 1);
    return {j, t - j};
  }

  std::vector<double> v_;
};

struct AxialTerms {
  double f, df, d2f;
};

AxialTerms axial_terms(const AxialStreamField& v, double x1) {
  const PiecewiseLinear r(v.base_radii);
  const PiecewiseLinear d(v.delta);
  const double a = r.value(x1);
  const double da = r.slope(x1);
  const double dl = d.value(x1);
  const double ddl = d.slope(x1);
  const double q = -d.integral(x1);
  AxialTerms t;
  t.f = q / a;
  t.df = -dl / a - q * da / (a * a);
  t.d2f = -ddl / a + 2 * dl * da / (a * a) + 2 * q * da * da / (a * a * a);
  return t;
}

bool valid_grid_size(std::size_t n) { return n == 1 || n == 2 || n == 3 || n == 5 || n == 19; }

}  // namespace

void validate_field(const VectorField& field) {
  if (const auto* a = std::get_if<AffineField>(&field)) {
    if (!a->A.allFinite() || !a->b.allFinite()) throw ParameterError("affine field must be finite");
    if (std::abs(a->A.trace()) > 1e-14 * std::max(1.0, a->A.cwiseAbs().maxCoeff())) {
      throw ParameterError("affine field must be solenoidal (trace-free A)");
    }
    return;
  }
  const auto& v = std::get<AxialStreamField>(field);
  if (!valid_grid_size(v.base_radii.size()) || v.delta.size() < 2 || !valid_grid_size(v.delta.size())) {
    throw ParameterError("axial field needs a base profile and a delta grid of 2, 3, 5 or 19 points");
  }
  if (v.base_radii.size() > 1 && v.delta.size() != v.base_radii.size()) {
    throw ParameterError("axial field delta must live on the base profile grid");
  }
  RadialProfile(v.base_radii);
  const PiecewiseLinear d(v.delta);
  const double scale = std::max(d.max_abs(), 1e-300);
  if (std::abs(d.integral(1.0)) > 1e-12 * scale) {
    throw ParameterError("axial field delta must have zero mean (the cylinder length is fixed)");
  }
  for (double x : PiecewiseLinear(v.base_radii).kinks()) {
    if (std::abs(d.integral(x)) > 1e-12 * scale) {
      throw ParameterError("axial field is not Lipschitz: delta must integrate to zero up to each profile kink");
    }
  }
}

Point field_value(const VectorField& field, const Point& x) {
  if (const auto* a = std::get_if<AffineField>(&field)) return a->A * x + a->b;
  const auto t = axial_terms(std::get<AxialStreamField>(field), x.x());
  return Point(t.f, -t.df * x.y());
}

Eigen::Matrix2d field_gradient(const VectorField& field, const Point& x) {
  if (const auto* a = std::get_if<AffineField>(&field)) return a->A;
  const auto t = axial_terms(std::get<AxialStreamField>(field), x.x());
  Eigen::Matrix2d g;
  g << t.df, 0.0, -t.d2f * x.y(), -t.df;
  return g;
}

VectorField parse_field(const std::string& text, const RadialProfile& base) {
  std::istringstream in(text);
  std::string kind;
  in >> kind;
  std::map<std::string, std::string> kv;
  std::string token;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw ParameterError("field parameter '" + token + "' is not key=value");
    kv[token.substr(0, eq)] = token.substr(eq + 1);
  }
  auto number = [](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || s.empty()) throw ParameterError("bad number '" + s + "' in field");
    return v;
  };
  VectorField out;
  if (kind == "affine") {
    AffineField a;
    const std::map<std::string, double*> slots{{"a11", &a.A(0, 0)}, {"a12", &a.A(0, 1)},
                                               {"a21", &a.A(1, 0)}, {"a22", &a.A(1, 1)},
                                               {"b1", &a.b(0)},     {"b2", &a.b(1)}};
    for (const auto& [k, v] : kv) {
      const auto it = slots.find(k);
      if (it == slots.end()) throw ParameterError("unknown affine field parameter '" + k + "'");
      *it->second = number(v);
    }
    out = a;
  } else if (kind == "axial" || kind == "zigzag") {
    AxialStreamField f = zigzag_field(base);
    if (kind == "axial") {
      if (kv.size() != 1 || !kv.count("d")) throw ParameterError("axial field needs d=v1,v2,...");
      f.delta.clear();
      std::stringstream ds(kv["d"]);
      std::string item;
      while (std::getline(ds, item, ',')) f.delta.push_back(number(item));
    } else if (!kv.empty()) {
      if (kv.size() != 1 || !kv.count("scale")) throw ParameterError("zigzag field takes only scale=");
      const double s = number(kv["scale"]);
      for (double& d : f.delta) d *= s;
    }
    out = f;
  } else {
    throw ParameterError("unknown field kind '" + kind + "' (affine, axial, zigzag)");
  }
  validate_field(out);
  return out;
}

AxialStreamField zigzag_field(const RadialProfile& base) {
  AxialStreamField f;
  f.base_radii.assign(base.radii().begin(), base.radii().end());
  const int n = base.breakpoint_count() == 1 ? kNetworkInputs : base.breakpoint_count();
  for (int j = 0; j < n; ++j) f.delta.push_back(j % 2 == 0 ? 1.0 : -1.0);
  return f;
}

RadialProfile perturbed_profile(const AxialStreamField& field, double t) {
  const PiecewiseLinear r(field.base_radii);
  const int n = static_cast<int>(field.delta.size());
  std::vector<double> radii(n);
  for (int j = 0; j < n; ++j) radii[j] = r.value(static_cast<double>(j) / (n - 1)) + t * field.delta[j];
  return RadialProfile(std::move(radii));
}

double coeff_c(double kappa_i, double kappa_j, const FrequencyRange& range, double omega_area) {
  range.validate();
  for (double k : {kappa_i, kappa_j}) {
    const double gap = std::min(std::abs(k - range.lambda_min), std::abs(range.lambda_max - k));
    if (gap <= kGapTol) throw PoleAtEndpoint(k, gap);
  }
  const double f = 2.0 * omega_area * omega_area / range.width();
  auto log_term = [&](double k) {
    return std::log(std::abs((range.lambda_max - k) / (k - range.lambda_min)));
  };
  if (std::abs(kappa_i - kappa_j) < 1e-9 * std::max(std::abs(kappa_i), std::abs(kappa_j))) {
    const double k = 0.5 * (kappa_i + kappa_j);
    return f * (log_term(k) - k / (range.lambda_max - k) - k / (k - range.lambda_min));
  }
  // Written so that swapping i and j gives bit-identical results.
  const double num = kappa_i * log_term(kappa_i) - kappa_j * log_term(kappa_j);
  return f * (num / (kappa_i - kappa_j));
}

bool mesh_is_convex(const TriangleMesh& mesh) {
  std::map<std::pair<int, int>, int> edge_count;
  for (const auto& tri : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      const int a = tri[k], b = tri[(k + 1) % 3];
      ++edge_count[{std::min(a, b), std::max(a, b)}];
    }
  }
  std::vector<std::pair<int, int>> boundary;  // oriented with the interior on the left
  std::vector<int> nodes;
  for (const auto& tri : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      const int a = tri[k], b = tri[(k + 1) % 3];
      if (edge_count[{std::min(a, b), std::max(a, b)}] == 1) {
        boundary.emplace_back(a, b);
        nodes.push_back(a);
      }
    }
  }
  for (const auto& [a, b] : boundary) {
    const Point e = mesh.vertices[b] - mesh.vertices[a];
    for (int v : nodes) {
      const Point w = mesh.vertices[v] - mesh.vertices[a];
      if (e.x() * w.y() - e.y() * w.x() < -1e-12 * e.norm()) return false;
    }
  }
  return true;
}

ShapeDerivativeResult psi_shape_derivative(const DiscreteEigenBasis& basis, const TriangleMesh& mesh,
                                           const VectorField& field, const FrequencyRange& range,
                                           const ShapeDerivativeOptions& options) {
  range.validate();
  validate_field(field);
  if (basis.modes.rows() != mesh.vertex_count()) throw ParameterError("basis and mesh do not match");

  std::vector<int> used;
  bool interval_clear = true;
  for (int i = 0; i < basis.size(); ++i) {
    if (std::abs(basis.means[i]) <= kMeanTol) continue;
    used.push_back(i);
    const double k = basis.kappas[i];
    const double gap = std::min(std::abs(k - range.lambda_min), std::abs(range.lambda_max - k));
    if (gap <= kGapTol) throw PoleAtEndpoint(k, gap);
    if (k >= range.lambda_min && k <= range.lambda_max) interval_clear = false;
  }
  ShapeDerivativeResult out;
  out.strict = options.strict;
  out.hypotheses_hold = interval_clear && mesh_is_convex(mesh);
  if (options.strict && !out.hypotheses_hold) {
    throw LemmaHypothesisViolated(interval_clear
                                      ? "domain is not convex"
                                      : "a contributing eigenvalue lies inside the frequency range");
  }

  const int m = static_cast<int>(used.size());
  // Q_ij = < grad V grad psi_i . grad psi_j > with P1 gradients and grad V at centroids.
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(m, m);
  Eigen::Matrix<double, 2, Eigen::Dynamic> g(2, m);
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double area = mesh.signed_area(t);
    g.setZero();
    for (int k = 0; k < 3; ++k) {
      const Point e = mesh.vertices[tri[(k + 2) % 3]] - mesh.vertices[tri[(k + 1) % 3]];
      const Eigen::Vector2d grad_phi(-e.y() / (2 * area), e.x() / (2 * area));
      for (int c = 0; c < m; ++c) g.col(c) += basis.modes(tri[k], used[c]) * grad_phi;
    }
    const Point centroid =
        (mesh.vertices[tri[0]] + mesh.vertices[tri[1]] + mesh.vertices[tri[2]]) / 3.0;
    const Eigen::Matrix2d jv = field_gradient(field, centroid);
    q.noalias() += area * (g.transpose() * jv.transpose() * g);
  }
  q /= basis.omega_area;

  double s = 0.0;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      const double c = coeff_c(basis.kappas[used[i]], basis.kappas[used[j]], range, basis.omega_area);
      s += c * q(j, i) * basis.means[used[i]] * basis.means[used[j]];
    }
  }
  out.psi_prime = s;
  out.pair_count = m * m;
  out.modes = used;
  for (int i = 0; i < m; ++i) out.kappa_prime.push_back(-2.0 * basis.omega_area * q(i, i));
  return out;
}

double linearization_remainder(const DiscreteEigenBasis& basis, const ShapeDerivativeResult& d,
                               const FrequencyRange& range, double t) {
  const double a = range.lambda_min;
  const double b = range.lambda_max;
  double r = 0.0;
  for (std::size_t c = 0; c < d.modes.size(); ++c) {
    const int i = d.modes[c];
    const double k = basis.kappas[i];
    const double dk = t * d.kappa_prime[c];
    const double gap = std::min(std::abs(k - a), std::abs(b - k));
    if (std::abs(dk) >= gap) return std::numeric_limits<double>::infinity();
    const double u = 1.0 / (k - a);
    const double v = 1.0 / (b - k);
    const double phi2 = (2.0 * (u + v) + k * (v * v - u * u)) / range.width();
    r += 0.5 * basis.omega_area * basis.means[i] * basis.means[i] * std::abs(phi2) * dk * dk;
  }
  return r;
}

namespace {

using Gauss = boost::math::quadrature::gauss<double, 20>;

// Composite Gauss-Legendre with panels no longer than `panel`.
template <class F>
double composite_gauss(F&& f, double a, double b, double panel) {
  if (!(b > a)) return 0.0;
  const int n = std::max(1, static_cast<int>(std::ceil((b - a) / panel)));
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    s += Gauss::integrate(f, a + (b - a) * i / n, a + (b - a) * (i + 1) / n);
  }
  return s;
}

// Finite-part integral over lambda in (lmin, lmax) of 2 sin^2(sqrt(lambda) y) / cos^2(sqrt(lambda)),
// written in s = sqrt(lambda) after one integration by parts:
// [4 s sin^2(s y) tan s] - p.v. int tan s (4 sin^2(s y) + 4 s y sin(2 s y)) ds.
double uniform_boundary_term(double sa, double sb, double y) {
  auto h = [y](double s) {
    const double sy = std::sin(s * y);
    return 4 * sy * sy + 4 * s * y * std::sin(2 * s * y);
  };
  auto edge = [y](double s) {
    const double sy = std::sin(s * y);
    return 4 * s * sy * sy * std::tan(s);
  };
  auto regular = [&h](double s) { return std::tan(s) * h(s); };

  std::vector<std::pair<double, double>> windows;  // (pole, half-width)
  for (int k = 0;; ++k) {
    const double pole = (2 * k + 1) * kPi / 2;
    if (pole >= sb) break;
    if (pole <= sa) continue;
    windows.emplace_back(pole, std::min({0.5, pole - sa, sb - pole}));
  }
  constexpr double kPanel = 0.125;
  double pv = 0.0;
  double left = sa;
  for (const auto& [pole, w] : windows) {
    pv += composite_gauss(regular, left, pole - w, kPanel);
    // tan(pole + tau) = -cot(tau): pair the two sides so the integrand stays bounded.
    pv += composite_gauss([&](double tau) { return -(h(pole + tau) - h(pole - tau)) / std::tan(tau); },
                          0.0, w, kPanel);
    left = pole + w;
  }
  pv += composite_gauss(regular, left, sb, kPanel);
  return edge(sb) - edge(sa) - pv;
}

}  // namespace

double uniform_shape_derivative(const FrequencyRange& range,
                                const std::function<double(double)>& dv1_dx1) {
  uniform_psi_exact(range);  // validates the range and the endpoint gaps
  const double sa = std::sqrt(range.lambda_min);
  const double sb = std::sqrt(range.lambda_max);
  constexpr int kPanels = 256;
  double s = 0.0;
  for (int i = 0; i <= kPanels; ++i) {
    const double x = static_cast<double>(i) / kPanels;
    const double g = dv1_dx1(x);
    if (g == 0.0) continue;
    const double w = (i == 0 || i == kPanels) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    s += w * g * uniform_boundary_term(sa, sb, 1.0 - x);
  }
  s /= 3.0 * kPanels;
  return s / range.width();
}

double fd_shape_derivative(const CylinderDomain& domain, const VectorField& field,
                           const FrequencyRange& range, double t, const MeshParams& mesh_params,
                           double cutoff) {
  validate_field(field);
  range.validate();
  if (t == 0.0 || !std::isfinite(t)) throw ParameterError("finite-difference step must be nonzero");
  const TriangleMesh mesh = build_mesh(domain, mesh_params);
  auto psi_at = [&](double step) {
    TriangleMesh mapped = map_nodes(mesh, [&](const Point& x) { return Point(x + step * field_value(field, x)); });
    const Sector sector = mapped.is_mirror_symmetric(1e-12) ? Sector::kSymmetric : Sector::kFull;
    const auto spectrum = compute_spectrum(std::move(mapped), cutoff, sector);
    return psi_objective(spectrum.basis, range).psi;
  };
  const double plus = psi_at(t);
  const double minus = psi_at(-t);
  return (plus - minus) / (2 * t);
}

}  // namespace avgpress
