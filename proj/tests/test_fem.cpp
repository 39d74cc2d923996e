#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "avgpress/errors.hpp"
#include "avgpress/fem.hpp"

using namespace avgpress;

namespace {

constexpr double kPi = std::numbers::pi;

// Exact Dirichlet-Neumann spectrum of (0,1) x (-a,a), Dirichlet on x1 = 0.
std::vector<double> analytic_rectangle_spectrum(double a, double cutoff) {
  std::vector<double> out;
  for (int k = 0;; ++k) {
    const double mu = std::pow((2 * k + 1) * kPi / 2, 2);
    if (mu > cutoff) break;
    for (int l = 0;; ++l) {
      const double even = mu + std::pow(l * kPi / a, 2);
      const double odd = mu + std::pow((2 * l + 1) * kPi / (2 * a), 2);
      if (even > cutoff && odd > cutoff) break;
      if (even <= cutoff) out.push_back(even);
      if (odd <= cutoff) out.push_back(odd);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

TriangleMesh rectangle(double a, int nx, int ny) {
  return build_mesh(domain_from_profile(RadialProfile({a})), {nx, ny});
}

}  // namespace

TEST_SUITE("fem") {
  TEST_CASE("reference triangle element matrices") {
    TriangleMesh mesh;
    mesh.vertices = {Point(0, 0), Point(1, 0), Point(0, 1)};
    mesh.triangles = {{0, 1, 2}};
    const auto m = assemble(mesh);
    for (int i = 0; i < 3; ++i) CHECK(m.mass.coeff(i, i) == doctest::Approx(1.0 / 12.0));
    CHECK(m.mass.coeff(0, 1) == doctest::Approx(1.0 / 24.0));
    // grad phi_0 = (-1,-1), grad phi_1 = (1,0), grad phi_2 = (0,1), area 1/2.
    CHECK(m.stiffness.coeff(0, 0) == doctest::Approx(1.0));
    CHECK(m.stiffness.coeff(1, 1) == doctest::Approx(0.5));
    CHECK(m.stiffness.coeff(0, 1) == doctest::Approx(-0.5));
    CHECK(m.stiffness.coeff(1, 2) == doctest::Approx(0.0));
  }

  TEST_CASE("mass sums to the area and stiffness annihilates constants") {
    TriangleMesh square;
    square.vertices = {Point(0, 0), Point(1, 0), Point(1, 1), Point(0, 1)};
    square.triangles = {{0, 1, 2}, {0, 2, 3}};
    CHECK(Eigen::MatrixXd(assemble(square).mass).sum() == doctest::Approx(1.0).epsilon(1e-15));

    const auto mesh = build_mesh(domain_from_profile(sample_profile(3, 5)), {16, 4});
    const auto m = assemble(mesh);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(mesh.vertex_count());
    CHECK((m.stiffness * ones).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(ones.dot(m.mass * ones) == doctest::Approx(mesh.total_area()).epsilon(1e-13));
    const Eigen::MatrixXd k = m.stiffness;
    CHECK((k - k.transpose()).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("dirichlet elimination") {
    const auto mesh = rectangle(0.3, 6, 3);
    const auto mats = assemble(mesh);
    const auto sys = apply_dirichlet(mats, mesh.dirichlet_nodes);
    CHECK(sys.dimension() == mesh.vertex_count() - static_cast<int>(mesh.dirichlet_nodes.size()));
    CHECK(sys.dof == sys.dimension());
    const Eigen::VectorXd u = sys.embed(Eigen::VectorXd::Ones(sys.dimension()));
    for (int v : mesh.dirichlet_nodes) CHECK(u(v) == 0.0);
    const auto basis = solve_eigen(sys, 1e6);
    CHECK(basis.size() == sys.dimension());
    CHECK(basis.kappas.front() > 0.0);

    std::vector<int> all(mesh.vertex_count());
    for (int i = 0; i < mesh.vertex_count(); ++i) all[i] = i;
    CHECK_THROWS_AS(apply_dirichlet(mats, all), ParameterError);
    CHECK_THROWS_AS(apply_dirichlet(mats, std::vector<int>{}), ParameterError);
  }

  TEST_CASE("uniform cylinder spectrum matches the analytic multiset") {
    const double a = 0.5;
    const double cutoff = 600.0;
    const auto exact = analytic_rectangle_spectrum(a, cutoff);
    const auto s = compute_spectrum(rectangle(a, 80, 16), cutoff, Sector::kFull);
    const auto& b = s.basis;
    // Discrete eigenvalues sit above the exact ones (conforming Galerkin).
    REQUIRE(b.size() <= static_cast<int>(exact.size()));
    REQUIRE(b.size() >= static_cast<int>(exact.size()) - 2);
    for (int i = 0; i < b.size(); ++i) {
      CHECK(b.kappas[i] >= exact[i] * (1 - 1e-12));
      // P1 eigenvalue error is O(h^2 kappa^2); the constant is a few hundredths.
      CHECK(b.kappas[i] - exact[i] <= 0.1 * std::pow(s.mesh.h * exact[i], 2));
    }
    CHECK(b.kappas[0] == doctest::Approx(kPi * kPi / 4).epsilon(1e-3));
    CHECK(b.max_residual <= 1e-8);
    const Eigen::MatrixXd gram = b.modes.transpose() * (assemble(s.mesh).mass * b.modes);
    CHECK((gram - Eigen::MatrixXd::Identity(b.size(), b.size())).cwiseAbs().maxCoeff() < 1e-8);
    for (int i = 1; i < b.size(); ++i) CHECK(b.kappas[i] >= b.kappas[i - 1]);
  }

  TEST_CASE("eigenvalue error decreases like h squared") {
    const double a = 0.5;
    const auto exact = analytic_rectangle_spectrum(a, 200.0);
    const auto coarse = compute_spectrum(rectangle(a, 20, 10), 200.0, Sector::kFull).basis;
    const auto fine = compute_spectrum(rectangle(a, 40, 20), 200.0, Sector::kFull).basis;
    for (int i = 0; i < 5; ++i) {
      const double ratio = (coarse.kappas[i] - exact[i]) / (fine.kappas[i] - exact[i]);
      CHECK(ratio == doctest::Approx(4.0).epsilon(0.25));
    }
  }

  TEST_CASE("means: antisymmetric modes vanish, first mode matches the closed form") {
    const double a = 0.5;
    const auto s = compute_spectrum(rectangle(a, 80, 16), 300.0, Sector::kFull);
    const auto& b = s.basis;
    // Second eigenvalue is mu_0 + (pi/2a)^2: odd in x2.
    CHECK(b.kappas[1] == doctest::Approx(kPi * kPi / 4 + kPi * kPi).epsilon(1e-2));
    CHECK(std::abs(b.means[1]) < 1e-8);
    for (int i = 0; i < b.size(); ++i) {
      CHECK(mode_mean(b.modes.col(i), s.mesh) == doctest::Approx(b.means[i]).epsilon(1e-10));
      const Eigen::VectorXd m = b.modes.col(i);
      double asym = 0.0, sym = 0.0;
      for (int v = 0; v < m.size(); ++v) {
        asym = std::max(asym, std::abs(m(v) + m(s.mesh.mirror[v])));
        sym = std::max(sym, std::abs(m(v) - m(s.mesh.mirror[v])));
      }
      if (asym < 1e-6) CHECK(std::abs(b.means[i]) < 1e-10);
    }
    // sqrt(1/a) * int_0^1 sin(pi x / 2) dx * 2a / |Omega| = sqrt(1/a) * 2 / pi.
    CHECK(b.means[0] == doctest::Approx(std::sqrt(1.0 / a) * 2.0 / kPi).epsilon(1e-3));
    CHECK(mode_mean(Eigen::VectorXd::Ones(s.mesh.vertex_count()), s.mesh) == doctest::Approx(1.0));
  }

  TEST_CASE("lanczos agrees with the dense solver") {
    const auto mesh = build_mesh(domain_from_profile(RadialProfile({0.2, 0.45, 0.3, 0.1, 0.4})),
                                 {40, 6});
    const auto sys = reduce_system(assemble(mesh), mesh, Sector::kFull);
    EigenSolveOptions dense;
    dense.dense_limit = 100000;
    EigenSolveOptions sparse;
    sparse.dense_limit = 0;
    const auto d = solve_eigen(sys, 800.0, dense);
    const auto l = solve_eigen(sys, 800.0, sparse);
    REQUIRE(d.size() == l.size());
    REQUIRE(d.size() == count_eigenvalues_below(sys, 800.0));
    for (int i = 0; i < d.size(); ++i) {
      CHECK(l.kappas[i] == doctest::Approx(d.kappas[i]).epsilon(1e-10));
      CHECK(std::abs(l.means[i]) == doctest::Approx(std::abs(d.means[i])).epsilon(1e-6).scale(1e-6));
    }
  }

  TEST_CASE("lanczos resolves repeated eigenvalues") {
    // On a = 1/2 the pairs mu_k + eta coincide analytically; a square-like
    // rectangle gives near-degenerate discrete pairs that a single Krylov
    // run tends to miss.
    const auto mesh = rectangle(0.5, 40, 20);
    const auto sys = reduce_system(assemble(mesh), mesh, Sector::kFull);
    EigenSolveOptions sparse;
    sparse.dense_limit = 0;
    const auto l = solve_eigen(sys, 400.0, sparse);
    CHECK(l.size() == count_eigenvalues_below(sys, 400.0));
  }

  TEST_CASE("symmetric sector keeps exactly the modes with nonzero mean") {
    const auto mesh = build_mesh(domain_from_profile(RadialProfile({0.3, 0.45, 0.2})), {40, 8});
    const auto full = compute_spectrum(mesh, 500.0, Sector::kFull).basis;
    const auto sym = compute_spectrum(mesh, 500.0, Sector::kSymmetric).basis;
    CHECK(sym.dof == full.dof);
    std::vector<double> kept;
    for (int i = 0; i < full.size(); ++i) {
      if (std::abs(full.means[i]) > 1e-8) kept.push_back(full.kappas[i]);
    }
    REQUIRE(static_cast<int>(kept.size()) == sym.size());
    for (int i = 0; i < sym.size(); ++i) CHECK(sym.kappas[i] == doctest::Approx(kept[i]).epsilon(1e-10));
    const Eigen::MatrixXd gram = sym.modes.transpose() * (assemble(mesh).mass * sym.modes);
    CHECK((gram - Eigen::MatrixXd::Identity(sym.size(), sym.size())).cwiseAbs().maxCoeff() < 1e-8);
    for (int i = 0; i < sym.size(); ++i) {
      CHECK(sym.means[i] == doctest::Approx(mode_mean(sym.modes.col(i), mesh)).epsilon(1e-12));
    }
  }

  TEST_CASE("sign convention and determinism") {
    const auto mesh = build_mesh(domain_from_profile(sample_profile(5, 5)), {40, 6});
    const auto a = compute_spectrum(mesh, 400.0, Sector::kSymmetric).basis;
    const auto b = compute_spectrum(mesh, 400.0, Sector::kSymmetric).basis;
    REQUIRE(a.size() == b.size());
    CHECK((a.modes - b.modes).cwiseAbs().maxCoeff() == 0.0);
    for (int c = 0; c < a.size(); ++c) {
      const Eigen::VectorXd m = a.modes.col(c);
      const double scale = m.cwiseAbs().maxCoeff();
      for (int i = 0; i < m.size(); ++i) {
        if (std::abs(m(i)) > 1e-8 * scale) {
          CHECK(m(i) > 0.0);
          break;
        }
      }
    }
  }

  TEST_CASE("invalid cutoff") {
    const auto mesh = rectangle(0.3, 4, 2);
    const auto sys = reduce_system(assemble(mesh), mesh, Sector::kFull);
    CHECK_THROWS_AS(solve_eigen(sys, 0.0), ParameterError);
    CHECK_THROWS_AS(solve_eigen(sys, -3.0), ParameterError);
  }
}
