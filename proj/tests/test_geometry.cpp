#include <doctest.h>

#include <cmath>

#include "avgpress/errors.hpp"
#include "avgpress/geometry.hpp"

using namespace avgpress;

TEST_SUITE("geometry") {
  TEST_CASE("profile validation rejects out of range radii and bad counts") {
    CHECK_THROWS_AS(RadialProfile({0.05}), ParameterError);
    CHECK_THROWS_AS(RadialProfile({0.2, 0.51}), ParameterError);
    CHECK_THROWS_AS(RadialProfile({0.2, 0.3, 0.3, 0.3}), ParameterError);
    CHECK_THROWS_AS(RadialProfile(std::vector<double>{}), ParameterError);
    CHECK_NOTHROW(RadialProfile({0.1, 0.5}));
  }

  TEST_CASE("sampled radii are in range and reproducible") {
    const auto a = sample_profile(7, 5);
    const auto b = sample_profile(7, 5);
    REQUIRE(a.breakpoint_count() == 5);
    for (int i = 0; i < 5; ++i) CHECK(a.radii()[i] == b.radii()[i]);
    const auto one = sample_profile(11, 1);
    CHECK(one.radii()[0] >= 0.1);
    CHECK(one.radii()[0] <= 0.5);
    CHECK_THROWS_AS(sample_profile(1, 4), ParameterError);
    CHECK_THROWS_AS(sample_profile(1, 19), ParameterError);
  }

  TEST_CASE("sample mean of many radii is close to 0.3") {
    double s = 0.0;
    int n = 0;
    for (std::uint64_t seed = 0; n < 100000; ++seed) {
      const auto profile = sample_profile(seed, 5);
      for (double r : profile.radii()) {
        s += r;
        ++n;
      }
    }
    CHECK(std::abs(s / n - 0.3) < 0.005);
  }

  TEST_CASE("domain polygon and area") {
    const auto rect = domain_from_profile(RadialProfile({0.5}));
    CHECK(area(rect) == doctest::Approx(1.0).epsilon(1e-15));
    const auto trap = domain_from_profile(RadialProfile({0.1, 0.5}));
    CHECK(area(trap) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(trap.gamma_d.size() == 1);

    const auto d = domain_from_profile(RadialProfile({0.2, 0.4, 0.3, 0.15, 0.45}));
    const auto& poly = d.polygon;
    // Symmetric under x2 -> -x2: every vertex has a mirror image.
    for (const auto& p : poly) {
      bool found = false;
      for (const auto& q : poly) found = found || (q.x() == p.x() && q.y() == -p.y());
      CHECK(found);
    }
    // Shoelace area (counterclockwise means positive) matches the trapezoid rule.
    double shoelace = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const auto& p = poly[i];
      const auto& q = poly[(i + 1) % poly.size()];
      shoelace += 0.5 * (p.x() * q.y() - q.x() * p.y());
    }
    CHECK(shoelace == doctest::Approx(area(d)).epsilon(1e-14));
    // Gamma_D is the single edge on x1 = 0.
    REQUIRE(d.gamma_d.size() == 1);
    const auto& e0 = poly[d.gamma_d[0]];
    const auto& e1 = poly[(d.gamma_d[0] + 1) % poly.size()];
    CHECK(e0.x() == 0.0);
    CHECK(e1.x() == 0.0);
    CHECK(d.gamma_d.size() + d.gamma_n.size() == poly.size());
  }

  TEST_CASE("area bounds") {
    for (std::uint64_t s = 0; s < 50; ++s) {
      const double a = area(sample_profile(s, 3));
      CHECK(a >= 0.2);
      CHECK(a <= 1.0);
    }
  }

  TEST_CASE("arc profile interpolation constraints") {
    const auto flat = arc_profile({0.1, 19});
    for (double r : flat.radii()) CHECK(r == 0.1);
    const auto high = arc_profile({0.5, 19});
    CHECK(high.radii()[0] == doctest::Approx(0.1).epsilon(1e-14));
    CHECK(high.radii()[18] == doctest::Approx(0.1).epsilon(1e-14));
    CHECK(high.radii()[9] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(high.is_concave());
  }

  TEST_CASE("19-point arc downsampled to 5 points equals the 5-point arc") {
    for (double m : {0.1, 0.17, 0.3, 0.42, 0.5}) {
      const auto fine = arc_profile({m, 19});
      const auto coarse = arc_profile({m, 5});
      // Grid points x = i/4 coincide with 19-point breakpoints only at 0, 1/2, 1.
      const auto in = fine.network_input();
      CHECK(in[0] == doctest::Approx(coarse.radii()[0]).epsilon(1e-14));
      CHECK(in[2] == doctest::Approx(coarse.radii()[2]).epsilon(1e-14));
      CHECK(in[4] == doctest::Approx(coarse.radii()[4]).epsilon(1e-14));
      // Off-grid points: the arc itself evaluated at x = 1/4, 3/4.
      CHECK(coarse.radii()[1] == doctest::Approx(arc_radius(m, 0.25)).epsilon(1e-14));
      CHECK(coarse.radii()[3] == doctest::Approx(arc_radius(m, 0.75)).epsilon(1e-14));
      for (int j = 0; j < 19; ++j) {
        CHECK(fine.radii()[j] == doctest::Approx(arc_radius(m, j / 18.0)).epsilon(1e-14));
      }
    }
  }

  TEST_CASE("arc area converges to the exact arc area") {
    // Oracle: midpoint rule with 1e6 panels on the exact arc.
    const double m = 0.35;
    double exact = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) exact += 2.0 * arc_radius(m, (i + 0.5) / n) / n;
    const double e19 = std::abs(area(arc_profile({m, 19})) - exact);
    const double e5 = std::abs(area(arc_profile({m, 5})) - exact);
    // Chord (piecewise-linear) error scales like the squared segment length.
    CHECK(e19 < e5);
    CHECK(e19 < 2e-3);
    CHECK(e5 / e19 == doctest::Approx(std::pow(18.0 / 4.0, 2)).epsilon(0.1));
  }

  TEST_CASE("network input broadcasts uniform profiles and parses text") {
    const auto in = RadialProfile({0.25}).network_input();
    for (double r : in) CHECK(r == 0.25);
    const auto p = parse_profile("0.2, 0.4,0.2");
    CHECK(p.breakpoint_count() == 3);
    CHECK(p.radius_at(0.25) == doctest::Approx(0.3));
    CHECK_THROWS_AS(parse_profile("0.2,abc"), ParameterError);
    CHECK_THROWS_AS(parse_profile(""), ParameterError);
  }
}
