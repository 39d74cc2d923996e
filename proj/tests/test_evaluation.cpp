#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "avgpress/errors.hpp"
#include "avgpress/evaluation.hpp"
#include "avgpress/rng.hpp"

using namespace avgpress;
namespace fs = std::filesystem;

namespace {

Dataset synthetic(int n, std::uint64_t seed, const std::function<double(const std::array<double, 5>&)>& f,
                  bool uniform = false) {
  Dataset d;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    Sample s;
    const double a = rng.uniform(0.1, 0.5);
    for (double& r : s.radii) r = uniform ? a : rng.uniform(0.1, 0.5);
    s.psi = f(s.radii);
    s.sample_seed = static_cast<std::uint64_t>(i);
    d.samples.push_back(s);
  }
  return d;
}

fs::path temp_file(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "avgpress_test_evaluation";
  fs::create_directories(dir);
  return dir / name;
}

double affine_truth(const std::array<double, 5>& r) {
  return 0.3 * r[0] - 0.2 * r[1] + 0.7 * r[2] + 0.05 * r[3] - 1.1 * r[4] + 0.02;
}

}  // namespace

TEST_SUITE("evaluation") {
  TEST_CASE("evaluate metrics") {
    const Dataset d = synthetic(50, 1, affine_truth);
    const auto perfect = evaluate([](const std::array<double, 5>& r) { return affine_truth(r); }, d);
    CHECK(perfect.mse == 0.0);
    CHECK(perfect.pct_abs_err_below == 100.0);
    CHECK(perfect.n == 50);

    const auto shifted = evaluate([](const std::array<double, 5>& r) { return affine_truth(r) + 0.02; }, d);
    CHECK(shifted.mse == doctest::Approx(4e-4));
    CHECK(shifted.pct_abs_err_below == 0.0);

    const Dataset uni = synthetic(30, 2, [](const std::array<double, 5>&) { return 0.0742; }, true);
    CHECK(evaluate([](const std::array<double, 5>&) { return 0.0742; }, uni).pct_abs_err_below == 100.0);

    // Deterministic: same predictor and data give identical reports.
    auto p = [](const std::array<double, 5>& r) { return r[0] * r[1]; };
    CHECK(evaluate(p, d).mse == evaluate(p, d).mse);

    Dataset boosted = d;
    boosted.samples[4].source = SampleSource::kBoosted;
    CHECK_THROWS_AS(evaluate(p, boosted), ParameterError);
    CHECK_THROWS_AS(evaluate(p, Dataset{}), ParameterError);
  }

  TEST_CASE("linear fit recovers affine data") {
    const Dataset d = synthetic(40, 3, affine_truth);
    const LinearModel m = fit_linear(d);
    CHECK(m.weights[0] == doctest::Approx(0.3));
    CHECK(m.weights[4] == doctest::Approx(-1.1));
    CHECK(m.intercept == doctest::Approx(0.02));
    CHECK(evaluate([&](const std::array<double, 5>& r) { return m.predict(r); }, d).mse < 1e-28);
  }

  TEST_CASE("linear residuals are orthogonal to the design") {
    Rng noise(4);
    const Dataset d = synthetic(200, 5, [&](const std::array<double, 5>& r) {
      return std::sin(10 * r[0]) * r[3] + noise.uniform(-0.01, 0.01);
    });
    const LinearModel m = fit_linear(d);
    CHECK(normal_equation_residual(m, d) < 1e-8);
    // Perturbing any coefficient increases the training error.
    const double base = evaluate([&](const std::array<double, 5>& r) { return m.predict(r); }, d).mse;
    for (int j = 0; j < 5; ++j) {
      LinearModel q = m;
      q.weights[j] += 1e-3;
      CHECK(evaluate([&](const std::array<double, 5>& r) { return q.predict(r); }, d).mse > base);
    }
  }

  TEST_CASE("rank-deficient designs") {
    const Dataset uni = synthetic(30, 6, [](const std::array<double, 5>&) { return 0.0742; }, true);
    CHECK_THROWS_AS(fit_linear(uni), ParameterError);
    const LinearModel m = fit_linear(uni, RankPolicy::kMinimumNorm);
    for (double w : m.weights) CHECK(std::abs(w) < 1e-12);
    CHECK(m.intercept == doctest::Approx(0.0742).epsilon(1e-12));
    CHECK_THROWS_AS(fit_linear(synthetic(5, 7, affine_truth)), ParameterError);
  }

  TEST_CASE("linear model file round trip") {
    const LinearModel m = fit_linear(synthetic(40, 8, affine_truth));
    const auto p = temp_file("lin.json");
    save_linear(m, p);
    const LinearModel back = load_linear(p);
    CHECK(back.weights == m.weights);
    CHECK(back.intercept == m.intercept);
    CHECK(back.id() == m.id());
  }

  TEST_CASE("log-log slope of a power law") {
    const std::vector<double> h = {0.1, 0.05, 0.025};
    const std::vector<double> e = {3e-2, 7.5e-3, 1.875e-3};
    CHECK(loglog_slope(h, e) == doctest::Approx(2.0));
    const std::vector<double> bad = {1e-3, 0.0, 1e-4};
    CHECK_THROWS_AS(loglog_slope(h, bad), NumericError);
  }

  TEST_CASE("convergence study structure") {
    const std::vector<MeshParams> levels = {{48, 8}, {96, 16}, {192, 32}};
    const auto u = convergence_study(RadialProfile({0.3}), {0.0, 10.0}, levels);
    REQUIRE(u.points.size() == 3);
    CHECK(u.exact_reference);
    CHECK(u.reference == doctest::Approx(uniform_psi_exact({0.0, 10.0})));
    CHECK(u.points[0].error > u.points[1].error);
    CHECK(u.points[1].error > u.points[2].error);
    CHECK(u.slope > 1.7);
    CHECK(u.points[2].cutoff >= u.points[2].dof / 10.0);

    const auto p = convergence_study(RadialProfile({0.2, 0.4, 0.3}), {0.0, 10.0}, levels);
    CHECK(!p.exact_reference);
    CHECK(p.points.size() == 2);
    CHECK_THROWS_AS(convergence_study(RadialProfile({0.3}), {0.0, 10.0}, {{24, 4}, {48, 8}}), ParameterError);
  }

  TEST_CASE("size curve is deterministic across worker counts") {
    const Dataset pool = synthetic(120, 9, affine_truth);
    const Dataset test = synthetic(40, 10, affine_truth);
    TrainConfig c;
    c.layer_dims = {5, 8, 1};
    c.max_epochs = 3;
    const auto a = size_curve(pool, test, {40, 80}, 2, c, 5, 1);
    const auto b = size_curve(pool, test, {40, 80}, 2, c, 5, 2);
    REQUIRE(a.size() == 2);
    CHECK(a[0].size == 40);
    CHECK(a[1].mse.size() == 2);
    CHECK(a[0].mse == b[0].mse);
    CHECK(a[1].pct == b[1].pct);
    CHECK(a[0].mse_std >= 0.0);
    CHECK(a[0].mse[0] != a[0].mse[1]);
    CHECK_THROWS_AS(size_curve(pool, test, {500}, 1, c, 5), ParameterError);
  }

  TEST_CASE("arc study rows") {
    LabelConfig label;
    label.mesh = {36, 4};
    label.cutoff_factor = 2.0;
    const std::vector<MlpModel> models = {zero_model(std::vector<int>{5, 1})};
    const auto s = arc_study(models, label, 5);
    REQUIRE(s.rows.size() == 5);
    CHECK(s.rows[0].mid_radius == doctest::Approx(0.1));
    CHECK(s.rows[4].mid_radius == doctest::Approx(0.5));
    // Both profiles are the uniform 0.1 cylinder on the same nodes.
    CHECK(s.rows[0].fem_sq_err == 0.0);
    CHECK(s.rows[0].ml_mse == doctest::Approx(s.rows[0].psi19 * s.rows[0].psi19));
    CHECK(s.rows[0].ml_std == 0.0);
    CHECK(std::isfinite(s.mean_fem_sq_err));
  }

  TEST_CASE("arc grid endpoints stay admissible for any grid size") {
    LabelConfig label;
    label.mesh = {36, 4};
    label.cutoff_factor = 2.0;
    // 0.1 + 0.4 * 3 / 3 rounds above 0.5 in floating point.
    const auto s = arc_study({}, label, 4);
    CHECK(s.rows.back().mid_radius == 0.5);
    CHECK(s.rows.front().mid_radius == 0.1);
  }

  TEST_CASE("hyperparameter grid emits every cell") {
    const Dataset train_set = synthetic(60, 11, affine_truth);
    const Dataset uni = synthetic(20, 12, [](const std::array<double, 5>&) { return 0.0742; }, true);
    const Dataset rnd = synthetic(20, 13, affine_truth);
    TrainConfig c;
    c.max_epochs = 1;
    const auto rows = hyper_grid(train_set, uni, rnd, c);
    CHECK(rows.size() == 27);
    CHECK(rows.front().hidden_layers == 2);
    CHECK(rows.front().width == 64);
    CHECK(rows.back().hidden_layers == 4);
    CHECK(rows.back().val_split == 0.3);
    for (const auto& r : rows) CHECK(r.epochs == 1);
  }

  TEST_CASE("affine radius grid diagonal is the uniform value") {
    LabelConfig label;
    label.mesh = {90, 10};
    const auto rows = affine_radius_grid(10, label);
    REQUIRE(rows.size() == 100);
    for (const auto& r : rows) {
      if (r.r0 != r.r1) continue;
      CHECK(std::abs(r.psi_h - 0.0742) < 2e-3);
      CHECK(std::isnan(r.prediction));
    }
    CHECK_THROWS_AS(affine_radius_grid(9, label), ParameterError);
  }

  TEST_CASE("csv writers") {
    const auto p = temp_file("eval.csv");
    write_eval_csv({EvalReport{"t", 3, 1e-4, 50.0, 0.01, "abc"}}, p);
    CHECK(fs::file_size(p) > 0);
  }
}
