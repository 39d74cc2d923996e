#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "avgpress/dataset.hpp"
#include "avgpress/surrogate.hpp"

namespace avgpress {

using Predictor = std::function<double(const std::array<double, kNetworkInputs>&)>;

struct EvalReport {
  std::string dataset;
  std::size_t n = 0;
  double mse = 0.0;
  double pct_abs_err_below = 0.0;  // in percent
  double threshold = 0.01;
  std::string model_id;
};

// Throws ParameterError on an empty set or one containing boosted rows.
EvalReport evaluate(const Predictor& predictor, const Dataset& data, double threshold = 0.01,
                    std::string dataset_name = {}, std::string model_id = {});

struct LinearModel {
  std::array<double, kNetworkInputs> weights{};
  double intercept = 0.0;

  double predict(const std::array<double, kNetworkInputs>& radii) const;
  std::string id() const;
};

enum class RankPolicy {
  kStrict,        // rank-deficient design is an error
  kMinimumNorm,   // minimum-norm least-squares solution
};

// Least squares with intercept from the normal equations. Needs >= 6 rows.
LinearModel fit_linear(const Dataset& train, RankPolicy policy = RankPolicy::kStrict);
// max |X^T (y - X beta)| over the design columns.
double normal_equation_residual(const LinearModel& model, const Dataset& data);

void save_linear(const LinearModel& model, const std::filesystem::path& path);
LinearModel load_linear(const std::filesystem::path& path);

// ---- convergence -----------------------------------------------------------

struct ConvergencePoint {
  MeshParams mesh;
  double h = 0.0;
  int dof = 0;
  double cutoff = 0.0;
  double psi_h = 0.0;
  double error = 0.0;
};

struct ConvergenceResult {
  std::vector<ConvergencePoint> points;  // excludes the reference level for polygonal profiles
  double reference = 0.0;
  bool exact_reference = false;
  double slope = 0.0;  // least-squares slope of log error against log h
};

// Levels are given coarse to fine. Uniform profiles compare against the exact
// closed form; other profiles against the finest level. The spectral cutoff
// per level is max(cutoff_factor * lambda_max, dof / 10) so the series tail
// shrinks with the mesh. Needs >= 3 levels.
ConvergenceResult convergence_study(const RadialProfile& profile, const FrequencyRange& range,
                                    const std::vector<MeshParams>& levels, double cutoff_factor = 10.0,
                                    Sector sector = Sector::kSymmetric);
double loglog_slope(std::span<const double> h, std::span<const double> err);

// ---- training-set size curve ----------------------------------------------

struct SizeCurvePoint {
  std::size_t size = 0;
  int repeats = 0;
  double mse_mean = 0.0, mse_std = 0.0;
  double pct_mean = 0.0, pct_std = 0.0;
  std::vector<double> mse;
  std::vector<double> pct;
};

// For each size and repeat r: the first `size` rows of a permutation of `pool`
// seeded by (seed, size, r), trained with init/shuffle seeds derived from the
// same triple, evaluated on `test`. Cells run on `workers` threads.
std::vector<SizeCurvePoint> size_curve(const Dataset& pool, const Dataset& test,
                                       const std::vector<std::size_t>& sizes, int repeats,
                                       const TrainConfig& config, std::uint64_t seed, int workers = 1);

// ---- out-of-sample arcs ---------------------------------------------------

struct ArcRow {
  double mid_radius = 0.0;
  double psi19 = 0.0;
  double psi5 = 0.0;
  double fem_sq_err = 0.0;
  double ml_mean = 0.0;  // mean model prediction on the 5-point input
  double ml_mse = 0.0;   // mean over models of (prediction - psi19)^2
  double ml_std = 0.0;   // std over models of the squared error
  int below19 = 0;       // contributing eigenvalues below lambda_max
  int below5 = 0;
  bool flagged = false;  // pole at an endpoint for either profile
};

struct ArcStudy {
  std::vector<ArcRow> rows;
  double mean_fem_sq_err = 0.0;  // over unflagged rows
  double mean_ml_mse = 0.0;
  // Mid radii between grid points where below19 or below5 changes.
  std::vector<double> crossings;
};

ArcStudy arc_study(const std::vector<MlpModel>& models, const LabelConfig& label, int grid_points = 100,
                   int workers = 1);

// ---- hyperparameter grid ---------------------------------------------------

struct GridRow {
  int hidden_layers = 0;
  int width = 0;
  double val_split = 0.0;
  int epochs = 0;
  double mse_uniform = 0.0;
  double mse_random = 0.0;
  std::string model_id;
};

std::vector<GridRow> hyper_grid(const Dataset& train_set, const Dataset& uniform_test, const Dataset& random_test,
                                const TrainConfig& base, const std::vector<int>& layers = {2, 3, 4},
                                const std::vector<int>& widths = {64, 128, 192},
                                const std::vector<double>& val_splits = {0.1, 0.2, 0.3}, int workers = 1);

// ---- affine radius family ---------------------------------------------------

struct AffineGridRow {
  double r0 = 0.0;
  double r1 = 0.0;
  double psi_h = 0.0;
  double min_endpoint_gap = 0.0;
  bool flagged = false;
  double prediction = 0.0;  // NaN without a model
  double sq_err = 0.0;
};

// Two-point profiles (r0, r1) on an n x n grid of [0.1, 0.5]^2. Needs n >= 10.
std::vector<AffineGridRow> affine_radius_grid(int n, const LabelConfig& label, const MlpModel* model = nullptr,
                                              int workers = 1);

// ---- CSV writers ----------------------------------------------------------

void write_eval_csv(const std::vector<EvalReport>& reports, const std::filesystem::path& path);
void write_convergence_csv(const ConvergenceResult& r, const std::filesystem::path& path);
void write_size_curve_csv(const std::vector<SizeCurvePoint>& pts, const std::filesystem::path& path);
void write_arc_csv(const ArcStudy& s, const std::filesystem::path& path);
void write_grid_csv(const std::vector<GridRow>& rows, const std::filesystem::path& path);
void write_affine_grid_csv(const std::vector<AffineGridRow>& rows, const std::filesystem::path& path);

}  // namespace avgpress
