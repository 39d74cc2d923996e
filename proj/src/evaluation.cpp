#include "avgpress/evaluation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "avgpress/errors.hpp"
#include "avgpress/log.hpp"
#include "avgpress/parallel.hpp"
#include "avgpress/rng.hpp"
#include "avgpress/serialization.hpp"

namespace avgpress {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Point i of n equally spaced radii on [kMinRadius, kMaxRadius]; the last one
// is exactly kMaxRadius so rounding never leaves the admissible range.
double radius_grid(int i, int n) {
  if (i == n - 1) return kMaxRadius;
  return std::min(kMaxRadius, kMinRadius + (kMaxRadius - kMinRadius) * i / (n - 1));
}

std::ofstream open_csv(const std::filesystem::path& path, const char* header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParameterError("cannot open " + path.string() + " for writing");
  out << header << '\n';
  return out;
}

std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::pair<double, double> mean_std(std::span<const double> v) {
  if (v.empty()) return {kNaN, kNaN};
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0};
}

Eigen::MatrixXd design(const Dataset& d) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(d.size()), kNetworkInputs + 1);
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (int j = 0; j < kNetworkInputs; ++j) x(static_cast<Eigen::Index>(i), j) = d.samples[i].radii[j];
    x(static_cast<Eigen::Index>(i), kNetworkInputs) = 1.0;
  }
  return x;
}

Eigen::VectorXd labels(const Dataset& d) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i) y(static_cast<Eigen::Index>(i)) = d.samples[i].psi;
  return y;
}

Eigen::VectorXd coefficients(const LinearModel& m) {
  Eigen::VectorXd beta(kNetworkInputs + 1);
  for (int j = 0; j < kNetworkInputs; ++j) beta(j) = m.weights[j];
  beta(kNetworkInputs) = m.intercept;
  return beta;
}

Dataset subset(const Dataset& d, std::span<const std::size_t> idx) {
  Dataset out;
  out.manifest = d.manifest;
  for (std::size_t i : idx) out.samples.push_back(d.samples[i]);
  out.refresh_manifest();
  return out;
}

Predictor model_predictor(const MlpModel& m) {
  return [&m](const std::array<double, kNetworkInputs>& x) { return forward(m, x); };
}

int count_below(const DiscreteEigenBasis& b, double lambda) {
  int n = 0;
  for (int i = 0; i < b.size(); ++i) {
    if (b.means[i] * b.means[i] > kMeanSquaredTol && b.kappas[i] < lambda) ++n;
  }
  return n;
}

}  // namespace

EvalReport evaluate(const Predictor& predictor, const Dataset& data, double threshold, std::string dataset_name,
                    std::string model_id) {
  if (data.size() == 0) throw ParameterError("evaluation on an empty dataset");
  if (!(threshold > 0)) throw ParameterError("threshold must be positive");
  EvalReport r;
  r.dataset = std::move(dataset_name);
  r.model_id = std::move(model_id);
  r.threshold = threshold;
  r.n = data.size();
  double sq = 0.0;
  std::size_t hits = 0;
  for (const auto& s : data.samples) {
    if (s.source == SampleSource::kBoosted) throw ParameterError("test sets must not contain boosted rows");
    const double e = predictor(s.radii) - s.psi;
    sq += e * e;
    if (std::abs(e) < threshold) ++hits;
  }
  r.mse = sq / static_cast<double>(r.n);
  r.pct_abs_err_below = 100.0 * static_cast<double>(hits) / static_cast<double>(r.n);
  return r;
}

double LinearModel::predict(const std::array<double, kNetworkInputs>& radii) const {
  double v = intercept;
  for (int j = 0; j < kNetworkInputs; ++j) v += weights[j] * radii[j];
  return v;
}

std::string LinearModel::id() const {
  std::string s;
  for (double w : weights) s += g17(w) + ",";
  s += g17(intercept);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[24];
  std::snprintf(buf, sizeof buf, "lin-%016llx", static_cast<unsigned long long>(h));
  return buf;
}

LinearModel fit_linear(const Dataset& train, RankPolicy policy) {
  if (train.size() < kNetworkInputs + 1) throw ParameterError("linear fit needs at least 6 rows");
  const Eigen::MatrixXd x = design(train);
  const Eigen::VectorXd y = labels(train);
  const Eigen::MatrixXd gram = x.transpose() * x;
  const Eigen::VectorXd rhs = x.transpose() * y;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  const bool deficient = !(lo > 1e-12 * hi);
  Eigen::VectorXd beta;
  if (!deficient) {
    beta = gram.ldlt().solve(rhs);
  } else if (policy == RankPolicy::kMinimumNorm) {
    beta = x.completeOrthogonalDecomposition().solve(y);
  } else {
    throw ParameterError("rank-deficient design (eigenvalue ratio " + std::to_string(lo / hi) + ")");
  }
  LinearModel m;
  for (int j = 0; j < kNetworkInputs; ++j) m.weights[j] = beta(j);
  m.intercept = beta(kNetworkInputs);
  return m;
}

double normal_equation_residual(const LinearModel& model, const Dataset& data) {
  const Eigen::MatrixXd x = design(data);
  return (x.transpose() * (labels(data) - x * coefficients(model))).cwiseAbs().maxCoeff();
}

void save_linear(const LinearModel& model, const std::filesystem::path& path) {
  Json j{{"format", "avgpress-linear"}, {"version", 1}, {"weights", model.weights}, {"intercept", model.intercept},
         {"id", model.id()}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParameterError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

LinearModel load_linear(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParameterError("cannot open " + path.string());
  return with_json_errors(path.string(), [&] {
    const Json j = Json::parse(in);
    if (j.at("format") != "avgpress-linear" || j.at("version") != 1) throw ParseError("not a linear model file", 1);
    LinearModel m;
    m.weights = j.at("weights").get<std::array<double, kNetworkInputs>>();
    m.intercept = j.at("intercept").get<double>();
    return m;
  });
}

double loglog_slope(std::span<const double> h, std::span<const double> err) {
  if (h.size() != err.size() || h.size() < 2) throw ParameterError("slope needs >= 2 points");
  const auto n = static_cast<double>(h.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (!(h[i] > 0 && err[i] > 0)) throw NumericError("log-log fit needs positive values");
    const double lx = std::log(h[i]), ly = std::log(err[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

ConvergenceResult convergence_study(const RadialProfile& profile, const FrequencyRange& range,
                                    const std::vector<MeshParams>& levels, double cutoff_factor, Sector sector) {
  range.validate();
  if (levels.size() < 3) throw ParameterError("convergence study needs at least 3 levels");
  const auto domain = domain_from_profile(profile);
  std::vector<ConvergencePoint> pts;
  for (const auto& mp : levels) {
    auto mesh = build_mesh(domain, mp);
    ConvergencePoint p;
    p.mesh = mp;
    p.h = mesh.h;
    p.dof = mesh.vertex_count() - static_cast<int>(mesh.dirichlet_nodes.size());
    p.cutoff = std::max(cutoff_factor * range.lambda_max, p.dof / 10.0);
    const auto spec = compute_spectrum(std::move(mesh), p.cutoff, sector);
    p.psi_h = psi_objective(spec.basis, range).psi;
    logger().info("convergence: {}x{} h {:.4g} dof {} cutoff {:.0f} psi {:.10f}", mp.nx, mp.ny, p.h, p.dof,
                  p.cutoff, p.psi_h);
    pts.push_back(p);
  }
  ConvergenceResult r;
  r.exact_reference = profile.is_uniform();
  if (r.exact_reference) {
    r.reference = uniform_psi_exact(range);
  } else {
    r.reference = pts.back().psi_h;
    pts.pop_back();
  }
  std::vector<double> hs, errs;
  for (auto& p : pts) {
    p.error = std::abs(r.reference - p.psi_h);
    hs.push_back(p.h);
    errs.push_back(p.error);
  }
  r.points = std::move(pts);
  r.slope = loglog_slope(hs, errs);
  return r;
}

std::vector<SizeCurvePoint> size_curve(const Dataset& pool, const Dataset& test, const std::vector<std::size_t>& sizes,
                                       int repeats, const TrainConfig& config, std::uint64_t seed, int workers) {
  if (repeats < 1) throw ParameterError("repeats must be >= 1");
  for (std::size_t s : sizes) {
    if (s > pool.size()) throw ParameterError("size " + std::to_string(s) + " exceeds the training pool");
    if (s < 10) throw ParameterError("training sizes must be >= 10");
  }
  const std::size_t cells = sizes.size() * static_cast<std::size_t>(repeats);
  std::vector<EvalReport> reports(cells);
  parallel_for(cells, workers, [&](std::size_t c) {
    const std::size_t size = sizes[c / repeats];
    const auto r = static_cast<std::uint64_t>(c % repeats);
    const std::uint64_t cell_seed = derive_seed(seed, size, r);
    std::vector<std::size_t> idx(pool.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(cell_seed);
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    idx.resize(size);
    TrainConfig tc = config;
    tc.init_seed = derive_seed(cell_seed, 1);
    tc.shuffle_seed = derive_seed(cell_seed, 2);
    const auto res = train(subset(pool, idx), tc);
    reports[c] = evaluate(model_predictor(res.model), test, 0.01, "test", model_id(res.model));
    logger().info("size {} repeat {}: mse {:.4e} pct {:.1f}", size, r, reports[c].mse, reports[c].pct_abs_err_below);
  });
  std::vector<SizeCurvePoint> out;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    SizeCurvePoint p;
    p.size = sizes[k];
    p.repeats = repeats;
    for (int r = 0; r < repeats; ++r) {
      p.mse.push_back(reports[k * repeats + r].mse);
      p.pct.push_back(reports[k * repeats + r].pct_abs_err_below);
    }
    std::tie(p.mse_mean, p.mse_std) = mean_std(p.mse);
    std::tie(p.pct_mean, p.pct_std) = mean_std(p.pct);
    out.push_back(std::move(p));
  }
  return out;
}

ArcStudy arc_study(const std::vector<MlpModel>& models, const LabelConfig& label, int grid_points, int workers) {
  label.validate();
  if (grid_points < 2) throw ParameterError("arc grid needs at least 2 points");
  ArcStudy s;
  s.rows.resize(grid_points);
  parallel_for(static_cast<std::size_t>(grid_points), workers, [&](std::size_t i) {
    ArcRow& row = s.rows[i];
    row.mid_radius = radius_grid(static_cast<int>(i), grid_points);
    const RadialProfile p19 = arc_profile({row.mid_radius, 19});
    const auto input = p19.network_input();
    const RadialProfile p5(std::vector<double>(input.begin(), input.end()));
    auto solve = [&](const RadialProfile& p, double& psi, int& below) {
      const auto spec = compute_spectrum(build_mesh(domain_from_profile(p), label.mesh), label.cutoff(), label.sector);
      below = count_below(spec.basis, label.range.lambda_max);
      try {
        psi = psi_objective(spec.basis, label.range).psi;
      } catch (const PoleAtEndpoint&) {
        psi = kNaN;
        row.flagged = true;
      }
    };
    solve(p19, row.psi19, row.below19);
    solve(p5, row.psi5, row.below5);
    row.fem_sq_err = (row.psi19 - row.psi5) * (row.psi19 - row.psi5);
    std::vector<double> preds, errs;
    for (const auto& m : models) {
      const double y = forward(m, input);
      preds.push_back(y);
      errs.push_back((y - row.psi19) * (y - row.psi19));
    }
    if (models.empty()) {
      row.ml_mean = row.ml_mse = row.ml_std = kNaN;
    } else {
      row.ml_mean = mean_std(preds).first;
      std::tie(row.ml_mse, row.ml_std) = mean_std(errs);
    }
  });
  double fem = 0.0, ml = 0.0;
  int used = 0;
  for (std::size_t i = 0; i < s.rows.size(); ++i) {
    const auto& r = s.rows[i];
    if (!r.flagged) {
      fem += r.fem_sq_err;
      ml += r.ml_mse;
      ++used;
    }
    if (i > 0) {
      const auto& q = s.rows[i - 1];
      if (q.below19 != r.below19 || q.below5 != r.below5) s.crossings.push_back(0.5 * (q.mid_radius + r.mid_radius));
    }
  }
  s.mean_fem_sq_err = used ? fem / used : kNaN;
  s.mean_ml_mse = used ? ml / used : kNaN;
  return s;
}

std::vector<GridRow> hyper_grid(const Dataset& train_set, const Dataset& uniform_test, const Dataset& random_test,
                                const TrainConfig& base, const std::vector<int>& layers, const std::vector<int>& widths,
                                const std::vector<double>& val_splits, int workers) {
  std::vector<GridRow> rows;
  for (int l : layers) {
    for (int w : widths) {
      for (double v : val_splits) rows.push_back({l, w, v, 0, 0.0, 0.0, {}});
    }
  }
  parallel_for(rows.size(), workers, [&](std::size_t i) {
    GridRow& row = rows[i];
    TrainConfig c = base;
    c.layer_dims = {kNetworkInputs};
    for (int k = 0; k < row.hidden_layers; ++k) c.layer_dims.push_back(row.width);
    c.layer_dims.push_back(1);
    c.val_fraction = row.val_split;
    const auto res = train(train_set, c);
    row.epochs = res.history.epochs();
    row.model_id = model_id(res.model);
    row.mse_uniform = evaluate(model_predictor(res.model), uniform_test).mse;
    row.mse_random = evaluate(model_predictor(res.model), random_test).mse;
    logger().info("grid {}x{} val {}: uniform {:.3e} random {:.3e}", row.hidden_layers, row.width, row.val_split,
                  row.mse_uniform, row.mse_random);
  });
  return rows;
}

std::vector<AffineGridRow> affine_radius_grid(int n, const LabelConfig& label, const MlpModel* model, int workers) {
  label.validate();
  if (n < 10) throw ParameterError("affine grid needs n >= 10");
  std::vector<AffineGridRow> rows(static_cast<std::size_t>(n) * n);
  parallel_for(rows.size(), workers, [&](std::size_t k) {
    AffineGridRow& row = rows[k];
    row.r0 = radius_grid(static_cast<int>(k / n), n);
    row.r1 = radius_grid(static_cast<int>(k % n), n);
    const RadialProfile p({row.r0, row.r1});
    const auto spec = compute_spectrum(build_mesh(domain_from_profile(p), label.mesh), label.cutoff(), label.sector);
    try {
      const auto obj = psi_objective(spec.basis, label.range);
      row.psi_h = obj.psi;
      row.min_endpoint_gap = obj.min_endpoint_gap;
    } catch (const PoleAtEndpoint&) {
      row.psi_h = kNaN;
      row.min_endpoint_gap = 0.0;
      row.flagged = true;
    }
    row.prediction = model ? forward(*model, p.network_input()) : kNaN;
    row.sq_err = model && !row.flagged ? (row.prediction - row.psi_h) * (row.prediction - row.psi_h) : kNaN;
  });
  return rows;
}

void write_eval_csv(const std::vector<EvalReport>& reports, const std::filesystem::path& path) {
  auto out = open_csv(path, "dataset,n,mse,pct_abs_err_below,threshold,model_id");
  for (const auto& r : reports) {
    out << r.dataset << ',' << r.n << ',' << g17(r.mse) << ',' << g17(r.pct_abs_err_below) << ','
        << g17(r.threshold) << ',' << r.model_id << '\n';
  }
}

void write_convergence_csv(const ConvergenceResult& r, const std::filesystem::path& path) {
  auto out = open_csv(path, "nx,ny,h,dof,cutoff,psi_h,reference,error");
  for (const auto& p : r.points) {
    out << p.mesh.nx << ',' << p.mesh.ny << ',' << g17(p.h) << ',' << p.dof << ',' << g17(p.cutoff) << ','
        << g17(p.psi_h) << ',' << g17(r.reference) << ',' << g17(p.error) << '\n';
  }
}

void write_size_curve_csv(const std::vector<SizeCurvePoint>& pts, const std::filesystem::path& path) {
  auto out = open_csv(path, "size,repeats,mse_mean,mse_std,pct_mean,pct_std");
  for (const auto& p : pts) {
    out << p.size << ',' << p.repeats << ',' << g17(p.mse_mean) << ',' << g17(p.mse_std) << ','
        << g17(p.pct_mean) << ',' << g17(p.pct_std) << '\n';
  }
}

void write_arc_csv(const ArcStudy& s, const std::filesystem::path& path) {
  auto out = open_csv(path, "r_mid,psi19,psi5,fem_sq_err,ml_mean,ml_mse,ml_std,below19,below5,flagged");
  for (const auto& r : s.rows) {
    out << g17(r.mid_radius) << ',' << g17(r.psi19) << ',' << g17(r.psi5) << ',' << g17(r.fem_sq_err) << ','
        << g17(r.ml_mean) << ',' << g17(r.ml_mse) << ',' << g17(r.ml_std) << ',' << r.below19 << ',' << r.below5
        << ',' << (r.flagged ? 1 : 0) << '\n';
  }
}

void write_grid_csv(const std::vector<GridRow>& rows, const std::filesystem::path& path) {
  auto out = open_csv(path, "hidden_layers,width,val_split,epochs,mse_uniform,mse_random5,model_id");
  for (const auto& r : rows) {
    out << r.hidden_layers << ',' << r.width << ',' << g17(r.val_split) << ',' << r.epochs << ','
        << g17(r.mse_uniform) << ',' << g17(r.mse_random) << ',' << r.model_id << '\n';
  }
}

void write_affine_grid_csv(const std::vector<AffineGridRow>& rows, const std::filesystem::path& path) {
  auto out = open_csv(path, "r0,r1,psi_h,min_endpoint_gap,flagged,prediction,sq_err");
  for (const auto& r : rows) {
    out << g17(r.r0) << ',' << g17(r.r1) << ',' << g17(r.psi_h) << ',' << g17(r.min_endpoint_gap) << ','
        << (r.flagged ? 1 : 0) << ',' << g17(r.prediction) << ',' << g17(r.sq_err) << '\n';
  }
}

}  // namespace avgpress
