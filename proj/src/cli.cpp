#include "avgpress/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include "avgpress/errors.hpp"
#include "avgpress/evaluation.hpp"
#include "avgpress/log.hpp"
#include "avgpress/parallel.hpp"
#include "avgpress/serialization.hpp"

namespace avgpress::cli {

namespace {

constexpr const char* kVersion = "1.0.0";

std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int env_workers() {
  if (const char* e = std::getenv("AVGPRESS_WORKERS")) {
    try {
      const int w = std::stoi(e);
      if (w >= 1) return w;
    } catch (const std::exception&) {
    }
    throw ParameterError("AVGPRESS_WORKERS must be a positive integer");
  }
  return default_workers();
}

struct LabelOptions {
  double lmin = 0.0;
  double lmax = 60.0;
  int nx = MeshParams{}.nx;
  int ny = MeshParams{}.ny;
  double mesh_scale = 1.0;
  double cutoff_factor = 10.0;
  std::string sector = "symmetric";

  void attach(CLI::App* sub) {
    sub->add_option("--lmin", lmin, "lower end of the frequency range");
    sub->add_option("--lmax", lmax, "upper end of the frequency range");
    sub->add_option("--nx", nx, "mesh subdivisions along x1");
    sub->add_option("--ny", ny, "mesh subdivisions across each half-width");
    sub->add_option("--mesh-scale", mesh_scale, "node density factor applied to nx, ny");
    sub->add_option("--cutoff-factor", cutoff_factor, "spectral cutoff as a multiple of lmax");
    sub->add_option("--sector", sector, "eigen sector")->check(CLI::IsMember({"symmetric", "full"}));
  }
  FrequencyRange range() const { return {lmin, lmax}; }
  LabelConfig label() const {
    LabelConfig c;
    c.mesh = {nx, ny};
    if (mesh_scale != 1.0) c.mesh = c.mesh.scaled(mesh_scale);
    c.range = range();
    c.cutoff_factor = cutoff_factor;
    c.sector = sector == "full" ? Sector::kFull : Sector::kSymmetric;
    c.validate();
    return c;
  }
};

struct TrainOptions {
  TrainConfig config;

  void attach(CLI::App* sub) {
    sub->add_option("--layer-dims", config.layer_dims, "layer widths, input first")->delimiter(',');
    sub->add_option("--s0", config.s0, "initial learning rate");
    sub->add_option("--s-end", config.s_end, "final learning rate");
    sub->add_option("--decay-steps", config.decay_steps, "steps of the polynomial decay");
    sub->add_option("--decay-power", config.decay_power, "power of the polynomial decay");
    sub->add_option("--batch-size", config.batch_size);
    sub->add_option("--epochs", config.max_epochs, "maximum epochs");
    sub->add_option("--patience", config.patience, "epochs without improvement before stopping");
    sub->add_option("--min-delta", config.min_delta, "smallest val decrease counted as improvement");
    sub->add_option("--val-fraction", config.val_fraction);
    sub->add_option("--init-seed", config.init_seed);
    sub->add_option("--shuffle-seed", config.shuffle_seed);
    sub->add_option("--adam-beta1", config.adam_beta1);
    sub->add_option("--adam-beta2", config.adam_beta2);
    sub->add_option("--adam-eps", config.adam_eps);
  }
};

// Either network or linear model behind one predictor.
struct LoadedModel {
  std::optional<MlpModel> mlp;
  std::optional<LinearModel> linear;
  std::string id;

  Predictor predictor() const {
    if (mlp) return [m = &*mlp](const std::array<double, kNetworkInputs>& x) { return forward(*m, x); };
    return [m = &*linear](const std::array<double, kNetworkInputs>& x) { return m->predict(x); };
  }
};

LoadedModel load_any_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open " + path);
  std::string first;
  std::getline(in, first);
  LoadedModel m;
  if (first.find("avgpress-mlp") != std::string::npos) {
    m.mlp = load_model(path);
    m.id = model_id(*m.mlp);
  } else {
    m.linear = load_linear(path);
    m.id = m.linear->id();
  }
  return m;
}

// Prepends flags from a JSON config object (keys are long flag names with
// '_' for '-') right after the subcommand, so explicit flags win.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty() || args.size() < 2) return args;
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open config " + path);
  const Json j = with_json_errors(path, [&] { return Json::parse(in); });
  if (!j.is_object()) throw ParseError("config must be a JSON object", 1);
  std::vector<std::string> flags;
  for (const auto& [key, value] : j.items()) {
    std::string name = key;
    std::replace(name.begin(), name.end(), '_', '-');
    if (name == "config") continue;
    name = "--" + name;
    if (value.is_boolean()) {
      if (value.get<bool>()) flags.push_back(name);
      continue;
    }
    std::string text;
    auto scalar = [](const Json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
    if (value.is_array()) {
      for (const auto& v : value) text += (text.empty() ? "" : ",") + scalar(v);
    } else {
      text = scalar(value);
    }
    flags.push_back(name);
    flags.push_back(text);
  }
  std::vector<std::string> out(args.begin(), args.begin() + 2);
  out.insert(out.end(), flags.begin(), flags.end());
  out.insert(out.end(), args.begin() + 2, args.end());
  return out;
}

Json effective_config(const CLI::App* sub) {
  Json j = Json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name == "config" || name.empty()) continue;
    if (opt->count() > 0) {
      const auto& r = opt->results();
      std::string v;
      for (const auto& s : r) v += (v.empty() ? "" : ",") + s;
      j[name] = opt->get_type_size() == 0 ? Json(true) : Json(v);
    } else {
      j[name] = opt->get_default_str();
    }
  }
  return j;
}

template <class T>
void write_json_file(const std::string& path, const T& j) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParameterError("cannot open " + path + " for writing");
  f << Json(j).dump(2) << '\n';
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Frequency-averaged pressure response of polygonal cylinders: FEM labels, "
               "shape derivatives, datasets and neural surrogates",
               "avgpress"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_version_flag("--version", kVersion);

  std::string config_path, provenance_path, log_level = "warn";
  int workers = 0;
  std::vector<std::string> outputs;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON file with flag values (flags override)");
    sub->add_option("--provenance", provenance_path, "where to write the provenance sidecar");
    sub->add_option("--workers", workers, "worker threads (default: AVGPRESS_WORKERS or all cores)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--log-level", log_level)->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));
  };
  std::function<void()> action;
  // Every subcommand is listed, but only the one being run gets its options:
  // building all of them costs more than most commands themselves.
  const std::string wanted = raw_args.size() > 1 ? raw_args[1] : std::string();
  auto add = [&](const std::string& name, const std::string& help) -> CLI::App* {
    CLI::App* sub = app.add_subcommand(name, help);
    if (name != wanted) return nullptr;
    common(sub);
    return sub;
  };

  // psi
  LabelOptions lo;
  std::string profile_text;
  if (auto* sub = add("psi", "objective of a polygonal cylinder from its radii")) {
    sub->add_option("--profile", profile_text, "comma-separated radii (1, 2, 3, 5 or 19)")->required();
    lo.attach(sub);
    sub->callback([&] {
      action = [&] {
        const auto r = compute_psi(parse_profile(profile_text), lo.label());
        out << g17(r.psi) << '\n';
      };
    });
  }
  // psi-uniform
  double radius = 0.0, truncate = 0.0;
  if (auto* sub = add("psi-uniform", "closed-form objective of a uniform cylinder")) {
    sub->add_option("--lmin", lo.lmin);
    sub->add_option("--lmax", lo.lmax);
    sub->add_option("--truncate", truncate, "if > 0: analytic series truncated at this eigenvalue");
    sub->add_option("--radius", radius, "radius for the truncated series")->check(CLI::Range(kMinRadius, kMaxRadius));
    sub->callback([&] {
      action = [&] {
        if (truncate > 0.0) {
          out << g17(uniform_psi_truncated(radius > 0 ? radius : 0.5, truncate, lo.range()).psi) << '\n';
        } else {
          out << g17(uniform_psi_exact(lo.range())) << '\n';
        }
      };
    });
  }
  // eigen
  double cutoff = 0.0;
  std::string out_path;
  if (auto* sub = add("eigen", "discrete eigenvalues and mode means below a cutoff")) {
    sub->add_option("--profile", profile_text)->required();
    sub->add_option("--cutoff", cutoff, "largest eigenvalue (default cutoff-factor * lmax)");
    sub->add_option("--out", out_path, "CSV output (default stdout)");
    lo.attach(sub);
    sub->callback([&] {
      action = [&] {
        const auto label = lo.label();
        const auto spec = compute_spectrum(build_mesh(domain_from_profile(parse_profile(profile_text)), label.mesh),
                                           cutoff > 0 ? cutoff : label.cutoff(), label.sector);
        std::ofstream file;
        std::ostream& o = out_path.empty() ? out : (file.open(out_path, std::ios::binary), file);
        if (!o) throw ParameterError("cannot open " + out_path);
        o << "index,kappa,mean,mean_squared\n";
        for (int i = 0; i < spec.basis.size(); ++i) {
          o << i << ',' << g17(spec.basis.kappas[i]) << ',' << g17(spec.basis.means[i]) << ','
            << g17(spec.basis.means[i] * spec.basis.means[i]) << '\n';
        }
        if (!out_path.empty()) outputs.push_back(out_path);
      };
    });
  }
  // mesh
  std::string out_dir;
  if (auto* sub = add("mesh", "structured mesh of a profile as CSV (vertices, triangles)")) {
    sub->add_option("--profile", profile_text)->required();
    sub->add_option("--out", out_dir, "output directory")->required();
    lo.attach(sub);
    sub->callback([&] {
      action = [&] {
        const auto mesh = build_mesh(domain_from_profile(parse_profile(profile_text)), lo.label().mesh);
        std::filesystem::create_directories(out_dir);
        write_mesh_csv(mesh, out_dir);
        out << "vertices " << mesh.vertex_count() << "\ntriangles " << mesh.triangle_count() << "\nh " << g17(mesh.h)
            << "\nmin_angle_degrees " << g17(mesh.min_angle_degrees()) << '\n';
        outputs.push_back(out_dir);
      };
    });
  }
  // gen-data
  std::uint64_t seed = 1;
  std::size_t count = 0;
  int k = 5;
  double boost_t = 0.0;
  std::string boost_field = "zigzag";
  if (auto* sub = add("gen-data", "generate a labeled dataset")) {
    sub->add_option("--seed", seed, "master seed");
    sub->add_option("--count", count, "number of samples")->required();
    sub->add_option("--k", k, "radii per profile")->check(CLI::IsMember({1, 2, 3, 5}));
    sub->add_option("--out", out_path, "CSV output")->required();
    auto* boost_opt = sub->add_option("--boost-t", boost_t, "append boosted rows with this step (|t| <= 0.02)");
    sub->add_option("--boost-field", boost_field, "boost field: zigzag [scale=s] or axial d=...");
    lo.attach(sub);
    sub->callback([&, boost_opt] {
      action = [&, boost_opt] {
        GenerationParams p;
        p.label = lo.label();
        p.k = k;
        p.workers = workers;
        Dataset d = generate(seed, count, p);
        if (boost_opt->count() > 0) d = boost(d, boost_t, workers, boost_field);
        write_csv(d, out_path);
        outputs.push_back(out_path);
        out << Json(d.manifest).dump(2) << '\n';
      };
    });
  }
  // stats
  std::string data_path;
  if (auto* sub = add("stats", "population statistics of a dataset's psi column")) {
    sub->add_option("--data", data_path)->required();
    sub->callback([&] {
      action = [&] {
        const Dataset d = read_csv(data_path);
        const auto s = stats(d.samples);
        out << Json(s).dump(2) << '\n';
      };
    });
  }
  // train
  TrainOptions to;
  std::string history_path;
  if (auto* sub = add("train", "train the network surrogate")) {
    sub->add_option("--data", data_path, "training CSV")->required();
    sub->add_option("--out-model", out_path, "model file")->required();
    sub->add_option("--history-csv", history_path, "per-epoch history CSV");
    to.attach(sub);
    sub->callback([&] {
      action = [&] {
        const Dataset d = read_csv(data_path);
        const auto res = train(d, to.config);
        const auto& h = res.history;
        Json meta{{"train_config", to.config},
                  {"data", data_path},
                  {"data_stats", d.manifest.stats},
                  {"label", d.manifest.label},
                  {"epochs", h.epochs()},
                  {"best_epoch", h.best_epoch},
                  {"best_val_mse", h.val_mse[h.best_epoch]},
                  {"stopped_early", h.stopped_early},
                  {"steps", h.steps}};
        save_model(res.model, out_path, meta);
        outputs.push_back(out_path);
        if (!history_path.empty()) {
          write_history_csv(h, history_path);
          outputs.push_back(history_path);
        }
        meta["model_id"] = model_id(res.model);
        out << meta.dump(2) << '\n';
      };
    });
  }
  // predict
  std::string model_path;
  if (auto* sub = add("predict", "evaluate a saved model on a profile or a dataset")) {
    sub->add_option("--model", model_path)->required();
    auto* p = sub->add_option("--profile", profile_text);
    auto* d = sub->add_option("--data", data_path);
    p->excludes(d);
    sub->add_option("--out", out_path, "CSV output for --data (default stdout)");
    sub->callback([&] {
      action = [&] {
        const auto m = load_any_model(model_path);
        const auto pred = m.predictor();
        if (!profile_text.empty()) {
          out << g17(pred(parse_profile(profile_text).network_input())) << '\n';
          return;
        }
        if (data_path.empty()) throw ParameterError("predict needs --profile or --data");
        const Dataset data = read_csv(data_path);
        std::ofstream file;
        std::ostream& o = out_path.empty() ? out : (file.open(out_path, std::ios::binary), file);
        o << "r1,r2,r3,r4,r5,psi,prediction\n";
        for (const auto& s : data.samples) {
          for (double r : s.radii) o << g17(r) << ',';
          o << g17(s.psi) << ',' << g17(pred(s.radii)) << '\n';
        }
        if (!out_path.empty()) outputs.push_back(out_path);
      };
    });
  }
  // eval
  double threshold = 0.01;
  std::string name;
  if (auto* sub = add("eval", "MSE and share of rows with |error| below a threshold")) {
    sub->add_option("--model", model_path, "network or linear model file")->required();
    sub->add_option("--data", data_path, "test CSV (no boosted rows)")->required();
    sub->add_option("--threshold", threshold);
    sub->add_option("--name", name, "dataset name in the report");
    sub->add_option("--out", out_path, "report CSV");
    sub->callback([&] {
      action = [&] {
        const auto m = load_any_model(model_path);
        const auto r = evaluate(m.predictor(), read_csv(data_path), threshold, name.empty() ? data_path : name, m.id);
        if (!out_path.empty()) {
          write_eval_csv({r}, out_path);
          outputs.push_back(out_path);
        }
        out << Json{{"dataset", r.dataset}, {"n", r.n}, {"mse", r.mse}, {"pct_abs_err_below", r.pct_abs_err_below},
                    {"threshold", r.threshold}, {"model_id", r.model_id}}
                   .dump(2)
            << '\n';
      };
    });
  }
  // baseline
  std::string test_path;
  bool min_norm = false;
  if (auto* sub = add("baseline", "least-squares affine model in the five radii")) {
    sub->add_option("--train", data_path)->required();
    sub->add_option("--test", test_path);
    sub->add_option("--out-model", out_path, "linear model JSON");
    sub->add_option("--threshold", threshold);
    sub->add_flag("--min-norm", min_norm, "minimum-norm solution for rank-deficient designs");
    sub->callback([&] {
      action = [&] {
        const Dataset tr = read_csv(data_path);
        const auto m = fit_linear(tr, min_norm ? RankPolicy::kMinimumNorm : RankPolicy::kStrict);
        if (!out_path.empty()) {
          save_linear(m, out_path);
          outputs.push_back(out_path);
        }
        auto pred = [&m](const std::array<double, kNetworkInputs>& x) { return m.predict(x); };
        Json j{{"weights", m.weights}, {"intercept", m.intercept}, {"model_id", m.id()},
               {"normal_equation_residual", normal_equation_residual(m, tr)}};
        Dataset fem_only = tr;
        std::erase_if(fem_only.samples, [](const Sample& s) { return s.source == SampleSource::kBoosted; });
        const auto rt = evaluate(pred, fem_only, threshold, "train", m.id());
        j["train"] = {{"mse", rt.mse}, {"pct_abs_err_below", rt.pct_abs_err_below}};
        if (!test_path.empty()) {
          const auto re = evaluate(pred, read_csv(test_path), threshold, "test", m.id());
          j["test"] = {{"mse", re.mse}, {"pct_abs_err_below", re.pct_abs_err_below}};
        }
        out << j.dump(2) << '\n';
      };
    });
  }
  // shape-deriv
  std::string field_text = "affine a11=1 a22=-1";
  bool relaxed = false;
  double fd_t = 0.0;
  if (auto* sub = add("shape-deriv", "shape derivative of the objective along a solenoidal field")) {
    sub->add_option("--profile", profile_text)->required();
    sub->add_option("--field", field_text, "affine a11=.. a12=.. a21=.. a22=.. b1=.. b2=.. | axial d=.. | zigzag");
    sub->add_flag("--relaxed", relaxed, "skip the convexity and pole-free-interval hypotheses");
    sub->add_option("--fd", fd_t, "also report the central difference with this step");
    lo.attach(sub);
    sub->callback([&] {
      action = [&] {
        const auto label = lo.label();
        const auto prof = parse_profile(profile_text);
        const auto domain = domain_from_profile(prof);
        const auto field = parse_field(field_text, prof);
        const auto spec = compute_spectrum(build_mesh(domain, label.mesh), label.cutoff(), label.sector);
        const auto d = psi_shape_derivative(spec.basis, spec.mesh, field, label.range, {.strict = !relaxed});
        Json j{{"psi", psi_objective(spec.basis, label.range).psi},
               {"psi_prime", d.psi_prime},
               {"strict", d.strict},
               {"hypotheses_hold", d.hypotheses_hold},
               {"modes", d.modes.size()}};
        if (fd_t > 0) j["fd"] = fd_shape_derivative(domain, field, label.range, fd_t, label.mesh, label.cutoff());
        out << j.dump(2) << '\n';
      };
    });
  }
  // convergence
  std::vector<std::string> levels_text = {"96x16", "192x32", "384x64"};
  if (auto* sub = add("convergence", "error of the objective under mesh refinement")) {
    sub->add_option("--profile", profile_text)->required();
    sub->add_option("--levels", levels_text, "meshes coarse to fine, e.g. 96x16,192x32,384x64")->delimiter(',');
    sub->add_option("--out", out_path, "CSV output");
    lo.attach(sub);
    sub->callback([&] {
      action = [&] {
        std::vector<MeshParams> levels;
        for (const auto& t : levels_text) {
          MeshParams m;
          char x = 0;
          std::istringstream ss(t);
          if (!(ss >> m.nx >> x >> m.ny) || x != 'x' || !ss.eof()) throw ParameterError("bad level '" + t + "'");
          levels.push_back(m);
        }
        const auto label = lo.label();
        const auto r = convergence_study(parse_profile(profile_text), label.range, levels, label.cutoff_factor,
                                         label.sector);
        if (!out_path.empty()) {
          write_convergence_csv(r, out_path);
          outputs.push_back(out_path);
        }
        Json pts = Json::array();
        for (const auto& p : r.points) pts.push_back({{"nx", p.mesh.nx}, {"ny", p.mesh.ny}, {"h", p.h}, {"dof", p.dof},
                                                      {"psi_h", p.psi_h}, {"error", p.error}});
        out << Json{{"reference", r.reference}, {"exact_reference", r.exact_reference}, {"slope", r.slope},
                    {"points", pts}}
                   .dump(2)
            << '\n';
      };
    });
  }
  // size-curve
  std::vector<std::size_t> sizes = {1000, 2000, 5000, 10000, 20000};
  int repeats = 10;
  if (auto* sub = add("size-curve", "test error against training-set size")) {
    sub->add_option("--train", data_path)->required();
    sub->add_option("--test", test_path)->required();
    sub->add_option("--sizes", sizes)->delimiter(',');
    sub->add_option("--repeats", repeats);
    sub->add_option("--seed", seed);
    sub->add_option("--out", out_path)->required();
    to.attach(sub);
    sub->callback([&] {
      action = [&] {
        const auto pts = size_curve(read_csv(data_path), read_csv(test_path), sizes, repeats, to.config, seed, workers);
        write_size_curve_csv(pts, out_path);
        outputs.push_back(out_path);
        for (const auto& p : pts) {
          out << p.size << ' ' << g17(p.mse_mean) << ' ' << g17(p.mse_std) << ' ' << g17(p.pct_mean) << ' '
              << g17(p.pct_std) << '\n';
        }
      };
    });
  }
  // arc-study
  std::vector<std::string> model_paths;
  int grid = 100;
  if (auto* sub = add("arc-study", "19-point arcs against their 5-point downsample")) {
    sub->add_option("--models", model_paths, "network model files")->delimiter(',');
    sub->add_option("--grid", grid, "number of mid radii in [0.1, 0.5]");
    sub->add_option("--out", out_path)->required();
    lo.attach(sub);
    sub->callback([&] {
      action = [&] {
        std::vector<MlpModel> models;
        for (const auto& p : model_paths) models.push_back(load_model(p));
        const auto s = arc_study(models, lo.label(), grid, workers);
        write_arc_csv(s, out_path);
        outputs.push_back(out_path);
        out << Json{{"mean_fem_sq_err", s.mean_fem_sq_err}, {"mean_ml_mse", s.mean_ml_mse}, {"crossings", s.crossings}}
                   .dump(2)
            << '\n';
      };
    });
  }
  // grid
  std::string uniform_test;
  std::vector<int> grid_layers = {2, 3, 4}, grid_widths = {64, 128, 192};
  std::vector<double> grid_splits = {0.1, 0.2, 0.3};
  if (auto* sub = add("grid", "hyperparameter grid over depth, width and validation split")) {
    sub->add_option("--train", data_path)->required();
    sub->add_option("--uniform-test", uniform_test)->required();
    sub->add_option("--random-test", test_path)->required();
    sub->add_option("--hidden-layers", grid_layers)->delimiter(',');
    sub->add_option("--widths", grid_widths)->delimiter(',');
    sub->add_option("--val-splits", grid_splits)->delimiter(',');
    sub->add_option("--out", out_path)->required();
    to.attach(sub);
    sub->callback([&] {
      action = [&] {
        const auto rows = hyper_grid(read_csv(data_path), read_csv(uniform_test), read_csv(test_path), to.config,
                                     grid_layers, grid_widths, grid_splits, workers);
        write_grid_csv(rows, out_path);
        outputs.push_back(out_path);
        out << rows.size() << " cells written to " << out_path << '\n';
      };
    });
  }
  // affine-grid
  int n = 40;
  if (auto* sub = add("affine-grid", "objective over two-point profiles (r(0), r(1))")) {
    sub->add_option("--n", n, "grid points per axis");
    sub->add_option("--model", model_path, "network model for the error surface");
    sub->add_option("--out", out_path)->required();
    lo.attach(sub);
    sub->callback([&] {
      action = [&] {
        std::optional<MlpModel> m;
        if (!model_path.empty()) m = load_model(model_path);
        const auto rows = affine_radius_grid(n, lo.label(), m ? &*m : nullptr, workers);
        write_affine_grid_csv(rows, out_path);
        outputs.push_back(out_path);
        std::size_t flagged = 0;
        for (const auto& r : rows) flagged += r.flagged ? 1 : 0;
        out << Json{{"rows", rows.size()}, {"flagged", flagged}}.dump(2) << '\n';
      };
    });
  }

  auto error_record = [&](const std::string& kind, const std::string& message, int code) {
    err << Json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << '\n';
    return code;
  };

  try {
    auto args = expand_config(raw_args);
    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    try {
      app.parse(rev);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return 0;
    } catch (const CLI::CallForAllHelp&) {
      out << app.help("", CLI::AppFormatMode::All);
      return 0;
    } catch (const CLI::CallForVersion&) {
      out << kVersion << '\n';
      return 0;
    } catch (const CLI::ParseError& e) {
      const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
      err << e.what() << '\n' << sub->help();
      return error_record("UsageError", e.what(), 1);
    }
    logger().set_level(spdlog::level::from_str(log_level));
    if (workers == 0) workers = env_workers();
    const CLI::App* sub = app.get_subcommands().front();
    action();
    Json prov{{"tool", "avgpress"},
              {"version", kVersion},
              {"subcommand", sub->get_name()},
              {"args", std::vector<std::string>(raw_args.begin() + 1, raw_args.end())},
              {"config_file", config_path},
              {"effective", effective_config(sub)},
              {"workers", workers},
              {"outputs", outputs}};
    std::string prov_path = provenance_path;
    if (prov_path.empty() && !outputs.empty()) prov_path = outputs.front() + ".provenance.json";
    if (prov_path.empty()) prov_path = "avgpress-" + sub->get_name() + ".provenance.json";
    write_json_file(prov_path, prov);
    return 0;
  } catch (const NumericError& e) {
    return error_record("NumericError", e.what(), 2);
  } catch (const ParseError& e) {
    return error_record("ParseError", e.what(), 1);
  } catch (const ParameterError& e) {
    return error_record("ParameterError", e.what(), 1);
  } catch (const std::exception& e) {
    return error_record("Error", e.what(), 1);
  }
}

}  // namespace avgpress::cli
