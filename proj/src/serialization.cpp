#include "avgpress/serialization.hpp"

#include "avgpress/errors.hpp"

namespace avgpress {

void to_json(Json& j, const MeshParams& p) { j = Json{{"nx", p.nx}, {"ny", p.ny}}; }

void from_json(const Json& j, MeshParams& p) {
  p.nx = j.value("nx", p.nx);
  p.ny = j.value("ny", p.ny);
}

void to_json(Json& j, const FrequencyRange& r) {
  j = Json{{"lambda_min", r.lambda_min}, {"lambda_max", r.lambda_max}};
}

void from_json(const Json& j, FrequencyRange& r) {
  r.lambda_min = j.value("lambda_min", r.lambda_min);
  r.lambda_max = j.value("lambda_max", r.lambda_max);
}

void to_json(Json& j, const LabelConfig& c) {
  j = Json{{"mesh", c.mesh},
           {"range", c.range},
           {"cutoff_rule", "cutoff_factor * lambda_max"},
           {"cutoff_factor", c.cutoff_factor},
           {"cutoff", c.cutoff()},
           {"sector", c.sector == Sector::kSymmetric ? "symmetric" : "full"},
           {"gap_tol", kGapTol},
           {"mean_squared_tol", kMeanSquaredTol}};
}

void from_json(const Json& j, LabelConfig& c) {
  if (j.contains("mesh")) c.mesh = j.at("mesh").get<MeshParams>();
  if (j.contains("range")) c.range = j.at("range").get<FrequencyRange>();
  c.cutoff_factor = j.value("cutoff_factor", c.cutoff_factor);
  if (j.contains("sector")) {
    const auto s = j.at("sector").get<std::string>();
    if (s == "symmetric") c.sector = Sector::kSymmetric;
    else if (s == "full") c.sector = Sector::kFull;
    else throw ParseError("unknown sector '" + s + "'", 0);
  }
}

void to_json(Json& j, const DatasetStats& s) {
  j = Json{{"count", s.count}, {"mean", s.mean}, {"variance", s.variance}, {"min", s.min}, {"max", s.max}};
}

void from_json(const Json& j, DatasetStats& s) {
  s.count = j.value("count", s.count);
  s.mean = j.value("mean", s.mean);
  s.variance = j.value("variance", s.variance);
  s.min = j.value("min", s.min);
  s.max = j.value("max", s.max);
}

void to_json(Json& j, const DatasetManifest& m) {
  j = Json{{"format", "avgpress-dataset-1"},
           {"master_seed", m.master_seed},
           {"count", m.count},
           {"k_points", m.k_points},
           {"label", m.label},
           {"rng", "mt19937_64, per-sample seed splitmix64(master, index, attempt)"},
           {"rejection_count", m.rejection_count},
           {"boosted_count", m.boosted_count},
           {"boost_skipped", m.boost_skipped},
           {"boost_t", m.boost_t},
           {"min_angle_degrees", m.min_angle_degrees},
           {"stats", m.stats}};
}

void from_json(const Json& j, DatasetManifest& m) {
  m.master_seed = j.value("master_seed", m.master_seed);
  m.count = j.value("count", m.count);
  m.k_points = j.value("k_points", m.k_points);
  if (j.contains("label")) m.label = j.at("label").get<LabelConfig>();
  m.rejection_count = j.value("rejection_count", m.rejection_count);
  m.boosted_count = j.value("boosted_count", m.boosted_count);
  m.boost_skipped = j.value("boost_skipped", m.boost_skipped);
  m.boost_t = j.value("boost_t", m.boost_t);
  m.min_angle_degrees = j.value("min_angle_degrees", m.min_angle_degrees);
  if (j.contains("stats")) m.stats = j.at("stats").get<DatasetStats>();
}

void to_json(Json& j, const TrainConfig& c) {
  j = Json{{"layer_dims", c.layer_dims},   {"s0", c.s0},
           {"s_end", c.s_end},             {"decay_steps", c.decay_steps},
           {"decay_power", c.decay_power}, {"batch_size", c.batch_size},
           {"max_epochs", c.max_epochs},   {"patience", c.patience},
           {"min_delta", c.min_delta},     {"val_fraction", c.val_fraction},
           {"init_seed", c.init_seed},     {"shuffle_seed", c.shuffle_seed},
           {"adam_beta1", c.adam_beta1},   {"adam_beta2", c.adam_beta2},
           {"adam_eps", c.adam_eps}};
}

void from_json(const Json& j, TrainConfig& c) {
  c.layer_dims = j.value("layer_dims", c.layer_dims);
  c.s0 = j.value("s0", c.s0);
  c.s_end = j.value("s_end", c.s_end);
  c.decay_steps = j.value("decay_steps", c.decay_steps);
  c.decay_power = j.value("decay_power", c.decay_power);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.min_delta = j.value("min_delta", c.min_delta);
  c.val_fraction = j.value("val_fraction", c.val_fraction);
  c.init_seed = j.value("init_seed", c.init_seed);
  c.shuffle_seed = j.value("shuffle_seed", c.shuffle_seed);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
}

}  // namespace avgpress
