#include "avgpress/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

#include "avgpress/errors.hpp"
#include "avgpress/log.hpp"
#include "avgpress/parallel.hpp"
#include "avgpress/rng.hpp"
#include "avgpress/serialization.hpp"

namespace avgpress {

namespace {

constexpr const char* kHeader = "r1,r2,r3,r4,r5,psi,source,sample_seed";
constexpr const char* kBareHeader = "r1,r2,r3,r4,r5,psi";
constexpr double kMinAngleFloor = 5.0;
constexpr double kMaxBoostT = 0.02;
// Boosted rows whose estimated second-order remainder exceeds this are skipped.
constexpr double kBoostRemainderTol = 1e-3;

struct Labeled {
  Sample sample;
  int attempts = 0;
  double min_angle = 0.0;
};

Labeled label_one(std::uint64_t master, std::size_t index, const GenerationParams& params) {
  int consecutive = 0;
  for (int attempt = 0;; ++attempt) {
    const std::uint64_t seed = sample_seed(master, index, attempt);
    const RadialProfile profile = sample_profile(seed, params.k);
    TriangleMesh mesh = build_mesh(domain_from_profile(profile), params.label.mesh);
    const double angle = mesh.min_angle_degrees();
    if (angle < kMinAngleFloor) {
      throw NumericError("sample " + std::to_string(index) + ": minimum angle " +
                         std::to_string(angle) + " below 5 degrees");
    }
    try {
      const auto spectrum = compute_spectrum(std::move(mesh), params.label.cutoff(), params.label.sector);
      const auto obj = psi_objective(spectrum.basis, params.label.range);
      if (!std::isfinite(obj.psi)) throw NumericError("non-finite label for sample " + std::to_string(index));
      return {{profile.network_input(), obj.psi, SampleSource::kFem, seed}, attempt, angle};
    } catch (const PoleAtEndpoint& e) {
      logger().info("sample {} attempt {} rejected: {}", index, attempt, e.what());
      if (++consecutive > params.max_consecutive_rejections) {
        throw NumericError("sample " + std::to_string(index) + ": more than " +
                           std::to_string(params.max_consecutive_rejections) +
                           " consecutive rejections, last: " + e.what());
      }
    }
  }
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, int line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ParseError("bad number '" + s + "'", line);
  }
  if (used != s.size() || !std::isfinite(v)) throw ParseError("bad number '" + s + "'", line);
  return v;
}

std::uint64_t parse_seed(const std::string& s, int line) {
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(s, &used);
  } catch (const std::exception&) {
    throw ParseError("bad sample_seed '" + s + "'", line);
  }
  if (used != s.size() || s.front() == '-') throw ParseError("bad sample_seed '" + s + "'", line);
  return v;
}

}  // namespace

std::string to_string(SampleSource s) { return s == SampleSource::kFem ? "fem" : "boosted"; }

void Dataset::refresh_manifest() {
  manifest.count = samples.size();
  manifest.boosted_count = static_cast<std::size_t>(std::count_if(
      samples.begin(), samples.end(), [](const Sample& s) { return s.source == SampleSource::kBoosted; }));
  if (!samples.empty()) manifest.stats = stats(samples);
}

std::uint64_t sample_seed(std::uint64_t master_seed, std::size_t index, int attempt) {
  return derive_seed(master_seed, index, static_cast<std::uint64_t>(attempt));
}

Dataset generate(std::uint64_t master_seed, std::size_t n, const GenerationParams& params) {
  if (n < 1) throw ParameterError("dataset size must be >= 1");
  if (params.k != 1 && params.k != 2 && params.k != 3 && params.k != 5) {
    throw ParameterError("k must be one of 1, 2, 3, 5");
  }
  params.label.validate();
  params.label.mesh.validate(params.k);
  if (params.label.cutoff() < 10.0 * params.label.range.lambda_max) {
    logger().warn("label cutoff {} is below 10 * lambda_max", params.label.cutoff());
  }

  std::vector<Labeled> rows(n);
  parallel_for(n, params.workers, [&](std::size_t i) { rows[i] = label_one(master_seed, i, params); });

  Dataset out;
  out.samples.reserve(n);
  out.manifest.master_seed = master_seed;
  out.manifest.k_points = params.k;
  out.manifest.label = params.label;
  out.manifest.min_angle_degrees = std::numeric_limits<double>::infinity();
  for (const auto& r : rows) {
    out.samples.push_back(r.sample);
    out.manifest.rejection_count += r.attempts;
    out.manifest.min_angle_degrees = std::min(out.manifest.min_angle_degrees, r.min_angle);
  }
  if (out.manifest.rejection_count > 0) {
    logger().info("{} samples rejected for endpoint poles", out.manifest.rejection_count);
  }
  out.refresh_manifest();
  return out;
}

DatasetStats stats(std::span<const Sample> samples) {
  if (samples.empty()) throw ParameterError("statistics of an empty dataset");
  DatasetStats s;
  s.count = samples.size();
  s.min = s.max = samples.front().psi;
  double sum = 0.0;
  for (const auto& x : samples) {
    sum += x.psi;
    s.min = std::min(s.min, x.psi);
    s.max = std::max(s.max, x.psi);
  }
  s.mean = sum / static_cast<double>(s.count);
  double sq = 0.0;
  for (const auto& x : samples) sq += (x.psi - s.mean) * (x.psi - s.mean);
  s.variance = sq / static_cast<double>(s.count);
  return s;
}

std::pair<Dataset, Dataset> split(const Dataset& data, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ParameterError("validation fraction must lie in (0, 1)");
  }
  // Group rows by sample_seed in first-seen order.
  std::map<std::uint64_t, std::size_t> group_of;
  std::vector<std::vector<std::size_t>> groups;
  std::vector<bool> has_boosted;
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const auto& s = data.samples[i];
    auto [it, inserted] = group_of.try_emplace(s.sample_seed, groups.size());
    if (inserted) {
      groups.emplace_back();
      has_boosted.push_back(false);
    }
    groups[it->second].push_back(i);
    if (s.source == SampleSource::kBoosted) has_boosted[it->second] = true;
  }
  std::vector<std::size_t> candidates;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (!has_boosted[g]) candidates.push_back(g);
  }
  // Fisher-Yates with the portable generator.
  Rng rng(derive_seed(seed, 0x5b117));
  for (std::size_t i = candidates.size(); i > 1; --i) {
    std::swap(candidates[i - 1], candidates[rng.below(i)]);
  }
  const auto target = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(data.size())));
  std::vector<bool> in_val(groups.size(), false);
  std::size_t taken = 0;
  for (std::size_t g : candidates) {
    if (taken >= target) break;
    in_val[g] = true;
    taken += groups[g].size();
  }
  if (taken < target) {
    logger().warn("split: only {} of {} requested validation rows available without boosted rows", taken,
                  target);
  }

  Dataset train, val;
  train.manifest = val.manifest = data.manifest;
  for (const auto& row : data.samples) {
    (in_val[group_of.at(row.sample_seed)] ? val : train).samples.push_back(row);
  }
  for (Dataset* d : {&train, &val}) {
    if (!d->samples.empty()) d->refresh_manifest();
    else d->manifest.count = 0;
  }
  return {std::move(train), std::move(val)};
}

Dataset boost(const Dataset& data, double t, int workers, const std::string& field_spec) {
  if (!(std::abs(t) <= kMaxBoostT)) throw ParameterError("boost requires |t| <= 0.02");
  const LabelConfig& label = data.manifest.label;
  label.validate();
  std::vector<std::size_t> fem_rows;
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    if (data.samples[i].source == SampleSource::kFem) fem_rows.push_back(i);
  }
  std::vector<std::optional<Sample>> boosted(fem_rows.size());
  parallel_for(fem_rows.size(), workers, [&](std::size_t j) {
    const Sample& s = data.samples[fem_rows[j]];
    const RadialProfile base(std::vector<double>(s.radii.begin(), s.radii.end()));
    VectorField field;
    try {
      field = parse_field(field_spec, base);
    } catch (const ParameterError& e) {
      logger().info("boost: row {} skipped: {}", fem_rows[j], e.what());
      return;
    }
    const auto* axial = std::get_if<AxialStreamField>(&field);
    if (!axial) throw ParameterError("boosting needs an axial field (zigzag or axial d=...)");
    std::optional<RadialProfile> moved;
    try {
      moved = perturbed_profile(*axial, t);
    } catch (const ParameterError&) {
      return;
    }
    if (t == 0.0) {
      boosted[j] = Sample{s.radii, s.psi, SampleSource::kBoosted, s.sample_seed};
      return;
    }
    const auto domain = domain_from_profile(base);
    const auto spectrum = compute_spectrum(build_mesh(domain, label.mesh), label.cutoff(), label.sector);
    const auto d = psi_shape_derivative(spectrum.basis, spectrum.mesh, field, label.range, {.strict = false});
    const double remainder = linearization_remainder(spectrum.basis, d, label.range, t);
    if (!(remainder <= kBoostRemainderTol)) {
      logger().info("boost: row {} skipped, eigenvalue too close to an endpoint (remainder {})", fem_rows[j],
                    remainder);
      return;
    }
    boosted[j] = Sample{moved->network_input(), s.psi + t * d.psi_prime, SampleSource::kBoosted, s.sample_seed};
  });

  Dataset out = data;
  std::size_t skipped = 0;
  for (auto& b : boosted) {
    if (b) out.samples.push_back(*b);
    else ++skipped;
  }
  out.manifest.boost_skipped += skipped;
  out.manifest.boost_t = t;
  out.refresh_manifest();
  return out;
}

std::filesystem::path manifest_path(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p += ".manifest.json";
  return p;
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParameterError("cannot open " + path.string() + " for writing");
  out << kHeader << '\n';
  for (const auto& s : data.samples) {
    for (double r : s.radii) out << format_double(r) << ',';
    out << format_double(s.psi) << ',' << to_string(s.source) << ',' << s.sample_seed << '\n';
  }
  if (!out) throw ParameterError("write failed: " + path.string());

  Dataset copy = data;
  copy.refresh_manifest();
  std::ofstream m(manifest_path(path), std::ios::binary);
  if (!m) throw ParameterError("cannot open manifest for " + path.string());
  m << Json(copy.manifest).dump(2) << '\n';
}

Dataset read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParameterError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file " + path.string(), 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  bool bare = false;
  if (line == kBareHeader) {
    bare = true;
  } else if (line != kHeader) {
    throw ParseError("expected header '" + std::string(kHeader) + "', got '" + line + "'", 1);
  }
  Dataset data;
  const std::size_t fields = bare ? 6 : 8;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != fields) {
      throw ParseError("expected " + std::to_string(fields) + " fields, got " + std::to_string(f.size()),
                       line_no);
    }
    Sample s;
    for (int i = 0; i < kNetworkInputs; ++i) {
      s.radii[i] = parse_double(f[i], line_no);
      if (s.radii[i] < kMinRadius || s.radii[i] > kMaxRadius) {
        throw ParseError("radius " + f[i] + " outside [0.1, 0.5]", line_no);
      }
    }
    s.psi = parse_double(f[5], line_no);
    if (bare) {
      s.sample_seed = data.samples.size();
    } else {
      if (f[6] == "fem") s.source = SampleSource::kFem;
      else if (f[6] == "boosted") s.source = SampleSource::kBoosted;
      else throw ParseError("unknown source '" + f[6] + "'", line_no);
      s.sample_seed = parse_seed(f[7], line_no);
    }
    data.samples.push_back(s);
  }
  if (data.samples.empty()) throw ParseError("no data rows in " + path.string(), line_no);

  const auto mpath = manifest_path(path);
  if (std::filesystem::exists(mpath)) {
    std::ifstream m(mpath);
    data.manifest = with_json_errors(mpath.string(), [&] { return Json::parse(m).get<DatasetManifest>(); });
    if (data.manifest.count != data.samples.size()) {
      throw ParseError("manifest count " + std::to_string(data.manifest.count) + " does not match " +
                           std::to_string(data.samples.size()) + " rows",
                       0);
    }
  }
  data.refresh_manifest();
  return data;
}

}  // namespace avgpress
