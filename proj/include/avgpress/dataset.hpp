#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "avgpress/shape_derivative.hpp"
#include "avgpress/spectral.hpp"

namespace avgpress {

enum class SampleSource { kFem, kBoosted };

std::string to_string(SampleSource s);

struct Sample {
  std::array<double, kNetworkInputs> radii{};
  double psi = 0.0;
  SampleSource source = SampleSource::kFem;
  std::uint64_t sample_seed = 0;

  bool operator==(const Sample&) const = default;
};

struct DatasetStats {
  std::size_t count = 0;
  double mean = 0.0;
  double variance = 0.0;  // population variance
  double min = 0.0;
  double max = 0.0;
};

struct DatasetManifest {
  std::uint64_t master_seed = 0;
  std::size_t count = 0;
  int k_points = 5;
  LabelConfig label;
  int rejection_count = 0;
  std::size_t boosted_count = 0;
  std::size_t boost_skipped = 0;
  double boost_t = 0.0;
  double min_angle_degrees = 0.0;
  DatasetStats stats;
};

struct Dataset {
  std::vector<Sample> samples;
  DatasetManifest manifest;

  std::size_t size() const { return samples.size(); }
  // Refreshes manifest.count and manifest.stats from the rows.
  void refresh_manifest();
};

struct GenerationParams {
  LabelConfig label;
  int k = 5;
  int workers = 1;
  int max_consecutive_rejections = 100;
};

// Seed of sample `index` after `attempt` rejections.
std::uint64_t sample_seed(std::uint64_t master_seed, std::size_t index, int attempt);

// n labeled samples. A sample whose spectrum puts a contributing eigenvalue
// on a range endpoint is replaced by a fresh draw (next attempt seed).
// Output depends only on (master_seed, n, params minus workers).
Dataset generate(std::uint64_t master_seed, std::size_t n, const GenerationParams& params);

// Throws ParameterError on an empty set.
DatasetStats stats(std::span<const Sample> samples);

// Seeded split into (train, val). Rows sharing a sample_seed stay together;
// boosted rows never land in the validation part.
std::pair<Dataset, Dataset> split(const Dataset& data, double val_fraction, std::uint64_t seed);

// Rows of `data` (fem only) extrapolated to first order along an axial field
// (parse_field syntax, "zigzag" or "axial d=..."): radii + t delta,
// psi + t Psi'. Rows whose radii would leave [0.1, 0.5], whose field is not
// admissible for that row's profile, or whose eigenvalues move too close to an
// endpoint (linearization_remainder > 1e-3) are skipped and counted. Requires
// |t| <= 0.02. Returns data with the boosted rows appended.
Dataset boost(const Dataset& data, double t, int workers = 1,
              const std::string& field_spec = "zigzag");

// CSV with header r1,r2,r3,r4,r5,psi,source,sample_seed and a sidecar
// manifest JSON next to it (see manifest_path).
void write_csv(const Dataset& data, const std::filesystem::path& path);
// Also accepts the bare r1..r5,psi layout. Throws ParseError with the line number.
Dataset read_csv(const std::filesystem::path& path);

std::filesystem::path manifest_path(const std::filesystem::path& csv_path);

}  // namespace avgpress
