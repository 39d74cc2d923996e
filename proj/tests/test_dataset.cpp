#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "avgpress/dataset.hpp"
#include "avgpress/errors.hpp"

using namespace avgpress;
namespace fs = std::filesystem;

namespace {

GenerationParams small_params(int k = 5) {
  GenerationParams p;
  p.k = k;
  p.label.mesh = {36, 4};
  p.label.cutoff_factor = 2.0;
  return p;
}

fs::path temp_file(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "avgpress_test_dataset";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  fs::remove(manifest_path(p));
  std::ofstream(p, std::ios::binary) << text;
}

Sample row(double psi, std::uint64_t seed, SampleSource src = SampleSource::kFem) {
  return {{0.2, 0.3, 0.4, 0.3, 0.2}, psi, src, seed};
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("generation is deterministic and independent of worker count") {
    auto p = small_params();
    const Dataset a = generate(11, 6, p);
    const Dataset b = generate(11, 6, p);
    p.workers = 3;
    const Dataset c = generate(11, 6, p);
    CHECK(a.samples == b.samples);
    CHECK(a.samples == c.samples);
    const Dataset d = generate(12, 6, small_params());
    CHECK(a.samples != d.samples);
    CHECK(a.manifest.count == 6);
    CHECK(a.manifest.min_angle_degrees >= 5.0);
    for (const auto& s : a.samples) {
      CHECK(std::isfinite(s.psi));
      for (double r : s.radii) CHECK((r >= kMinRadius && r <= kMaxRadius));
    }
  }

  TEST_CASE("sample radii are the seeded draw broadcast to five inputs") {
    const Dataset d = generate(5, 3, small_params(2));
    for (const auto& s : d.samples) {
      const auto p = sample_profile(s.sample_seed, 2);
      const auto expect = p.network_input();
      for (int i = 0; i < kNetworkInputs; ++i) CHECK(s.radii[i] == expect[i]);
      CHECK(s.radii[2] == doctest::Approx(0.5 * (s.radii[0] + s.radii[4])).epsilon(1e-14));
    }
  }

  TEST_CASE("generate rejects bad arguments") {
    CHECK_THROWS_AS(generate(1, 0, small_params()), ParameterError);
    CHECK_THROWS_AS(generate(1, 2, small_params(4)), ParameterError);
  }

  TEST_CASE("csv output is byte-identical across runs and round-trips") {
    const Dataset a = generate(21, 5, small_params());
    const auto p1 = temp_file("a.csv");
    const auto p2 = temp_file("b.csv");
    write_csv(a, p1);
    write_csv(generate(21, 5, small_params()), p2);
    CHECK(slurp(p1) == slurp(p2));
    CHECK(slurp(manifest_path(p1)) == slurp(manifest_path(p2)));
    CHECK(slurp(p1).rfind("r1,r2,r3,r4,r5,psi,source,sample_seed\n", 0) == 0);

    const Dataset back = read_csv(p1);
    CHECK(back.samples == a.samples);
    CHECK(back.manifest.master_seed == 21);
    CHECK(back.manifest.label.mesh == a.manifest.label.mesh);
    CHECK(back.manifest.stats.mean == a.manifest.stats.mean);
    CHECK(back.manifest.stats.variance == a.manifest.stats.variance);
  }

  TEST_CASE("csv parse errors carry line numbers") {
    const auto p = temp_file("bad.csv");
    write_text(p, "");
    CHECK_THROWS_AS(read_csv(p), ParseError);

    write_text(p, "r2,r1,r3,r4,r5,psi,source,sample_seed\n0.2,0.2,0.2,0.2,0.2,0.07,fem,1\n");
    try {
      read_csv(p);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 1);
    }

    write_text(p,
               "r1,r2,r3,r4,r5,psi,source,sample_seed\n"
               "0.2,0.2,0.2,0.2,0.2,0.07,fem,1\n"
               "0.2,0.2,abc,0.2,0.2,0.07,fem,2\n");
    try {
      read_csv(p);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }

    write_text(p, "r1,r2,r3,r4,r5,psi,source,sample_seed\n0.2,0.2,0.2,0.2,0.2,0.07,fem\n");
    CHECK_THROWS_AS(read_csv(p), ParseError);
    write_text(p, "r1,r2,r3,r4,r5,psi,source,sample_seed\n0.2,0.2,0.2,0.2,0.7,0.07,fem,1\n");
    CHECK_THROWS_AS(read_csv(p), ParseError);
    write_text(p, "r1,r2,r3,r4,r5,psi,source,sample_seed\n0.2,0.2,0.2,0.2,0.2,0.07,other,1\n");
    CHECK_THROWS_AS(read_csv(p), ParseError);
    write_text(p, "r1,r2,r3,r4,r5,psi,source,sample_seed\n");
    CHECK_THROWS_AS(read_csv(p), ParseError);
  }

  TEST_CASE("bare six-column layout is accepted") {
    const auto p = temp_file("bare.csv");
    write_text(p, "r1,r2,r3,r4,r5,psi\n0.2,0.3,0.4,0.3,0.2,0.05\n0.1,0.1,0.1,0.1,0.1,0.0742\n");
    const Dataset d = read_csv(p);
    REQUIRE(d.size() == 2);
    CHECK(d.samples[1].psi == 0.0742);
    CHECK(d.samples[0].sample_seed != d.samples[1].sample_seed);
    CHECK(d.manifest.count == 2);
  }

  TEST_CASE("manifest count must match the rows") {
    Dataset d;
    d.samples = {row(0.1, 1), row(0.2, 2)};
    const auto p = temp_file("mismatch.csv");
    write_csv(d, p);
    std::ofstream(p, std::ios::app) << "0.2,0.2,0.2,0.2,0.2,0.3,fem,3\n";
    CHECK_THROWS_AS(read_csv(p), ParseError);
  }

  TEST_CASE("population statistics") {
    std::vector<Sample> rows = {row(0.07, 1)};
    const auto one = stats(rows);
    CHECK(one.variance == 0.0);
    CHECK(one.mean == 0.07);

    rows = {row(1.0, 1), row(2.0, 2), row(4.0, 3), row(-1.0, 4)};
    const auto s = stats(rows);
    CHECK(s.count == 4);
    CHECK(s.mean == doctest::Approx(1.5));
    // ((-0.5)^2 + 0.5^2 + 2.5^2 + 2.5^2) / 4
    CHECK(s.variance == doctest::Approx(13.0 / 4.0));
    CHECK(s.min == -1.0);
    CHECK(s.max == 4.0);
    CHECK_THROWS_AS(stats(std::span<const Sample>{}), ParameterError);
  }

  TEST_CASE("split sizes, disjointness and determinism") {
    Dataset d;
    for (std::uint64_t i = 0; i < 100; ++i) d.samples.push_back(row(0.01 * i, 1000 + i));
    const auto [train, val] = split(d, 0.2, 3);
    CHECK(train.size() == 80);
    CHECK(val.size() == 20);
    std::set<std::uint64_t> seeds_train, seeds_val;
    for (const auto& s : train.samples) seeds_train.insert(s.sample_seed);
    for (const auto& s : val.samples) seeds_val.insert(s.sample_seed);
    for (auto s : seeds_val) CHECK(seeds_train.count(s) == 0);
    CHECK(seeds_train.size() + seeds_val.size() == 100);

    const auto again = split(d, 0.2, 3);
    CHECK(again.first.samples == train.samples);
    CHECK(again.second.samples == val.samples);
    const auto other = split(d, 0.2, 4);
    CHECK(other.second.samples != val.samples);

    CHECK_THROWS_AS(split(d, 0.0, 1), ParameterError);
    CHECK_THROWS_AS(split(d, 1.0, 1), ParameterError);
  }

  TEST_CASE("split keeps seed groups together and boosted rows out of validation") {
    Dataset d;
    for (std::uint64_t i = 0; i < 50; ++i) d.samples.push_back(row(0.01 * i, i));
    for (std::uint64_t i = 0; i < 50; i += 2) d.samples.push_back(row(0.01 * i + 1e-3, i, SampleSource::kBoosted));
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const auto [train, val] = split(d, 0.2, seed);
      CHECK(train.size() + val.size() == d.size());
      std::set<std::uint64_t> seeds_train;
      for (const auto& s : train.samples) seeds_train.insert(s.sample_seed);
      for (const auto& s : val.samples) {
        CHECK(s.source == SampleSource::kFem);
        CHECK(seeds_train.count(s.sample_seed) == 0);
      }
    }
  }

  TEST_CASE("boost with t = 0 duplicates rows") {
    Dataset d = generate(31, 4, small_params());
    const Dataset b = boost(d, 0.0);
    REQUIRE(b.size() == 8);
    CHECK(b.manifest.boosted_count == 4);
    for (std::size_t i = 0; i < 4; ++i) {
      const auto& s = b.samples[4 + i];
      CHECK(s.source == SampleSource::kBoosted);
      CHECK(s.psi == d.samples[i].psi);
      CHECK(s.radii == d.samples[i].radii);
      CHECK(s.sample_seed == d.samples[i].sample_seed);
    }
  }

  TEST_CASE("boost skips rows that would leave the radius bounds") {
    Dataset d;
    d.manifest.label = small_params().label;
    d.samples = {Sample{{0.5, 0.3, 0.3, 0.3, 0.3}, 0.0, SampleSource::kFem, 1}};
    const Dataset b = boost(d, 0.01);
    CHECK(b.size() == 1);
    CHECK(b.manifest.boost_skipped == 1);
    CHECK_THROWS_AS(boost(d, 0.03), ParameterError);
  }

  TEST_CASE("boosted labels match a fresh solve to second order in t") {
    GenerationParams p;
    const Dataset d = generate(2024, 20, p);
    std::vector<double> ratios;
    int compared = 0;
    for (double t : {0.01, 0.005}) {
      const Dataset b = boost(d, t);
      for (std::size_t i = d.size(); i < b.size(); ++i) {
        const auto& s = b.samples[i];
        const RadialProfile moved(std::vector<double>(s.radii.begin(), s.radii.end()));
        const double fresh = compute_psi(moved, p.label).psi;
        // C t^2 with a floor for the O(h^2) mismatch between the mapped and the rebuilt mesh.
        CHECK(std::abs(s.psi - fresh) <= 25.0 * t * t + 1e-4);
        ++compared;
      }
      CHECK(b.size() - d.size() + b.manifest.boost_skipped == d.size());
    }
    CHECK(compared >= 20);
  }

  TEST_CASE("uniform desk labels match the closed form") {
    const Dataset d = generate(7, 3, GenerationParams{.label = {}, .k = 1});
    for (const auto& s : d.samples) CHECK(std::abs(s.psi - 0.0742) <= 1e-3);
    CHECK(d.manifest.stats.variance < 1e-8);
  }
}
