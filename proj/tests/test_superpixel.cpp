#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "gnnseg/errors.hpp"
#include "gnnseg/image.hpp"
#include "gnnseg/superpixel.hpp"
#include "oracles.hpp"

using namespace gnnseg;

namespace {

Slice constant_slice(int w, int h, double value) {
  Slice s;
  s.width = w;
  s.height = h;
  s.data.assign(1, std::vector<double>(static_cast<std::size_t>(w) * h, value));
  s.modality_names = {"m0"};
  return s;
}

Slice random_slice(int w, int h, Rng& rng) {
  Slice s = constant_slice(w, h, 0);
  for (double& v : s.data[0]) v = rng.uniform01();
  return s;
}

}  // namespace

TEST_CASE("constant image with four targets gives the 2x2 block layout") {
  const Slice s = constant_slice(8, 8, 0.5);
  SnicParams params;
  params.target_regions = 4;
  params.compactness = 10.0;
  const auto labeling = snic_segment(s, params);
  labeling.validate();
  REQUIRE(labeling.n == 4);
  for (int r = 0; r < 4; ++r) CHECK(labeling.pixels_of[r].size() == 16);
  const auto expected = oracle::voronoi_blocks(8, 8, 4);
  for (std::size_t p = 0; p < expected.size(); ++p) CHECK(labeling.region_of[p] == expected[p]);
}

TEST_CASE("single target region absorbs the whole image") {
  Rng rng(3);
  const Slice s = random_slice(9, 7, rng);
  SnicParams params;
  params.target_regions = 1;
  const auto labeling = snic_segment(s, params);
  labeling.validate();
  CHECK(labeling.n == 1);
  CHECK(labeling.pixels_of[0].size() == 63);
}

TEST_CASE("two-tone image with vanishing compactness splits at the intensity edge") {
  Slice s = constant_slice(8, 8, 0.0);
  for (int y = 0; y < 8; ++y)
    for (int x = 4; x < 8; ++x) s.data[0][y * 8 + x] = 1.0;
  SnicParams params;
  params.target_regions = 2;
  params.compactness = 0.0;
  const auto labeling = snic_segment(s, params);
  labeling.validate();
  REQUIRE(labeling.n == 2);
  // each region's intensity variance must be zero
  for (int r = 0; r < 2; ++r) {
    const double first = s.data[0][labeling.pixels_of[r][0]];
    for (std::int32_t p : labeling.pixels_of[r]) CHECK(s.data[0][p] == first);
  }
}

TEST_CASE("target region count above pixel count is rejected") {
  const Slice s = constant_slice(4, 4, 0.5);
  SnicParams params;
  params.target_regions = 17;
  CHECK_THROWS_AS(snic_segment(s, params), ValidationError);
  params.target_regions = 0;
  CHECK_THROWS_AS(snic_segment(s, params), ValidationError);
  params.target_regions = 4;
  params.compactness = -1;
  CHECK_THROWS_AS(snic_segment(s, params), ValidationError);
  params.compactness = 10;
  params.modality_index = 2;
  CHECK_THROWS_AS(snic_segment(s, params), ValidationError);
}

TEST_CASE("segmentation is deterministic") {
  Rng rng(17);
  const Slice s = random_slice(24, 18, rng);
  SnicParams params;
  params.target_regions = 12;
  const auto a = snic_segment(s, params);
  const auto b = snic_segment(s, params);
  CHECK(a.region_of == b.region_of);
}

TEST_CASE("partitions stay connected and exhaustive on random images") {
  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const int w = 8 + static_cast<int>(rng.index(24));
    const int h = 8 + static_cast<int>(rng.index(24));
    const Slice s = random_slice(w, h, rng);
    SnicParams params;
    params.target_regions = 1 + static_cast<int>(rng.index(15));
    const auto labeling = snic_segment(s, params);
    labeling.validate();  // partition, contiguity, 4-connectivity
    std::size_t total = 0;
    for (const auto& px : labeling.pixels_of) total += px.size();
    CHECK(total == static_cast<std::size_t>(w) * h);
  }
}

TEST_CASE("huge compactness converges to the constant-image block layout") {
  Rng rng(41);
  for (auto [w, h, n] : {std::array<int, 3>{16, 16, 4}, {8, 8, 4}, {12, 12, 9}}) {
    const Slice s = random_slice(w, h, rng);
    SnicParams params;
    params.target_regions = n;
    params.compactness = 1e9;
    const auto labeling = snic_segment(s, params);
    const auto expected = oracle::voronoi_blocks(w, h, n);
    for (std::size_t p = 0; p < expected.size(); ++p)
      CHECK(labeling.region_of[p] == expected[p]);
  }
}

TEST_CASE("region stats on a single region") {
  Slice s = constant_slice(2, 2, 0);
  s.data[0] = {1, 2, 3, 4};
  SnicParams params;
  params.target_regions = 1;
  const auto labeling = snic_segment(s, params);
  const auto st = region_stats(labeling, s);
  CHECK(st.mean_intensity[0][0] == doctest::Approx(2.5));
  CHECK(st.mean_x[0] == doctest::Approx(0.5));
  CHECK(st.mean_y[0] == doctest::Approx(0.5));
  CHECK(st.count[0] == 4);
}

TEST_CASE("region stats on a constant image match the constant") {
  const Slice s = constant_slice(8, 8, 0.37);
  SnicParams params;
  params.target_regions = 4;
  const auto labeling = snic_segment(s, params);
  const auto st = region_stats(labeling, s);
  for (int r = 0; r < labeling.n; ++r) CHECK(st.mean_intensity[r][0] == doctest::Approx(0.37));
}

TEST_CASE("region stats equal a brute-force accumulation oracle") {
  Rng rng(7);
  Slice s = random_slice(16, 16, rng);
  s.data.push_back(s.data[0]);
  for (double& v : s.data[1]) v = rng.uniform01();
  s.modality_names = {"m0", "m1"};
  SnicParams params;
  params.target_regions = 9;
  const auto labeling = snic_segment(s, params);
  const auto st = region_stats(labeling, s);

  // independent per-pixel accumulation
  std::vector<std::array<double, 4>> acc(labeling.n, {0, 0, 0, 0});  // m0, m1, x, y
  std::vector<int> count(labeling.n, 0);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      const int r = labeling.region_of[y * 16 + x];
      acc[r][0] += s.data[0][y * 16 + x];
      acc[r][1] += s.data[1][y * 16 + x];
      acc[r][2] += x;
      acc[r][3] += y;
      ++count[r];
    }
  for (int r = 0; r < labeling.n; ++r) {
    CHECK(st.mean_intensity[r][0] == acc[r][0] / count[r]);
    CHECK(st.mean_intensity[r][1] == acc[r][1] / count[r]);
    CHECK(st.mean_x[r] == acc[r][2] / count[r]);
    CHECK(st.mean_y[r] == acc[r][3] / count[r]);
  }

  // global sum conservation within 1e-9 relative
  for (int mod = 0; mod < 2; ++mod) {
    double global = 0, recomposed = 0;
    for (double v : s.data[mod]) global += v;
    for (int r = 0; r < labeling.n; ++r) recomposed += st.mean_intensity[r][mod] * st.count[r];
    CHECK(recomposed == doctest::Approx(global).epsilon(1e-9));
  }
}

TEST_CASE("labeling png + sidecar round trip") {
  Rng rng(29);
  const Slice s = random_slice(20, 14, rng);
  SnicParams params;
  params.target_regions = 8;
  const auto labeling = snic_segment(s, params);
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "gnnseg_tests" / "labeling";
  fs::create_directories(dir);
  const std::string png = (dir / "l.png").string();
  const std::string json = (dir / "l.json").string();
  write_labeling(labeling, params, png, json);
  const auto back = read_labeling(png, json);
  CHECK(back.n == labeling.n);
  CHECK(back.region_of == labeling.region_of);
}
