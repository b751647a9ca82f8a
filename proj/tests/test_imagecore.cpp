#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <map>

#include "gnnseg/errors.hpp"
#include "gnnseg/image.hpp"
#include "gnnseg/image_io.hpp"
#include "gnnseg/util.hpp"
#include "oracles.hpp"

using namespace gnnseg;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const char* name) {
  fs::path dir = fs::temp_directory_path() / "gnnseg_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("phantom with zero noise is piecewise constant per tissue") {
  PhantomSpec spec;
  spec.size = 64;
  spec.seed = 7;
  spec.noise_sigma = 0.0;
  const Phantom ph = generate_phantom(spec);
  for (int mod = 0; mod < ph.slice.modalities(); ++mod) {
    std::map<int, double> tissue_value;
    for (std::size_t p = 0; p < ph.mask.labels.size(); ++p) {
      const int cls = ph.mask.labels[p];
      auto [it, inserted] = tissue_value.emplace(cls, ph.slice.data[mod][p]);
      if (!inserted) CHECK(ph.slice.data[mod][p] == it->second);
    }
    CHECK(tissue_value.size() == 4);
    // tissues must be distinguishable within each modality
    std::set<double> distinct;
    for (auto [cls, v] : tissue_value) distinct.insert(v);
    CHECK(distinct.size() == 4);
  }
}

TEST_CASE("phantom generation is deterministic") {
  PhantomSpec spec;
  spec.size = 64;
  spec.seed = 7;
  spec.noise_sigma = 0.05;
  const Phantom a = generate_phantom(spec);
  const Phantom b = generate_phantom(spec);
  CHECK(a.mask.labels == b.mask.labels);
  for (int mod = 0; mod < 2; ++mod) CHECK(a.slice.data[mod] == b.slice.data[mod]);
}

TEST_CASE("phantom label histogram matches the rasterization oracle") {
  PhantomSpec spec;
  spec.size = 64;
  spec.seed = 7;
  spec.ring_radii = {0.3, 0.6, 0.9};
  const Phantom ph = generate_phantom(spec);
  std::array<std::int64_t, 4> counts{0, 0, 0, 0};
  for (std::uint8_t id : ph.mask.labels) ++counts[id];
  // frozen from the oracle: background, CSF, GM, WM
  CHECK(counts == std::array<std::int64_t, 4>{1488, 1448, 876, 284});
  CHECK(counts == oracle::ring_histogram(64, spec.ring_radii));
}

TEST_CASE("phantom spec validation") {
  PhantomSpec spec;
  spec.ring_radii = {0.6, 0.3, 0.9};
  CHECK_THROWS_AS(generate_phantom(spec), ValidationError);
  spec.ring_radii = {0.3, 0.6, 1.2};
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  spec = PhantomSpec{};
  spec.noise_sigma = -0.1;
  CHECK_THROWS_AS(spec.validate(), ValidationError);
}

TEST_CASE("phantom spec JSON round trip") {
  PhantomSpec spec;
  spec.size = 48;
  spec.seed = 99;
  spec.noise_sigma = 0.02;
  spec.ring_radii = {0.2, 0.5, 0.8};
  const PhantomSpec back = PhantomSpec::from_json(spec.to_json());
  CHECK(back.size == spec.size);
  CHECK(back.seed == spec.seed);
  CHECK(back.noise_sigma == spec.noise_sigma);
  CHECK(back.ring_radii == spec.ring_radii);
  CHECK_THROWS_AS(PhantomSpec::from_json("{not json"), ValidationError);
}

TEST_CASE("normalize maps {2,4,6} to {0,0.5,1}") {
  Slice s;
  s.width = 3;
  s.height = 1;
  s.data = {{2.0, 4.0, 6.0}};
  s.modality_names = {"m0"};
  const auto norm = normalize(s);
  CHECK(norm.slice.data[0] == std::vector<double>{0.0, 0.5, 1.0});
  CHECK_FALSE(norm.constant_modality[0]);
}

TEST_CASE("normalize is idempotent") {
  PhantomSpec spec;
  spec.size = 32;
  spec.seed = 3;
  spec.noise_sigma = 0.05;
  const auto once = normalize(generate_phantom(spec).slice);
  const auto twice = normalize(once.slice);
  for (int mod = 0; mod < 2; ++mod)
    for (std::size_t i = 0; i < once.slice.data[mod].size(); ++i)
      CHECK(twice.slice.data[mod][i] == doctest::Approx(once.slice.data[mod][i]).epsilon(1e-12));
}

TEST_CASE("normalize flags constant modalities") {
  Slice s;
  s.width = 2;
  s.height = 1;
  s.data = {{5.0, 5.0}, {1.0, 2.0}};
  s.modality_names = {"flat", "ok"};
  const auto norm = normalize(s);
  CHECK(norm.constant_modality[0]);
  CHECK_FALSE(norm.constant_modality[1]);
  CHECK(norm.slice.data[0] == std::vector<double>{0.0, 0.0});
}

TEST_CASE("normalize preserves order within a modality") {
  Rng rng(11);
  Slice s;
  s.width = 16;
  s.height = 16;
  s.data.assign(1, std::vector<double>(256));
  s.modality_names = {"m0"};
  for (double& v : s.data[0]) v = rng.uniform(-3.0, 9.0);
  const auto norm = normalize(s);
  for (std::size_t i = 0; i + 1 < 256; ++i) {
    const bool before = s.data[0][i] < s.data[0][i + 1];
    const bool after = norm.slice.data[0][i] < norm.slice.data[0][i + 1];
    CHECK(before == after);
  }
}

TEST_CASE("slice write/read round trip at stored bit depth") {
  const auto dir = scratch_dir("roundtrip");
  Slice s;
  s.width = 3;
  s.height = 3;
  s.modality_names = {"m0"};
  s.data.assign(1, {});
  for (int i = 0; i < 9; ++i) s.data[0].push_back((i * 7000.0) / 65535.0);
  const std::string path = (dir / "s_m0.png").string();
  write_slice(s, {path}, 16);
  const Slice back = read_slice({path});
  REQUIRE(back.width == 3);
  for (int i = 0; i < 9; ++i) CHECK(back.data[0][i] == s.data[0][i]);
}

TEST_CASE("write after read reproduces file bytes for png and pgm") {
  const auto dir = scratch_dir("bytes");
  PhantomSpec spec;
  spec.size = 24;
  spec.seed = 5;
  spec.noise_sigma = 0.05;
  const Phantom ph = generate_phantom(spec);
  for (const char* ext : {".png", ".pgm"}) {
    const std::string first = (dir / (std::string("a_m0") + ext)).string();
    const std::string second = (dir / (std::string("b_m0") + ext)).string();
    write_slice(ph.slice, {first, (dir / (std::string("a_m1") + ext)).string()}, 16);
    const Slice back = read_slice({first});
    Slice one;
    one.width = back.width;
    one.height = back.height;
    one.data = {back.data[0]};
    one.modality_names = {"m0"};
    write_slice(one, {second}, 16);
    CHECK(read_file_bytes(first) == read_file_bytes(second));
  }
}

TEST_CASE("16-bit pgm with full-scale value normalizes to 1.0") {
  const auto dir = scratch_dir("pgm16");
  // hand-written fixture: 2x2, maxval 65535, big-endian samples
  std::string bytes = "P5\n2 2\n65535\n";
  const std::uint16_t samples[4] = {0, 16384, 32768, 65535};
  for (std::uint16_t v : samples) {
    bytes.push_back(static_cast<char>(v >> 8));
    bytes.push_back(static_cast<char>(v & 0xff));
  }
  const std::string path = (dir / "fixture.pgm").string();
  write_file_atomic(path, bytes);
  const Slice s = read_slice({path});
  CHECK(s.data[0][0] == 0.0);
  CHECK(s.data[0][3] == 1.0);
  CHECK(s.data[0][1] == doctest::Approx(16384.0 / 65535.0));
}

TEST_CASE("modality dimension mismatch is rejected") {
  const auto dir = scratch_dir("mismatch");
  PhantomSpec big, small;
  big.size = 64;
  small.size = 32;
  const std::string a = (dir / "a.png").string();
  const std::string b = (dir / "b.png").string();
  Slice sb = generate_phantom(big).slice;
  Slice ss = generate_phantom(small).slice;
  Slice one;
  one.width = sb.width;
  one.height = sb.height;
  one.data = {sb.data[0]};
  one.modality_names = {"m0"};
  write_slice(one, {a}, 16);
  one.width = ss.width;
  one.height = ss.height;
  one.data = {ss.data[0]};
  write_slice(one, {b}, 16);
  CHECK_THROWS_AS(read_slice({a, b}), ValidationError);
}

TEST_CASE("unsupported formats are rejected") {
  const auto dir = scratch_dir("badfmt");
  const std::string path = (dir / "x.png").string();
  write_file_atomic(path, std::string("not an image"));
  CHECK_THROWS_AS(read_gray(path), IoError);
  // color PNG is readable only by the render path, not as grayscale input
  const std::string rgb = (dir / "c.png").string();
  write_rgb_png(2, 2, std::vector<std::array<std::uint8_t, 3>>(4, {1, 2, 3}), rgb);
  CHECK_THROWS_AS(read_gray(rgb), IoError);
  CHECK_THROWS_AS(read_gray((dir / "missing.png").string()), IoError);
}

TEST_CASE("mask write/read round trip") {
  const auto dir = scratch_dir("mask");
  PhantomSpec spec;
  spec.size = 32;
  const LabelMask mask = generate_phantom(spec).mask;
  const std::string path = (dir / "m.png").string();
  write_mask(mask, path);
  const LabelMask back = read_mask(path);
  CHECK(back.labels == mask.labels);
}
