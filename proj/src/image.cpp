#include "gnnseg/image.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "gnnseg/errors.hpp"
#include "gnnseg/rng.hpp"

namespace gnnseg {

void Slice::validate() const {
  if (width <= 0 || height <= 0) throw ValidationError("slice dimensions must be positive");
  if (data.empty()) throw ValidationError("slice needs at least one modality");
  for (const auto& mod : data)
    if (mod.size() != pixel_count())
      throw ValidationError("modality size does not match slice dimensions");
}

void LabelMask::validate() const {
  if (width <= 0 || height <= 0) throw ValidationError("mask dimensions must be positive");
  if (labels.size() != static_cast<std::size_t>(width) * height)
    throw ValidationError("label buffer size does not match mask dimensions");
  for (std::uint8_t id : labels)
    if (id >= kNumClasses) throw ValidationError("class id out of range");
}

void PhantomSpec::validate() const {
  if (size < 4) throw ValidationError("phantom size must be at least 4");
  if (noise_sigma < 0) throw ValidationError("noise_sigma must be nonnegative");
  if (!(ring_radii[0] < ring_radii[1] && ring_radii[1] < ring_radii[2]))
    throw ValidationError("ring_radii must be strictly increasing");
  for (double r : ring_radii)
    if (!(r > 0.0 && r <= 1.0)) throw ValidationError("ring_radii must lie in (0, 1]");
}

PhantomSpec PhantomSpec::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid phantom spec JSON: ") + e.what());
  }
  PhantomSpec spec;
  try {
    if (j.contains("size")) spec.size = j.at("size").get<int>();
    if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("noise_sigma")) spec.noise_sigma = j.at("noise_sigma").get<double>();
    if (j.contains("ring_radii")) {
      auto rr = j.at("ring_radii").get<std::vector<double>>();
      if (rr.size() != 3) throw ValidationError("ring_radii must have 3 entries");
      std::copy(rr.begin(), rr.end(), spec.ring_radii.begin());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid phantom spec field: ") + e.what());
  }
  spec.validate();
  return spec;
}

std::string PhantomSpec::to_json() const {
  nlohmann::ordered_json j;
  j["size"] = size;
  j["seed"] = seed;
  j["noise_sigma"] = noise_sigma;
  j["ring_radii"] = ring_radii;
  return j.dump(2);
}

namespace {

// Base intensities per [modality][class id]. Modality 0 has the clearest
// tissue contrast and is the default superpixel modality.
constexpr double kBaseIntensity[2][kNumClasses] = {
    {0.05, 0.25, 0.55, 0.85},  // t1-like: WM brightest
    {0.05, 0.90, 0.60, 0.30},  // t2-like: CSF brightest
};

}  // namespace

Phantom generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  const int n = spec.size;
  const double center = (n - 1) / 2.0;
  const double half = n / 2.0;

  Phantom out;
  out.mask.width = n;
  out.mask.height = n;
  out.mask.labels.resize(static_cast<std::size_t>(n) * n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      double r = std::hypot(x - center, y - center);
      std::uint8_t id = 0;
      if (r <= spec.ring_radii[0] * half) id = 3;       // WM core
      else if (r <= spec.ring_radii[1] * half) id = 2;  // GM ring
      else if (r <= spec.ring_radii[2] * half) id = 1;  // CSF ring
      out.mask.at(x, y) = id;
    }
  }

  out.slice.width = n;
  out.slice.height = n;
  out.slice.modality_names = {"t1w", "t2w"};
  out.slice.data.assign(2, std::vector<double>(static_cast<std::size_t>(n) * n));
  Rng rng(spec.seed);
  for (int mod = 0; mod < 2; ++mod) {
    for (std::size_t p = 0; p < out.mask.labels.size(); ++p) {
      double v = kBaseIntensity[mod][out.mask.labels[p]];
      if (spec.noise_sigma > 0) v += spec.noise_sigma * rng.gaussian();
      out.slice.data[mod][p] = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

NormalizedSlice normalize(const Slice& s) {
  s.validate();
  NormalizedSlice out;
  out.slice = s;
  out.constant_modality.assign(s.modalities(), false);
  for (int mod = 0; mod < s.modalities(); ++mod) {
    auto& values = out.slice.data[mod];
    auto [mn_it, mx_it] = std::minmax_element(values.begin(), values.end());
    double mn = *mn_it, mx = *mx_it;
    if (mx - mn <= 0.0) {
      std::fill(values.begin(), values.end(), 0.0);
      out.constant_modality[mod] = true;
      continue;
    }
    double inv = 1.0 / (mx - mn);
    for (double& v : values) v = (v - mn) * inv;
  }
  return out;
}

}  // namespace gnnseg
