#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace gnnseg {

// Multi-modality 2D scalar image. Intensities are unitless; after
// normalize() every value lies in [0, 1]. All modalities share one size.
struct Slice {
  int width = 0;
  int height = 0;
  std::vector<std::vector<double>> data;  // [modality][y * width + x]
  std::vector<std::string> modality_names;

  int modalities() const { return static_cast<int>(data.size()); }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  double at(int mod, int x, int y) const { return data[mod][static_cast<std::size_t>(y) * width + x]; }
  double& at(int mod, int x, int y) { return data[mod][static_cast<std::size_t>(y) * width + x]; }

  void validate() const;
};

inline constexpr int kNumClasses = 4;  // background, CSF, GM, WM
inline constexpr const char* kClassNames[kNumClasses] = {"background", "CSF", "GM", "WM"};

// Per-pixel class ids in {0=background, 1=CSF, 2=GM, 3=WM}.
struct LabelMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> labels;

  std::uint8_t at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return labels[static_cast<std::size_t>(y) * width + x]; }

  void validate() const;
};

// Synthetic stand-in for a brain slice: three concentric tissue rings
// (WM disk, GM ring, CSF ring) on background, two modalities with opposing
// contrasts, additive Gaussian noise. ring_radii are fractions of half-size,
// strictly increasing, in (0, 1].
struct PhantomSpec {
  int size = 64;
  std::uint64_t seed = 0;
  double noise_sigma = 0.0;
  std::array<double, 3> ring_radii = {0.35, 0.60, 0.85};

  void validate() const;
  static PhantomSpec from_json(const std::string& text);
  std::string to_json() const;
};

struct Phantom {
  Slice slice;
  LabelMask mask;
};

// Deterministic: identical specs yield bit-identical output. With
// noise_sigma = 0 every pixel equals its tissue's base intensity exactly.
Phantom generate_phantom(const PhantomSpec& spec);

struct NormalizedSlice {
  Slice slice;
  std::vector<bool> constant_modality;  // warning flags, one per modality
};

// Per-modality min-max scaling to [0, 1]. A constant modality becomes all
// zeros and raises its warning flag instead of dividing by zero.
NormalizedSlice normalize(const Slice& s);

}  // namespace gnnseg
