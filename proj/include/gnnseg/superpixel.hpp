#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gnnseg/image.hpp"

namespace gnnseg {

struct SnicParams {
  int target_regions = 200;
  double compactness = 10.0;  // balance of spatial vs intensity distance
  int modality_index = 0;     // the clearest modality drives segmentation

  void validate(int width, int height, int modalities) const;
  std::string to_json() const;
  static SnicParams from_json(const std::string& text);
};

// Partition of a slice into connected superpixels. region_of and pixels_of
// describe the same assignment from both directions.
struct SuperpixelLabeling {
  int width = 0;
  int height = 0;
  int n = 0;
  std::vector<std::int32_t> region_of;                 // pixel -> region
  std::vector<std::vector<std::int32_t>> pixels_of;    // region -> ascending pixel indices

  // Checks the partition: every pixel labeled, region ids contiguous and
  // nonempty, every region 4-connected.
  void validate() const;
};

// Seed grid used by SNIC: nx*ny seeds at the centers of a regular grid,
// row-major region ids. The actual region count is nx*ny, which
// approximates target_regions.
struct SeedGrid {
  int nx = 0, ny = 0;
  // ideal (fractional) center of seed k, before rounding to a pixel
  double center_x(int i) const { return (i + 0.5) * spacing_x - 0.5; }
  double center_y(int j) const { return (j + 0.5) * spacing_y - 0.5; }
  double spacing_x = 0, spacing_y = 0;
};

SeedGrid snic_seed_grid(int width, int height, int target_regions);

// Non-iterative priority-queue region growing from grid seeds. Joint
// distance sqrt(d_int^2 + (compactness/s)^2 * d_spatial^2) with
// s = sqrt(W*H/target_regions); intensity is measured against the growing
// region's running mean on a 0..255 scale. Equal priorities resolve in
// insertion order, so the result is deterministic.
SuperpixelLabeling snic_segment(const Slice& slice, const SnicParams& params);

struct RegionStats {
  std::vector<std::vector<double>> mean_intensity;  // [region][modality]
  std::vector<double> mean_x, mean_y;
  std::vector<std::int64_t> count;
};

RegionStats region_stats(const SuperpixelLabeling& labeling, const Slice& slice);

// 16-bit PNG of region indices plus a JSON sidecar carrying n and params.
void write_labeling(const SuperpixelLabeling& labeling, const SnicParams& params,
                    const std::string& png_path, const std::string& json_path);
SuperpixelLabeling read_labeling(const std::string& png_path, const std::string& json_path);

}  // namespace gnnseg
