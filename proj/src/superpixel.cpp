#include "gnnseg/superpixel.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include <json.hpp>

#include "gnnseg/errors.hpp"
#include "gnnseg/image_io.hpp"
#include "gnnseg/util.hpp"

namespace gnnseg {

void SnicParams::validate(int width, int height, int modalities) const {
  if (target_regions < 1) throw ValidationError("target_regions must be at least 1");
  if (static_cast<std::int64_t>(target_regions) > static_cast<std::int64_t>(width) * height)
    throw ValidationError("target_regions exceeds pixel count");
  if (compactness < 0) throw ValidationError("compactness must be nonnegative");
  if (modality_index < 0 || modality_index >= modalities)
    throw ValidationError("modality_index out of range");
}

std::string SnicParams::to_json() const {
  nlohmann::ordered_json j;
  j["target_regions"] = target_regions;
  j["compactness"] = compactness;
  j["modality_index"] = modality_index;
  return j.dump(2);
}

SnicParams SnicParams::from_json(const std::string& text) {
  SnicParams p;
  try {
    auto j = nlohmann::json::parse(text);
    if (j.contains("target_regions")) p.target_regions = j.at("target_regions").get<int>();
    if (j.contains("compactness")) p.compactness = j.at("compactness").get<double>();
    if (j.contains("modality_index")) p.modality_index = j.at("modality_index").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid SNIC params JSON: ") + e.what());
  }
  return p;
}

void SuperpixelLabeling::validate() const {
  const std::size_t pixels = static_cast<std::size_t>(width) * height;
  if (region_of.size() != pixels) throw ValidationError("region_of size mismatch");
  if (n <= 0 || static_cast<int>(pixels_of.size()) != n)
    throw ValidationError("region count mismatch");

  std::size_t total = 0;
  for (int r = 0; r < n; ++r) {
    if (pixels_of[r].empty()) throw ValidationError("empty region " + std::to_string(r));
    total += pixels_of[r].size();
    for (std::int32_t p : pixels_of[r])
      if (p < 0 || static_cast<std::size_t>(p) >= pixels || region_of[p] != r)
        throw ValidationError("region_of/pixels_of inconsistency at region " + std::to_string(r));
  }
  if (total != pixels) throw ValidationError("regions do not partition the image");

  // 4-connectivity per region via BFS from its first pixel
  std::vector<std::int32_t> mark(pixels, -1);
  std::vector<std::int32_t> stack;
  for (int r = 0; r < n; ++r) {
    stack.assign(1, pixels_of[r][0]);
    mark[pixels_of[r][0]] = r;
    std::size_t seen = 1;
    while (!stack.empty()) {
      std::int32_t p = stack.back();
      stack.pop_back();
      int x = p % width, y = p / width;
      const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
      for (int k = 0; k < 4; ++k) {
        int nx = x + dx[k], ny = y + dy[k];
        if (nx < 0 || ny < 0 || nx >= width || ny >= height) continue;
        std::int32_t q = ny * width + nx;
        if (region_of[q] == r && mark[q] != r) {
          mark[q] = r;
          stack.push_back(q);
          ++seen;
        }
      }
    }
    if (seen != pixels_of[r].size())
      throw ValidationError("region " + std::to_string(r) + " is not 4-connected");
  }
}

SeedGrid snic_seed_grid(int width, int height, int target_regions) {
  SeedGrid g;
  double ideal_nx = std::sqrt(static_cast<double>(target_regions) * width / height);
  g.nx = std::clamp(static_cast<int>(std::ceil(ideal_nx)), 1, width);
  g.ny = std::clamp(static_cast<int>(std::ceil(static_cast<double>(target_regions) / g.nx)),
                    1, height);
  g.spacing_x = static_cast<double>(width) / g.nx;
  g.spacing_y = static_cast<double>(height) / g.ny;
  return g;
}

namespace {

struct Candidate {
  double dist;
  std::uint64_t order;  // FIFO tiebreak
  std::int32_t pixel;
  std::int32_t region;
};

struct CandidateAfter {
  bool operator()(const Candidate& a, const Candidate& b) const {
    if (a.dist != b.dist) return a.dist > b.dist;
    return a.order > b.order;
  }
};

struct RegionAccum {
  double sum_intensity = 0, sum_x = 0, sum_y = 0;
  std::int64_t count = 0;
};

}  // namespace

SuperpixelLabeling snic_segment(const Slice& slice, const SnicParams& params) {
  slice.validate();
  params.validate(slice.width, slice.height, slice.modalities());

  const int W = slice.width, H = slice.height;
  const std::size_t pixels = static_cast<std::size_t>(W) * H;
  // intensity on a 0..255 scale so the usual compactness range applies
  std::vector<double> intensity(pixels);
  for (std::size_t i = 0; i < pixels; ++i)
    intensity[i] = 255.0 * slice.data[params.modality_index][i];

  const SeedGrid grid = snic_seed_grid(W, H, params.target_regions);
  const int n = grid.nx * grid.ny;
  const double s = std::sqrt(static_cast<double>(W) * H / params.target_regions);
  const double spatial_scale = params.compactness / s;

  SuperpixelLabeling out;
  out.width = W;
  out.height = H;
  out.n = n;
  out.region_of.assign(pixels, -1);

  std::vector<RegionAccum> acc(n);
  std::priority_queue<Candidate, std::vector<Candidate>, CandidateAfter> queue;
  std::uint64_t order = 0;

  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      int sx = std::clamp(static_cast<int>(std::lround(grid.center_x(i))), 0, W - 1);
      int sy = std::clamp(static_cast<int>(std::lround(grid.center_y(j))), 0, H - 1);
      std::int32_t p = sy * W + sx;
      queue.push({0.0, order++, p, j * grid.nx + i});
    }
  }

  std::size_t assigned = 0;
  while (!queue.empty()) {
    Candidate c = queue.top();
    queue.pop();
    if (out.region_of[c.pixel] != -1) continue;
    out.region_of[c.pixel] = c.region;
    ++assigned;

    const int x = c.pixel % W, y = c.pixel / W;
    RegionAccum& a = acc[c.region];
    a.sum_intensity += intensity[c.pixel];
    a.sum_x += x;
    a.sum_y += y;
    a.count += 1;

    const double mean_i = a.sum_intensity / a.count;
    const double cx = a.sum_x / a.count, cy = a.sum_y / a.count;
    const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      int nx = x + dx[k], ny = y + dy[k];
      if (nx < 0 || ny < 0 || nx >= W || ny >= H) continue;
      std::int32_t q = ny * W + nx;
      if (out.region_of[q] != -1) continue;
      double di = intensity[q] - mean_i;
      double dsx = nx - cx, dsy = ny - cy;
      double dist = std::sqrt(di * di + spatial_scale * spatial_scale * (dsx * dsx + dsy * dsy));
      queue.push({dist, order++, q, c.region});
    }
  }
  if (assigned != pixels) throw NumericError("SNIC left unassigned pixels");

  out.pixels_of.assign(n, {});
  for (std::size_t p = 0; p < pixels; ++p)
    out.pixels_of[out.region_of[p]].push_back(static_cast<std::int32_t>(p));
  for (int r = 0; r < n; ++r)
    if (out.pixels_of[r].empty())
      throw NumericError("SNIC produced an empty region");  // cannot happen: seeds are distinct
  return out;
}

RegionStats region_stats(const SuperpixelLabeling& labeling, const Slice& slice) {
  if (labeling.width != slice.width || labeling.height != slice.height)
    throw ValidationError("labeling and slice dimensions differ");
  const int m = slice.modalities();
  RegionStats st;
  st.mean_intensity.assign(labeling.n, std::vector<double>(m, 0.0));
  st.mean_x.assign(labeling.n, 0.0);
  st.mean_y.assign(labeling.n, 0.0);
  st.count.assign(labeling.n, 0);

  for (int r = 0; r < labeling.n; ++r) {
    auto& sums = st.mean_intensity[r];
    double sx = 0, sy = 0;
    for (std::int32_t p : labeling.pixels_of[r]) {
      for (int mod = 0; mod < m; ++mod) sums[mod] += slice.data[mod][p];
      sx += p % labeling.width;
      sy += p / labeling.width;
    }
    const auto cnt = static_cast<std::int64_t>(labeling.pixels_of[r].size());
    st.count[r] = cnt;
    for (int mod = 0; mod < m; ++mod) sums[mod] /= cnt;
    st.mean_x[r] = sx / cnt;
    st.mean_y[r] = sy / cnt;
  }
  return st;
}

void write_labeling(const SuperpixelLabeling& labeling, const SnicParams& params,
                    const std::string& png_path, const std::string& json_path) {
  labeling.validate();
  if (labeling.n > 65536)
    throw ValidationError("labeling has too many regions for 16-bit storage");
  GrayImage img;
  img.width = labeling.width;
  img.height = labeling.height;
  img.bit_depth = 16;
  img.maxval = 65535;
  img.pixels.resize(labeling.region_of.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    img.pixels[i] = static_cast<std::uint16_t>(labeling.region_of[i]);
  write_gray(img, png_path);

  nlohmann::ordered_json j;
  j["n"] = labeling.n;
  j["params"] = nlohmann::json::parse(params.to_json());
  write_file_atomic(json_path, j.dump(2) + "\n");
}

SuperpixelLabeling read_labeling(const std::string& png_path, const std::string& json_path) {
  GrayImage img = read_gray(png_path);
  int n = 0;
  try {
    auto j = nlohmann::json::parse(read_file_bytes(json_path));
    n = j.at("n").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid labeling sidecar: ") + e.what());
  }
  SuperpixelLabeling out;
  out.width = img.width;
  out.height = img.height;
  out.n = n;
  out.region_of.resize(img.pixels.size());
  out.pixels_of.assign(n, {});
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    if (img.pixels[i] >= static_cast<std::uint32_t>(n))
      throw ValidationError("region index out of range in " + png_path);
    out.region_of[i] = static_cast<std::int32_t>(img.pixels[i]);
    out.pixels_of[out.region_of[i]].push_back(static_cast<std::int32_t>(i));
  }
  out.validate();
  return out;
}

}  // namespace gnnseg
