#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gnnseg/image.hpp"
#include "gnnseg/matrix.hpp"
#include "gnnseg/superpixel.hpp"

namespace gnnseg {

// Region adjacency graph over superpixels. Edges are unordered pairs with
// unit weight, stored once with i < j; self-loops are not stored (the GNN
// layers add them when they aggregate over closed neighborhoods).
struct RegionGraph {
  int n = 0;
  std::vector<std::pair<int, int>> edges;        // i < j, lexicographically sorted
  std::vector<std::vector<int>> neighbors;       // per node, ascending, no self
  Matrix fg;                                     // n x m mean intensities
  Matrix fp;                                     // n x 2 normalized centroids

  int modalities() const { return fg.cols; }
  bool has_edge(int i, int j) const;

  std::string to_json() const;
  static RegionGraph from_json(const std::string& text);
};

// Edge (i, j) present iff some pixel of region i 4-neighbors some pixel of
// region j. fg holds per-region modality means; fp holds centroids divided
// by (width-1, height-1) so entries lie in [0, 1].
RegionGraph build_graph(const SuperpixelLabeling& labeling, const Slice& slice);

// Row-wise concatenation [fg | fp]: the n x (m+2) GNN input.
Matrix node_input_features(const RegionGraph& graph);

}  // namespace gnnseg
