#include "gnnseg/graph.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "gnnseg/errors.hpp"

namespace gnnseg {

bool RegionGraph::has_edge(int i, int j) const {
  if (i == j) return false;
  if (i > j) std::swap(i, j);
  return std::binary_search(edges.begin(), edges.end(), std::make_pair(i, j));
}

RegionGraph build_graph(const SuperpixelLabeling& labeling, const Slice& slice) {
  if (labeling.width != slice.width || labeling.height != slice.height)
    throw ValidationError("labeling and slice dimensions differ");

  const int W = labeling.width, H = labeling.height;
  std::set<std::pair<int, int>> edge_set;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const int r = labeling.region_of[y * W + x];
      if (x + 1 < W) {
        int r2 = labeling.region_of[y * W + x + 1];
        if (r2 != r) edge_set.emplace(std::min(r, r2), std::max(r, r2));
      }
      if (y + 1 < H) {
        int r2 = labeling.region_of[(y + 1) * W + x];
        if (r2 != r) edge_set.emplace(std::min(r, r2), std::max(r, r2));
      }
    }
  }

  RegionGraph g;
  g.n = labeling.n;
  g.edges.assign(edge_set.begin(), edge_set.end());
  g.neighbors.assign(g.n, {});
  for (auto [i, j] : g.edges) {
    g.neighbors[i].push_back(j);
    g.neighbors[j].push_back(i);
  }
  for (auto& nb : g.neighbors) std::sort(nb.begin(), nb.end());

  const RegionStats st = region_stats(labeling, slice);
  const int m = slice.modalities();
  g.fg = Matrix(g.n, m);
  g.fp = Matrix(g.n, 2);
  const double inv_x = W > 1 ? 1.0 / (W - 1) : 0.0;
  const double inv_y = H > 1 ? 1.0 / (H - 1) : 0.0;
  for (int r = 0; r < g.n; ++r) {
    for (int mod = 0; mod < m; ++mod) g.fg(r, mod) = st.mean_intensity[r][mod];
    g.fp(r, 0) = st.mean_x[r] * inv_x;
    g.fp(r, 1) = st.mean_y[r] * inv_y;
  }
  return g;
}

Matrix node_input_features(const RegionGraph& graph) {
  Matrix x(graph.n, graph.fg.cols + 2);
  for (int r = 0; r < graph.n; ++r) {
    for (int c = 0; c < graph.fg.cols; ++c) x(r, c) = graph.fg(r, c);
    x(r, graph.fg.cols) = graph.fp(r, 0);
    x(r, graph.fg.cols + 1) = graph.fp(r, 1);
  }
  return x;
}

std::string RegionGraph::to_json() const {
  nlohmann::ordered_json j;
  j["n"] = n;
  auto edges_json = nlohmann::ordered_json::array();
  for (auto [a, b] : edges) edges_json.push_back({a, b});
  j["edges"] = std::move(edges_json);
  auto matrix_json = [](const Matrix& m) {
    auto rows = nlohmann::ordered_json::array();
    for (int r = 0; r < m.rows; ++r) {
      auto row = nlohmann::ordered_json::array();
      for (int c = 0; c < m.cols; ++c) row.push_back(m(r, c));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  j["F_g"] = matrix_json(fg);
  j["F_p"] = matrix_json(fp);
  return j.dump(2);
}

RegionGraph RegionGraph::from_json(const std::string& text) {
  RegionGraph g;
  try {
    auto j = nlohmann::json::parse(text);
    g.n = j.at("n").get<int>();
    if (g.n <= 0) throw ValidationError("graph must have at least one node");
    std::set<std::pair<int, int>> edge_set;
    for (const auto& e : j.at("edges")) {
      int a = e.at(0).get<int>(), b = e.at(1).get<int>();
      if (a == b || a < 0 || b < 0 || a >= g.n || b >= g.n)
        throw ValidationError("invalid edge in graph JSON");
      edge_set.emplace(std::min(a, b), std::max(a, b));
    }
    g.edges.assign(edge_set.begin(), edge_set.end());
    g.neighbors.assign(g.n, {});
    for (auto [a, b] : g.edges) {
      g.neighbors[a].push_back(b);
      g.neighbors[b].push_back(a);
    }
    for (auto& nb : g.neighbors) std::sort(nb.begin(), nb.end());
    auto read_matrix = [&](const char* key, int expect_cols) {
      const auto& rows = j.at(key);
      if (static_cast<int>(rows.size()) != g.n)
        throw ValidationError(std::string(key) + " row count mismatch");
      int cols = rows.empty() ? 0 : static_cast<int>(rows[0].size());
      if (expect_cols > 0 && cols != expect_cols)
        throw ValidationError(std::string(key) + " column count mismatch");
      Matrix m(g.n, cols);
      for (int r = 0; r < g.n; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = rows[r][c].get<double>();
      return m;
    };
    g.fg = read_matrix("F_g", -1);
    g.fp = read_matrix("F_p", 2);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid graph JSON: ") + e.what());
  }
  return g;
}

}  // namespace gnnseg
