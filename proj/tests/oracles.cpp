#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>

namespace oracle {

using gnnseg::Act;
using gnnseg::Combine;
using gnnseg::Matrix;

Rows to_rows(const Matrix& m) {
  Rows rows(m.rows, std::vector<double>(m.cols));
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) rows[r][c] = m(r, c);
  return rows;
}

Matrix to_matrix(const Rows& rows) { return Matrix::from_rows(rows); }

double ref_activate(Act act, double x) {
  switch (act) {
    case Act::identity: return x;
    case Act::relu: return x > 0 ? x : 0.0;
    case Act::elu: return x > 0 ? x : std::exp(x) - 1.0;
    case Act::leaky_relu: return x > 0 ? x : 0.2 * x;
    case Act::sigmoid: return 1.0 / (1.0 + std::exp(-x));
  }
  return x;
}

Rows ref_fcn(const std::vector<gnnseg::DenseLayer>& layers, const Rows& x) {
  Rows h = x;
  for (const auto& layer : layers) {
    Rows next(h.size(), std::vector<double>(layer.out(), 0.0));
    for (std::size_t r = 0; r < h.size(); ++r) {
      for (int j = 0; j < layer.out(); ++j) {
        double sum = layer.b(0, j);
        for (int k = 0; k < layer.in(); ++k) sum += h[r][k] * layer.W(k, j);
        next[r][j] = ref_activate(layer.act, sum);
      }
    }
    h = std::move(next);
  }
  return h;
}

Rows ref_gat(const gnnseg::GatLayer& layer, const Rows& h,
             const std::vector<std::vector<int>>& closed_nbrs) {
  const int n = static_cast<int>(h.size());
  const int p = static_cast<int>(h[0].size());
  const int q = layer.head_width();
  std::vector<Rows> head_outs;
  for (const auto& head : layer.heads) {
    // r = h W
    Rows r(n, std::vector<double>(q, 0.0));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < q; ++j)
        for (int k = 0; k < p; ++k) r[i][j] += h[i][k] * head.W(k, j);
    Rows out(n, std::vector<double>(q, 0.0));
    for (int i = 0; i < n; ++i) {
      const auto& nbrs = closed_nbrs[i];
      std::vector<double> logits(nbrs.size());
      for (std::size_t e = 0; e < nbrs.size(); ++e) {
        double s = 0;
        for (int c = 0; c < q; ++c)
          s += r[i][c] * head.a(c, 0) + r[nbrs[e]][c] * head.a(q + c, 0);
        logits[e] = ref_activate(Act::leaky_relu, s);
      }
      double mx = *std::max_element(logits.begin(), logits.end());
      double denom = 0;
      std::vector<double> theta(nbrs.size());
      for (std::size_t e = 0; e < nbrs.size(); ++e) {
        theta[e] = std::exp(logits[e] - mx);
        denom += theta[e];
      }
      for (std::size_t e = 0; e < nbrs.size(); ++e) theta[e] /= denom;
      for (int c = 0; c < q; ++c) {
        double sum = 0;
        for (std::size_t e = 0; e < nbrs.size(); ++e) sum += theta[e] * r[nbrs[e]][c];
        out[i][c] = ref_activate(Act::elu, sum);
      }
    }
    head_outs.push_back(std::move(out));
  }
  if (layer.combine == Combine::concat) {
    Rows out(n);
    for (int i = 0; i < n; ++i)
      for (const auto& ho : head_outs)
        out[i].insert(out[i].end(), ho[i].begin(), ho[i].end());
    return out;
  }
  Rows out(n, std::vector<double>(q, 0.0));
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < q; ++c) {
      for (const auto& ho : head_outs) out[i][c] += ho[i][c];
      out[i][c] /= static_cast<double>(head_outs.size());
    }
  return out;
}

Rows ref_gcn(const gnnseg::GcnLayer& layer, const Rows& h, const gnnseg::RegionGraph& g) {
  const int n = g.n;
  // build A + I and the degree normalization from the edge list alone
  Rows adj(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) adj[i][i] = 1.0;
  for (auto [i, j] : g.edges) adj[i][j] = adj[j][i] = 1.0;
  std::vector<double> deg(n, 0.0);
  for (int i = 0; i < n; ++i) deg[i] = std::accumulate(adj[i].begin(), adj[i].end(), 0.0);
  Rows prop(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) prop[i][j] = adj[i][j] / std::sqrt(deg[i] * deg[j]);

  const int p = static_cast<int>(h[0].size());
  const int q = layer.out();
  Rows hw(n, std::vector<double>(q, 0.0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < q; ++j)
      for (int k = 0; k < p; ++k) hw[i][j] += h[i][k] * layer.W(k, j);
  Rows out(n, std::vector<double>(q, 0.0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < q; ++j) {
      double sum = 0;
      for (int k = 0; k < n; ++k) sum += prop[i][k] * hw[k][j];
      out[i][j] = ref_activate(Act::relu, sum);
    }
  return out;
}

Rows ref_self_interaction(const Rows& o, const gnnseg::DenseLayer& fcn) {
  Rows fx = ref_fcn({fcn}, o);
  Rows out = o;
  for (std::size_t r = 0; r < out.size(); ++r)
    for (std::size_t c = 0; c < out[r].size(); ++c) out[r][c] += fx[r][c];
  return out;
}

Rows ref_mutual_interaction(const Rows& o1, const Rows& o2, const gnnseg::DenseLayer& fcn1,
                            const gnnseg::DenseLayer& fcn2) {
  Rows a = ref_fcn({fcn1}, o2);
  Rows b = ref_fcn({fcn2}, o1);
  Rows out(o1.size());
  for (std::size_t r = 0; r < o1.size(); ++r) {
    out[r] = o1[r];
    for (std::size_t c = 0; c < o1[r].size(); ++c) out[r][c] += a[r][c];
    for (std::size_t c = 0; c < o2[r].size(); ++c) out[r].push_back(o2[r][c] + b[r][c]);
  }
  return out;
}

std::vector<std::vector<int>> closed_neighborhoods(const gnnseg::RegionGraph& g) {
  std::vector<std::vector<int>> closed(g.n);
  for (int i = 0; i < g.n; ++i) closed[i].push_back(i);
  for (auto [i, j] : g.edges) {
    closed[i].push_back(j);
    closed[j].push_back(i);
  }
  for (auto& nb : closed) std::sort(nb.begin(), nb.end());
  return closed;
}

std::vector<double> ref_structural(gnnseg::GnnSegModel& model, const gnnseg::RegionGraph& g) {
  const auto& cfg = model.config();
  std::map<std::string, const Matrix*> params;
  for (const auto& p : model.parameters()) params[p.name] = p.value;
  auto dense = [&](const std::string& name, Act act) {
    gnnseg::DenseLayer l;
    l.W = *params.at(name + ".W");
    l.b = *params.at(name + ".b");
    l.act = act;
    return l;
  };
  auto fcn_stack = [&](const std::string& base, std::size_t count, Act last) {
    std::vector<gnnseg::DenseLayer> layers;
    for (std::size_t i = 0; i < count; ++i)
      layers.push_back(dense(base + "." + std::to_string(i),
                             i + 1 == count ? last : Act::elu));
    return layers;
  };

  Rows fg = to_rows(g.fg), fp = to_rows(g.fp);
  Rows stream_gray = ref_self_interaction(
      ref_fcn(fcn_stack("fcn_gray", cfg.gray_fcn_widths.size(), Act::elu), fg),
      dense("self_gray", Act::elu));
  Rows stream_pos = ref_self_interaction(
      ref_fcn(fcn_stack("fcn_pos", cfg.pos_fcn_widths.size(), Act::elu), fp),
      dense("self_pos", Act::elu));

  Rows h = to_rows(gnnseg::node_input_features(g));
  const auto closed = closed_neighborhoods(g);
  if (cfg.gnn_kind == "gat") {
    for (std::size_t i = 0; i < cfg.gnn_widths.size(); ++i) {
      gnnseg::GatLayer layer;
      layer.combine = gnnseg::combine_from_string(cfg.gat_combine[i]);
      for (int k = 0; k < cfg.heads; ++k) {
        const std::string base = "gat." + std::to_string(i) + ".head" + std::to_string(k);
        layer.heads.push_back({*params.at(base + ".W"), *params.at(base + ".a")});
      }
      h = ref_gat(layer, h, closed);
    }
  } else {
    for (std::size_t i = 0; i < cfg.gnn_widths.size(); ++i) {
      gnnseg::GcnLayer layer;
      layer.W = *params.at("gcn." + std::to_string(i) + ".W");
      h = ref_gcn(layer, h, g);
    }
  }
  Rows stream_gnn = ref_self_interaction(h, dense("self_gnn", Act::elu));

  Rows streams(stream_gray.size());
  for (std::size_t r = 0; r < streams.size(); ++r) {
    streams[r] = stream_gray[r];
    streams[r].insert(streams[r].end(), stream_pos[r].begin(), stream_pos[r].end());
  }
  Rows merged = ref_mutual_interaction(streams, stream_gnn, dense("mutual.fcn1", Act::elu),
                                       dense("mutual.fcn2", Act::elu));
  Rows out = ref_fcn(fcn_stack("final_fcn", cfg.final_fcn_widths.size(), Act::identity),
                     merged);
  std::vector<double> values(out.size());
  for (std::size_t r = 0; r < out.size(); ++r) values[r] = out[r][0];
  return values;
}

// ---------------------------------------------------------------------------
// graphs

gnnseg::RegionGraph random_connected_graph(int n, int modalities, gnnseg::Rng& rng,
                                           double extra_edge_prob) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 1; i < n; ++i) {
    int j = static_cast<int>(rng.index(i));
    edges.emplace_back(j, i);
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.uniform01() < extra_edge_prob) edges.emplace_back(i, j);
  return graph_from_edges(n, edges, modalities, rng);
}

std::vector<std::vector<std::pair<int, int>>> all_connected_edge_sets(int n) {
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  std::vector<std::vector<std::pair<int, int>>> result;
  const int total = 1 << pairs.size();
  std::vector<int> parent(n);
  for (int mask = 0; mask < total; ++mask) {
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    int components = n;
    std::vector<std::pair<int, int>> edges;
    for (std::size_t e = 0; e < pairs.size(); ++e) {
      if (!(mask & (1 << e))) continue;
      edges.push_back(pairs[e]);
      int a = find(pairs[e].first), b = find(pairs[e].second);
      if (a != b) {
        parent[a] = b;
        --components;
      }
    }
    if (components == 1) result.push_back(std::move(edges));
  }
  return result;
}

gnnseg::RegionGraph graph_from_edges(int n, const std::vector<std::pair<int, int>>& edges,
                                     int modalities, gnnseg::Rng& rng) {
  gnnseg::RegionGraph g;
  g.n = n;
  std::set<std::pair<int, int>> dedup;
  for (auto [a, b] : edges) dedup.emplace(std::min(a, b), std::max(a, b));
  g.edges.assign(dedup.begin(), dedup.end());
  g.neighbors.assign(n, {});
  for (auto [a, b] : g.edges) {
    g.neighbors[a].push_back(b);
    g.neighbors[b].push_back(a);
  }
  for (auto& nb : g.neighbors) std::sort(nb.begin(), nb.end());
  g.fg = random_matrix(n, modalities, rng, 0.0, 1.0);
  g.fp = random_matrix(n, 2, rng, 0.0, 1.0);
  return g;
}

// ---------------------------------------------------------------------------
// superpixels

std::vector<int> voronoi_blocks(int width, int height, int target_regions) {
  const int nx = std::clamp(
      static_cast<int>(std::ceil(std::sqrt(static_cast<double>(target_regions) * width / height))),
      1, width);
  const int ny = std::clamp(static_cast<int>(std::ceil(static_cast<double>(target_regions) / nx)),
                            1, height);
  std::vector<double> cx(nx), cy(ny);
  for (int i = 0; i < nx; ++i) cx[i] = (i + 0.5) * width / nx - 0.5;
  for (int j = 0; j < ny; ++j) cy[j] = (j + 0.5) * height / ny - 0.5;
  std::vector<int> labels(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      int best = -1;
      double best_d = 0;
      for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
          const double d = (x - cx[i]) * (x - cx[i]) + (y - cy[j]) * (y - cy[j]);
          const int region = j * nx + i;
          if (best < 0 || d < best_d) {  // ties keep the lower region id
            best = region;
            best_d = d;
          }
        }
      }
      labels[static_cast<std::size_t>(y) * width + x] = best;
    }
  }
  return labels;
}

// ---------------------------------------------------------------------------
// metrics

std::set<std::pair<int, int>> mask_points(const gnnseg::BinaryMask& m) {
  std::set<std::pair<int, int>> pts;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x)
      if (m.at(x, y)) pts.emplace(x, y);
  return pts;
}

namespace {

std::set<std::pair<int, int>> set_intersection(const std::set<std::pair<int, int>>& a,
                                               const std::set<std::pair<int, int>>& b) {
  std::set<std::pair<int, int>> out;
  for (const auto& p : a)
    if (b.count(p)) out.insert(p);
  return out;
}

}  // namespace

double ref_tp(const gnnseg::BinaryMask& pred, const gnnseg::BinaryMask& truth) {
  const auto p = mask_points(pred), t = mask_points(truth);
  return static_cast<double>(set_intersection(p, t).size()) / static_cast<double>(t.size());
}

double ref_dice(const gnnseg::BinaryMask& pred, const gnnseg::BinaryMask& truth) {
  const auto p = mask_points(pred), t = mask_points(truth);
  return static_cast<double>(set_intersection(p, t).size()) /
         ((static_cast<double>(t.size()) + static_cast<double>(p.size())) / 2.0);
}

std::set<std::pair<int, int>> ref_boundary(const gnnseg::BinaryMask& m) {
  const auto pts = mask_points(m);
  std::set<std::pair<int, int>> out;
  for (const auto& [x, y] : pts) {
    if (x == 0 || y == 0 || x == m.width - 1 || y == m.height - 1) {
      out.emplace(x, y);
      continue;
    }
    if (!pts.count({x - 1, y}) || !pts.count({x + 1, y}) || !pts.count({x, y - 1}) ||
        !pts.count({x, y + 1}))
      out.emplace(x, y);
  }
  return out;
}

double ref_apd(const std::set<std::pair<int, int>>& pred_b,
               const std::set<std::pair<int, int>>& truth_b) {
  double total = 0;
  for (const auto& [px, py] : pred_b) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [tx, ty] : truth_b)
      best = std::min(best, std::hypot(px - tx, py - ty));
    total += best;
  }
  return total / static_cast<double>(pred_b.size());
}

// ---------------------------------------------------------------------------
// phantoms

std::array<std::int64_t, 4> ring_histogram(int size, const std::array<double, 3>& radii) {
  std::array<std::int64_t, 4> counts{0, 0, 0, 0};
  const double c = (size - 1) / 2.0;
  const double half = size / 2.0;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double r = std::sqrt((x - c) * (x - c) + (y - c) * (y - c));
      int cls = 0;
      if (r <= radii[0] * half) cls = 3;
      else if (r <= radii[1] * half) cls = 2;
      else if (r <= radii[2] * half) cls = 1;
      ++counts[cls];
    }
  }
  return counts;
}

// ---------------------------------------------------------------------------
// gradients

double gradcheck(const std::function<gnnseg::Tape::Id(gnnseg::Tape&)>& build,
                 const std::vector<gnnseg::Matrix*>& params, double eps) {
  std::vector<Matrix> analytic;
  {
    gnnseg::Tape t;
    gnnseg::Tape::Id loss = build(t);
    t.backward(loss);
    for (const Matrix* p : params) analytic.push_back(t.grad_of(*p));
  }
  auto eval = [&build]() {
    gnnseg::Tape t;
    return t.value(build(t)).v[0];
  };
  double max_rel = 0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Matrix& p = *params[pi];
    for (std::size_t k = 0; k < p.v.size(); ++k) {
      const double saved = p.v[k];
      p.v[k] = saved + eps;
      const double up = eval();
      p.v[k] = saved - eps;
      const double down = eval();
      p.v[k] = saved;
      const double fd = (up - down) / (2.0 * eps);
      const double ad = analytic[pi].v[k];
      const double rel = std::abs(ad - fd) / std::max({1.0, std::abs(ad), std::abs(fd)});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

gnnseg::Matrix random_matrix(int rows, int cols, gnnseg::Rng& rng, double lo, double hi) {
  Matrix m(rows, cols);
  for (double& x : m.v) x = rng.uniform(lo, hi);
  return m;
}

}  // namespace oracle
