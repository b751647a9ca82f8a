#pragma once

// Test-side reference implementations, written independently of the library
// internals they check: plain loops over nested vectors and std::set
// arithmetic. They share only the stored weights and the documented
// definitions with the production code.

#include <functional>
#include <set>
#include <utility>
#include <vector>

#include "gnnseg/graph.hpp"
#include "gnnseg/image.hpp"
#include "gnnseg/metrics.hpp"
#include "gnnseg/neural.hpp"
#include "gnnseg/pipeline.hpp"
#include "gnnseg/rng.hpp"

namespace oracle {

using Rows = std::vector<std::vector<double>>;

Rows to_rows(const gnnseg::Matrix& m);
gnnseg::Matrix to_matrix(const Rows& rows);

double ref_activate(gnnseg::Act act, double x);

// scalar-loop dense stack: out = act(x W + b) chained
Rows ref_fcn(const std::vector<gnnseg::DenseLayer>& layers, const Rows& x);

// scalar-loop multi-head attention layer over closed neighborhoods
Rows ref_gat(const gnnseg::GatLayer& layer, const Rows& h,
             const std::vector<std::vector<int>>& closed_nbrs);

// dense normalized-adjacency propagation, built from scratch
Rows ref_gcn(const gnnseg::GcnLayer& layer, const Rows& h, const gnnseg::RegionGraph& g);

Rows ref_self_interaction(const Rows& o, const gnnseg::DenseLayer& fcn);
Rows ref_mutual_interaction(const Rows& o1, const Rows& o2, const gnnseg::DenseLayer& fcn1,
                            const gnnseg::DenseLayer& fcn2);

// full structural forward recomputed from the model's named parameters
std::vector<double> ref_structural(gnnseg::GnnSegModel& model, const gnnseg::RegionGraph& g);

// closed, ascending neighbor lists straight from the edge list
std::vector<std::vector<int>> closed_neighborhoods(const gnnseg::RegionGraph& g);

// ---------------------------------------------------------------------------
// graphs

// random spanning tree plus extra edges; features uniform in [0,1]
gnnseg::RegionGraph random_connected_graph(int n, int modalities, gnnseg::Rng& rng,
                                           double extra_edge_prob = 0.35);

// every connected undirected graph on n labeled nodes
std::vector<std::vector<std::pair<int, int>>> all_connected_edge_sets(int n);

gnnseg::RegionGraph graph_from_edges(int n, const std::vector<std::pair<int, int>>& edges,
                                     int modalities, gnnseg::Rng& rng);

// ---------------------------------------------------------------------------
// superpixels

// nearest ideal grid-seed center, ties to the lower region id; the expected
// SNIC result on a constant image
std::vector<int> voronoi_blocks(int width, int height, int target_regions);

// ---------------------------------------------------------------------------
// metrics

std::set<std::pair<int, int>> mask_points(const gnnseg::BinaryMask& m);
double ref_tp(const gnnseg::BinaryMask& pred, const gnnseg::BinaryMask& truth);
double ref_dice(const gnnseg::BinaryMask& pred, const gnnseg::BinaryMask& truth);
std::set<std::pair<int, int>> ref_boundary(const gnnseg::BinaryMask& m);
double ref_apd(const std::set<std::pair<int, int>>& pred_b,
               const std::set<std::pair<int, int>>& truth_b);

// ---------------------------------------------------------------------------
// phantoms

// per-class pixel counts by direct rasterization of the ring geometry
std::array<std::int64_t, 4> ring_histogram(int size, const std::array<double, 3>& radii);

// ---------------------------------------------------------------------------
// gradients

// Builds the forward once for analytic gradients, then re-evaluates the loss
// under central-difference perturbations of every parameter entry.
// Relative error uses max(1, |analytic|, |numeric|) in the denominator.
double gradcheck(const std::function<gnnseg::Tape::Id(gnnseg::Tape&)>& build,
                 const std::vector<gnnseg::Matrix*>& params, double eps = 1e-5);

gnnseg::Matrix random_matrix(int rows, int cols, gnnseg::Rng& rng, double lo = -1.0,
                             double hi = 1.0);

}  // namespace oracle
