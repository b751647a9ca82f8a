#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "gnnseg/graph.hpp"
#include "gnnseg/image.hpp"
#include "gnnseg/metrics.hpp"
#include "gnnseg/neural.hpp"
#include "gnnseg/superpixel.hpp"

namespace gnnseg {

struct ClassifierConfig {
  std::vector<int> hidden_widths{64, 32};
  bool frozen = false;  // when set, only the structural model trains
};

// Architecture configuration. Defaults follow the reference wiring: two
// stream FCNs (20, 100) with width-100 self-interactions, a 2-layer
// 5-head GAT with per-head widths (500, 10) averaged after each layer, a
// width-10 self-interaction, mutual interaction between the concatenated
// streams (200) and the graph embedding (10), and a final (100, 100, 50, 1)
// FCN producing one structural scalar per superpixel.
struct GnnSegConfig {
  int modalities = 2;
  std::vector<int> gray_fcn_widths{20, 100};
  std::vector<int> pos_fcn_widths{20, 100};
  int stream_self_width = 100;
  std::string gnn_kind = "gat";  // "gat" or "gcn"
  std::vector<int> gnn_widths{500, 10};
  int heads = 5;
  std::vector<std::string> gat_combine{"average", "average"};
  int gnn_self_width = 10;
  std::array<int, 2> mutual_widths{200, 10};
  std::vector<int> final_fcn_widths{100, 100, 50, 1};
  SnicParams superpixel{};
  ClassifierConfig classifier{};

  int gnn_input_width() const { return modalities + 2; }
  int gnn_output_width() const;
  int classifier_input_width() const { return 9 * (modalities + 1); }

  void validate() const;
  std::string to_json() const;
  static GnnSegConfig from_json(const std::string& text);
};

// The full parameter set: stream FCNs, GNN stack, interaction modules,
// final FCN, and the per-pixel classifier MLP. All shape checking happens
// at construction.
class GnnSegModel {
 public:
  GnnSegModel() = default;
  GnnSegModel(const GnnSegConfig& cfg, std::uint64_t init_seed);

  const GnnSegConfig& config() const { return cfg_; }
  long step() const { return step_; }

  struct ParamRef {
    std::string name;
    Matrix* value;
  };
  std::vector<ParamRef> structural_parameters();
  std::vector<ParamRef> classifier_parameters();
  std::vector<ParamRef> parameters();  // structural then classifier

  // exact trainable scalar counts: (structural, classifier)
  std::pair<std::size_t, std::size_t> count_parameters() const;

  // Streams -> interactions -> final FCN. Returns the n x 1 node feature.
  Tape::Id structural_forward(Tape& t, const RegionGraph& graph) const;
  Matrix structural_values(const RegionGraph& graph) const;

  // logits for a P x 9(m+1) window matrix
  Tape::Id classifier_logits(Tape& t, Tape::Id windows) const;

  void save(const std::string& path) const;
  static GnnSegModel load(const std::string& path);

  void set_step(long s) { step_ = s; }

 private:
  template <typename Self, typename Fn>
  static void visit_structural(Self& self, Fn&& fn);
  template <typename Self, typename Fn>
  static void visit_classifier(Self& self, Fn&& fn);

  GnnSegConfig cfg_;
  long step_ = 0;

  std::vector<DenseLayer> fcn_gray_, fcn_pos_;
  DenseLayer self_gray_, self_pos_, self_gnn_;
  std::vector<GatLayer> gat_;
  std::vector<GcnLayer> gcn_;
  DenseLayer mutual_fcn1_, mutual_fcn2_;
  std::vector<DenseLayer> final_fcn_;
  std::vector<DenseLayer> classifier_;
};

// I'[p] = node_values[region_of[p]]
std::vector<double> reconstruct_slice(const SuperpixelLabeling& labeling,
                                      const Matrix& node_values);

// Clamped 3x3 neighbor indices, pixel-major then offset; length is 9*W*H.
std::vector<int> window_neighbor_indices(int width, int height);

// Channel-stack [modalities | normalized I'] -> per-pixel argmax over the
// classifier logits. Ties resolve to the lower class id. The slice must
// already be normalized.
LabelMask classify_pixels(const GnnSegModel& model, const Slice& slice,
                          const std::vector<double>& iprime);

struct InferResult {
  LabelMask mask;
  std::vector<double> iprime;         // raw reconstructed structural channel
  SuperpixelLabeling labeling;
};

// Full inference chain: normalize, superpixels, graph, structural forward,
// reconstruction, pixel classification.
InferResult infer(const GnnSegModel& model, const Slice& slice);

struct TrainSample {
  Slice slice;
  LabelMask mask;
};

struct TrainOptions {
  int epochs = 50;
  double lr = 1e-3;
};

struct TrainResult {
  std::vector<double> loss_trace;  // mean pixel cross-entropy per epoch
};

// Joint training of the structural model and classifier with Adam, one
// slice per optimizer step. Deterministic: a model built from the same seed
// and the same dataset reproduces the trace bit for bit.
TrainResult train(GnnSegModel& model, const std::vector<TrainSample>& dataset,
                  const TrainOptions& opts);

}  // namespace gnnseg
