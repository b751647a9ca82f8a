#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "gnnseg/graph.hpp"
#include "gnnseg/matrix.hpp"
#include "gnnseg/rng.hpp"

namespace gnnseg {

enum class Act { identity, relu, elu, leaky_relu, sigmoid };

inline constexpr double kLeakyAlpha = 0.2;

double activate_scalar(Act act, double x);

Act act_from_string(const std::string& s);
std::string act_to_string(Act act);

// Affine layer, weights in x out, bias 1 x out.
struct DenseLayer {
  Matrix W;
  Matrix b;
  Act act = Act::elu;

  int in() const { return W.rows; }
  int out() const { return W.cols; }
  std::size_t param_count() const { return W.size() + b.size(); }

  static DenseLayer glorot(int in, int out, Act act, Rng& rng);
};

enum class Combine { concat, average };

Combine combine_from_string(const std::string& s);
std::string combine_to_string(Combine c);

// One attention head: scaling matrix W (p x q) and attention vector a (2q x 1)
// applied to the concatenated pair of transformed node features.
struct GatHead {
  Matrix W;
  Matrix a;
};

// Multi-head graph attention layer. Every head shares the input width p and
// the per-head output width q; combine=concat gives k*q output columns,
// combine=average gives q.
struct GatLayer {
  std::vector<GatHead> heads;
  Combine combine = Combine::average;

  int in() const { return heads.empty() ? 0 : heads[0].W.rows; }
  int head_width() const { return heads.empty() ? 0 : heads[0].W.cols; }
  int out_width() const {
    return combine == Combine::concat ? head_width() * static_cast<int>(heads.size())
                                      : head_width();
  }
  std::size_t param_count() const;

  static GatLayer glorot(int in, int q, int heads, Combine combine, Rng& rng);
};

// Graph convolution with symmetric normalized adjacency (self-loops added)
// and ReLU.
struct GcnLayer {
  Matrix W;

  int in() const { return W.rows; }
  int out() const { return W.cols; }
  std::size_t param_count() const { return W.size(); }

  static GcnLayer glorot(int in, int out, Rng& rng);
};

// Closed neighborhoods in CSR form: directed attention edges (i -> j) with
// j in neighbors(i) plus the self-loop, node-major, j ascending. One shared
// instance serves every head and layer on the same graph.
struct AttentionEdges {
  int n = 0;
  std::vector<int> center;
  std::vector<int> nbr;
  std::vector<int> offset;  // size n+1

  int edge_count() const { return static_cast<int>(center.size()); }
  static AttentionEdges from_graph(const RegionGraph& g);
};

// Reverse-mode tape over matrices. Operations record their backward pass as
// closures; backward() accumulates exact gradients into every node, and
// parameter leaves can be read back by address. Every node value is checked
// for NaN/Inf when created, and every gradient when propagated, so a
// non-finite intermediate fails fast with the offending label.
class Tape {
 public:
  using Id = int;

  // leaf that needs no gradient readback
  Id constant(Matrix v, std::string label = "");
  // leaf bound to an external parameter; duplicate binds return the same node
  Id param(const Matrix& p, std::string label = "");

  Id matmul(Id a, Id b);
  Id add(Id a, Id b);
  Id add_row_bias(Id a, Id bias);
  Id activate(Id a, Act act);
  Id concat_cols(Id a, Id b);
  Id scale(Id a, double factor);
  Id mul_elem(Id a, Id b);
  Id sum_all(Id a);  // 1x1

  // raw attention logits, one per directed edge:
  // s_e = [r_center | r_nbr] . a  with a of shape 2q x 1
  Id edge_scores(Id r, Id a, std::shared_ptr<const AttentionEdges> edges);
  // softmax over each node's closed neighborhood
  Id segment_softmax(Id scores, std::shared_ptr<const AttentionEdges> edges);
  // out[i,:] = sum over e in segment(i) of theta_e * r[nbr_e,:]
  Id attention_combine(Id theta, Id r, std::shared_ptr<const AttentionEdges> edges);

  // out[r,c] = col[idx[r*cols+c], 0]; backward scatter-adds
  Id window_gather(Id col, std::shared_ptr<const std::vector<int>> idx, int rows, int cols);
  // column vector min-max scaled to [0,1]; a constant column maps to zeros
  Id minmax_normalize(Id col);
  // mean over rows of softmax cross-entropy against integer targets
  Id mean_cross_entropy(Id logits, std::shared_ptr<const std::vector<std::uint8_t>> targets);

  // root must be 1x1; call once per tape
  void backward(Id root);

  const Matrix& value(Id id) const { return nodes_[id].val; }
  const Matrix& grad(Id id) const { return nodes_[id].grad; }
  // gradient of a bound parameter, zeros if it never entered the graph
  Matrix grad_of(const Matrix& p) const;

  void set_scope(std::string s) { scope_ = std::move(s); }
  int node_count() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Matrix val;
    Matrix grad;
    std::string label;
    std::function<void(Tape&)> back;  // empty for leaves
  };

  Id push(Matrix val, std::function<void(Tape&)> back, const std::string& op);
  const Matrix& val_at(Id id) const { return nodes_[id].val; }
  Matrix& grad_at(Id id) { return nodes_[id].grad; }

  std::vector<Node> nodes_;
  std::unordered_map<const Matrix*, Id> params_;
  std::string scope_;
  bool ran_backward_ = false;
  Id ran_backward_node_ = -1;  // node whose backward closure is executing
};

// x -> act(x W + b)
Tape::Id dense_forward(Tape& t, const DenseLayer& layer, Tape::Id x, const std::string& name);
Tape::Id fcn_forward(Tape& t, const std::vector<DenseLayer>& layers, Tape::Id x,
                     const std::string& name);

// Multi-head attention per head: r = h W; logits = LeakyReLU([r_i|r_j] a)
// softmax-normalized over closed neighborhoods; out = ELU(sum theta r).
// theta_out, when given, receives the per-head attention nodes.
Tape::Id gat_forward(Tape& t, const GatLayer& layer, Tape::Id h, const AttentionEdges& edges,
                     const std::string& name, std::vector<Tape::Id>* theta_out = nullptr);

// Dense D^-1/2 (A+I) D^-1/2 for the graph.
Matrix gcn_propagation(const RegionGraph& g);
Tape::Id gcn_forward(Tape& t, const GcnLayer& layer, Tape::Id h, const RegionGraph& g,
                     const std::string& name);

// o + fcn(o); the fcn must preserve width
Tape::Id self_interaction(Tape& t, Tape::Id o, const DenseLayer& fcn, const std::string& name);
// cat(fcn1(o2) + o1, fcn2(o1) + o2)
Tape::Id mutual_interaction(Tape& t, Tape::Id o1, Tape::Id o2, const DenseLayer& fcn1,
                            const DenseLayer& fcn2, const std::string& name);

// Bias-corrected Adam. Moment buffers are lazily shaped on first use.
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
};

void adam_step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads,
               AdamState& state);

}  // namespace gnnseg
