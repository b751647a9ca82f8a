#include "gnnseg/neural.hpp"

#include <algorithm>
#include <cmath>

#include "gnnseg/errors.hpp"

namespace gnnseg {

double activate_scalar(Act act, double x) {
  switch (act) {
    case Act::identity: return x;
    case Act::relu: return x > 0 ? x : 0.0;
    case Act::elu: return x > 0 ? x : std::expm1(x);
    case Act::leaky_relu: return x > 0 ? x : kLeakyAlpha * x;
    case Act::sigmoid: return 1.0 / (1.0 + std::exp(-x));
  }
  return x;
}

namespace {

double activate_grad(Act act, double x, double fx) {
  switch (act) {
    case Act::identity: return 1.0;
    case Act::relu: return x > 0 ? 1.0 : 0.0;
    case Act::elu: return x > 0 ? 1.0 : fx + 1.0;
    case Act::leaky_relu: return x > 0 ? 1.0 : kLeakyAlpha;
    case Act::sigmoid: return fx * (1.0 - fx);
  }
  return 1.0;
}

// C += A * B
void matmul_acc(const Matrix& A, const Matrix& B, Matrix& C) {
  for (int i = 0; i < A.rows; ++i) {
    const double* arow = &A.v[static_cast<std::size_t>(i) * A.cols];
    double* crow = &C.v[static_cast<std::size_t>(i) * C.cols];
    for (int k = 0; k < A.cols; ++k) {
      const double a = arow[k];
      if (a == 0.0) continue;
      const double* brow = &B.v[static_cast<std::size_t>(k) * B.cols];
      for (int j = 0; j < B.cols; ++j) crow[j] += a * brow[j];
    }
  }
}

// C += A * B^T
void matmul_nt_acc(const Matrix& A, const Matrix& B, Matrix& C) {
  for (int i = 0; i < A.rows; ++i) {
    const double* arow = &A.v[static_cast<std::size_t>(i) * A.cols];
    double* crow = &C.v[static_cast<std::size_t>(i) * C.cols];
    for (int j = 0; j < B.rows; ++j) {
      const double* brow = &B.v[static_cast<std::size_t>(j) * B.cols];
      double sum = 0;
      for (int k = 0; k < A.cols; ++k) sum += arow[k] * brow[k];
      crow[j] += sum;
    }
  }
}

// C += A^T * B
void matmul_tn_acc(const Matrix& A, const Matrix& B, Matrix& C) {
  for (int k = 0; k < A.rows; ++k) {
    const double* arow = &A.v[static_cast<std::size_t>(k) * A.cols];
    const double* brow = &B.v[static_cast<std::size_t>(k) * B.cols];
    for (int i = 0; i < A.cols; ++i) {
      const double a = arow[i];
      if (a == 0.0) continue;
      double* crow = &C.v[static_cast<std::size_t>(i) * C.cols];
      for (int j = 0; j < B.cols; ++j) crow[j] += a * brow[j];
    }
  }
}

}  // namespace

Act act_from_string(const std::string& s) {
  if (s == "identity") return Act::identity;
  if (s == "relu") return Act::relu;
  if (s == "elu") return Act::elu;
  if (s == "leaky_relu") return Act::leaky_relu;
  if (s == "sigmoid") return Act::sigmoid;
  throw ValidationError("unknown activation: " + s);
}

std::string act_to_string(Act act) {
  switch (act) {
    case Act::identity: return "identity";
    case Act::relu: return "relu";
    case Act::elu: return "elu";
    case Act::leaky_relu: return "leaky_relu";
    case Act::sigmoid: return "sigmoid";
  }
  return "identity";
}

Combine combine_from_string(const std::string& s) {
  if (s == "concat") return Combine::concat;
  if (s == "average") return Combine::average;
  throw ValidationError("unknown combine mode: " + s);
}

std::string combine_to_string(Combine c) {
  return c == Combine::concat ? "concat" : "average";
}

DenseLayer DenseLayer::glorot(int in, int out, Act act, Rng& rng) {
  if (in <= 0 || out <= 0) throw ValidationError("dense layer widths must be positive");
  DenseLayer l;
  l.W = Matrix(in, out);
  l.b = Matrix(1, out);
  l.act = act;
  const double lim = std::sqrt(6.0 / (in + out));
  for (double& w : l.W.v) w = rng.uniform(-lim, lim);
  return l;
}

std::size_t GatLayer::param_count() const {
  std::size_t c = 0;
  for (const auto& h : heads) c += h.W.size() + h.a.size();
  return c;
}

GatLayer GatLayer::glorot(int in, int q, int heads, Combine combine, Rng& rng) {
  if (in <= 0 || q <= 0 || heads <= 0)
    throw ValidationError("gat layer shape parameters must be positive");
  GatLayer l;
  l.combine = combine;
  l.heads.resize(heads);
  for (auto& h : l.heads) {
    h.W = Matrix(in, q);
    const double wlim = std::sqrt(6.0 / (in + q));
    for (double& w : h.W.v) w = rng.uniform(-wlim, wlim);
    h.a = Matrix(2 * q, 1);
    const double alim = std::sqrt(6.0 / (2 * q + 1));
    for (double& w : h.a.v) w = rng.uniform(-alim, alim);
  }
  return l;
}

GcnLayer GcnLayer::glorot(int in, int out, Rng& rng) {
  if (in <= 0 || out <= 0) throw ValidationError("gcn layer widths must be positive");
  GcnLayer l;
  l.W = Matrix(in, out);
  const double lim = std::sqrt(6.0 / (in + out));
  for (double& w : l.W.v) w = rng.uniform(-lim, lim);
  return l;
}

AttentionEdges AttentionEdges::from_graph(const RegionGraph& g) {
  AttentionEdges e;
  e.n = g.n;
  e.offset.assign(g.n + 1, 0);
  for (int i = 0; i < g.n; ++i) {
    const auto& nb = g.neighbors[i];
    auto self_pos = std::lower_bound(nb.begin(), nb.end(), i);
    for (auto it = nb.begin(); it != self_pos; ++it) {
      e.center.push_back(i);
      e.nbr.push_back(*it);
    }
    e.center.push_back(i);
    e.nbr.push_back(i);  // self loop, kept in ascending order
    for (auto it = self_pos; it != nb.end(); ++it) {
      e.center.push_back(i);
      e.nbr.push_back(*it);
    }
    e.offset[i + 1] = static_cast<int>(e.center.size());
  }
  return e;
}

// ---------------------------------------------------------------------------
// Tape

Tape::Id Tape::push(Matrix val, std::function<void(Tape&)> back, const std::string& op) {
  std::string label = scope_.empty() ? op : scope_ + ":" + op;
  val.validate_finite(label);
  Node node;
  node.grad = Matrix::zeros_like(val);
  node.val = std::move(val);
  node.label = std::move(label);
  node.back = std::move(back);
  nodes_.push_back(std::move(node));
  return static_cast<Id>(nodes_.size()) - 1;
}

Tape::Id Tape::constant(Matrix v, std::string label) {
  return push(std::move(v), nullptr, label.empty() ? "constant" : label);
}

Tape::Id Tape::param(const Matrix& p, std::string label) {
  auto it = params_.find(&p);
  if (it != params_.end()) return it->second;
  Id id = push(p, nullptr, label.empty() ? "param" : label);
  params_.emplace(&p, id);
  return id;
}

Tape::Id Tape::matmul(Id a, Id b) {
  const Matrix& A = val_at(a);
  const Matrix& B = val_at(b);
  if (A.cols != B.rows) throw ValidationError("matmul shape mismatch in " + scope_);
  Matrix out(A.rows, B.cols);
  matmul_acc(A, B, out);
  return push(std::move(out), [a, b](Tape& t) {
    Id self = t.ran_backward_node_;
    const Matrix& g = t.grad_at(self);
    matmul_nt_acc(g, t.val_at(b), t.grad_at(a));
    matmul_tn_acc(t.val_at(a), g, t.grad_at(b));
  }, "matmul");
}

Tape::Id Tape::add(Id a, Id b) {
  const Matrix& A = val_at(a);
  const Matrix& B = val_at(b);
  if (!A.same_shape(B)) throw ValidationError("add shape mismatch in " + scope_);
  Matrix out = A;
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += B.v[i];
  return push(std::move(out), [a, b](Tape& t) {
    const Matrix& g = t.grad_at(t.ran_backward_node_);
    Matrix& ga = t.grad_at(a);
    Matrix& gb = t.grad_at(b);
    for (std::size_t i = 0; i < g.v.size(); ++i) {
      ga.v[i] += g.v[i];
      gb.v[i] += g.v[i];
    }
  }, "add");
}

Tape::Id Tape::add_row_bias(Id a, Id bias) {
  const Matrix& A = val_at(a);
  const Matrix& B = val_at(bias);
  if (B.rows != 1 || B.cols != A.cols)
    throw ValidationError("bias shape mismatch in " + scope_);
  Matrix out = A;
  for (int r = 0; r < out.rows; ++r)
    for (int c = 0; c < out.cols; ++c) out(r, c) += B(0, c);
  return push(std::move(out), [a, bias](Tape& t) {
    const Matrix& g = t.grad_at(t.ran_backward_node_);
    Matrix& ga = t.grad_at(a);
    Matrix& gb = t.grad_at(bias);
    for (std::size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i];
    for (int r = 0; r < g.rows; ++r)
      for (int c = 0; c < g.cols; ++c) gb(0, c) += g(r, c);
  }, "add_row_bias");
}

Tape::Id Tape::activate(Id a, Act act) {
  const Matrix& A = val_at(a);
  Matrix out = A;
  for (double& x : out.v) x = activate_scalar(act, x);
  return push(std::move(out), [a, act](Tape& t) {
    Id self = t.ran_backward_node_;
    const Matrix& g = t.grad_at(self);
    const Matrix& x = t.val_at(a);
    const Matrix& fx = t.val_at(self);
    Matrix& ga = t.grad_at(a);
    for (std::size_t i = 0; i < g.v.size(); ++i)
      ga.v[i] += g.v[i] * activate_grad(act, x.v[i], fx.v[i]);
  }, "activate." + act_to_string(act));
}

Tape::Id Tape::concat_cols(Id a, Id b) {
  const Matrix& A = val_at(a);
  const Matrix& B = val_at(b);
  if (A.rows != B.rows) throw ValidationError("concat row mismatch in " + scope_);
  Matrix out(A.rows, A.cols + B.cols);
  for (int r = 0; r < A.rows; ++r) {
    for (int c = 0; c < A.cols; ++c) out(r, c) = A(r, c);
    for (int c = 0; c < B.cols; ++c) out(r, A.cols + c) = B(r, c);
  }
  return push(std::move(out), [a, b](Tape& t) {
    const Matrix& g = t.grad_at(t.ran_backward_node_);
    Matrix& ga = t.grad_at(a);
    Matrix& gb = t.grad_at(b);
    for (int r = 0; r < g.rows; ++r) {
      for (int c = 0; c < ga.cols; ++c) ga(r, c) += g(r, c);
      for (int c = 0; c < gb.cols; ++c) gb(r, c) += g(r, ga.cols + c);
    }
  }, "concat_cols");
}

Tape::Id Tape::scale(Id a, double factor) {
  Matrix out = val_at(a);
  for (double& x : out.v) x *= factor;
  return push(std::move(out), [a, factor](Tape& t) {
    const Matrix& g = t.grad_at(t.ran_backward_node_);
    Matrix& ga = t.grad_at(a);
    for (std::size_t i = 0; i < g.v.size(); ++i) ga.v[i] += factor * g.v[i];
  }, "scale");
}

Tape::Id Tape::mul_elem(Id a, Id b) {
  const Matrix& A = val_at(a);
  const Matrix& B = val_at(b);
  if (!A.same_shape(B)) throw ValidationError("mul_elem shape mismatch in " + scope_);
  Matrix out = A;
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] *= B.v[i];
  return push(std::move(out), [a, b](Tape& t) {
    const Matrix& g = t.grad_at(t.ran_backward_node_);
    const Matrix& A = t.val_at(a);
    const Matrix& B = t.val_at(b);
    Matrix& ga = t.grad_at(a);
    Matrix& gb = t.grad_at(b);
    for (std::size_t i = 0; i < g.v.size(); ++i) {
      ga.v[i] += g.v[i] * B.v[i];
      gb.v[i] += g.v[i] * A.v[i];
    }
  }, "mul_elem");
}

Tape::Id Tape::sum_all(Id a) {
  const Matrix& A = val_at(a);
  Matrix out(1, 1);
  for (double x : A.v) out.v[0] += x;
  return push(std::move(out), [a](Tape& t) {
    const double g = t.grad_at(t.ran_backward_node_).v[0];
    Matrix& ga = t.grad_at(a);
    for (double& x : ga.v) x += g;
  }, "sum_all");
}

Tape::Id Tape::edge_scores(Id r, Id a, std::shared_ptr<const AttentionEdges> edges) {
  const Matrix& R = val_at(r);
  const Matrix& A = val_at(a);
  const int q = R.cols;
  if (A.rows != 2 * q || A.cols != 1)
    throw ValidationError("attention vector shape mismatch in " + scope_);
  if (R.rows != edges->n) throw ValidationError("edge_scores node count mismatch in " + scope_);
  const int E = edges->edge_count();
  Matrix out(E, 1);
  for (int e = 0; e < E; ++e) {
    const double* rc = &R.v[static_cast<std::size_t>(edges->center[e]) * q];
    const double* rn = &R.v[static_cast<std::size_t>(edges->nbr[e]) * q];
    double s = 0;
    for (int c = 0; c < q; ++c) s += rc[c] * A.v[c] + rn[c] * A.v[q + c];
    out.v[e] = s;
  }
  return push(std::move(out), [r, a, edges, q](Tape& t) {
    const Matrix& g = t.grad_at(t.ran_backward_node_);
    const Matrix& R = t.val_at(r);
    const Matrix& A = t.val_at(a);
    Matrix& gR = t.grad_at(r);
    Matrix& gA = t.grad_at(a);
    for (int e = 0; e < g.rows; ++e) {
      const double ge = g.v[e];
      if (ge == 0.0) continue;
      const int ci = edges->center[e], ni = edges->nbr[e];
      const double* rc = &R.v[static_cast<std::size_t>(ci) * q];
      const double* rn = &R.v[static_cast<std::size_t>(ni) * q];
      double* grc = &gR.v[static_cast<std::size_t>(ci) * q];
      double* grn = &gR.v[static_cast<std::size_t>(ni) * q];
      for (int c = 0; c < q; ++c) {
        grc[c] += ge * A.v[c];
        grn[c] += ge * A.v[q + c];
        gA.v[c] += ge * rc[c];
        gA.v[q + c] += ge * rn[c];
      }
    }
  }, "edge_scores");
}

Tape::Id Tape::segment_softmax(Id scores, std::shared_ptr<const AttentionEdges> edges) {
  const Matrix& S = val_at(scores);
  if (S.rows != edges->edge_count() || S.cols != 1)
    throw ValidationError("segment_softmax shape mismatch in " + scope_);
  Matrix out(S.rows, 1);
  for (int i = 0; i < edges->n; ++i) {
    const int lo = edges->offset[i], hi = edges->offset[i + 1];
    double mx = S.v[lo];
    for (int e = lo + 1; e < hi; ++e) mx = std::max(mx, S.v[e]);
    double denom = 0;
    for (int e = lo; e < hi; ++e) {
      out.v[e] = std::exp(S.v[e] - mx);
      denom += out.v[e];
    }
    for (int e = lo; e < hi; ++e) out.v[e] /= denom;
  }
  return push(std::move(out), [scores, edges](Tape& t) {
    Id self = t.ran_backward_node_;
    const Matrix& g = t.grad_at(self);
    const Matrix& theta = t.val_at(self);
    Matrix& gs = t.grad_at(scores);
    for (int i = 0; i < edges->n; ++i) {
      const int lo = edges->offset[i], hi = edges->offset[i + 1];
      double dot = 0;
      for (int e = lo; e < hi; ++e) dot += g.v[e] * theta.v[e];
      for (int e = lo; e < hi; ++e) gs.v[e] += theta.v[e] * (g.v[e] - dot);
    }
  }, "segment_softmax");
}

Tape::Id Tape::attention_combine(Id theta, Id r, std::shared_ptr<const AttentionEdges> edges) {
  const Matrix& T = val_at(theta);
  const Matrix& R = val_at(r);
  if (T.rows != edges->edge_count() || T.cols != 1 || R.rows != edges->n)
    throw ValidationError("attention_combine shape mismatch in " + scope_);
  const int q = R.cols;
  Matrix out(edges->n, q);
  for (int e = 0; e < T.rows; ++e) {
    const double w = T.v[e];
    const double* rn = &R.v[static_cast<std::size_t>(edges->nbr[e]) * q];
    double* oc = &out.v[static_cast<std::size_t>(edges->center[e]) * q];
    for (int c = 0; c < q; ++c) oc[c] += w * rn[c];
  }
  return push(std::move(out), [theta, r, edges, q](Tape& t) {
    const Matrix& g = t.grad_at(t.ran_backward_node_);
    const Matrix& T = t.val_at(theta);
    const Matrix& R = t.val_at(r);
    Matrix& gT = t.grad_at(theta);
    Matrix& gR = t.grad_at(r);
    for (int e = 0; e < T.rows; ++e) {
      const int ci = edges->center[e], ni = edges->nbr[e];
      const double* gc = &g.v[static_cast<std::size_t>(ci) * q];
      const double* rn = &R.v[static_cast<std::size_t>(ni) * q];
      double* grn = &gR.v[static_cast<std::size_t>(ni) * q];
      double dot = 0;
      const double w = T.v[e];
      for (int c = 0; c < q; ++c) {
        dot += gc[c] * rn[c];
        grn[c] += w * gc[c];
      }
      gT.v[e] += dot;
    }
  }, "attention_combine");
}

Tape::Id Tape::window_gather(Id col, std::shared_ptr<const std::vector<int>> idx, int rows,
                             int cols) {
  const Matrix& C = val_at(col);
  if (C.cols != 1) throw ValidationError("window_gather expects a column vector");
  if (static_cast<std::size_t>(rows) * cols != idx->size())
    throw ValidationError("window_gather index size mismatch");
  Matrix out(rows, cols);
  for (std::size_t i = 0; i < idx->size(); ++i) out.v[i] = C.v[(*idx)[i]];
  return push(std::move(out), [col, idx](Tape& t) {
    const Matrix& g = t.grad_at(t.ran_backward_node_);
    Matrix& gc = t.grad_at(col);
    for (std::size_t i = 0; i < idx->size(); ++i) gc.v[(*idx)[i]] += g.v[i];
  }, "window_gather");
}

Tape::Id Tape::minmax_normalize(Id col) {
  const Matrix& C = val_at(col);
  if (C.cols != 1) throw ValidationError("minmax_normalize expects a column vector");
  int imin = 0, imax = 0;
  for (int i = 1; i < C.rows; ++i) {
    if (C.v[i] < C.v[imin]) imin = i;
    if (C.v[i] > C.v[imax]) imax = i;
  }
  const double mn = C.v[imin], mx = C.v[imax];
  const double d = mx - mn;
  Matrix out(C.rows, 1);
  const bool degenerate = d < 1e-12;
  if (!degenerate)
    for (int i = 0; i < C.rows; ++i) out.v[i] = (C.v[i] - mn) / d;
  return push(std::move(out), [col, imin, imax, mn, mx, d, degenerate](Tape& t) {
    if (degenerate) return;
    const Matrix& g = t.grad_at(t.ran_backward_node_);
    const Matrix& x = t.val_at(col);
    Matrix& gx = t.grad_at(col);
    double gmin = 0, gmax = 0;
    for (int i = 0; i < g.rows; ++i) {
      gx.v[i] += g.v[i] / d;
      gmin += g.v[i] * (x.v[i] - mx) / (d * d);
      gmax += g.v[i] * (mn - x.v[i]) / (d * d);
    }
    gx.v[imin] += gmin;
    gx.v[imax] += gmax;
  }, "minmax_normalize");
}

Tape::Id Tape::mean_cross_entropy(Id logits,
                                  std::shared_ptr<const std::vector<std::uint8_t>> targets) {
  const Matrix& L = val_at(logits);
  if (static_cast<std::size_t>(L.rows) != targets->size())
    throw ValidationError("cross_entropy target count mismatch");
  auto probs = std::make_shared<Matrix>(L.rows, L.cols);
  double loss = 0;
  for (int r = 0; r < L.rows; ++r) {
    const double* row = &L.v[static_cast<std::size_t>(r) * L.cols];
    double mx = row[0];
    for (int c = 1; c < L.cols; ++c) mx = std::max(mx, row[c]);
    double denom = 0;
    for (int c = 0; c < L.cols; ++c) denom += std::exp(row[c] - mx);
    const int t = (*targets)[r];
    if (t < 0 || t >= L.cols) throw ValidationError("cross_entropy target out of range");
    loss += std::log(denom) + mx - row[t];
    double* prow = &probs->v[static_cast<std::size_t>(r) * L.cols];
    for (int c = 0; c < L.cols; ++c) prow[c] = std::exp(row[c] - mx) / denom;
  }
  Matrix out(1, 1);
  out.v[0] = loss / L.rows;
  return push(std::move(out), [logits, targets, probs](Tape& t) {
    const double g = t.grad_at(t.ran_backward_node_).v[0];
    Matrix& gl = t.grad_at(logits);
    const double scale = g / probs->rows;
    for (int r = 0; r < probs->rows; ++r) {
      const int tc = (*targets)[r];
      double* grow = &gl.v[static_cast<std::size_t>(r) * gl.cols];
      const double* prow = &probs->v[static_cast<std::size_t>(r) * probs->cols];
      for (int c = 0; c < probs->cols; ++c)
        grow[c] += scale * (prow[c] - (c == tc ? 1.0 : 0.0));
    }
  }, "mean_cross_entropy");
}

void Tape::backward(Id root) {
  if (ran_backward_) throw NumericError("backward already ran on this tape");
  ran_backward_ = true;
  const Matrix& out = val_at(root);
  if (out.rows != 1 || out.cols != 1)
    throw ValidationError("backward root must be a 1x1 scalar");
  grad_at(root).v[0] = 1.0;
  for (Id id = static_cast<Id>(nodes_.size()) - 1; id >= 0; --id) {
    Node& node = nodes_[id];
    if (!node.back) continue;
    node.grad.validate_finite(node.label + " (gradient)");
    ran_backward_node_ = id;
    node.back(*this);
  }
}

Matrix Tape::grad_of(const Matrix& p) const {
  auto it = params_.find(&p);
  if (it == params_.end()) return Matrix::zeros_like(p);
  return nodes_[it->second].grad;
}

// ---------------------------------------------------------------------------
// layer forwards

Tape::Id dense_forward(Tape& t, const DenseLayer& layer, Tape::Id x, const std::string& name) {
  t.set_scope(name);
  Tape::Id W = t.param(layer.W, name + ".W");
  Tape::Id b = t.param(layer.b, name + ".b");
  return t.activate(t.add_row_bias(t.matmul(x, W), b), layer.act);
}

Tape::Id fcn_forward(Tape& t, const std::vector<DenseLayer>& layers, Tape::Id x,
                     const std::string& name) {
  Tape::Id h = x;
  for (std::size_t i = 0; i < layers.size(); ++i)
    h = dense_forward(t, layers[i], h, name + "." + std::to_string(i));
  return h;
}

Tape::Id gat_forward(Tape& t, const GatLayer& layer, Tape::Id h, const AttentionEdges& edges,
                     const std::string& name, std::vector<Tape::Id>* theta_out) {
  if (layer.heads.empty()) throw ValidationError("gat layer has no heads");
  auto shared_edges = std::make_shared<const AttentionEdges>(edges);
  std::vector<Tape::Id> outs;
  outs.reserve(layer.heads.size());
  for (std::size_t k = 0; k < layer.heads.size(); ++k) {
    const auto& head = layer.heads[k];
    const std::string hname = name + ".head" + std::to_string(k);
    t.set_scope(hname);
    Tape::Id W = t.param(head.W, hname + ".W");
    Tape::Id a = t.param(head.a, hname + ".a");
    Tape::Id r = t.matmul(h, W);
    Tape::Id logits = t.activate(t.edge_scores(r, a, shared_edges), Act::leaky_relu);
    Tape::Id theta = t.segment_softmax(logits, shared_edges);
    if (theta_out) theta_out->push_back(theta);
    outs.push_back(t.activate(t.attention_combine(theta, r, shared_edges), Act::elu));
  }
  if (layer.combine == Combine::concat) {
    Tape::Id out = outs[0];
    for (std::size_t k = 1; k < outs.size(); ++k) out = t.concat_cols(out, outs[k]);
    return out;
  }
  Tape::Id acc = outs[0];
  for (std::size_t k = 1; k < outs.size(); ++k) acc = t.add(acc, outs[k]);
  return outs.size() > 1 ? t.scale(acc, 1.0 / static_cast<double>(outs.size())) : acc;
}

Matrix gcn_propagation(const RegionGraph& g) {
  Matrix P(g.n, g.n);
  std::vector<double> dinv(g.n);
  for (int i = 0; i < g.n; ++i)
    dinv[i] = 1.0 / std::sqrt(static_cast<double>(g.neighbors[i].size()) + 1.0);
  for (int i = 0; i < g.n; ++i) P(i, i) = dinv[i] * dinv[i];
  for (auto [i, j] : g.edges) {
    P(i, j) = dinv[i] * dinv[j];
    P(j, i) = P(i, j);
  }
  return P;
}

Tape::Id gcn_forward(Tape& t, const GcnLayer& layer, Tape::Id h, const RegionGraph& g,
                     const std::string& name) {
  t.set_scope(name);
  Tape::Id prop = t.constant(gcn_propagation(g), name + ".prop");
  Tape::Id W = t.param(layer.W, name + ".W");
  return t.activate(t.matmul(prop, t.matmul(h, W)), Act::relu);
}

Tape::Id self_interaction(Tape& t, Tape::Id o, const DenseLayer& fcn, const std::string& name) {
  if (fcn.in() != fcn.out() || t.value(o).cols != fcn.in())
    throw ValidationError("self_interaction width mismatch at " + name);
  return t.add(o, dense_forward(t, fcn, o, name + ".fcn"));
}

Tape::Id mutual_interaction(Tape& t, Tape::Id o1, Tape::Id o2, const DenseLayer& fcn1,
                            const DenseLayer& fcn2, const std::string& name) {
  const Matrix& O1 = t.value(o1);
  const Matrix& O2 = t.value(o2);
  if (O1.rows != O2.rows) throw ValidationError("mutual_interaction row mismatch at " + name);
  if (fcn1.in() != O2.cols || fcn1.out() != O1.cols)
    throw ValidationError("mutual_interaction fcn1 width mismatch at " + name);
  if (fcn2.in() != O1.cols || fcn2.out() != O2.cols)
    throw ValidationError("mutual_interaction fcn2 width mismatch at " + name);
  Tape::Id o1x = t.add(dense_forward(t, fcn1, o2, name + ".fcn1"), o1);
  Tape::Id o2x = t.add(dense_forward(t, fcn2, o1, name + ".fcn2"), o2);
  return t.concat_cols(o1x, o2x);
}

void adam_step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads,
               AdamState& state) {
  if (params.size() != grads.size())
    throw ValidationError("adam_step: parameter/gradient count mismatch");
  if (state.m.empty()) {
    state.m.reserve(params.size());
    state.v.reserve(params.size());
    for (const Matrix* p : params) {
      state.m.push_back(Matrix::zeros_like(*p));
      state.v.push_back(Matrix::zeros_like(*p));
    }
  }
  if (state.m.size() != params.size())
    throw ValidationError("adam_step: state does not match parameter list");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (!params[i]->same_shape(grads[i]) || !params[i]->same_shape(state.m[i]))
      throw ValidationError("adam_step: shape mismatch at parameter " + std::to_string(i));

  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = *params[i];
    const Matrix& g = grads[i];
    Matrix& m = state.m[i];
    Matrix& v = state.v[i];
    for (std::size_t k = 0; k < p.v.size(); ++k) {
      m.v[k] = state.beta1 * m.v[k] + (1.0 - state.beta1) * g.v[k];
      v.v[k] = state.beta2 * v.v[k] + (1.0 - state.beta2) * g.v[k] * g.v[k];
      const double mhat = m.v[k] / bc1;
      const double vhat = v.v[k] / bc2;
      p.v[k] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

}  // namespace gnnseg
