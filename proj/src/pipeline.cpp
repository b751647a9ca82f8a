#include "gnnseg/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include <json.hpp>

#include "gnnseg/errors.hpp"
#include "gnnseg/util.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload assumes a little-endian host");

namespace gnnseg {

int GnnSegConfig::gnn_output_width() const {
  if (gnn_widths.empty()) return 0;
  if (gnn_kind == "gcn") return gnn_widths.back();
  Combine last = combine_from_string(gat_combine.back());
  return last == Combine::concat ? gnn_widths.back() * heads : gnn_widths.back();
}

void GnnSegConfig::validate() const {
  if (modalities < 1) throw ValidationError("modalities must be at least 1");
  auto positive = [](const std::vector<int>& ws, const char* what) {
    if (ws.empty()) throw ValidationError(std::string(what) + " must not be empty");
    for (int w : ws)
      if (w <= 0) throw ValidationError(std::string(what) + " must be positive");
  };
  positive(gray_fcn_widths, "gray_fcn_widths");
  positive(pos_fcn_widths, "pos_fcn_widths");
  positive(gnn_widths, "gnn_widths");
  positive(final_fcn_widths, "final_fcn_widths");
  positive(classifier.hidden_widths, "classifier.hidden_widths");
  if (stream_self_width <= 0 || gnn_self_width <= 0)
    throw ValidationError("self-interaction widths must be positive");
  if (gnn_kind != "gat" && gnn_kind != "gcn")
    throw ValidationError("gnn_kind must be gat or gcn");
  if (heads < 1) throw ValidationError("heads must be at least 1");
  if (gnn_kind == "gat") {
    if (gat_combine.size() != gnn_widths.size())
      throw ValidationError("gat_combine needs one entry per GNN layer");
    for (const auto& c : gat_combine) combine_from_string(c);
  }
  // wiring consistency
  if (gray_fcn_widths.back() != stream_self_width || pos_fcn_widths.back() != stream_self_width)
    throw ValidationError("stream FCN output width must equal stream_self_width");
  if (gnn_output_width() != gnn_self_width)
    throw ValidationError("GNN output width must equal gnn_self_width");
  if (mutual_widths[0] != 2 * stream_self_width)
    throw ValidationError("mutual_widths[0] must equal the concatenated stream width");
  if (mutual_widths[1] != gnn_self_width)
    throw ValidationError("mutual_widths[1] must equal the GNN stream width");
}

std::string GnnSegConfig::to_json() const {
  nlohmann::ordered_json j;
  j["modalities"] = modalities;
  j["gray_fcn_widths"] = gray_fcn_widths;
  j["pos_fcn_widths"] = pos_fcn_widths;
  j["stream_self_width"] = stream_self_width;
  j["gnn_kind"] = gnn_kind;
  j["gnn_widths"] = gnn_widths;
  j["heads"] = heads;
  j["gat_combine"] = gat_combine;
  j["gnn_self_width"] = gnn_self_width;
  j["mutual_widths"] = mutual_widths;
  j["final_fcn_widths"] = final_fcn_widths;
  j["superpixel"] = nlohmann::json::parse(superpixel.to_json());
  j["classifier"]["hidden_widths"] = classifier.hidden_widths;
  j["classifier"]["frozen"] = classifier.frozen;
  return j.dump(2);
}

GnnSegConfig GnnSegConfig::from_json(const std::string& text) {
  GnnSegConfig cfg;
  try {
    auto j = nlohmann::json::parse(text);
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("modalities", cfg.modalities);
    get("gray_fcn_widths", cfg.gray_fcn_widths);
    get("pos_fcn_widths", cfg.pos_fcn_widths);
    get("stream_self_width", cfg.stream_self_width);
    get("gnn_kind", cfg.gnn_kind);
    get("gnn_widths", cfg.gnn_widths);
    get("heads", cfg.heads);
    get("gat_combine", cfg.gat_combine);
    get("gnn_self_width", cfg.gnn_self_width);
    get("final_fcn_widths", cfg.final_fcn_widths);
    if (j.contains("mutual_widths")) {
      auto mw = j.at("mutual_widths").get<std::vector<int>>();
      if (mw.size() != 2) throw ValidationError("mutual_widths must have 2 entries");
      cfg.mutual_widths = {mw[0], mw[1]};
    }
    if (j.contains("superpixel"))
      cfg.superpixel = SnicParams::from_json(j.at("superpixel").dump());
    if (j.contains("classifier")) {
      const auto& c = j.at("classifier");
      if (c.contains("hidden_widths"))
        cfg.classifier.hidden_widths = c.at("hidden_widths").get<std::vector<int>>();
      if (c.contains("frozen")) cfg.classifier.frozen = c.at("frozen").get<bool>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid config JSON: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// model

GnnSegModel::GnnSegModel(const GnnSegConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(init_seed);
  const int m = cfg_.modalities;

  auto build_fcn = [&rng](int in, const std::vector<int>& widths, Act last_act) {
    std::vector<DenseLayer> layers;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      Act act = i + 1 == widths.size() ? last_act : Act::elu;
      layers.push_back(DenseLayer::glorot(in, widths[i], act, rng));
      in = widths[i];
    }
    return layers;
  };

  fcn_gray_ = build_fcn(m, cfg_.gray_fcn_widths, Act::elu);
  self_gray_ = DenseLayer::glorot(cfg_.stream_self_width, cfg_.stream_self_width, Act::elu, rng);
  fcn_pos_ = build_fcn(2, cfg_.pos_fcn_widths, Act::elu);
  self_pos_ = DenseLayer::glorot(cfg_.stream_self_width, cfg_.stream_self_width, Act::elu, rng);

  int gin = cfg_.gnn_input_width();
  if (cfg_.gnn_kind == "gat") {
    for (std::size_t i = 0; i < cfg_.gnn_widths.size(); ++i) {
      Combine combine = combine_from_string(cfg_.gat_combine[i]);
      gat_.push_back(GatLayer::glorot(gin, cfg_.gnn_widths[i], cfg_.heads, combine, rng));
      gin = gat_.back().out_width();
    }
  } else {
    for (int w : cfg_.gnn_widths) {
      gcn_.push_back(GcnLayer::glorot(gin, w, rng));
      gin = w;
    }
  }
  self_gnn_ = DenseLayer::glorot(cfg_.gnn_self_width, cfg_.gnn_self_width, Act::elu, rng);

  mutual_fcn1_ = DenseLayer::glorot(cfg_.mutual_widths[1], cfg_.mutual_widths[0], Act::elu, rng);
  mutual_fcn2_ = DenseLayer::glorot(cfg_.mutual_widths[0], cfg_.mutual_widths[1], Act::elu, rng);

  // final layer emits the structural feature itself, so no nonlinearity there
  final_fcn_ = build_fcn(cfg_.mutual_widths[0] + cfg_.mutual_widths[1], cfg_.final_fcn_widths,
                         Act::identity);
  if (final_fcn_.back().out() != 1)
    throw ValidationError("final FCN must end in a single output column");

  std::vector<int> cls_widths = cfg_.classifier.hidden_widths;
  cls_widths.push_back(kNumClasses);
  classifier_ = build_fcn(cfg_.classifier_input_width(), cls_widths, Act::identity);
}

template <typename Self, typename Fn>
void GnnSegModel::visit_structural(Self& self, Fn&& fn) {
  auto dense = [&fn](const std::string& name, auto& layer) {
    fn(name + ".W", layer.W);
    fn(name + ".b", layer.b);
  };
  for (std::size_t i = 0; i < self.fcn_gray_.size(); ++i)
    dense("fcn_gray." + std::to_string(i), self.fcn_gray_[i]);
  dense("self_gray", self.self_gray_);
  for (std::size_t i = 0; i < self.fcn_pos_.size(); ++i)
    dense("fcn_pos." + std::to_string(i), self.fcn_pos_[i]);
  dense("self_pos", self.self_pos_);
  for (std::size_t i = 0; i < self.gat_.size(); ++i)
    for (std::size_t k = 0; k < self.gat_[i].heads.size(); ++k) {
      const std::string base = "gat." + std::to_string(i) + ".head" + std::to_string(k);
      fn(base + ".W", self.gat_[i].heads[k].W);
      fn(base + ".a", self.gat_[i].heads[k].a);
    }
  for (std::size_t i = 0; i < self.gcn_.size(); ++i)
    fn("gcn." + std::to_string(i) + ".W", self.gcn_[i].W);
  dense("self_gnn", self.self_gnn_);
  dense("mutual.fcn1", self.mutual_fcn1_);
  dense("mutual.fcn2", self.mutual_fcn2_);
  for (std::size_t i = 0; i < self.final_fcn_.size(); ++i)
    dense("final_fcn." + std::to_string(i), self.final_fcn_[i]);
}

template <typename Self, typename Fn>
void GnnSegModel::visit_classifier(Self& self, Fn&& fn) {
  for (std::size_t i = 0; i < self.classifier_.size(); ++i) {
    const std::string base = "classifier." + std::to_string(i);
    fn(base + ".W", self.classifier_[i].W);
    fn(base + ".b", self.classifier_[i].b);
  }
}

std::vector<GnnSegModel::ParamRef> GnnSegModel::structural_parameters() {
  std::vector<ParamRef> out;
  visit_structural(*this, [&out](const std::string& name, Matrix& m) {
    out.push_back({name, &m});
  });
  return out;
}

std::vector<GnnSegModel::ParamRef> GnnSegModel::classifier_parameters() {
  std::vector<ParamRef> out;
  visit_classifier(*this, [&out](const std::string& name, Matrix& m) {
    out.push_back({name, &m});
  });
  return out;
}

std::vector<GnnSegModel::ParamRef> GnnSegModel::parameters() {
  auto out = structural_parameters();
  auto cls = classifier_parameters();
  out.insert(out.end(), cls.begin(), cls.end());
  return out;
}

std::pair<std::size_t, std::size_t> GnnSegModel::count_parameters() const {
  std::size_t structural = 0, classifier = 0;
  visit_structural(*this, [&structural](const std::string&, const Matrix& m) {
    structural += m.size();
  });
  visit_classifier(*this, [&classifier](const std::string&, const Matrix& m) {
    classifier += m.size();
  });
  return {structural, classifier};
}

Tape::Id GnnSegModel::structural_forward(Tape& t, const RegionGraph& graph) const {
  if (graph.modalities() != cfg_.modalities)
    throw ValidationError("graph modalities do not match model configuration");
  Tape::Id fg = t.constant(graph.fg, "F_g");
  Tape::Id fp = t.constant(graph.fp, "F_p");

  Tape::Id stream_gray = self_interaction(t, fcn_forward(t, fcn_gray_, fg, "fcn_gray"),
                                          self_gray_, "self_gray");
  Tape::Id stream_pos = self_interaction(t, fcn_forward(t, fcn_pos_, fp, "fcn_pos"),
                                         self_pos_, "self_pos");

  Tape::Id h = t.constant(node_input_features(graph), "node_input");
  if (cfg_.gnn_kind == "gat") {
    const AttentionEdges edges = AttentionEdges::from_graph(graph);
    for (std::size_t i = 0; i < gat_.size(); ++i)
      h = gat_forward(t, gat_[i], h, edges, "gat." + std::to_string(i));
  } else {
    for (std::size_t i = 0; i < gcn_.size(); ++i)
      h = gcn_forward(t, gcn_[i], h, graph, "gcn." + std::to_string(i));
  }
  Tape::Id stream_gnn = self_interaction(t, h, self_gnn_, "self_gnn");

  Tape::Id streams = t.concat_cols(stream_gray, stream_pos);
  Tape::Id merged = mutual_interaction(t, streams, stream_gnn, mutual_fcn1_, mutual_fcn2_,
                                       "mutual");
  return fcn_forward(t, final_fcn_, merged, "final_fcn");
}

Matrix GnnSegModel::structural_values(const RegionGraph& graph) const {
  Tape t;
  return t.value(structural_forward(t, graph));
}

Tape::Id GnnSegModel::classifier_logits(Tape& t, Tape::Id windows) const {
  if (t.value(windows).cols != cfg_.classifier_input_width())
    throw ValidationError("classifier window width mismatch");
  return fcn_forward(t, classifier_, windows, "classifier");
}

// ---------------------------------------------------------------------------
// reconstruction + classification

std::vector<double> reconstruct_slice(const SuperpixelLabeling& labeling,
                                      const Matrix& node_values) {
  if (node_values.rows != labeling.n || node_values.cols != 1)
    throw ValidationError("node value count does not match labeling regions");
  std::vector<double> field(labeling.region_of.size());
  for (std::size_t p = 0; p < field.size(); ++p)
    field[p] = node_values(labeling.region_of[p], 0);
  return field;
}

std::vector<int> window_neighbor_indices(int width, int height) {
  std::vector<int> idx;
  idx.reserve(static_cast<std::size_t>(width) * height * 9);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = std::clamp(x + dx, 0, width - 1);
          const int ny = std::clamp(y + dy, 0, height - 1);
          idx.push_back(ny * width + nx);
        }
      }
    }
  }
  return idx;
}

namespace {

// P x 9m matrix of clamped 3x3 windows over the slice modalities,
// channel-major within a row.
Matrix modality_windows(const Slice& slice, const std::vector<int>& nbr) {
  const int m = slice.modalities();
  const int P = static_cast<int>(slice.pixel_count());
  Matrix out(P, 9 * m);
  for (int p = 0; p < P; ++p)
    for (int mod = 0; mod < m; ++mod)
      for (int k = 0; k < 9; ++k)
        out(p, mod * 9 + k) = slice.data[mod][nbr[static_cast<std::size_t>(p) * 9 + k]];
  return out;
}

LabelMask argmax_mask(const Matrix& logits, int width, int height) {
  LabelMask mask;
  mask.width = width;
  mask.height = height;
  mask.labels.resize(static_cast<std::size_t>(width) * height);
  for (int p = 0; p < logits.rows; ++p) {
    int best = 0;
    for (int c = 1; c < logits.cols; ++c)
      if (logits(p, c) > logits(p, best)) best = c;  // ties keep the lower id
    mask.labels[p] = static_cast<std::uint8_t>(best);
  }
  return mask;
}

}  // namespace

LabelMask classify_pixels(const GnnSegModel& model, const Slice& slice,
                          const std::vector<double>& iprime) {
  slice.validate();
  if (iprime.size() != slice.pixel_count())
    throw ValidationError("structural channel dimensions do not match slice");
  const auto nbr = window_neighbor_indices(slice.width, slice.height);
  const int P = static_cast<int>(slice.pixel_count());

  Tape t;
  Matrix col(P, 1);
  std::copy(iprime.begin(), iprime.end(), col.v.begin());
  Tape::Id norm = t.minmax_normalize(t.constant(std::move(col), "iprime"));
  auto idx = std::make_shared<const std::vector<int>>(nbr);
  Tape::Id iwin = t.window_gather(norm, idx, P, 9);
  Tape::Id windows = t.concat_cols(t.constant(modality_windows(slice, nbr), "windows"), iwin);
  Tape::Id logits = model.classifier_logits(t, windows);
  return argmax_mask(t.value(logits), slice.width, slice.height);
}

InferResult infer(const GnnSegModel& model, const Slice& slice) {
  const NormalizedSlice norm = normalize(slice);
  InferResult out;
  out.labeling = snic_segment(norm.slice, model.config().superpixel);
  const RegionGraph graph = build_graph(out.labeling, norm.slice);
  const Matrix values = model.structural_values(graph);
  out.iprime = reconstruct_slice(out.labeling, values);
  out.mask = classify_pixels(model, norm.slice, out.iprime);
  return out;
}

// ---------------------------------------------------------------------------
// training

namespace {

struct SampleCache {
  SuperpixelLabeling labeling;
  RegionGraph graph;
  Matrix windows;  // P x 9m modality windows
  std::shared_ptr<const std::vector<int>> region_window;  // gather map into node values
  std::shared_ptr<const std::vector<std::uint8_t>> targets;
  int pixels = 0;
};

SampleCache prepare_sample(const GnnSegModel& model, const TrainSample& sample) {
  if (sample.slice.width != sample.mask.width || sample.slice.height != sample.mask.height)
    throw ValidationError("slice and mask dimensions differ");
  const NormalizedSlice norm = normalize(sample.slice);
  SampleCache cache;
  cache.labeling = snic_segment(norm.slice, model.config().superpixel);
  cache.graph = build_graph(cache.labeling, norm.slice);
  const auto nbr = window_neighbor_indices(norm.slice.width, norm.slice.height);
  cache.windows = modality_windows(norm.slice, nbr);
  auto region_idx = std::make_shared<std::vector<int>>(nbr.size());
  for (std::size_t i = 0; i < nbr.size(); ++i)
    (*region_idx)[i] = cache.labeling.region_of[nbr[i]];
  cache.region_window = std::move(region_idx);
  cache.targets = std::make_shared<const std::vector<std::uint8_t>>(sample.mask.labels);
  cache.pixels = static_cast<int>(norm.slice.pixel_count());
  return cache;
}

}  // namespace

TrainResult train(GnnSegModel& model, const std::vector<TrainSample>& dataset,
                  const TrainOptions& opts) {
  if (dataset.empty()) throw ValidationError("training dataset is empty");
  if (opts.epochs < 1) throw ValidationError("epochs must be at least 1");
  for (const auto& s : dataset)
    if (s.slice.modalities() != model.config().modalities)
      throw ValidationError("sample modality count does not match model configuration");

  std::vector<SampleCache> caches;
  caches.reserve(dataset.size());
  for (const auto& s : dataset) caches.push_back(prepare_sample(model, s));

  std::vector<GnnSegModel::ParamRef> trainable = model.config().classifier.frozen
                                                     ? model.structural_parameters()
                                                     : model.parameters();
  std::vector<Matrix*> params;
  params.reserve(trainable.size());
  for (auto& p : trainable) params.push_back(p.value);

  AdamState adam;
  adam.lr = opts.lr;

  TrainResult result;
  result.loss_trace.reserve(opts.epochs);
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    double epoch_loss = 0;
    for (std::size_t si = 0; si < caches.size(); ++si) {
      const SampleCache& cache = caches[si];
      try {
        Tape t;
        Tape::Id values = model.structural_forward(t, cache.graph);
        Tape::Id norm_values = t.minmax_normalize(values);
        Tape::Id iwin = t.window_gather(norm_values, cache.region_window, cache.pixels, 9);
        Tape::Id windows = t.concat_cols(t.constant(cache.windows, "windows"), iwin);
        Tape::Id logits = model.classifier_logits(t, windows);
        Tape::Id loss = t.mean_cross_entropy(logits, cache.targets);
        epoch_loss += t.value(loss).v[0];
        t.backward(loss);

        std::vector<Matrix> grads;
        grads.reserve(params.size());
        for (const Matrix* p : params) grads.push_back(t.grad_of(*p));
        adam_step(params, grads, adam);
        model.set_step(model.step() + 1);
      } catch (const NumericError& e) {
        throw NumericError("sample " + std::to_string(si) + ": " + e.what());
      }
    }
    result.loss_trace.push_back(epoch_loss / static_cast<double>(caches.size()));
  }
  return result;
}

// ---------------------------------------------------------------------------
// checkpoint I/O: JSON header + little-endian doubles in declared order

namespace {
constexpr char kCkptMagic[8] = {'G', 'S', 'E', 'G', 'C', 'K', 'P', 'T'};
}

void GnnSegModel::save(const std::string& path) const {
  nlohmann::ordered_json header;
  header["format"] = "gnnseg-checkpoint";
  header["version"] = 1;
  header["step"] = step_;
  header["config"] = nlohmann::json::parse(cfg_.to_json());
  auto params_json = nlohmann::ordered_json::array();
  std::vector<const Matrix*> order;
  auto record = [&](const std::string& name, const Matrix& m) {
    nlohmann::ordered_json p;
    p["name"] = name;
    p["rows"] = m.rows;
    p["cols"] = m.cols;
    params_json.push_back(std::move(p));
    order.push_back(&m);
  };
  visit_structural(*this, record);
  visit_classifier(*this, record);
  header["params"] = std::move(params_json);

  std::string bytes(kCkptMagic, sizeof(kCkptMagic));
  const std::string header_str = header.dump();
  const std::uint32_t hlen = static_cast<std::uint32_t>(header_str.size());
  bytes.append(reinterpret_cast<const char*>(&hlen), 4);
  bytes += header_str;
  for (const Matrix* m : order)
    bytes.append(reinterpret_cast<const char*>(m->v.data()), m->v.size() * sizeof(double));
  write_file_atomic(path, bytes);
}

GnnSegModel GnnSegModel::load(const std::string& path) {
  const std::string bytes = read_file_bytes(path);
  if (bytes.size() < sizeof(kCkptMagic) + 4 ||
      std::memcmp(bytes.data(), kCkptMagic, sizeof(kCkptMagic)) != 0)
    throw IoError("not a checkpoint file: " + path);
  std::uint32_t hlen = 0;
  std::memcpy(&hlen, bytes.data() + sizeof(kCkptMagic), 4);
  const std::size_t header_at = sizeof(kCkptMagic) + 4;
  if (bytes.size() < header_at + hlen) throw IoError("truncated checkpoint header: " + path);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(header_at, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("corrupt checkpoint header: ") + e.what());
  }
  if (header.value("format", "") != "gnnseg-checkpoint")
    throw IoError("unrecognized checkpoint format: " + path);

  GnnSegModel model(GnnSegConfig::from_json(header.at("config").dump()), 0);
  model.step_ = header.value("step", 0L);

  std::vector<Matrix*> order;
  auto collect = [&order](const std::string&, Matrix& m) { order.push_back(&m); };
  visit_structural(model, collect);
  visit_classifier(model, collect);

  const auto& params_json = header.at("params");
  if (params_json.size() != order.size())
    throw IoError("checkpoint parameter list does not match architecture: " + path);

  std::size_t at = header_at + hlen;
  for (std::size_t i = 0; i < order.size(); ++i) {
    Matrix& m = *order[i];
    const auto& pj = params_json[i];
    if (pj.at("rows").get<int>() != m.rows || pj.at("cols").get<int>() != m.cols)
      throw IoError("checkpoint shape mismatch at " + pj.at("name").get<std::string>());
    const std::size_t nbytes = m.v.size() * sizeof(double);
    if (bytes.size() < at + nbytes) throw IoError("truncated checkpoint payload: " + path);
    std::memcpy(m.v.data(), bytes.data() + at, nbytes);
    at += nbytes;
  }
  if (at != bytes.size()) throw IoError("trailing bytes in checkpoint: " + path);
  return model;
}

}  // namespace gnnseg
