#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <regex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "gnnseg/errors.hpp"
#include "gnnseg/graph.hpp"
#include "gnnseg/image.hpp"
#include "gnnseg/image_io.hpp"
#include "gnnseg/metrics.hpp"
#include "gnnseg/pipeline.hpp"
#include "gnnseg/superpixel.hpp"
#include "gnnseg/util.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

int dispatch(const std::vector<std::string>& args);

// Records inputs/outputs with digests so a run can be reproduced exactly.
class Manifest {
 public:
  Manifest(std::string command, const std::vector<std::string>& argv)
      : command_(std::move(command)), argv_(argv), started_(gnnseg::iso8601_utc_now()) {}

  void input(const std::string& path) { inputs_.push_back(path); }
  void inputs(const std::vector<std::string>& paths) {
    for (const auto& p : paths) inputs_.push_back(p);
  }
  void output(const std::string& path) { outputs_.push_back(path); }
  void set_config(ordered_json cfg) { config_ = std::move(cfg); }
  void set_seed(std::uint64_t seed) { seed_ = static_cast<long long>(seed); }

  void write(const std::string& path) const {
    ordered_json j;
    j["tool"] = "gnnseg";
    j["version"] = kVersion;
    j["command"] = command_;
    j["argv"] = argv_;
    if (!config_.is_null()) j["config"] = config_;
    if (seed_ >= 0) j["seed"] = seed_;
    auto digest_list = [](const std::vector<std::string>& paths) {
      ordered_json arr = ordered_json::array();
      for (const auto& p : paths)
        arr.push_back({{"path", p}, {"sha256", gnnseg::sha256_file(p)}});
      return arr;
    };
    j["inputs"] = digest_list(inputs_);
    j["outputs"] = digest_list(outputs_);
    j["started_utc"] = started_;
    j["finished_utc"] = gnnseg::iso8601_utc_now();
    gnnseg::write_file_atomic(path, j.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::vector<std::string> argv_;
  std::string started_;
  std::vector<std::string> inputs_, outputs_;
  ordered_json config_;
  long long seed_ = -1;
};

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

std::vector<std::string> modality_out_paths(const std::string& dir, const std::string& base,
                                            int m, const char* ext = ".png") {
  std::vector<std::string> paths;
  for (int i = 0; i < m; ++i)
    paths.push_back(join_path(dir, base + "_m" + std::to_string(i) + ext));
  return paths;
}

// Groups "<base>_m<k>.png|pgm" modality files (and "<base>_mask.png" when
// present) under each base name, sorted for deterministic order.
struct SliceGroup {
  std::string base;
  std::vector<std::string> modality_paths;
  std::string mask_path;  // empty when absent
};

std::vector<SliceGroup> scan_slice_groups(const std::string& dir, bool need_mask) {
  static const std::regex mod_re(R"((.+)_m(\d+)\.(png|pgm))");
  static const std::regex mask_re(R"((.+)_mask\.png)");
  std::map<std::string, std::map<int, std::string>> mods;
  std::map<std::string, std::string> masks;
  if (!fs::is_directory(dir)) throw gnnseg::IoError("not a directory: " + dir);
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    std::smatch m;
    if (std::regex_match(name, m, mod_re))
      mods[m[1]][std::stoi(m[2])] = entry.path().string();
    else if (std::regex_match(name, m, mask_re))
      masks[m[1]] = entry.path().string();
  }
  std::vector<SliceGroup> groups;
  for (const auto& [base, files] : mods) {
    SliceGroup g;
    g.base = base;
    for (int i = 0; i < static_cast<int>(files.size()); ++i) {
      auto it = files.find(i);
      if (it == files.end())
        throw gnnseg::ValidationError("missing modality file _m" + std::to_string(i) +
                                      " for sample " + base);
      g.modality_paths.push_back(it->second);
    }
    auto mk = masks.find(base);
    if (mk != masks.end()) g.mask_path = mk->second;
    else if (need_mask)
      throw gnnseg::ValidationError("missing mask file for sample " + base);
    groups.push_back(std::move(g));
  }
  if (groups.empty()) throw gnnseg::ValidationError("no slice files found in " + dir);
  return groups;
}

// ---------------------------------------------------------------------------
// subcommands

int cmd_phantom(const std::string& spec_path, const std::string& out_dir,
                const std::string& base, const std::vector<std::string>& argv) {
  Manifest manifest("phantom", argv);
  manifest.input(spec_path);
  const auto spec = gnnseg::PhantomSpec::from_json(gnnseg::read_file_bytes(spec_path));
  manifest.set_config(ordered_json::parse(spec.to_json()));
  manifest.set_seed(spec.seed);

  const gnnseg::Phantom phantom = gnnseg::generate_phantom(spec);
  const auto mod_paths = modality_out_paths(out_dir, base, phantom.slice.modalities());
  gnnseg::write_slice(phantom.slice, mod_paths, 16);
  const std::string mask_path = join_path(out_dir, base + "_mask.png");
  gnnseg::write_mask(phantom.mask, mask_path);
  for (const auto& p : mod_paths) manifest.output(p);
  manifest.output(mask_path);
  manifest.write(join_path(out_dir, base + "_phantom_manifest.json"));
  return 0;
}

int cmd_superpixels(const std::vector<std::string>& slice_paths, const gnnseg::SnicParams& params,
                    const std::string& out_dir, const std::string& base,
                    const std::vector<std::string>& argv) {
  Manifest manifest("superpixels", argv);
  manifest.inputs(slice_paths);
  manifest.set_config(ordered_json::parse(params.to_json()));

  const gnnseg::Slice slice = gnnseg::normalize(gnnseg::read_slice(slice_paths)).slice;
  const auto labeling = gnnseg::snic_segment(slice, params);
  const std::string png = join_path(out_dir, base + "_labels.png");
  const std::string json = join_path(out_dir, base + "_labels.json");
  gnnseg::write_labeling(labeling, params, png, json);
  manifest.output(png);
  manifest.output(json);
  manifest.write(join_path(out_dir, base + "_superpixels_manifest.json"));
  return 0;
}

int cmd_graph(const std::vector<std::string>& slice_paths, const std::string& labels_png,
              const std::string& labels_json, const std::string& out_dir,
              const std::string& base, const std::vector<std::string>& argv) {
  Manifest manifest("graph", argv);
  manifest.inputs(slice_paths);
  manifest.input(labels_png);
  manifest.input(labels_json);

  const gnnseg::Slice slice = gnnseg::normalize(gnnseg::read_slice(slice_paths)).slice;
  const auto labeling = gnnseg::read_labeling(labels_png, labels_json);
  const auto graph = gnnseg::build_graph(labeling, slice);
  const std::string out = join_path(out_dir, base + "_graph.json");
  gnnseg::write_file_atomic(out, graph.to_json() + "\n");
  manifest.output(out);
  manifest.write(join_path(out_dir, base + "_graph_manifest.json"));
  return 0;
}

std::string loss_trace_csv(const std::vector<double>& trace) {
  std::ostringstream csv;
  csv << "epoch,loss\n";
  csv.precision(17);
  for (std::size_t i = 0; i < trace.size(); ++i) csv << i + 1 << "," << trace[i] << "\n";
  return csv.str();
}

int cmd_train(const std::string& data_dir, const gnnseg::GnnSegConfig& cfg, int epochs,
              double lr, std::uint64_t seed, const std::string& out_dir,
              const std::vector<std::string>& argv) {
  Manifest manifest("train", argv);
  manifest.set_config(ordered_json::parse(cfg.to_json()));
  manifest.set_seed(seed);

  const auto groups = scan_slice_groups(data_dir, /*need_mask=*/true);
  std::vector<gnnseg::TrainSample> dataset;
  for (const auto& g : groups) {
    manifest.inputs(g.modality_paths);
    manifest.input(g.mask_path);
    dataset.push_back({gnnseg::read_slice(g.modality_paths), gnnseg::read_mask(g.mask_path)});
  }

  gnnseg::GnnSegModel model(cfg, seed);
  const auto counts = model.count_parameters();
  std::cerr << "training on " << dataset.size() << " slices; parameters: "
            << counts.first << " structural + " << counts.second << " classifier\n";
  gnnseg::TrainOptions opts;
  opts.epochs = epochs;
  opts.lr = lr;
  const auto result = gnnseg::train(model, dataset, opts);
  std::cerr << "final loss " << result.loss_trace.back() << "\n";

  const std::string ckpt = join_path(out_dir, "model.ckpt");
  model.save(ckpt);
  const std::string loss_csv = join_path(out_dir, "loss.csv");
  gnnseg::write_file_atomic(loss_csv, loss_trace_csv(result.loss_trace));
  manifest.output(ckpt);
  manifest.output(loss_csv);
  manifest.write(join_path(out_dir, "train_manifest.json"));
  return 0;
}

void write_infer_outputs(const gnnseg::GnnSegModel& model, const SliceGroup& group,
                         const std::string& out_dir, Manifest* manifest, std::mutex* mu) {
  const gnnseg::Slice slice = gnnseg::read_slice(group.modality_paths);
  const gnnseg::InferResult result = gnnseg::infer(model, slice);

  const std::string mask_path = join_path(out_dir, group.base + "_pred.png");
  gnnseg::write_mask(result.mask, mask_path);

  // store the structural channel min-max scaled, as the classifier saw it
  gnnseg::Slice iprime;
  iprime.width = slice.width;
  iprime.height = slice.height;
  iprime.data = {result.iprime};
  iprime.modality_names = {"iprime"};
  const gnnseg::Slice scaled = gnnseg::normalize(iprime).slice;
  const std::string iprime_path = join_path(out_dir, group.base + "_iprime.png");
  gnnseg::write_slice(scaled, {iprime_path}, 16);

  std::lock_guard<std::mutex> lock(*mu);
  manifest->inputs(group.modality_paths);
  manifest->output(mask_path);
  manifest->output(iprime_path);
}

int cmd_infer(const std::string& checkpoint, const std::vector<std::string>& slice_paths,
              const std::string& data_dir, const std::string& out_dir, const std::string& base,
              int jobs, const std::vector<std::string>& argv) {
  Manifest manifest("infer", argv);
  manifest.input(checkpoint);
  const auto model = gnnseg::GnnSegModel::load(checkpoint);
  manifest.set_config(ordered_json::parse(model.config().to_json()));
  std::mutex mu;

  if (!slice_paths.empty()) {
    SliceGroup g;
    g.base = base;
    g.modality_paths = slice_paths;
    write_infer_outputs(model, g, out_dir, &manifest, &mu);
  } else {
    // shared read-only model, one worker per slice group
    const auto groups = scan_slice_groups(data_dir, /*need_mask=*/false);
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex err_mu;
    const int nthreads = std::max(1, std::min<int>(jobs, static_cast<int>(groups.size())));
    std::vector<std::thread> workers;
    for (int w = 0; w < nthreads; ++w) {
      workers.emplace_back([&]() {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= groups.size()) return;
          try {
            write_infer_outputs(model, groups[i], out_dir, &manifest, &mu);
          } catch (...) {
            std::lock_guard<std::mutex> lock(err_mu);
            if (!first_error) first_error = std::current_exception();
            return;
          }
        }
      });
    }
    for (auto& t : workers) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }
  manifest.write(join_path(out_dir, "infer_manifest.json"));
  return 0;
}

int cmd_evaluate(const std::string& pred_path, const std::string& truth_path,
                 const std::string& out_dir, const std::string& base,
                 const std::vector<std::string>& argv) {
  Manifest manifest("evaluate", argv);
  manifest.input(pred_path);
  manifest.input(truth_path);
  const auto pred = gnnseg::read_mask(pred_path);
  const auto truth = gnnseg::read_mask(truth_path);
  const auto report = gnnseg::evaluate(pred, truth);
  const std::string json_path = join_path(out_dir, base + "_metrics.json");
  const std::string csv_path = join_path(out_dir, base + "_metrics.csv");
  gnnseg::write_file_atomic(json_path, report.to_json() + "\n");
  gnnseg::write_file_atomic(csv_path, report.to_csv());
  manifest.output(json_path);
  manifest.output(csv_path);
  manifest.write(join_path(out_dir, base + "_evaluate_manifest.json"));
  std::cout << report.to_json() << "\n";
  return 0;
}

int cmd_render(const std::vector<std::string>& slice_paths, const std::string& mask_path,
               const std::string& labels_png, const std::string& labels_json,
               const std::string& out_dir, const std::string& base,
               const std::vector<std::string>& argv) {
  Manifest manifest("render", argv);
  manifest.inputs(slice_paths);

  const gnnseg::Slice slice = gnnseg::normalize(gnnseg::read_slice(slice_paths)).slice;
  const std::size_t pixels = slice.pixel_count();
  std::vector<std::array<std::uint8_t, 3>> rgb(pixels);

  if (!mask_path.empty()) {
    manifest.input(mask_path);
    const auto mask = gnnseg::read_mask(mask_path);
    if (mask.width != slice.width || mask.height != slice.height)
      throw gnnseg::ValidationError("mask dimensions do not match slice");
    // background black, CSF blue, GM green, WM red
    static constexpr std::uint8_t palette[4][3] = {
        {0, 0, 0}, {40, 80, 255}, {40, 220, 60}, {255, 60, 40}};
    for (std::size_t p = 0; p < pixels; ++p) {
      const auto* c = palette[mask.labels[p]];
      rgb[p] = {c[0], c[1], c[2]};
    }
  } else {
    manifest.input(labels_png);
    manifest.input(labels_json);
    const auto labeling = gnnseg::read_labeling(labels_png, labels_json);
    if (labeling.width != slice.width || labeling.height != slice.height)
      throw gnnseg::ValidationError("labeling dimensions do not match slice");
    for (std::size_t p = 0; p < pixels; ++p) {
      const auto g = static_cast<std::uint8_t>(std::lround(255.0 * slice.data[0][p]));
      rgb[p] = {g, g, g};
    }
    for (int y = 0; y < slice.height; ++y) {
      for (int x = 0; x < slice.width; ++x) {
        const int r = labeling.region_of[y * slice.width + x];
        const bool edge =
            (x + 1 < slice.width && labeling.region_of[y * slice.width + x + 1] != r) ||
            (y + 1 < slice.height && labeling.region_of[(y + 1) * slice.width + x] != r);
        if (edge) rgb[static_cast<std::size_t>(y) * slice.width + x] = {255, 230, 40};
      }
    }
  }

  const std::string out = join_path(out_dir, base + "_render.png");
  gnnseg::write_rgb_png(slice.width, slice.height, rgb, out);
  manifest.output(out);
  manifest.write(join_path(out_dir, base + "_render_manifest.json"));
  return 0;
}

int cmd_replay(const std::string& manifest_path) {
  ordered_json j;
  try {
    j = ordered_json::parse(gnnseg::read_file_bytes(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw gnnseg::ValidationError(std::string("invalid manifest: ") + e.what());
  }
  if (!j.contains("argv")) throw gnnseg::ValidationError("manifest has no argv to replay");
  const auto argv = j.at("argv").get<std::vector<std::string>>();
  return dispatch(argv);
}

// ---------------------------------------------------------------------------

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"brain tissue segmentation from superpixel graphs"};
  app.require_subcommand(1);

  // phantom
  auto* phantom = app.add_subcommand("phantom", "generate a synthetic phantom slice + mask");
  std::string spec_path, out_dir, base = "phantom";
  phantom->add_option("--spec", spec_path, "PhantomSpec JSON file")->required();
  phantom->add_option("--out", out_dir, "output directory")->required();
  phantom->add_option("--name", base, "output base name");

  // superpixels
  auto* superpixels = app.add_subcommand("superpixels", "SNIC superpixel segmentation");
  std::vector<std::string> sp_slices;
  gnnseg::SnicParams snic;
  std::string sp_out, sp_base = "slice";
  superpixels->add_option("--slice", sp_slices, "modality image files")->required();
  superpixels->add_option("--out", sp_out, "output directory")->required();
  superpixels->add_option("--name", sp_base, "output base name");
  superpixels->add_option("--target_regions", snic.target_regions, "superpixel count target");
  superpixels->add_option("--compactness", snic.compactness, "spatial vs intensity balance");
  superpixels->add_option("--modality_index", snic.modality_index, "modality to segment");

  // graph
  auto* graph = app.add_subcommand("graph", "build the region adjacency graph");
  std::vector<std::string> g_slices;
  std::string g_labels_png, g_labels_json, g_out, g_base = "slice";
  graph->add_option("--slice", g_slices, "modality image files")->required();
  graph->add_option("--labeling", g_labels_png, "labeling PNG")->required();
  graph->add_option("--labeling-json", g_labels_json, "labeling JSON sidecar")->required();
  graph->add_option("--out", g_out, "output directory")->required();
  graph->add_option("--name", g_base, "output base name");

  // train
  auto* train = app.add_subcommand("train", "train on a directory of slices + masks");
  std::string tr_data, tr_out, tr_config;
  int tr_epochs = 50;
  double tr_lr = 1e-3;
  std::uint64_t tr_seed = 0;
  int tr_modalities = -1, tr_heads = -1, tr_stream_self = -1, tr_gnn_self = -1;
  int tr_target_regions = -1, tr_modality_index = -1;
  double tr_compactness = -1;
  std::string tr_gnn_kind;
  std::vector<int> tr_gray_w, tr_pos_w, tr_gnn_w, tr_final_w, tr_mutual_w, tr_cls_w;
  std::vector<std::string> tr_combine;
  bool tr_frozen = false;
  train->add_option("--data", tr_data, "dataset directory")->required();
  train->add_option("--out", tr_out, "output directory")->required();
  train->add_option("--config", tr_config, "GnnSegConfig JSON file (flags override)");
  train->add_option("--epochs", tr_epochs, "training epochs");
  train->add_option("--lr", tr_lr, "Adam learning rate");
  train->add_option("--seed", tr_seed, "parameter init seed");
  train->add_option("--modalities", tr_modalities, "input modality count");
  train->add_option("--gray_fcn_widths", tr_gray_w, "gray stream FCN widths");
  train->add_option("--pos_fcn_widths", tr_pos_w, "position stream FCN widths");
  train->add_option("--stream_self_width", tr_stream_self, "stream self-interaction width");
  train->add_option("--gnn_kind", tr_gnn_kind, "gat or gcn");
  train->add_option("--gnn_widths", tr_gnn_w, "per-head GNN layer widths");
  train->add_option("--heads", tr_heads, "attention heads");
  train->add_option("--gat_combine", tr_combine, "per-layer combine: concat|average");
  train->add_option("--gnn_self_width", tr_gnn_self, "post-GNN self-interaction width");
  train->add_option("--mutual_widths", tr_mutual_w, "mutual interaction widths (2 values)");
  train->add_option("--final_fcn_widths", tr_final_w, "final FCN widths");
  train->add_option("--target_regions", tr_target_regions, "superpixel count target");
  train->add_option("--compactness", tr_compactness, "SNIC compactness");
  train->add_option("--modality_index", tr_modality_index, "SNIC modality");
  train->add_option("--classifier_hidden_widths", tr_cls_w, "classifier hidden widths");
  train->add_flag("--frozen_classifier", tr_frozen, "train the structural model only");

  // infer
  auto* infer = app.add_subcommand("infer", "predict masks with a trained checkpoint");
  std::string in_ckpt, in_data, in_out, in_base = "slice";
  std::vector<std::string> in_slices;
  int in_jobs = static_cast<int>(std::thread::hardware_concurrency());
  infer->add_option("--checkpoint", in_ckpt, "model checkpoint")->required();
  infer->add_option("--slice", in_slices, "modality image files (single slice)");
  infer->add_option("--data", in_data, "directory of slices (parallel)");
  infer->add_option("--out", in_out, "output directory")->required();
  infer->add_option("--name", in_base, "output base name for --slice mode");
  infer->add_option("--jobs", in_jobs, "worker threads for --data mode");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Dice/TP/APD between two masks");
  std::string ev_pred, ev_truth, ev_out, ev_base = "eval";
  evaluate->add_option("--pred", ev_pred, "predicted mask PNG")->required();
  evaluate->add_option("--truth", ev_truth, "reference mask PNG")->required();
  evaluate->add_option("--out", ev_out, "output directory")->required();
  evaluate->add_option("--name", ev_base, "output base name");

  // render
  auto* render = app.add_subcommand("render", "overlay PNG of a mask or labeling");
  std::vector<std::string> rd_slices;
  std::string rd_mask, rd_labels_png, rd_labels_json, rd_out, rd_base = "view";
  render->add_option("--slice", rd_slices, "modality image files")->required();
  render->add_option("--mask", rd_mask, "class mask to color");
  render->add_option("--labeling", rd_labels_png, "labeling PNG for boundary overlay");
  render->add_option("--labeling-json", rd_labels_json, "labeling JSON sidecar");
  render->add_option("--out", rd_out, "output directory")->required();
  render->add_option("--name", rd_base, "output base name");

  // replay
  auto* replay = app.add_subcommand("replay", "re-run the command recorded in a manifest");
  std::string rp_manifest;
  replay->add_option("--manifest", rp_manifest, "RunManifest JSON")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    throw gnnseg::ValidationError(std::string("argument error: ") + e.what());
  }

  if (*phantom) return cmd_phantom(spec_path, out_dir, base, args);
  if (*superpixels) return cmd_superpixels(sp_slices, snic, sp_out, sp_base, args);
  if (*graph) return cmd_graph(g_slices, g_labels_png, g_labels_json, g_out, g_base, args);
  if (*train) {
    gnnseg::GnnSegConfig cfg = tr_config.empty()
                                   ? gnnseg::GnnSegConfig{}
                                   : gnnseg::GnnSegConfig::from_json(
                                         gnnseg::read_file_bytes(tr_config));
    if (tr_modalities >= 0) cfg.modalities = tr_modalities;
    if (!tr_gray_w.empty()) cfg.gray_fcn_widths = tr_gray_w;
    if (!tr_pos_w.empty()) cfg.pos_fcn_widths = tr_pos_w;
    if (tr_stream_self >= 0) cfg.stream_self_width = tr_stream_self;
    if (!tr_gnn_kind.empty()) cfg.gnn_kind = tr_gnn_kind;
    if (!tr_gnn_w.empty()) cfg.gnn_widths = tr_gnn_w;
    if (tr_heads >= 0) cfg.heads = tr_heads;
    if (!tr_combine.empty()) cfg.gat_combine = tr_combine;
    if (tr_gnn_self >= 0) cfg.gnn_self_width = tr_gnn_self;
    if (!tr_mutual_w.empty()) {
      if (tr_mutual_w.size() != 2)
        throw gnnseg::ValidationError("--mutual_widths needs exactly 2 values");
      cfg.mutual_widths = {tr_mutual_w[0], tr_mutual_w[1]};
    }
    if (!tr_final_w.empty()) cfg.final_fcn_widths = tr_final_w;
    if (tr_target_regions >= 0) cfg.superpixel.target_regions = tr_target_regions;
    if (tr_compactness >= 0) cfg.superpixel.compactness = tr_compactness;
    if (tr_modality_index >= 0) cfg.superpixel.modality_index = tr_modality_index;
    if (!tr_cls_w.empty()) cfg.classifier.hidden_widths = tr_cls_w;
    if (tr_frozen) cfg.classifier.frozen = true;
    cfg.validate();
    return cmd_train(tr_data, cfg, tr_epochs, tr_lr, tr_seed, tr_out, args);
  }
  if (*infer) {
    if (in_slices.empty() == in_data.empty())
      throw gnnseg::ValidationError("infer needs exactly one of --slice or --data");
    return cmd_infer(in_ckpt, in_slices, in_data, in_out, in_base, in_jobs, args);
  }
  if (*evaluate) return cmd_evaluate(ev_pred, ev_truth, ev_out, ev_base, args);
  if (*render) {
    if (rd_mask.empty() && (rd_labels_png.empty() || rd_labels_json.empty()))
      throw gnnseg::ValidationError("render needs --mask or --labeling with --labeling-json");
    return cmd_render(rd_slices, rd_mask, rd_labels_png, rd_labels_json, rd_out, rd_base, args);
  }
  if (*replay) return cmd_replay(rp_manifest);
  return 0;
}

void print_error(const std::string& message, int code) {
  ordered_json j;
  j["error"] = message;
  j["code"] = code;
  std::cerr << j.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    return dispatch(args);
  } catch (const gnnseg::ValidationError& e) {
    print_error(e.what(), 2);
    return 2;
  } catch (const gnnseg::IoError& e) {
    print_error(e.what(), 3);
    return 3;
  } catch (const gnnseg::NumericError& e) {
    print_error(e.what(), 4);
    return 4;
  } catch (const std::exception& e) {
    print_error(e.what(), 1);
    return 1;
  }
}
