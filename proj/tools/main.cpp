// Copyright 2026 The dronedet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end. Every subcommand reads plain files (PPM/PGM
// images, VisDrone annotation text, detection JSONL), writes deterministic
// output, and reports failures as a single JSON line on stderr with a
// nonzero exit code.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dronedet/augmentation.hpp"
#include "dronedet/detection_io.hpp"
#include "dronedet/evaluation.hpp"
#include "dronedet/fusion.hpp"
#include "dronedet/geometry.hpp"
#include "dronedet/gradcheck.hpp"
#include "dronedet/nnblocks.hpp"
#include "dronedet/ppm.hpp"
#include "dronedet/rescore.hpp"
#include "dronedet/rng.hpp"
#include "dronedet/visdrone.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace dronedet;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

std::vector<fs::path> sorted_files(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) {
    throw std::runtime_error(dir.string() + " is not a directory");
  }
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ext) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// image id -> parsed records, for a directory of VisDrone .txt files.
std::map<std::string, std::vector<VisDroneRecord>> load_annotation_dir(const fs::path& dir) {
  std::map<std::string, std::vector<VisDroneRecord>> out;
  for (const fs::path& p : sorted_files(dir, ".txt")) {
    try {
      out[p.stem().string()] = parse_visdrone(read_file(p));
    } catch (const std::exception& e) {
      throw std::runtime_error(p.string() + ": " + e.what());
    }
  }
  if (out.empty()) throw std::runtime_error("no .txt annotation files in " + dir.string());
  return out;
}

/// Ground truth for evaluation. The score field is a validity flag in GT
/// files, so score-0 boxes are ignored, as are categories 0 (ignored
/// regions) and 11 (others, never evaluated).
std::vector<GroundTruthBox> to_ground_truth(const std::vector<VisDroneRecord>& records) {
  std::vector<GroundTruthBox> out;
  out.reserve(records.size());
  for (const VisDroneRecord& r : records) {
    out.push_back(GroundTruthBox{r.box(), r.category, !r.evaluated() || r.score == 0});
  }
  return out;
}

Sample load_sample(const fs::path& image_path) {
  fs::path ann = image_path;
  ann.replace_extension(".txt");
  Sample s;
  s.image = decode_pnm(read_file(image_path));
  for (const VisDroneRecord& r : parse_visdrone(read_file(ann))) {
    s.labels.push_back(Label{r.category, r.box(), 1.0, !r.evaluated() || r.score == 0});
  }
  return s;
}

std::map<std::string, ImageSize> load_size_manifest(const fs::path& csv) {
  std::map<std::string, ImageSize> out;
  std::istringstream in(read_file(csv));
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string id, w, h;
    if (!std::getline(ss, id, ',') || !std::getline(ss, w, ',') || !std::getline(ss, h)) {
      throw std::runtime_error(csv.string() + ": line " + std::to_string(line_no) +
                               ": expected image_id,width,height");
    }
    out.emplace(id, ImageSize(std::stoi(w), std::stoi(h)));
  }
  return out;
}

std::vector<DetectionRecord> to_records(const std::vector<ScoredBox>& boxes,
                                        const std::string& image_id) {
  std::vector<DetectionRecord> out;
  out.reserve(boxes.size());
  for (const ScoredBox& b : boxes) out.push_back(to_detection_record(b, image_id));
  return out;
}

void emit_detections(const std::map<std::string, std::vector<ScoredBox>>& by_image,
                     const std::string& out_path) {
  std::vector<DetectionRecord> records;
  for (const auto& [id, boxes] : by_image) {
    const auto batch = to_records(boxes, id);
    records.insert(records.end(), batch.begin(), batch.end());
  }
  const std::string text = write_detections(records);
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_file(out_path, text);
  }
}

std::vector<double> parse_threshold_range(const std::string& spec) {
  double lo = 0.0, step = 0.0, hi = 0.0;
  char c1 = 0, c2 = 0;
  std::istringstream in(spec);
  if (!(in >> lo >> c1 >> step >> c2 >> hi) || c1 != ':' || c2 != ':' || step <= 0.0) {
    throw std::runtime_error("bad IoU range '" + spec + "', expected lo:step:hi");
  }
  std::vector<double> out;
  for (int i = 0;; ++i) {
    const double t = lo + step * i;
    if (t > hi + 1e-9) break;
    out.push_back(t);
  }
  if (out.empty()) throw std::runtime_error("empty IoU range '" + spec + "'");
  return out;
}

std::string category_label(int id) {
  if (id >= 0 && id <= 11) return visdrone_category_name(id);
  return "class-" + std::to_string(id);
}

// --- analyze ---

struct AnalyzeArgs {
  std::string ann_dir;
  std::string sizes_csv;
  std::string image_dir;
  int min_px = 3;
  int ref_long_side = 1536;
  bool as_json = false;
};

void run_analyze(const AnalyzeArgs& a) {
  const auto annotations = load_annotation_dir(a.ann_dir);

  std::map<std::string, ImageSize> sizes;
  if (!a.sizes_csv.empty()) {
    sizes = load_size_manifest(a.sizes_csv);
  } else if (!a.image_dir.empty()) {
    for (const auto& [id, _] : annotations) {
      fs::path p = fs::path(a.image_dir) / (id + ".ppm");
      if (!fs::exists(p)) p.replace_extension(".pgm");
      if (!fs::exists(p)) throw std::runtime_error("no .ppm/.pgm image for " + id);
      const Image img = decode_pnm(read_file(p));
      sizes.emplace(id, ImageSize(img.width(), img.height()));
    }
  } else {
    const fs::path fallback = fs::path(a.ann_dir) / "sizes.csv";
    if (fs::exists(fallback)) {
      sizes = load_size_manifest(fallback);
    } else {
      throw std::runtime_error(
          "image sizes required for the tiny-label census: pass --sizes "
          "image_id,width,height CSV or --images with PPM/PGM files");
    }
  }

  std::vector<AnnotatedImage> corpus;
  for (const auto& [id, records] : annotations) {
    const auto it = sizes.find(id);
    if (it == sizes.end()) throw std::runtime_error("no size entry for image " + id);
    corpus.push_back(AnnotatedImage{id, it->second, records});
  }
  const DatasetStats stats = dataset_stats(corpus, a.min_px, a.ref_long_side);

  if (a.as_json) {
    json counts = json::object();
    for (int c = 0; c < 12; ++c) {
      counts[visdrone_category_name(c)] = stats.category_counts[static_cast<std::size_t>(c)];
    }
    const json report = {
        {"images", corpus.size()},
        {"total_records", stats.total_records},
        {"object_labels", stats.object_labels},
        {"tiny_labels", stats.tiny_labels},
        {"min_px", stats.min_px},
        {"ref_long_side", stats.ref_long_side},
        {"category_counts", counts},
    };
    std::cout << report.dump(2) << "\n";
    return;
  }

  std::cout << "images:            " << corpus.size() << "\n";
  std::cout << "annotation lines:  " << stats.total_records << "\n";
  std::cout << "object labels:     " << stats.object_labels << " (categories 1-10)\n";
  std::cout << "tiny labels:       " << stats.tiny_labels << " (longer side < "
            << stats.min_px << " px at reference long side " << stats.ref_long_side
            << ")\n\n";
  std::cout << std::left << std::setw(6) << "id" << std::setw(18) << "category"
            << "labels\n";
  for (int c = 0; c < 12; ++c) {
    std::cout << std::left << std::setw(6) << c << std::setw(18)
              << visdrone_category_name(c)
              << stats.category_counts[static_cast<std::size_t>(c)] << "\n";
  }
}

// --- mask-tiny ---

struct MaskTinyArgs {
  std::string image_path;
  std::string ann_path;
  std::string out_dir;
  int min_px = 3;
  int ref_long_side = 1536;
};

void run_mask_tiny(const MaskTinyArgs& a) {
  const auto records = parse_visdrone(read_file(a.ann_path));
  Sample s;
  s.image = decode_pnm(read_file(a.image_path));
  // Tag each label with its record index so surviving records keep their
  // original truncation/occlusion fields.
  for (std::size_t i = 0; i < records.size(); ++i) {
    s.labels.push_back(
        Label{static_cast<int>(i), records[i].box(), 1.0, records[i].ignored()});
  }
  const Sample masked = mask_tiny_labels(s, a.min_px, a.ref_long_side);

  std::vector<VisDroneRecord> kept;
  for (const Label& lbl : masked.labels) {
    kept.push_back(records[static_cast<std::size_t>(lbl.class_id)]);
  }

  fs::create_directories(a.out_dir);
  const fs::path img_out = fs::path(a.out_dir) / fs::path(a.image_path).filename();
  const fs::path ann_out = fs::path(a.out_dir) / fs::path(a.ann_path).filename();
  write_file(img_out, encode_pnm(masked.image));
  write_file(ann_out, serialize_visdrone(kept));
  std::cout << "kept " << kept.size() << " of " << records.size() << " labels; masked "
            << records.size() - kept.size() << "\n";
}

// --- augment ---

struct AugmentArgs {
  std::string config_path;
  std::uint64_t seed = 0;
  std::vector<std::string> sample_paths;
  std::string out_dir;
};

AugmentConfig parse_augment_config(const std::string& path) {
  AugmentConfig cfg;
  if (path.empty() || path == "-") return cfg;
  const json j = json::parse(read_file(path));
  if (j.contains("mosaic_output")) {
    cfg.mosaic_output = ImageSize(j["mosaic_output"].at("width").get<int>(),
                                  j["mosaic_output"].at("height").get<int>());
  }
  if (j.contains("mosaic_center_jitter")) {
    cfg.mosaic_center_jitter = j["mosaic_center_jitter"].get<double>();
  }
  if (j.contains("mixup_beta")) cfg.mixup_beta = j["mixup_beta"].get<double>();
  if (j.contains("min_box_survival")) {
    cfg.min_box_survival = j["min_box_survival"].get<double>();
  }
  if (j.contains("hsv")) {
    cfg.hsv.h = j["hsv"].value("h", cfg.hsv.h);
    cfg.hsv.s = j["hsv"].value("s", cfg.hsv.s);
    cfg.hsv.v = j["hsv"].value("v", cfg.hsv.v);
  }
  if (j.contains("affine")) {
    const json& af = j["affine"];
    cfg.affine.degrees = af.value("degrees", cfg.affine.degrees);
    cfg.affine.translate = af.value("translate", cfg.affine.translate);
    cfg.affine.scale_min = af.value("scale_min", cfg.affine.scale_min);
    cfg.affine.scale_max = af.value("scale_max", cfg.affine.scale_max);
    cfg.affine.shear = af.value("shear", cfg.affine.shear);
  }
  cfg.validate();
  return cfg;
}

void run_augment(const AugmentArgs& a) {
  const AugmentConfig cfg = parse_augment_config(a.config_path);
  if (a.sample_paths.size() != 4 && a.sample_paths.size() != 8) {
    throw std::runtime_error("augment needs 4 samples (mosaic) or 8 (mosaic pair + blend)");
  }
  std::vector<Sample> samples;
  for (const std::string& p : a.sample_paths) samples.push_back(load_sample(p));

  Rng rng(a.seed);
  Sample out;
  if (samples.size() == 4) {
    out = mosaic(samples, cfg, rng);
  } else {
    const std::vector<Sample> first(samples.begin(), samples.begin() + 4);
    const std::vector<Sample> second(samples.begin() + 4, samples.end());
    const Sample ma = mosaic(first, cfg, rng);
    const Sample mb = mosaic(second, cfg, rng);
    out = mixup(ma, mb, rng.beta(cfg.mixup_beta));
  }
  out = geometric_distort(out, cfg, rng);
  out = hsv_distort(out, cfg.hsv, rng);

  fs::create_directories(a.out_dir);
  write_file(fs::path(a.out_dir) / "augmented.ppm", encode_pnm(out.image));
  std::vector<DetectionRecord> labels;
  for (const Label& lbl : out.labels) {
    DetectionRecord r;
    r.image_id = "augmented";
    r.class_id = lbl.class_id;
    r.score = std::clamp(lbl.weight, 0.0, 1.0);
    r.box = lbl.box;
    labels.push_back(std::move(r));
  }
  write_file(fs::path(a.out_dir) / "augmented.jsonl", write_detections(labels));
  std::cout << "wrote augmented.ppm (" << out.image.width() << "x" << out.image.height()
            << ") and augmented.jsonl (" << labels.size() << " labels)\n";
}

// --- fuse ---

struct FuseArgs {
  std::string method = "nms";
  double iou_thr = 0.5;
  double score_thr = 0.001;
  double sigma = 0.5;
  std::string softnms_mode = "gaussian";
  std::vector<double> weights;
  bool agnostic = false;
  bool conf_rescale = false;
  std::string out_path;
  std::vector<std::string> det_files;
};

void run_fuse(const FuseArgs& a) {
  FusionConfig cfg;
  cfg.iou_threshold = a.iou_thr;
  cfg.score_threshold = a.score_thr;
  cfg.softnms_sigma = a.sigma;
  cfg.softnms_mode =
      a.softnms_mode == "linear" ? SoftNmsMode::Linear : SoftNmsMode::Gaussian;
  cfg.class_agnostic = a.agnostic;
  cfg.wbf_conf_rescale = a.conf_rescale;
  cfg.validate();
  if (!a.weights.empty() && a.weights.size() != a.det_files.size()) {
    throw std::runtime_error("--weights count must match the number of detection files");
  }

  std::vector<std::map<std::string, std::vector<ScoredBox>>> per_file;
  for (const std::string& p : a.det_files) {
    per_file.push_back(group_by_image(read_detections(read_file(p)).records));
  }
  std::vector<std::string> image_ids;
  for (const auto& m : per_file) {
    for (const auto& [id, _] : m) image_ids.push_back(id);
  }
  std::sort(image_ids.begin(), image_ids.end());
  image_ids.erase(std::unique(image_ids.begin(), image_ids.end()), image_ids.end());

  std::map<std::string, std::vector<ScoredBox>> fused;
  for (const std::string& id : image_ids) {
    if (a.method == "wbf") {
      std::vector<ModelPrediction> preds;
      for (std::size_t f = 0; f < per_file.size(); ++f) {
        ModelPrediction p;
        p.model_id = fs::path(a.det_files[f]).stem().string();
        p.weight = a.weights.empty() ? 1.0 : a.weights[f];
        const auto it = per_file[f].find(id);
        if (it != per_file[f].end()) p.detections = it->second;
        preds.push_back(std::move(p));
      }
      fused[id] = wbf(preds, cfg);
    } else {
      std::vector<ScoredBox> pool;
      for (const auto& m : per_file) {
        const auto it = m.find(id);
        if (it != m.end()) pool.insert(pool.end(), it->second.begin(), it->second.end());
      }
      fused[id] = a.method == "nms" ? nms(pool, cfg) : soft_nms(pool, cfg);
    }
  }
  emit_detections(fused, a.out_path);
}

// --- tta-plan / tta-fuse ---

void run_tta_plan(int width, int height, const std::vector<double>& scales) {
  const TtaPlan plan = scales.empty() ? tta_views(ImageSize(width, height))
                                      : tta_views(ImageSize(width, height), scales);
  json views = json::array();
  for (const ViewTransform& v : plan.views) {
    views.push_back({{"scale", v.scale},
                     {"hflip", v.hflip},
                     {"source_width", v.source.width},
                     {"source_height", v.source.height}});
  }
  std::cout << json{{"views", views}}.dump(2) << "\n";
}

struct TtaFuseArgs {
  double iou_thr = 0.5;
  double score_thr = 0.001;
  bool agnostic = false;
  std::string out_path;
  std::vector<std::string> det_files;
};

void run_tta_fuse(const TtaFuseArgs& a) {
  FusionConfig cfg;
  cfg.iou_threshold = a.iou_thr;
  cfg.score_threshold = a.score_thr;
  cfg.class_agnostic = a.agnostic;
  cfg.validate();

  std::map<std::string, std::vector<std::pair<ViewTransform, std::vector<ScoredBox>>>>
      by_image;
  std::vector<std::string> image_ids;
  for (const std::string& p : a.det_files) {
    const DetectionFile file = read_detections(read_file(p));
    if (!file.has_view) {
      throw std::runtime_error(p + ": no view header; produce these files per view");
    }
    for (auto& [id, boxes] : group_by_image(file.records)) {
      if (by_image.find(id) == by_image.end()) image_ids.push_back(id);
      by_image[id].emplace_back(file.view, std::move(boxes));
    }
  }
  std::map<std::string, std::vector<ScoredBox>> fused;
  for (const auto& [id, per_view] : by_image) fused[id] = tta_fuse(per_view, cfg);
  emit_detections(fused, a.out_path);
}

// --- eval / confusion ---

struct EvalArgs {
  std::string det_path;
  std::string gt_dir;
  std::string iou_range = "0.5:0.05:0.95";
  int max_dets = 500;
  bool as_json = false;
};

void run_eval(const EvalArgs& a) {
  const auto dets = group_by_image(read_detections(read_file(a.det_path)).records);
  std::map<std::string, std::vector<GroundTruthBox>> gts;
  for (const auto& [id, records] : load_annotation_dir(a.gt_dir)) {
    gts[id] = to_ground_truth(records);
  }
  EvalConfig cfg;
  cfg.thresholds = parse_threshold_range(a.iou_range);
  cfg.max_dets_per_image = a.max_dets;
  const EvalReport rep = evaluate(dets, gts, cfg);

  if (a.as_json) {
    json per_class = json::array();
    for (std::size_t c = 0; c < rep.class_ids.size(); ++c) {
      per_class.push_back({{"class_id", rep.class_ids[c]},
                           {"name", category_label(rep.class_ids[c])},
                           {"ap50", rep.ap50_per_class[c]},
                           {"ap", rep.ap[c]}});
    }
    const json out = {{"thresholds", rep.thresholds},
                      {"classes", per_class},
                      {"map", rep.map},
                      {"ap50", rep.ap50},
                      {"num_detections", rep.num_detections},
                      {"num_gt", rep.num_gt}};
    std::cout << out.dump(2) << "\n";
    return;
  }

  std::cout << "detections: " << rep.num_detections << "   ground truth: " << rep.num_gt
            << "   IoU " << a.iou_range << "\n\n";
  std::cout << std::left << std::setw(6) << "id" << std::setw(18) << "class"
            << std::setw(12) << "AP50" << "AP\n";
  std::cout << std::fixed << std::setprecision(4);
  for (std::size_t c = 0; c < rep.class_ids.size(); ++c) {
    double mean_ap = 0.0;
    for (const double v : rep.ap[c]) mean_ap += v;
    mean_ap /= static_cast<double>(rep.ap[c].size());
    std::cout << std::left << std::setw(6) << rep.class_ids[c] << std::setw(18)
              << category_label(rep.class_ids[c]) << std::setw(12)
              << rep.ap50_per_class[c] << mean_ap << "\n";
  }
  std::cout << "\nmAP " << rep.map << "   AP50 " << rep.ap50 << "\n";
}

struct ConfusionArgs {
  std::string det_path;
  std::string gt_dir;
  double iou_thr = 0.45;
  double conf_thr = 0.25;
  int num_classes = 12;
};

void run_confusion(const ConfusionArgs& a) {
  const auto dets = group_by_image(read_detections(read_file(a.det_path)).records);
  std::map<std::string, std::vector<GroundTruthBox>> gts;
  for (const auto& [id, records] : load_annotation_dir(a.gt_dir)) {
    gts[id] = to_ground_truth(records);
  }
  const ConfusionMatrix m =
      confusion_matrix(dets, gts, a.num_classes, a.iou_thr, a.conf_thr);

  std::cout << "predicted\\true";
  for (int c = 0; c < a.num_classes; ++c) std::cout << "," << category_label(c);
  std::cout << ",background\n";
  for (int r = 0; r <= a.num_classes; ++r) {
    std::cout << (r == a.num_classes ? "background" : category_label(r));
    for (int c = 0; c <= a.num_classes; ++c) std::cout << "," << m.at(r, c);
    std::cout << "\n";
  }
}

// --- rescore / train-classifier ---

struct RescoreArgs {
  std::string det_path;
  std::string image_dir;
  std::string clf_path;
  double min_conf = 0.5;
  bool no_replace = false;
  std::string combine = "keep";
  std::string out_path;
};

void run_rescore(const RescoreArgs& a) {
  const PatchClassifier clf = PatchClassifier::load(a.clf_path);
  RescorePolicy policy;
  policy.replace_label = !a.no_replace;
  policy.min_classifier_conf = a.min_conf;
  policy.score_combine =
      a.combine == "multiply" ? ScoreCombine::Multiply : ScoreCombine::Keep;
  policy.validate();

  std::map<std::string, std::vector<ScoredBox>> out;
  for (const auto& [id, boxes] : group_by_image(read_detections(read_file(a.det_path)).records)) {
    fs::path img = fs::path(a.image_dir) / (id + ".ppm");
    if (!fs::exists(img)) img.replace_extension(".pgm");
    if (!fs::exists(img)) throw std::runtime_error("no .ppm/.pgm image for " + id);
    out[id] = rescore_detections(boxes, decode_pnm(read_file(img)), clf, policy);
  }
  emit_detections(out, a.out_path);
}

struct TrainClassifierArgs {
  std::vector<std::string> sample_paths;
  std::string out_path;
  int epochs = 80;
  double lr = 0.5;
  int hidden = 128;
  std::uint64_t seed = 1;
};

void run_train_classifier(const TrainClassifierArgs& a) {
  std::vector<Sample> samples;
  for (const std::string& p : a.sample_paths) samples.push_back(load_sample(p));
  const std::vector<Patch> patches = build_patch_dataset(samples);
  ClassifierTrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.lr = a.lr;
  cfg.hidden_dim = a.hidden;
  cfg.seed = a.seed;
  const PatchClassifier clf = PatchClassifier::train(patches, cfg);
  clf.save(a.out_path);
  std::cout << "trained on " << patches.size() << " patches across "
            << clf.class_ids().size() << " classes; train accuracy " << std::fixed
            << std::setprecision(4) << clf.final_train_accuracy() << "\n";
}

// --- class-weights ---

void run_class_weights(const std::string& ann_dir, double exponent, bool as_json) {
  std::vector<long long> counts(10, 0);
  for (const auto& [id, records] : load_annotation_dir(ann_dir)) {
    for (const VisDroneRecord& r : records) {
      if (r.evaluated()) ++counts[static_cast<std::size_t>(r.category - 1)];
    }
  }
  const std::vector<double> weights = class_weights(counts, exponent);

  if (as_json) {
    json out = json::object();
    for (int c = 0; c < 10; ++c) {
      out[visdrone_category_name(c + 1)] = {{"count", counts[static_cast<std::size_t>(c)]},
                                            {"weight", weights[static_cast<std::size_t>(c)]}};
    }
    std::cout << out.dump(2) << "\n";
    return;
  }
  std::cout << std::left << std::setw(6) << "id" << std::setw(18) << "category"
            << std::setw(12) << "labels" << "weight\n";
  std::cout << std::fixed << std::setprecision(6);
  for (int c = 0; c < 10; ++c) {
    std::cout << std::left << std::setw(6) << c + 1 << std::setw(18)
              << visdrone_category_name(c + 1) << std::setw(12)
              << counts[static_cast<std::size_t>(c)] << weights[static_cast<std::size_t>(c)]
              << "\n";
  }
}

// --- blocks-check ---

int run_blocks_check(double eps, double tol, std::uint64_t seed) {
  Rng rng(seed);
  bool ok = true;

  const auto report_line = [&](const std::string& name, const GradCheckReport& r) {
    const bool pass = r.max_rel_error < tol;
    ok = ok && pass;
    std::cout << (pass ? "OK   " : "FAIL ") << name << ": max_rel_error "
              << std::scientific << std::setprecision(3) << r.max_rel_error << " over "
              << r.num_params << " params (worst #" << r.worst_index << ": analytic "
              << r.analytic_at_worst << ", numeric " << r.numeric_at_worst << ")\n";
  };

  Tensor x({4, 8});
  for (double& v : x.data()) v = 0.5 * rng.normal();
  EncoderParams enc = EncoderParams::random(8, 2, rng);
  report_line("encoder (pre-norm)", grad_check(encoder_grad_problem(x, enc), eps));
  EncoderParams post = EncoderParams::random(8, 2, rng);
  post.pre_norm = false;
  report_line("encoder (post-norm)", grad_check(encoder_grad_problem(x, post), eps));

  Tensor f({4, 5, 5});
  for (double& v : f.data()) v = 0.8 * rng.normal();
  const CbamParams cp = CbamParams::random(4, 2, 3, rng);
  report_line("attention block", grad_check(cbam_grad_problem(f, cp), eps));

  // Decode sanity: zero logits land on the anchor at each cell center.
  bool decode_ok = true;
  for (const HeadSpec& spec : default_head_specs(5)) {
    Tensor raw({spec.anchors.size(), 2, 2, 10});
    const double s = static_cast<double>(spec.stride);
    const std::vector<ScoredBox> boxes = yolo_head_decode(raw, spec, 0.0);
    std::size_t i = 0;
    for (std::size_t anc = 0; anc < spec.anchors.size(); ++anc) {
      for (std::size_t gy = 0; gy < 2; ++gy) {
        for (std::size_t gx = 0; gx < 2; ++gx, ++i) {
          const ScoredBox& b = boxes[i];
          const double cx = 0.5 * (b.box.x1 + b.box.x2);
          const double cy = 0.5 * (b.box.y1 + b.box.y2);
          decode_ok = decode_ok && cx == (static_cast<double>(gx) + 0.5) * s &&
                      cy == (static_cast<double>(gy) + 0.5) * s && b.score == 0.25;
        }
      }
    }
  }
  ok = ok && decode_ok;
  std::cout << (decode_ok ? "OK   " : "FAIL ")
            << "head decode: zero logits give cell-center anchors at strides 4/8/16/32\n";
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"drone-view detection pipeline toolkit"};
  app.require_subcommand(1);

  AnalyzeArgs analyze_args;
  CLI::App* analyze = app.add_subcommand("analyze", "dataset statistics for an annotation directory");
  analyze->add_option("ann-dir", analyze_args.ann_dir, "VisDrone annotations directory")->required();
  analyze->add_option("--min-px", analyze_args.min_px, "tiny-label pixel cut");
  analyze->add_option("--ref-long-side", analyze_args.ref_long_side, "reference long side");
  analyze->add_option("--sizes", analyze_args.sizes_csv, "image_id,width,height CSV manifest");
  analyze->add_option("--images", analyze_args.image_dir, "directory of PPM/PGM images");
  analyze->add_flag("--json", analyze_args.as_json, "emit JSON instead of text");

  MaskTinyArgs mask_args;
  CLI::App* mask = app.add_subcommand("mask-tiny", "gray out sub-pixel labels and filter annotations");
  mask->add_option("image", mask_args.image_path, "PPM/PGM image")->required();
  mask->add_option("annotations", mask_args.ann_path, "VisDrone annotation file")->required();
  mask->add_option("--out", mask_args.out_dir, "output directory")->required();
  mask->add_option("--min-px", mask_args.min_px, "tiny-label pixel cut");
  mask->add_option("--ref-long-side", mask_args.ref_long_side, "reference long side");

  AugmentArgs aug_args;
  CLI::App* aug = app.add_subcommand("augment", "mosaic/blend/warp/color pipeline over samples");
  aug->add_option("config", aug_args.config_path, "JSON augmentation config ('-' for defaults)")
      ->required();
  aug->add_option("seed", aug_args.seed, "RNG seed")->required();
  aug->add_option("samples", aug_args.sample_paths,
                  "4 or 8 PPM images, each with a sibling .txt annotation file")
      ->required();
  aug->add_option("--out", aug_args.out_dir, "output directory")->required();

  FuseArgs fuse_args;
  CLI::App* fuse = app.add_subcommand("fuse", "merge detection files with NMS, soft-NMS, or WBF");
  fuse->add_option("--method", fuse_args.method, "nms, soft-nms, or wbf")
      ->check(CLI::IsMember({"nms", "soft-nms", "wbf"}));
  fuse->add_option("--iou-thr", fuse_args.iou_thr, "overlap threshold");
  fuse->add_option("--score-thr", fuse_args.score_thr, "discard floor");
  fuse->add_option("--sigma", fuse_args.sigma, "gaussian soft-NMS sigma");
  fuse->add_option("--softnms-mode", fuse_args.softnms_mode, "linear or gaussian")
      ->check(CLI::IsMember({"linear", "gaussian"}));
  fuse->add_option("--weights", fuse_args.weights, "per-file model weights (wbf)")->delimiter(',');
  fuse->add_flag("--agnostic", fuse_args.agnostic, "ignore class ids");
  fuse->add_flag("--conf-rescale", fuse_args.conf_rescale, "min(T,N)/T confidence rescale (wbf)");
  fuse->add_option("--out", fuse_args.out_path, "output file (default stdout)");
  fuse->add_option("det-files", fuse_args.det_files, "detection JSONL files")->required();

  int plan_width = 0, plan_height = 0;
  std::vector<double> plan_scales;
  CLI::App* plan = app.add_subcommand("tta-plan", "emit the 6-view test-time plan as JSON");
  plan->add_option("--width", plan_width, "source image width")->required();
  plan->add_option("--height", plan_height, "source image height")->required();
  plan->add_option("--scales", plan_scales, "override the 3 scales")->delimiter(',');

  TtaFuseArgs tta_args;
  CLI::App* ttaf = app.add_subcommand("tta-fuse", "fuse per-view detection files back to the source frame");
  ttaf->add_option("--iou-thr", tta_args.iou_thr, "NMS overlap threshold");
  ttaf->add_option("--score-thr", tta_args.score_thr, "discard floor");
  ttaf->add_flag("--agnostic", tta_args.agnostic, "ignore class ids");
  ttaf->add_option("--out", tta_args.out_path, "output file (default stdout)");
  ttaf->add_option("det-files", tta_args.det_files,
                   "detection JSONL files carrying view headers")
      ->required();

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "COCO-style evaluation against VisDrone ground truth");
  eval->add_option("detections", eval_args.det_path, "detection JSONL file")->required();
  eval->add_option("gt-dir", eval_args.gt_dir, "VisDrone annotations directory")->required();
  eval->add_option("--iou-range", eval_args.iou_range, "lo:step:hi IoU thresholds");
  eval->add_option("--max-dets", eval_args.max_dets, "per-image detection cap");
  eval->add_flag("--json", eval_args.as_json, "emit JSON instead of text");

  ConfusionArgs conf_args;
  CLI::App* conf = app.add_subcommand("confusion", "confusion matrix as CSV");
  conf->add_option("detections", conf_args.det_path, "detection JSONL file")->required();
  conf->add_option("gt-dir", conf_args.gt_dir, "VisDrone annotations directory")->required();
  conf->add_option("--iou", conf_args.iou_thr, "match threshold");
  conf->add_option("--conf", conf_args.conf_thr, "confidence cut");
  conf->add_option("--classes", conf_args.num_classes, "number of class ids");

  RescoreArgs res_args;
  CLI::App* res = app.add_subcommand("rescore", "second-stage patch classifier over detections");
  res->add_option("detections", res_args.det_path, "detection JSONL file")->required();
  res->add_option("image-dir", res_args.image_dir, "directory of PPM/PGM frames")->required();
  res->add_option("classifier", res_args.clf_path, "trained classifier parameters")->required();
  res->add_option("--min-conf", res_args.min_conf, "label-replacement confidence floor");
  res->add_flag("--no-replace", res_args.no_replace, "never replace class labels");
  res->add_option("--combine", res_args.combine, "keep or multiply detection scores")
      ->check(CLI::IsMember({"keep", "multiply"}));
  res->add_option("--out", res_args.out_path, "output file (default stdout)");

  TrainClassifierArgs train_args;
  CLI::App* train = app.add_subcommand("train-classifier", "train the patch classifier used by rescore");
  train->add_option("samples", train_args.sample_paths,
                    "PPM images, each with a sibling .txt annotation file")
      ->required();
  train->add_option("--out", train_args.out_path, "output parameters file")->required();
  train->add_option("--epochs", train_args.epochs, "training epochs");
  train->add_option("--lr", train_args.lr, "learning rate");
  train->add_option("--hidden", train_args.hidden, "hidden width (0 = linear)");
  train->add_option("--seed", train_args.seed, "RNG seed");

  std::string cw_ann_dir;
  double cw_exponent = 0.5;
  bool cw_json = false;
  CLI::App* cw = app.add_subcommand("class-weights", "inverse-frequency class weights from label counts");
  cw->add_option("ann-dir", cw_ann_dir, "VisDrone annotations directory")->required();
  cw->add_option("--exponent", cw_exponent, "frequency exponent");
  cw->add_flag("--json", cw_json, "emit JSON instead of text");

  double bc_eps = 1e-5, bc_tol = 1e-4;
  std::uint64_t bc_seed = 7;
  CLI::App* bc = app.add_subcommand("blocks-check", "finite-difference checks for the model blocks");
  bc->add_option("--eps", bc_eps, "finite-difference step");
  bc->add_option("--tol", bc_tol, "max relative error allowed");
  bc->add_option("--seed", bc_seed, "RNG seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    std::cerr << json{{"error", e.what()}}.dump() << std::endl;
    return e.get_exit_code();
  }

  try {
    if (*analyze) run_analyze(analyze_args);
    if (*mask) run_mask_tiny(mask_args);
    if (*aug) run_augment(aug_args);
    if (*fuse) run_fuse(fuse_args);
    if (*plan) run_tta_plan(plan_width, plan_height, plan_scales);
    if (*ttaf) run_tta_fuse(tta_args);
    if (*eval) run_eval(eval_args);
    if (*conf) run_confusion(conf_args);
    if (*res) run_rescore(res_args);
    if (*train) run_train_classifier(train_args);
    if (*cw) run_class_weights(cw_ann_dir, cw_exponent, cw_json);
    if (*bc) return run_blocks_check(bc_eps, bc_tol, bc_seed);
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}}.dump() << std::endl;
    return 1;
  }
  return 0;
}
