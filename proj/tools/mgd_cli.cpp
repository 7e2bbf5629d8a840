// Copyright 2026 The MGD Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Command-line front end: detect, eval, synth, train-classifier, bench.
// Exit status: 0 success, 1 other failure, 2 parse or configuration error,
// 3 backend error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "mgd/mgd.hpp"

namespace fs = std::filesystem;
using namespace mgd;

namespace {

constexpr int kExitParse = 2;
constexpr int kExitBackend = 3;

PipelineConfig config_or_default(const std::string& path) { return path.empty() ? PipelineConfig{} : load_config(path); }

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InvalidInput("cannot create directory " + dir + ": " + ec.message());
}

std::string frame_name(std::int64_t index, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06lld.%s", static_cast<long long>(index), ext);
  return buf;
}

int run_detect(const std::string& seq, const std::string& config, const std::string& out, const std::string& annotate) {
  const PipelineConfig cfg = config_or_default(config);
  const std::vector<Frame> frames = load_sequence(seq);
  if (!annotate.empty()) ensure_dir(annotate);
  Pipeline p(cfg);
  DetectionSet dets;
  auto emit = [&](const FrameResult& r) {
    dets[r.frame_index] = r.detections;
    if (annotate.empty()) return;
    std::vector<BoundingBox> boxes;
    for (const Detection& d : r.detections) boxes.push_back(d.box);
    write_annotated_ppm((fs::path(annotate) / frame_name(r.frame_index, "ppm")).string(),
                        frames[static_cast<std::size_t>(r.frame_index)], boxes);
  };
  for (const Frame& f : frames) {
    if (auto r = p.push_frame(f)) emit(*r);
  }
  for (const FrameResult& r : p.flush()) emit(r);
  save_detections(out, dets);
  std::size_t n = 0;
  for (const auto& [frame, list] : dets) n += list.size();
  std::cout << "frames " << frames.size() << ", detections " << n << "\n";
  return 0;
}

int run_eval(const std::string& det, const std::string& gt, double iou_threshold) {
  EvalOptions opt;
  opt.iou_threshold = iou_threshold;
  const EvalResult r = evaluate(load_detections(det), load_annotations(gt), opt);
  std::printf("precision %.4f\nrecall %.4f\nf1 %.4f\nap %.4f\ntp %zu\nfp %zu\nfn %zu\n", r.precision, r.recall, r.f1,
              r.ap, r.tp, r.fp, r.fn);
  return 0;
}

int run_synth(const std::string& config, std::uint64_t seed, const std::string& out) {
  std::ifstream in(config);
  if (!in) throw ParseError(config, 0, "cannot open synth config");
  const SynthConfig cfg = parse_synth_config(in, config);
  const SynthClip clip = synth_generate(cfg, seed);
  ensure_dir(out);
  for (const Frame& f : clip.frames) write_png((fs::path(out) / frame_name(f.index(), "png")).string(), f);
  save_annotations((fs::path(out) / "gt.csv").string(), clip.truth);
  save_annotations((fs::path(out) / "distractors.csv").string(), clip.distractor_truth);
  std::cout << "wrote " << clip.frames.size() << " frames to " << out << "\n";
  return 0;
}

// Labels file: one `<file name>,<0|1>` record per line, names relative to the
// crops directory. Crops of any size are resized to the classifier input.
std::vector<LabeledCrop> load_labeled_crops(const std::string& crops, const std::string& labels) {
  std::ifstream in(labels);
  if (!in) throw ParseError(labels, 0, "cannot open labels file");
  std::vector<LabeledCrop> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) throw ParseError(labels, line_no, "expected <file>,<label>");
    const std::string name = line.substr(0, comma);
    const std::string label = line.substr(comma + 1);
    if (label != "0" && label != "1") throw ParseError(labels, line_no, "label must be 0 or 1");
    Frame crop = read_image(fs::path(crops) / name, 0);
    if (crop.width() != kClassifierSide || crop.height() != kClassifierSide) {
      crop = resize_bilinear(crop, kClassifierSide, kClassifierSide);
    }
    out.push_back({std::move(crop), label == "1" ? 1 : 0});
  }
  return out;
}

int run_train(const std::string& crops, const std::string& labels, const std::string& out) {
  const auto samples = load_labeled_crops(crops, labels);
  const LinearClassifier model = train_linear_classifier(samples);
  model.save(out);
  std::printf("samples %zu, log-loss %.4f\n", samples.size(), log_loss(model, samples));
  return 0;
}

int run_bench(const std::string& seq, const std::string& config) {
  const PipelineConfig cfg = config_or_default(config);
  const std::vector<Frame> frames = load_sequence(seq);
  Pipeline p(cfg);
  const double fps = measure_fps([&](const Frame& f) { p.push_frame(f); }, std::span<const Frame>(frames));
  std::printf("frames %zu\nresolution %dx%d\nfps %.2f\n", frames.size(), frames.front().width(),
              frames.front().height(), fps);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Moving-camera small drone detector"};
  app.require_subcommand(1);

  std::string seq, config, out, annotate, det, gt, crops, labels;
  double iou_threshold = 0.25;
  std::uint64_t seed = 0;

  CLI::App* detect = app.add_subcommand("detect", "Run the detector over a frame sequence");
  detect->add_option("seq-dir", seq, "Directory of %06d.pgm or %06d.png frames")->required();
  detect->add_option("--config", config, "Pipeline config file");
  detect->add_option("--out", out, "Detections CSV")->required();
  detect->add_option("--annotate", annotate, "Write frames with drawn boxes here");

  CLI::App* eval = app.add_subcommand("eval", "Score detections against ground truth");
  eval->add_option("--det", det, "Detections CSV")->required();
  eval->add_option("--gt", gt, "Ground-truth CSV")->required();
  eval->add_option("--iou", iou_threshold, "Match threshold (strict)")->check(CLI::Range(0.0, 1.0));

  CLI::App* synth = app.add_subcommand("synth", "Render a synthetic clip with ground truth");
  synth->add_option("--config", config, "Synth config file")->required();
  synth->add_option("--seed", seed, "Random seed");
  synth->add_option("--out", out, "Output directory")->required();

  CLI::App* train = app.add_subcommand("train-classifier", "Fit the linear crop classifier");
  train->add_option("--crops", crops, "Directory of crop images")->required();
  train->add_option("--labels", labels, "CSV of <file>,<0|1>")->required();
  train->add_option("--out", out, "Model file")->required();

  CLI::App* bench = app.add_subcommand("bench", "Report pipeline throughput on a sequence");
  bench->add_option("seq-dir", seq, "Directory of %06d.pgm or %06d.png frames")->required();
  bench->add_option("--config", config, "Pipeline config file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitParse;
  }

  try {
    if (*detect) return run_detect(seq, config, out, annotate);
    if (*eval) return run_eval(det, gt, iou_threshold);
    if (*synth) return run_synth(config, seed, out);
    if (*train) return run_train(crops, labels, out);
    if (*bench) return run_bench(seq, config);
  } catch (const BackendError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return kExitBackend;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitParse;
  } catch (const InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitParse;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
