#pragma once

#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "erank/models.hpp"
#include "erank/scene.hpp"
#include "erank/stationary.hpp"

namespace erank {

// Masked-reconstruction training: every iteration samples a batch of patches,
// computes residuals, derives per-pixel distractiveness D with the configured
// method and takes one gradient step on the D-masked loss. End-of-training
// evaluation re-derives full-frame D maps from the frozen model (residuals
// ranked per frame) and computes the metric suite against ground truth.

struct TrainLogRecord {
  int iteration = 0;  // 1-based
  double loss = 0.0;  // masked loss at the pre-step parameters
  double included_fraction = 0.0;
  double included_fraction_static = 0.0;  // among ground-truth-static batch pixels
  double probe_psnr = std::numeric_limits<double>::quiet_NaN();  // every 100 iters
};

struct TrainLog {
  std::vector<TrainLogRecord> records;
};

struct RunResult {
  FieldModel model;  // float32-quantized, identical to the saved checkpoint
  ClassifierParams classifier;
  bool has_classifier = false;
  TrainLog log;
  std::vector<DistractorMask> d_maps;  // per frame, end of training
  MetricsRecord metrics;
  TrainConfig config;
};

RunResult train_run(const Scene& scene, const TrainConfig& cfg);

// Full-frame D per frame from a frozen model: residuals are ranked over the
// whole frame, entities are clustered within non-overlapping k x k tiles (the
// last row/column shifts inward when the frame is not divisible by k), and
// dilation of the excluded set runs on the assembled frame. method=mse yields
// all-ones maps; robust-patch runs its stage pipeline on the whole frame.
std::vector<DistractorMask> eval_full_frame_D(const FieldModel& model, const Scene& scene,
                                              const TrainConfig& cfg,
                                              const ClassifierParams* classifier);

// Foreground PSNR scores the render against the true background inside each
// frame's mover mask (averaged over frames that have movers); background PSNR
// uses the complements. IoU terms compare the D=0 set with the mover mask and
// the D=1 set with its complement, averaged over frames.
MetricsRecord evaluate_metrics(const FieldModel& model, const Scene& scene,
                               const std::vector<DistractorMask>& d_maps);

// One independent train_run per value, ascending order. Every run re-derives
// its streams from the same base seed, so runs differ only in the swept
// parameter.
std::vector<std::pair<double, MetricsRecord>> threshold_sweep(
    const Scene& scene, const TrainConfig& base, const std::vector<double>& thresholds);
std::vector<std::pair<int, MetricsRecord>> patch_size_sweep(const Scene& scene,
                                                            const TrainConfig& base,
                                                            const std::vector<int>& sizes);

// Run directory: config.json, model.ckpt, classifier.ckpt (entity runs),
// train_log.csv, metrics.json, d_maps/NNN.png, render.png.
void save_run(const std::string& dir, const RunResult& result, const std::string& scene_dir);

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

}  // namespace erank
