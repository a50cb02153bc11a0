#include "erank/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>

#include "erank/earr.hpp"
#include "erank/patch_baseline.hpp"
#include "erank/rng.hpp"

namespace erank {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kProbeInterval = 100;
constexpr int kProbePixels = 1024;

FieldModel make_model(const Scene& scene, const TrainConfig& cfg) {
  if (cfg.model == ModelKind::kGrid) return GridModel(scene.width(), scene.height());
  return FourierModel(scene.width(), scene.height(), cfg.fourier_order);
}

std::vector<Pixel> sample_probe_set(Rng& rng, int width, int height) {
  const Eigen::Index total = static_cast<Eigen::Index>(width) * height;
  const Eigen::Index want = std::min<Eigen::Index>(kProbePixels, total);
  std::vector<int> idx(static_cast<std::size_t>(total));
  for (Eigen::Index i = 0; i < total; ++i) idx[static_cast<std::size_t>(i)] = static_cast<int>(i);
  for (Eigen::Index i = 0; i < want; ++i) {
    const auto j = i + static_cast<Eigen::Index>(rng.next_below(static_cast<std::uint64_t>(total - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  std::vector<Pixel> probe(static_cast<std::size_t>(want));
  for (Eigen::Index i = 0; i < want; ++i)
    probe[static_cast<std::size_t>(i)] = {idx[static_cast<std::size_t>(i)] % width,
                                          idx[static_cast<std::size_t>(i)] / width};
  return probe;
}

double probe_psnr(const FieldModel& model, const Scene& scene, const std::vector<Pixel>& probe,
                  const FourierBasis* basis) {
  const Matrix3Xd pred = model_forward(model, probe, basis);
  double sum = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const Eigen::Index p = scene.truth_background.index(probe[i].x, probe[i].y);
    sum += (pred.col(static_cast<Eigen::Index>(i)) - scene.truth_background.rgb.col(p)).squaredNorm();
  }
  const double mse = std::max(sum / (3.0 * static_cast<double>(probe.size())), kMseFloor);
  return 10.0 * std::log10(1.0 / mse);
}

// Per-frame, per-entity feature table; rows are computed lazily per frame.
class FeatureTable {
 public:
  FeatureTable(const Scene& scene) : scene_(scene), cache_(scene.frames.size()) {}

  const std::map<int, FeatureVec>& frame(int f) {
    auto& slot = cache_[static_cast<std::size_t>(f)];
    if (!slot.has_value())
      slot = extract_features_all(scene_.frames[static_cast<std::size_t>(f)],
                                  scene_.entity_maps[static_cast<std::size_t>(f)]);
    return *slot;
  }

 private:
  const Scene& scene_;
  std::vector<std::optional<std::map<int, FeatureVec>>> cache_;
};

// Pools per-pixel stuff votes over every frame of the scene.
PseudoLabelSet pooled_bootstrap_labels(const Scene& scene) {
  std::map<int, std::pair<long, long>> votes;
  for (std::size_t f = 0; f < scene.frames.size(); ++f) {
    const EntityMap& emap = scene.entity_maps[f];
    const BinaryMask& sem = scene.pseudo_semantics[f];
    for (Eigen::Index p = 0; p < emap.pixel_count(); ++p) {
      const std::int32_t id = emap.ids(p);
      if (id == kUnassignedId) continue;
      auto& [stuff, total] = votes[id];
      if (sem.bits(p)) ++stuff;
      ++total;
    }
  }
  PseudoLabelSet out;
  for (const auto& [id, v] : votes) {
    PseudoLabel lab;
    lab.vote_fraction = static_cast<double>(v.first) / static_cast<double>(v.second);
    lab.label = lab.vote_fraction > 0.5 ? 1 : 0;
    out.emplace(id, lab);
  }
  return out;
}

ClassifierParams pretrain_classifier(const Scene& scene, const TrainConfig& cfg,
                                     FeatureTable& features, Rng& rng) {
  ClassifierParams params = init_classifier(rng);
  const PseudoLabelSet labels = pooled_bootstrap_labels(scene);

  std::vector<std::pair<FeatureVec, int>> dataset;
  for (std::size_t f = 0; f < scene.frames.size(); ++f)
    for (const auto& [id, feat] : features.frame(static_cast<int>(f)))
      dataset.emplace_back(feat, labels.at(id).label);

  MatrixXd x(12, static_cast<Eigen::Index>(dataset.size()));
  VectorXd y(static_cast<Eigen::Index>(dataset.size()));
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    x.col(static_cast<Eigen::Index>(i)) = dataset[i].first;
    y(static_cast<Eigen::Index>(i)) = dataset[i].second;
  }

  for (int step = 0; step < cfg.classifier_pretrain_steps; ++step) {
    const VectorXd p = classifier_forward_batch(params, x);
    Eigen::Index correct = 0;
    for (Eigen::Index i = 0; i < y.size(); ++i)
      if ((p(i) >= 0.5) == (y(i) > 0.5)) ++correct;
    if (static_cast<double>(correct) >= cfg.classifier_pretrain_accuracy *
                                             static_cast<double>(y.size()))
      break;
    classifier_train_step(params, x, y, cfg.classifier_pretrain_lr);
  }
  return params;
}

// Tile origins covering [0, extent) with stride k; a final tile at extent-k
// keeps coverage exact when extent is not a multiple of k.
std::vector<int> tile_origins(int extent, int k) {
  std::vector<int> origins;
  for (int o = 0; o + k <= extent; o += k) origins.push_back(o);
  if (origins.empty() || origins.back() + k < extent) origins.push_back(extent - k);
  return origins;
}

}  // namespace

RunResult train_run(const Scene& scene, const TrainConfig& cfg) {
  validate(cfg);
  require(cfg.patch_size <= std::min(scene.width(), scene.height()),
          "train: patch_size exceeds frame dims");

  Rng sampling_rng = derive_stream(cfg.seed, "sampling");
  Rng init_rng = derive_stream(cfg.seed, "init");
  Rng classifier_rng = derive_stream(cfg.seed, "classifier");

  RunResult result;
  result.config = cfg;
  result.model = make_model(scene, cfg);

  std::optional<FourierBasis> basis;
  const FourierBasis* basis_ptr = nullptr;
  if (cfg.model == ModelKind::kFourier) {
    basis = make_fourier_basis(scene.width(), scene.height(), cfg.fourier_order);
    basis_ptr = &*basis;
  }

  const std::vector<Pixel> probe = sample_probe_set(init_rng, scene.width(), scene.height());

  FeatureTable features(scene);
  if (cfg.method == Method::kEntity) {
    result.classifier = pretrain_classifier(scene, cfg, features, classifier_rng);
    result.has_classifier = true;
  }

  const int k = cfg.patch_size;
  const int patches = cfg.patches_per_iteration();
  const double lr = cfg.effective_lr();
  const EarrConfig earr_cfg{k, cfg.threshold, cfg.dilation_enabled};
  std::vector<FeatureVec> finetune_window;

  for (int iter = 1; iter <= cfg.iterations; ++iter) {
    const PatchBatch batch =
        sample_patches(sampling_rng, scene.width(), scene.height(),
                       scene.config.frame_count, k, patches);

    const Eigen::Index n = batch.pixel_count();
    std::vector<Pixel> coords(static_cast<std::size_t>(n));
    Matrix3Xd targets(3, n);
    ArrayXb is_static(n);
    for (std::size_t q = 0; q < batch.patches.size(); ++q) {
      const auto& patch = batch.patches[q];
      const Image& frame = scene.frames[static_cast<std::size_t>(patch.frame)];
      const BinaryMask& movers = scene.mover_masks[static_cast<std::size_t>(patch.frame)];
      Eigen::Index i = static_cast<Eigen::Index>(q) * k * k;
      for (int oy = 0; oy < k; ++oy)
        for (int ox = 0; ox < k; ++ox, ++i) {
          const Pixel p{patch.x + ox, patch.y + oy};
          coords[static_cast<std::size_t>(i)] = p;
          targets.col(i) = frame.rgb.col(frame.index(p.x, p.y));
          is_static(i) = !movers.at(p.x, p.y);
        }
    }

    const Matrix3Xd pred = model_forward(result.model, coords, basis_ptr);
    VectorXd residuals(n);
    for (Eigen::Index i = 0; i < n; ++i)
      residuals(i) = (targets.col(i) - pred.col(i)).squaredNorm();

    ArrayXb d;
    switch (cfg.method) {
      case Method::kMse:
        d = ArrayXb::Constant(n, true);
        break;
      case Method::kRobustPatch: {
        d.resize(n);
        for (std::size_t q = 0; q < batch.patches.size(); ++q) {
          const Eigen::Index base = static_cast<Eigen::Index>(q) * k * k;
          const ArrayXd field = residuals.segment(base, k * k).array();
          d.segment(base, k * k) = patch_weights(field, k, k, cfg.baseline);
        }
        break;
      }
      case Method::kEarr:
      case Method::kEntity: {
        const VectorXd ranks = rank_normalize(residuals);
        const auto stats = entity_cluster_average(ranks, scene.entity_maps, batch);
        if (cfg.method == Method::kEarr) {
          d = label_distractors(stats, [](int, int) { return 0; }, earr_cfg, batch);
        } else {
          auto stuff_of = [&](int patch_index, int entity) {
            const int f = batch.patches[static_cast<std::size_t>(patch_index)].frame;
            const double p = classifier_forward(result.classifier, features.frame(f).at(entity));
            return p >= 0.5 ? 1 : 0;
          };
          d = label_distractors(stats, stuff_of, earr_cfg, batch);
          for (const auto& s : stats) {
            if (s.mean_rank > cfg.threshold) continue;  // rank-determined D=1 only
            const int f = batch.patches[static_cast<std::size_t>(s.patch_index)].frame;
            finetune_window.push_back(features.frame(f).at(s.entity_id));
          }
        }
        break;
      }
    }

    if (cfg.method == Method::kEntity && iter % cfg.finetune_interval == 0) {
      cooperative_finetune(result.classifier, finetune_window, cfg.classifier_finetune_lr);
      finetune_window.clear();
    }

    const double loss = masked_step(result.model, targets, coords, d, lr, basis_ptr);
    if (!std::isfinite(loss))
      throw std::runtime_error("train: loss diverged (non-finite) at iteration " +
                               std::to_string(iter));

    TrainLogRecord rec;
    rec.iteration = iter;
    rec.loss = loss;
    rec.included_fraction = static_cast<double>(d.count()) / static_cast<double>(n);
    Eigen::Index static_total = 0, static_included = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!is_static(i)) continue;
      ++static_total;
      if (d(i)) ++static_included;
    }
    rec.included_fraction_static =
        static_total > 0
            ? static_cast<double>(static_included) / static_cast<double>(static_total)
            : std::numeric_limits<double>::quiet_NaN();
    if (iter % kProbeInterval == 0)
      rec.probe_psnr = probe_psnr(result.model, scene, probe, basis_ptr);
    result.log.records.push_back(rec);
  }

  // Checkpoints store float32; evaluate on the quantized parameters so that
  // saving and re-loading reproduces the metrics bit for bit.
  quantize_params_f32(result.model);
  if (result.has_classifier) quantize_classifier_f32(result.classifier);

  result.d_maps = eval_full_frame_D(result.model, scene, cfg,
                                    result.has_classifier ? &result.classifier : nullptr);
  result.metrics = evaluate_metrics(result.model, scene, result.d_maps);
  return result;
}

std::vector<DistractorMask> eval_full_frame_D(const FieldModel& model, const Scene& scene,
                                              const TrainConfig& cfg,
                                              const ClassifierParams* classifier) {
  const int w = scene.width(), h = scene.height();
  const Image render = render_full(model, w, h);
  std::vector<DistractorMask> maps;
  maps.reserve(scene.frames.size());

  if (cfg.method == Method::kMse) {
    for (std::size_t f = 0; f < scene.frames.size(); ++f)
      maps.emplace_back(w, h, true);
    return maps;
  }

  FeatureTable features(scene);
  const int k = cfg.patch_size;
  const std::vector<int> xs = tile_origins(w, k), ys = tile_origins(h, k);

  for (std::size_t f = 0; f < scene.frames.size(); ++f) {
    const Image& frame = scene.frames[f];
    ArrayXd field(frame.pixel_count());
    for (Eigen::Index p = 0; p < frame.pixel_count(); ++p)
      field(p) = (frame.rgb.col(p) - render.rgb.col(p)).squaredNorm();

    DistractorMask d(w, h, true);
    if (cfg.method == Method::kRobustPatch) {
      d.bits = patch_weights(field, w, h, cfg.baseline);
      maps.push_back(std::move(d));
      continue;
    }

    // Frame-global ranking; per-tile entity clustering and thresholding.
    const VectorXd frame_ranks = rank_normalize(field.matrix());
    PatchBatch batch;
    batch.k = k;
    for (int y : ys)
      for (int x : xs) batch.patches.push_back({static_cast<int>(f), x, y});
    VectorXd ranks(batch.pixel_count());
    std::vector<Pixel> batch_pixels(static_cast<std::size_t>(batch.pixel_count()));
    {
      Eigen::Index i = 0;
      for (const auto& patch : batch.patches)
        for (int oy = 0; oy < k; ++oy)
          for (int ox = 0; ox < k; ++ox, ++i) {
            batch_pixels[static_cast<std::size_t>(i)] = {patch.x + ox, patch.y + oy};
            ranks(i) = frame_ranks(static_cast<Eigen::Index>(patch.y + oy) * w + patch.x + ox);
          }
    }
    const auto stats = entity_cluster_average(ranks, scene.entity_maps, batch);
    std::function<int(int, int)> stuff_of = [](int, int) { return 0; };
    if (cfg.method == Method::kEntity) {
      require(classifier != nullptr, "eval: entity method needs a classifier");
      stuff_of = [&](int, int entity) {
        const double p =
            classifier_forward(*classifier, features.frame(static_cast<int>(f)).at(entity));
        return p >= 0.5 ? 1 : 0;
      };
    }
    // Dilation is applied on the assembled frame below, not per tile.
    const EarrConfig tile_cfg{k, cfg.threshold, false};
    const ArrayXb batch_d = label_distractors(stats, stuff_of, tile_cfg, batch);
    for (Eigen::Index i = 0; i < batch.pixel_count(); ++i)
      d.set(batch_pixels[static_cast<std::size_t>(i)].x, batch_pixels[static_cast<std::size_t>(i)].y,
            batch_d(i));

    if (cfg.dilation_enabled) {
      BinaryMask excluded(w, h);
      excluded.bits = !d.bits;
      d.bits = !dilate3x3(excluded).bits;
    }
    maps.push_back(std::move(d));
  }
  return maps;
}

MetricsRecord evaluate_metrics(const FieldModel& model, const Scene& scene,
                               const std::vector<DistractorMask>& d_maps) {
  require(d_maps.size() == scene.frames.size(), "evaluate_metrics: d map count mismatch");
  const Image render = render_full(model, scene.width(), scene.height());

  MetricsRecord rec;
  rec.psnr_overall = psnr(render, scene.truth_background);

  double fg_sum = 0.0, bg_sum = 0.0, iou0_sum = 0.0, iou1_sum = 0.0, incl_sum = 0.0;
  int fg_frames = 0;
  const auto frames = static_cast<int>(scene.frames.size());
  for (int f = 0; f < frames; ++f) {
    const BinaryMask& movers = scene.mover_masks[static_cast<std::size_t>(f)];
    BinaryMask statics(movers.width, movers.height);
    statics.bits = !movers.bits;
    if (movers.bits.any()) {
      fg_sum += psnr(render, scene.truth_background, &movers);
      ++fg_frames;
    }
    bg_sum += psnr(render, scene.truth_background, &statics);

    const DistractorMask& d = d_maps[static_cast<std::size_t>(f)];
    BinaryMask excluded(d.width, d.height);
    excluded.bits = !d.bits;
    iou0_sum += iou(excluded, movers);
    iou1_sum += iou(d, statics);
    incl_sum += static_cast<double>(d.bits.count()) / static_cast<double>(d.pixel_count());
  }
  rec.psnr_foreground = fg_frames > 0 ? fg_sum / fg_frames : kPsnrCeiling;
  rec.psnr_background = bg_sum / frames;
  rec.iou_d0 = iou0_sum / frames;
  rec.iou_d1 = iou1_sum / frames;
  rec.included_pixel_fraction = incl_sum / frames;
  return rec;
}

std::vector<std::pair<double, MetricsRecord>> threshold_sweep(
    const Scene& scene, const TrainConfig& base, const std::vector<double>& thresholds) {
  std::vector<double> sorted = thresholds;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::pair<double, MetricsRecord>> table;
  for (double t : sorted) {
    TrainConfig cfg = base;
    cfg.threshold = t;
    table.emplace_back(t, train_run(scene, cfg).metrics);
  }
  return table;
}

std::vector<std::pair<int, MetricsRecord>> patch_size_sweep(const Scene& scene,
                                                            const TrainConfig& base,
                                                            const std::vector<int>& sizes) {
  std::vector<int> sorted = sizes;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::pair<int, MetricsRecord>> table;
  for (int k : sorted) {
    TrainConfig cfg = base;
    cfg.patch_size = k;
    table.emplace_back(k, train_run(scene, cfg).metrics);
  }
  return table;
}

// --- Serialization -----------------------------------------------------------

json train_config_to_json(const TrainConfig& cfg) {
  return json{{"method", to_string(cfg.method)},
              {"model", to_string(cfg.model)},
              {"fourier_order", cfg.fourier_order},
              {"iterations", cfg.iterations},
              {"learning_rate", cfg.learning_rate},
              {"effective_learning_rate", cfg.effective_lr()},
              {"batch_pixels", cfg.batch_pixels},
              {"patch_size", cfg.patch_size},
              {"threshold", cfg.threshold},
              {"finetune_interval", cfg.finetune_interval},
              {"dilation_enabled", cfg.dilation_enabled},
              {"seed", cfg.seed},
              {"classifier_pretrain_lr", cfg.classifier_pretrain_lr},
              {"classifier_finetune_lr", cfg.classifier_finetune_lr},
              {"classifier_pretrain_steps", cfg.classifier_pretrain_steps},
              {"classifier_pretrain_accuracy", cfg.classifier_pretrain_accuracy},
              {"baseline_inlier_quantile", cfg.baseline.inlier_quantile},
              {"baseline_smoothing_majority", cfg.baseline.smoothing_majority}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig cfg;
  cfg.method = method_from_string(j.at("method"));
  cfg.model = model_kind_from_string(j.at("model"));
  cfg.fourier_order = j.at("fourier_order");
  cfg.iterations = j.at("iterations");
  cfg.learning_rate = j.at("learning_rate");
  cfg.batch_pixels = j.at("batch_pixels");
  cfg.patch_size = j.at("patch_size");
  cfg.threshold = j.at("threshold");
  cfg.finetune_interval = j.at("finetune_interval");
  cfg.dilation_enabled = j.at("dilation_enabled");
  cfg.seed = j.at("seed");
  cfg.classifier_pretrain_lr = j.at("classifier_pretrain_lr");
  cfg.classifier_finetune_lr = j.at("classifier_finetune_lr");
  cfg.classifier_pretrain_steps = j.at("classifier_pretrain_steps");
  cfg.classifier_pretrain_accuracy = j.at("classifier_pretrain_accuracy");
  cfg.baseline.inlier_quantile = j.at("baseline_inlier_quantile");
  cfg.baseline.smoothing_majority = j.at("baseline_smoothing_majority");
  return cfg;
}

namespace {

std::string map_name(int f) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%03d", f);
  return std::string(buf) + ".png";
}

}  // namespace

void save_run(const std::string& dir, const RunResult& result, const std::string& scene_dir) {
  fs::create_directories(dir);
  fs::create_directories(fs::path(dir) / "d_maps");

  json cfg;
  cfg["scene_dir"] = scene_dir;
  cfg["train"] = train_config_to_json(result.config);
  cfg["eval_ranking"] = "per-frame";  // end-of-training D uses frame-global ranks
  {
    std::ofstream out(fs::path(dir) / "config.json");
    out << cfg.dump(2) << "\n";
    require(static_cast<bool>(out), "run: cannot write config.json");
  }

  save_model((fs::path(dir) / "model.ckpt").string(), result.model);
  if (result.has_classifier)
    save_classifier((fs::path(dir) / "classifier.ckpt").string(), result.classifier);

  {
    std::ofstream out(fs::path(dir) / "train_log.csv");
    out << "iteration,loss,included_fraction,included_fraction_static,probe_psnr\n";
    char line[256];
    for (const TrainLogRecord& r : result.log.records) {
      if (std::isnan(r.probe_psnr))
        std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g,\n", r.iteration, r.loss,
                      r.included_fraction, r.included_fraction_static);
      else
        std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g,%.17g\n", r.iteration, r.loss,
                      r.included_fraction, r.included_fraction_static, r.probe_psnr);
      out << line;
    }
    require(static_cast<bool>(out), "run: cannot write train_log.csv");
  }

  {
    json m;
    m["psnr_overall"] = result.metrics.psnr_overall;
    m["psnr_foreground"] = result.metrics.psnr_foreground;
    m["psnr_background"] = result.metrics.psnr_background;
    m["iou_d0"] = result.metrics.iou_d0;
    m["iou_d1"] = result.metrics.iou_d1;
    m["included_pixel_fraction"] = result.metrics.included_pixel_fraction;
    std::ofstream out(fs::path(dir) / "metrics.json");
    out << m.dump(2) << "\n";
    require(static_cast<bool>(out), "run: cannot write metrics.json");
  }

  for (std::size_t f = 0; f < result.d_maps.size(); ++f)
    save_mask_png((fs::path(dir) / "d_maps" / map_name(static_cast<int>(f))).string(),
                  result.d_maps[f]);
  save_image_png((fs::path(dir) / "render.png").string(),
                 render_full(result.model, model_width(result.model), model_height(result.model)));
}

}  // namespace erank
