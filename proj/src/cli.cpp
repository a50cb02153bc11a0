#include "erank/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>

#include "erank/trainer.hpp"

namespace erank {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(2) << "\n";
  require(static_cast<bool>(out), "cli: cannot write " + path.string());
}

Image mask_to_image(const BinaryMask& m) {
  Image img(m.width, m.height);
  for (Eigen::Index p = 0; p < m.pixel_count(); ++p)
    img.rgb.col(p).setConstant(m.bits(p) ? 1.0 : 0.0);
  return img;
}

// Grid of equally sized images with white separators.
Image montage(const std::vector<std::vector<Image>>& rows, int sep = 2) {
  const int cell_w = rows.at(0).at(0).width, cell_h = rows.at(0).at(0).height;
  const int cols = static_cast<int>(rows.at(0).size());
  const int n_rows = static_cast<int>(rows.size());
  Image out(cols * cell_w + (cols - 1) * sep, n_rows * cell_h + (n_rows - 1) * sep, 1.0);
  for (int r = 0; r < n_rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const Image& cell = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      require(cell.width == cell_w && cell.height == cell_h, "montage: cell size mismatch");
      for (int y = 0; y < cell_h; ++y)
        for (int x = 0; x < cell_w; ++x)
          out.rgb.col(out.index(c * (cell_w + sep) + x, r * (cell_h + sep) + y)) =
              cell.rgb.col(cell.index(x, y));
    }
  return out;
}

std::string metrics_csv_header() {
  return "psnr_overall,psnr_foreground,psnr_background,iou_d0,iou_d1,included_pixel_fraction";
}

std::string metrics_csv_row(const MetricsRecord& m) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", m.psnr_overall,
                m.psnr_foreground, m.psnr_background, m.iou_d0, m.iou_d1,
                m.included_pixel_fraction);
  return buf;
}

void add_scene_options(CLI::App* cmd, SceneConfig& cfg) {
  cmd->add_option("--width", cfg.width, "Frame width in pixels");
  cmd->add_option("--height", cfg.height, "Frame height in pixels");
  cmd->add_option("--frames", cfg.frame_count, "Number of frames");
  cmd->add_option("--static-entities", cfg.static_entity_count, "Static entity count");
  cmd->add_option("--movers", cfg.mover_count, "Mover count");
  cmd->add_option("--mover-min-size", cfg.mover_min_size, "Smallest mover extent");
  cmd->add_option("--mover-max-size", cfg.mover_max_size, "Largest mover extent");
  cmd->add_option("--texture-flat", cfg.texture_flat, "Fraction of flat cells");
  cmd->add_option("--texture-gradient", cfg.texture_gradient, "Fraction of gradient cells");
  cmd->add_option("--texture-highfreq", cfg.texture_highfreq, "Fraction of checker cells");
  cmd->add_option("--static-thing-fraction", cfg.static_thing_fraction,
                  "Fraction of static entities that are things");
  cmd->add_option("--semantic-noise", cfg.semantic_noise_rate, "Per-pixel label flip rate");
  cmd->add_option("--boundary-erosion", cfg.boundary_erosion, "Unassigned ring width");
  cmd->add_option("--seed", cfg.seed, "Scene seed");
}

struct TrainOptions {
  TrainConfig cfg;
  std::string method = "entity";
  std::string model = "fourier";
};

void add_train_options(CLI::App* cmd, TrainOptions& opt, bool with_method) {
  if (with_method)
    cmd->add_option("--method", opt.method, "mse | robust-patch | earr | entity")
        ->check(CLI::IsMember({"mse", "robust-patch", "earr", "entity"}));
  cmd->add_option("--model", opt.model, "grid | fourier")
      ->check(CLI::IsMember({"grid", "fourier"}));
  cmd->add_option("--fourier-order", opt.cfg.fourier_order, "Harmonics per axis");
  cmd->add_option("--iterations", opt.cfg.iterations, "Training iterations");
  cmd->add_option("--lr", opt.cfg.learning_rate, "Learning rate (0 = per-model default)");
  cmd->add_option("--batch-pixels", opt.cfg.batch_pixels, "Samples per iteration (B)");
  cmd->add_option("--patch-size", opt.cfg.patch_size, "Patch side (k)");
  cmd->add_option("--threshold", opt.cfg.threshold, "Mean-rank threshold (T)");
  cmd->add_option("--finetune-interval", opt.cfg.finetune_interval,
                  "Iterations between classifier fine-tunes");
  cmd->add_flag("--dilation,!--no-dilation", opt.cfg.dilation_enabled,
                "Dilate the excluded region 3x3");
  cmd->add_option("--seed", opt.cfg.seed, "Training seed");
  cmd->add_option("--baseline-quantile", opt.cfg.baseline.inlier_quantile,
                  "Patch baseline inlier quantile (q)");
  cmd->add_option("--baseline-majority", opt.cfg.baseline.smoothing_majority,
                  "Patch baseline smoothing majority (s)");
  cmd->add_option("--classifier-pretrain-lr", opt.cfg.classifier_pretrain_lr,
                  "Classifier pretraining learning rate");
  cmd->add_option("--classifier-finetune-lr", opt.cfg.classifier_finetune_lr,
                  "Classifier fine-tuning learning rate");
  cmd->add_option("--classifier-pretrain-steps", opt.cfg.classifier_pretrain_steps,
                  "Classifier pretraining step cap");
}

TrainConfig resolve(const TrainOptions& opt) {
  TrainConfig cfg = opt.cfg;
  cfg.method = method_from_string(opt.method);
  cfg.model = model_kind_from_string(opt.model);
  return cfg;
}

int cmd_generate(const SceneConfig& cfg, const std::string& out) {
  const Scene scene = generate_scene(cfg);
  save_scene(out, scene);
  return 0;
}

int cmd_train(const std::string& scene_dir, const TrainOptions& opt, const std::string& out) {
  const Scene scene = load_scene(scene_dir);
  const TrainConfig cfg = resolve(opt);
  const RunResult result = train_run(scene, cfg);
  save_run(out, result, scene_dir);
  return 0;
}

int cmd_eval(const std::string& run_dir, const std::string& scene_override,
             const std::string& out) {
  std::ifstream in(fs::path(run_dir) / "config.json");
  require(static_cast<bool>(in), "eval: cannot open " + run_dir + "/config.json");
  const json run_cfg = json::parse(in);
  const TrainConfig cfg = train_config_from_json(run_cfg.at("train"));
  const std::string scene_dir =
      scene_override.empty() ? run_cfg.at("scene_dir").get<std::string>() : scene_override;

  const Scene scene = load_scene(scene_dir);
  RunResult result;
  result.config = cfg;
  result.model = load_model((fs::path(run_dir) / "model.ckpt").string());
  if (cfg.method == Method::kEntity) {
    result.classifier = load_classifier((fs::path(run_dir) / "classifier.ckpt").string());
    result.has_classifier = true;
  }
  result.d_maps = eval_full_frame_D(result.model, scene, cfg,
                                    result.has_classifier ? &result.classifier : nullptr);
  result.metrics = evaluate_metrics(result.model, scene, result.d_maps);

  fs::create_directories(out);
  json echo;
  echo["run_dir"] = run_dir;
  echo["scene_dir"] = scene_dir;
  echo["train"] = train_config_to_json(cfg);
  write_json(fs::path(out) / "config.json", echo);
  json m;
  m["psnr_overall"] = result.metrics.psnr_overall;
  m["psnr_foreground"] = result.metrics.psnr_foreground;
  m["psnr_background"] = result.metrics.psnr_background;
  m["iou_d0"] = result.metrics.iou_d0;
  m["iou_d1"] = result.metrics.iou_d1;
  m["included_pixel_fraction"] = result.metrics.included_pixel_fraction;
  write_json(fs::path(out) / "metrics.json", m);
  fs::create_directories(fs::path(out) / "d_maps");
  for (std::size_t f = 0; f < result.d_maps.size(); ++f) {
    char name[16];
    std::snprintf(name, sizeof name, "%03d.png", static_cast<int>(f));
    save_mask_png((fs::path(out) / "d_maps" / name).string(), result.d_maps[f]);
  }
  return 0;
}

int cmd_sweep(const std::string& scene_dir, const TrainOptions& opt, const std::string& param,
              const std::vector<double>& values, const std::vector<std::uint64_t>& seeds,
              int jobs, const std::string& out) {
  require(param == "T" || param == "k", "sweep: --param must be T or k");
  require(!values.empty(), "sweep: need at least one value");
  const Scene scene = load_scene(scene_dir);
  const TrainConfig base = resolve(opt);
  const std::vector<std::uint64_t> seed_list = seeds.empty() ? std::vector<std::uint64_t>{base.seed} : seeds;

  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());

  struct Job {
    double value;
    std::uint64_t seed;
    TrainConfig cfg;
    std::string dir;
  };
  std::vector<Job> job_list;
  for (std::uint64_t seed : seed_list)
    for (double v : sorted) {
      Job job;
      job.value = v;
      job.seed = seed;
      job.cfg = base;
      job.cfg.seed = seed;
      if (param == "T") job.cfg.threshold = v;
      else {
        job.cfg.patch_size = static_cast<int>(v);
        require(v == std::floor(v) && v >= 2, "sweep: k values must be integers >= 2");
      }
      char name[64];
      std::snprintf(name, sizeof name, "%s%g_seed%llu", param.c_str(), v,
                    static_cast<unsigned long long>(seed));
      job.dir = (fs::path(out) / "runs" / name).string();
      job_list.push_back(std::move(job));
    }

  fs::create_directories(fs::path(out) / "runs");
  std::vector<MetricsRecord> results(job_list.size());
  const int workers = std::max(1, jobs);
  std::size_t next = 0;
  while (next < job_list.size()) {
    std::vector<std::future<void>> wave;
    for (int w = 0; w < workers && next < job_list.size(); ++w, ++next) {
      const std::size_t i = next;
      wave.push_back(std::async(std::launch::async, [&, i] {
        const RunResult r = train_run(scene, job_list[i].cfg);
        save_run(job_list[i].dir, r, scene_dir);
        results[i] = r.metrics;
      }));
    }
    for (auto& f : wave) f.get();
  }

  json echo;
  echo["scene_dir"] = scene_dir;
  echo["param"] = param;
  echo["values"] = sorted;
  echo["seeds"] = seed_list;
  echo["train"] = train_config_to_json(base);
  write_json(fs::path(out) / "config.json", echo);

  std::ofstream csv(fs::path(out) / "sweep.csv");
  csv << "param,value,seed," << metrics_csv_header() << "\n";
  for (std::size_t i = 0; i < job_list.size(); ++i) {
    char prefix[64];
    std::snprintf(prefix, sizeof prefix, "%s,%.17g,%llu,", param.c_str(), job_list[i].value,
                  static_cast<unsigned long long>(job_list[i].seed));
    csv << prefix << metrics_csv_row(results[i]) << "\n";
  }
  require(static_cast<bool>(csv), "sweep: cannot write sweep.csv");
  return 0;
}

int cmd_compare(const std::string& scene_dir, const TrainOptions& opt, const std::string& out) {
  const Scene scene = load_scene(scene_dir);
  const TrainConfig base = resolve(opt);

  const std::vector<Method> methods = {Method::kMse, Method::kRobustPatch, Method::kEarr,
                                       Method::kEntity};
  fs::create_directories(out);

  json echo;
  echo["scene_dir"] = scene_dir;
  echo["train"] = train_config_to_json(base);
  write_json(fs::path(out) / "config.json", echo);

  std::vector<std::vector<Image>> panel;
  panel.push_back({scene.frames.at(0), scene.truth_background});

  std::ofstream csv(fs::path(out) / "compare.csv");
  csv << "method," << metrics_csv_header() << "\n";
  for (Method m : methods) {
    TrainConfig cfg = base;
    cfg.method = m;
    const RunResult r = train_run(scene, cfg);
    save_run((fs::path(out) / to_string(m)).string(), r, scene_dir);
    csv << to_string(m) << "," << metrics_csv_row(r.metrics) << "\n";
    panel.push_back({render_full(r.model, scene.width(), scene.height()),
                     mask_to_image(r.d_maps.at(0))});
  }
  require(static_cast<bool>(csv), "compare: cannot write compare.csv");

  save_image_png((fs::path(out) / "panel.png").string(), montage(panel));
  return 0;
}

}  // namespace

int run_command(const std::vector<std::string>& args) {
  CLI::App app{"entity-wise residual-rank masking laboratory"};
  app.require_subcommand(1);
  // Config keys live in a section named after the subcommand ([generate],
  // [train], ...). Fallthrough lets --config appear after the subcommand.
  app.set_config("--config", "", "TOML config file with per-subcommand sections");
  app.fallthrough();

  // generate
  SceneConfig scene_cfg;
  std::string gen_out;
  auto* gen = app.add_subcommand("generate", "Generate a synthetic scene directory");
  add_scene_options(gen, scene_cfg);
  gen->add_option("--out", gen_out, "Output scene directory")->required();

  // train
  TrainOptions train_opt;
  std::string train_scene, train_out;
  auto* train = app.add_subcommand("train", "Train a background model on a scene");
  train->add_option("--scene", train_scene, "Scene directory")->required();
  train->add_option("--out", train_out, "Output run directory")->required();
  add_train_options(train, train_opt, true);

  // eval
  std::string eval_run, eval_scene, eval_out;
  auto* eval = app.add_subcommand("eval", "Recompute metrics from a run directory");
  eval->add_option("--run", eval_run, "Run directory produced by train")->required();
  eval->add_option("--scene", eval_scene, "Scene directory (default: from run config)");
  eval->add_option("--out", eval_out, "Output directory")->required();

  // sweep
  TrainOptions sweep_opt;
  std::string sweep_scene, sweep_out, sweep_param = "T";
  std::vector<double> sweep_values;
  std::vector<std::uint64_t> sweep_seeds;
  int sweep_jobs = 1;
  auto* sweep = app.add_subcommand("sweep", "Threshold or patch-size sweep");
  sweep->add_option("--scene", sweep_scene, "Scene directory")->required();
  sweep->add_option("--out", sweep_out, "Output directory")->required();
  sweep->add_option("--param", sweep_param, "Swept parameter: T or k")
      ->check(CLI::IsMember({"T", "k"}));
  sweep->add_option("--values", sweep_values, "Swept values")->required()->delimiter(',');
  sweep->add_option("--seeds", sweep_seeds, "Seeds to average over")->delimiter(',');
  sweep->add_option("--jobs", sweep_jobs, "Parallel runs");
  add_train_options(sweep, sweep_opt, true);

  // compare
  TrainOptions cmp_opt;
  std::string cmp_scene, cmp_out;
  auto* cmp = app.add_subcommand("compare", "Run all four methods on one scene");
  cmp->add_option("--scene", cmp_scene, "Scene directory")->required();
  cmp->add_option("--out", cmp_out, "Output directory")->required();
  add_train_options(cmp, cmp_opt, false);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (gen->parsed()) return cmd_generate(scene_cfg, gen_out);
    if (train->parsed()) return cmd_train(train_scene, train_opt, train_out);
    if (eval->parsed()) return cmd_eval(eval_run, eval_scene, eval_out);
    if (sweep->parsed())
      return cmd_sweep(sweep_scene, sweep_opt, sweep_param, sweep_values, sweep_seeds,
                       sweep_jobs, sweep_out);
    if (cmp->parsed()) return cmd_compare(cmp_scene, cmp_opt, cmp_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

int run_command(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_command(args);
}

}  // namespace erank
