#pragma once

#include <string>
#include <variant>
#include <vector>

#include "erank/image.hpp"
#include "erank/patch_baseline.hpp"
#include "erank/types.hpp"

namespace erank {

// Capacity-controlled 2D background models standing in for a radiance field.
// GridModel stores one RGB parameter per pixel and converges uniformly fast;
// FourierModel regresses RGB from a truncated 2D Fourier basis and cannot
// represent detail beyond its order, so high-frequency regions keep large
// residuals for a long time.

struct GridModel {
  int width = 0;
  int height = 0;
  Matrix3Xd params;  // raw values; may leave [0,1] during optimization

  GridModel() = default;
  GridModel(int w, int h, double fill = 0.5)
      : width(w), height(h), params(Matrix3Xd::Constant(3, static_cast<Eigen::Index>(w) * h, fill)) {}
};

struct FourierModel {
  int width = 0;
  int height = 0;
  int order = 8;      // M harmonics per axis; feature dim (2M+1)^2
  Matrix3Xd coeffs;   // 3 x (2M+1)^2

  FourierModel() = default;
  // Initialized to constant gray 0.5 (constant basis function coefficient).
  FourierModel(int w, int h, int m) : width(w), height(h), order(m) {
    const Eigen::Index f = feature_dim(m);
    coeffs = Matrix3Xd::Zero(3, f);
    coeffs.col(0).setConstant(0.5);
  }

  static Eigen::Index feature_dim(int m) {
    const Eigen::Index axis = 2 * static_cast<Eigen::Index>(m) + 1;
    return axis * axis;
  }
};

using FieldModel = std::variant<GridModel, FourierModel>;

// Per-axis basis {1, cos(2*pi*m*u), sin(2*pi*m*u)}_{m=1..M} with u=(x+0.5)/W,
// tensored over x and y; feature index = iy*(2M+1)+ix. The per-pixel columns
// for a whole grid, precomputed once per training run.
struct FourierBasis {
  int width = 0;
  int height = 0;
  int order = 0;
  MatrixXd phi;  // (2M+1)^2 x (width*height)
};

FourierBasis make_fourier_basis(int width, int height, int order);

// Predicted colors at the given coordinates, channels clamped to [0,1].
Matrix3Xd model_forward(const FieldModel& model, const std::vector<Pixel>& coords,
                        const FourierBasis* basis = nullptr);

// Mean masked squared-error loss: mean over d=1 pixels of the summed squared
// channel error between target and prediction; 0 when nothing is included.
double masked_loss(const FieldModel& model, const Matrix3Xd& targets,
                   const std::vector<Pixel>& coords, const ArrayXb& d,
                   const FourierBasis* basis = nullptr);

// One gradient-descent step on the loss above; no-op when every d is 0.
// Returns the loss at the pre-step parameters. Only parameters reached by an
// included pixel change.
double masked_step(FieldModel& model, const Matrix3Xd& targets,
                   const std::vector<Pixel>& coords, const ArrayXb& d, double lr,
                   const FourierBasis* basis = nullptr);

// Spec-shaped single-frame form: targets are read from `frame` at `coords`.
double masked_step(FieldModel& model, const Image& frame, const std::vector<Pixel>& coords,
                   const ArrayXb& d, double lr);

// Forward evaluation at every pixel of the model's own domain.
Image render_full(const FieldModel& model, int width, int height,
                  const FourierBasis* basis = nullptr);

int model_width(const FieldModel& model);
int model_height(const FieldModel& model);

// Rounds every parameter to its float32 representation. Checkpoints store
// float32, so end-of-training evaluation runs on the quantized parameters to
// make saving and reloading a fixed point.
void quantize_params_f32(FieldModel& model);

// Flat binary container: u32 little-endian header length, JSON header, then
// little-endian float32 payload. Header: {"kind":"grid"|"fourier", "width",
// "height", ["order"]}. Payload: RGB triples per pixel (grid, row-major
// pixels) or per feature column (fourier).
void save_model(const std::string& path, const FieldModel& model);
FieldModel load_model(const std::string& path);

// --- Training configuration --------------------------------------------------

enum class Method { kMse, kRobustPatch, kEarr, kEntity };
enum class ModelKind { kGrid, kFourier };

std::string to_string(Method m);
std::string to_string(ModelKind m);
Method method_from_string(const std::string& s);
ModelKind model_kind_from_string(const std::string& s);

struct TrainConfig {
  Method method = Method::kEntity;
  ModelKind model = ModelKind::kFourier;
  int fourier_order = 8;
  int iterations = 3000;
  // 0 selects the per-model default: batch_pixels/8 for grid, 0.05 for fourier.
  double learning_rate = 0.0;
  int batch_pixels = 4096;  // B; positive multiple of patch_size^2
  int patch_size = 32;      // k
  double threshold = 0.8;   // T
  int finetune_interval = 100;
  bool dilation_enabled = true;
  std::uint64_t seed = 0;
  double classifier_pretrain_lr = 1e-2;
  double classifier_finetune_lr = 1e-3;
  int classifier_pretrain_steps = 5000;
  double classifier_pretrain_accuracy = 0.98;
  PatchBaselineConfig baseline;

  double effective_lr() const {
    if (learning_rate > 0.0) return learning_rate;
    return model == ModelKind::kGrid ? static_cast<double>(batch_pixels) / 8.0 : 0.05;
  }
  int patches_per_iteration() const { return batch_pixels / (patch_size * patch_size); }
};

void validate(const TrainConfig& cfg);

}  // namespace erank
