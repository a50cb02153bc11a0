#pragma once

#include <string>

#include "erank/types.hpp"

namespace erank {

// RGB image with channels in [0, 1]. Column p of `rgb` is the pixel at
// (p % width, p / width), i.e. row-major pixel order.
struct Image {
  int width = 0;
  int height = 0;
  Matrix3Xd rgb;

  Image() = default;
  Image(int w, int h, double fill = 0.0)
      : width(w), height(h), rgb(Matrix3Xd::Constant(3, static_cast<Eigen::Index>(w) * h, fill)) {}

  Eigen::Index pixel_count() const { return static_cast<Eigen::Index>(width) * height; }
  Eigen::Index index(int x, int y) const { return static_cast<Eigen::Index>(y) * width + x; }
};

// One boolean per pixel, same indexing as Image.
struct BinaryMask {
  int width = 0;
  int height = 0;
  ArrayXb bits;

  BinaryMask() = default;
  BinaryMask(int w, int h, bool fill = false)
      : width(w), height(h), bits(ArrayXb::Constant(static_cast<Eigen::Index>(w) * h, fill)) {}

  Eigen::Index pixel_count() const { return static_cast<Eigen::Index>(width) * height; }
  Eigen::Index index(int x, int y) const { return static_cast<Eigen::Index>(y) * width + x; }
  bool at(int x, int y) const { return bits(index(x, y)); }
  void set(int x, int y, bool v) { bits(index(x, y)) = v; }
};

// Full-frame distractiveness map: true means D=1 (included in training).
using DistractorMask = BinaryMask;

struct MetricsRecord {
  double psnr_overall = 0.0;
  double psnr_foreground = 0.0;
  double psnr_background = 0.0;
  double iou_d0 = 0.0;
  double iou_d1 = 0.0;
  double included_pixel_fraction = 0.0;
};

// PSNR ceiling implied by the MSE clamp below: 10*log10(1/1e-10) = 100 dB.
inline constexpr double kPsnrCeiling = 100.0;
inline constexpr double kMseFloor = 1e-10;

// Peak signal-to-noise ratio over the selected pixels (peak 1.0). MSE is the
// mean squared per-channel error, clamped below at 1e-10 so identical images
// report 100 dB instead of infinity. `region` selects pixels; null = all.
double psnr(const Image& pred, const Image& truth, const BinaryMask* region = nullptr);

// Intersection over union of two masks; 1.0 when both are empty.
double iou(const BinaryMask& a, const BinaryMask& b);

// Morphological dilation with a 3x3 structuring element, clipped at borders.
BinaryMask dilate3x3(const BinaryMask& m);

// --- PNG serialization ------------------------------------------------------
// Images: 8-bit RGB, channel byte = round(255*v). Masks: 8-bit gray {0,255}.

void save_image_png(const std::string& path, const Image& img);
Image load_image_png(const std::string& path);
void save_mask_png(const std::string& path, const BinaryMask& m);
BinaryMask load_mask_png(const std::string& path);

}  // namespace erank
