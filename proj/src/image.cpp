#include "erank/image.hpp"

#include <cmath>

#include "erank/png_io.hpp"

namespace erank {

double psnr(const Image& pred, const Image& truth, const BinaryMask* region) {
  require(pred.width == truth.width && pred.height == truth.height,
          "psnr: image dimensions differ");
  if (region != nullptr)
    require(region->width == pred.width && region->height == pred.height,
            "psnr: region dimensions differ");

  double sum = 0.0;
  Eigen::Index selected = 0;
  const Eigen::Index n = pred.pixel_count();
  for (Eigen::Index p = 0; p < n; ++p) {
    if (region != nullptr && !region->bits(p)) continue;
    sum += (pred.rgb.col(p) - truth.rgb.col(p)).squaredNorm();
    ++selected;
  }
  require(selected > 0, "psnr: region selects no pixels");

  const double mse = std::max(sum / (3.0 * static_cast<double>(selected)), kMseFloor);
  return 10.0 * std::log10(1.0 / mse);
}

double iou(const BinaryMask& a, const BinaryMask& b) {
  require(a.width == b.width && a.height == b.height, "iou: mask dimensions differ");
  const Eigen::Index inter = (a.bits && b.bits).count();
  const Eigen::Index uni = (a.bits || b.bits).count();
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

BinaryMask dilate3x3(const BinaryMask& m) {
  BinaryMask out(m.width, m.height, false);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      if (!m.at(x, y)) continue;
      const int x0 = std::max(0, x - 1), x1 = std::min(m.width - 1, x + 1);
      const int y0 = std::max(0, y - 1), y1 = std::min(m.height - 1, y + 1);
      for (int yy = y0; yy <= y1; ++yy)
        for (int xx = x0; xx <= x1; ++xx) out.set(xx, yy, true);
    }
  }
  return out;
}

void save_image_png(const std::string& path, const Image& img) {
  png::Buffer buf;
  buf.width = img.width;
  buf.height = img.height;
  buf.format = png::Format::kRgb8;
  buf.rgb8.resize(static_cast<std::size_t>(img.pixel_count()) * 3);
  for (Eigen::Index p = 0; p < img.pixel_count(); ++p)
    for (int c = 0; c < 3; ++c)
      buf.rgb8[3 * static_cast<std::size_t>(p) + c] =
          static_cast<std::uint8_t>(std::lround(255.0 * clamp01(img.rgb(c, p))));
  png::write_file(path, buf);
}

Image load_image_png(const std::string& path) {
  const png::Buffer buf = png::read_file(path);
  if (buf.format != png::Format::kRgb8) throw std::runtime_error("expected RGB png: " + path);
  Image img(buf.width, buf.height);
  for (Eigen::Index p = 0; p < img.pixel_count(); ++p)
    for (int c = 0; c < 3; ++c)
      img.rgb(c, p) = buf.rgb8[3 * static_cast<std::size_t>(p) + c] / 255.0;
  return img;
}

void save_mask_png(const std::string& path, const BinaryMask& m) {
  png::Buffer buf;
  buf.width = m.width;
  buf.height = m.height;
  buf.format = png::Format::kGray8;
  buf.gray8.resize(static_cast<std::size_t>(m.pixel_count()));
  for (Eigen::Index p = 0; p < m.pixel_count(); ++p) buf.gray8[p] = m.bits(p) ? 255 : 0;
  png::write_file(path, buf);
}

BinaryMask load_mask_png(const std::string& path) {
  const png::Buffer buf = png::read_file(path);
  if (buf.format != png::Format::kGray8) throw std::runtime_error("expected gray png: " + path);
  BinaryMask m(buf.width, buf.height);
  for (Eigen::Index p = 0; p < m.pixel_count(); ++p) m.bits(p) = buf.gray8[p] >= 128;
  return m;
}

}  // namespace erank
