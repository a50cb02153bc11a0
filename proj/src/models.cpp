#include "erank/models.hpp"

#include <cmath>
#include <numbers>

#include "erank/checkpoint.hpp"

namespace erank {

namespace {

VectorXd axis_basis(double u, int order) {
  VectorXd b(2 * order + 1);
  b(0) = 1.0;
  for (int m = 1; m <= order; ++m) {
    const double a = 2.0 * std::numbers::pi * m * u;
    b(2 * m - 1) = std::cos(a);
    b(2 * m) = std::sin(a);
  }
  return b;
}

VectorXd feature_column(const FourierModel& model, int x, int y) {
  const VectorXd bx = axis_basis((x + 0.5) / model.width, model.order);
  const VectorXd by = axis_basis((y + 0.5) / model.height, model.order);
  const int axis = 2 * model.order + 1;
  VectorXd phi(FourierModel::feature_dim(model.order));
  for (int iy = 0; iy < axis; ++iy)
    for (int ix = 0; ix < axis; ++ix) phi(iy * axis + ix) = by(iy) * bx(ix);
  return phi;
}

void check_coords(int width, int height, const std::vector<Pixel>& coords) {
  for (const Pixel& p : coords)
    require(p.x >= 0 && p.x < width && p.y >= 0 && p.y < height,
            "model: coordinate out of bounds");
}

// Gathers the basis columns of the included pixels. `basis`, when given, must
// match the model's domain.
MatrixXd gather_phi(const FourierModel& model, const std::vector<Pixel>& coords,
                    const std::vector<int>& included, const FourierBasis* basis) {
  MatrixXd phi(FourierModel::feature_dim(model.order), included.size());
  if (basis != nullptr) {
    require(basis->width == model.width && basis->height == model.height &&
                basis->order == model.order,
            "model: basis does not match model domain");
    for (std::size_t j = 0; j < included.size(); ++j) {
      const Pixel& p = coords[static_cast<std::size_t>(included[j])];
      phi.col(static_cast<Eigen::Index>(j)) =
          basis->phi.col(static_cast<Eigen::Index>(p.y) * model.width + p.x);
    }
  } else {
    for (std::size_t j = 0; j < included.size(); ++j) {
      const Pixel& p = coords[static_cast<std::size_t>(included[j])];
      phi.col(static_cast<Eigen::Index>(j)) = feature_column(model, p.x, p.y);
    }
  }
  return phi;
}

}  // namespace

FourierBasis make_fourier_basis(int width, int height, int order) {
  FourierBasis basis;
  basis.width = width;
  basis.height = height;
  basis.order = order;
  FourierModel probe;
  probe.width = width;
  probe.height = height;
  probe.order = order;
  basis.phi.resize(FourierModel::feature_dim(order), static_cast<Eigen::Index>(width) * height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      basis.phi.col(static_cast<Eigen::Index>(y) * width + x) = feature_column(probe, x, y);
  return basis;
}

Matrix3Xd model_forward(const FieldModel& model, const std::vector<Pixel>& coords,
                        const FourierBasis* basis) {
  Matrix3Xd out(3, static_cast<Eigen::Index>(coords.size()));
  if (const auto* grid = std::get_if<GridModel>(&model)) {
    check_coords(grid->width, grid->height, coords);
    for (std::size_t i = 0; i < coords.size(); ++i) {
      const auto col =
          grid->params.col(static_cast<Eigen::Index>(coords[i].y) * grid->width + coords[i].x);
      for (int c = 0; c < 3; ++c) out(c, static_cast<Eigen::Index>(i)) = clamp01(col(c));
    }
    return out;
  }
  const auto& fourier = std::get<FourierModel>(model);
  check_coords(fourier.width, fourier.height, coords);
  std::vector<int> all(coords.size());
  for (std::size_t i = 0; i < coords.size(); ++i) all[i] = static_cast<int>(i);
  const MatrixXd phi = gather_phi(fourier, coords, all, basis);
  Matrix3Xd raw = fourier.coeffs * phi;
  for (Eigen::Index i = 0; i < raw.cols(); ++i)
    for (int c = 0; c < 3; ++c) out(c, i) = clamp01(raw(c, i));
  return out;
}

double masked_loss(const FieldModel& model, const Matrix3Xd& targets,
                   const std::vector<Pixel>& coords, const ArrayXb& d,
                   const FourierBasis* basis) {
  require(static_cast<Eigen::Index>(coords.size()) == d.size() && targets.cols() == d.size(),
          "masked_loss: batch/d length mismatch");
  const Matrix3Xd pred = model_forward(model, coords, basis);
  double sum = 0.0;
  Eigen::Index n = 0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (!d(i)) continue;
    sum += (targets.col(i) - pred.col(i)).squaredNorm();
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

double masked_step(FieldModel& model, const Matrix3Xd& targets,
                   const std::vector<Pixel>& coords, const ArrayXb& d, double lr,
                   const FourierBasis* basis) {
  require(static_cast<Eigen::Index>(coords.size()) == d.size() && targets.cols() == d.size(),
          "masked_step: batch/d length mismatch");

  std::vector<int> included;
  included.reserve(coords.size());
  for (Eigen::Index i = 0; i < d.size(); ++i)
    if (d(i)) included.push_back(static_cast<int>(i));
  if (included.empty()) return 0.0;
  const double inv_n = 1.0 / static_cast<double>(included.size());

  if (auto* grid = std::get_if<GridModel>(&model)) {
    check_coords(grid->width, grid->height, coords);
    double loss = 0.0;
    // Accumulate first so duplicated pixels within one batch combine their
    // gradients before the single parameter update.
    std::vector<std::pair<Eigen::Index, Eigen::Vector3d>> grads;
    grads.reserve(included.size());
    for (int i : included) {
      const Pixel& p = coords[static_cast<std::size_t>(i)];
      const Eigen::Index px = static_cast<Eigen::Index>(p.y) * grid->width + p.x;
      Eigen::Vector3d g;
      for (int c = 0; c < 3; ++c) {
        const double raw = grid->params(c, px);
        const double pred = clamp01(raw);
        const double diff = pred - targets(c, i);
        loss += diff * diff;
        const bool pass = raw > 0.0 && raw < 1.0;  // clamp subgradient
        g(c) = pass ? 2.0 * diff * inv_n : 0.0;
      }
      grads.emplace_back(px, g);
    }
    for (const auto& [px, g] : grads) grid->params.col(px) -= lr * g;
    return loss * inv_n;
  }

  auto& fourier = std::get<FourierModel>(model);
  check_coords(fourier.width, fourier.height, coords);
  const MatrixXd phi = gather_phi(fourier, coords, included, basis);
  Matrix3Xd raw = fourier.coeffs * phi;
  Matrix3Xd diff(3, raw.cols());
  double loss = 0.0;
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    const Eigen::Index i = included[static_cast<std::size_t>(j)];
    for (int c = 0; c < 3; ++c) {
      const double pred = clamp01(raw(c, j));
      const double e = pred - targets(c, i);
      loss += e * e;
      const bool pass = raw(c, j) > 0.0 && raw(c, j) < 1.0;
      diff(c, j) = pass ? e : 0.0;
    }
  }
  fourier.coeffs.noalias() -= (2.0 * lr * inv_n) * (diff * phi.transpose());
  return loss * inv_n;
}

double masked_step(FieldModel& model, const Image& frame, const std::vector<Pixel>& coords,
                   const ArrayXb& d, double lr) {
  require(frame.width == model_width(model) && frame.height == model_height(model),
          "masked_step: frame dimensions differ from model domain");
  Matrix3Xd targets(3, static_cast<Eigen::Index>(coords.size()));
  for (std::size_t i = 0; i < coords.size(); ++i)
    targets.col(static_cast<Eigen::Index>(i)) = frame.rgb.col(frame.index(coords[i].x, coords[i].y));
  return masked_step(model, targets, coords, d, lr);
}

Image render_full(const FieldModel& model, int width, int height, const FourierBasis* basis) {
  require(width == model_width(model) && height == model_height(model),
          "render_full: dimensions differ from model domain");
  Image img(width, height);
  if (const auto* grid = std::get_if<GridModel>(&model)) {
    for (Eigen::Index p = 0; p < img.pixel_count(); ++p)
      for (int c = 0; c < 3; ++c) img.rgb(c, p) = clamp01(grid->params(c, p));
    return img;
  }
  const auto& fourier = std::get<FourierModel>(model);
  if (basis != nullptr) {
    require(basis->width == width && basis->height == height && basis->order == fourier.order,
            "render_full: basis mismatch");
    Matrix3Xd raw = fourier.coeffs * basis->phi;
    for (Eigen::Index p = 0; p < img.pixel_count(); ++p)
      for (int c = 0; c < 3; ++c) img.rgb(c, p) = clamp01(raw(c, p));
    return img;
  }
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const Eigen::Vector3d raw = fourier.coeffs * feature_column(fourier, x, y);
      for (int c = 0; c < 3; ++c) img.rgb(c, img.index(x, y)) = clamp01(raw(c));
    }
  return img;
}

int model_width(const FieldModel& model) {
  return std::visit([](const auto& m) { return m.width; }, model);
}

int model_height(const FieldModel& model) {
  return std::visit([](const auto& m) { return m.height; }, model);
}

void quantize_params_f32(FieldModel& model) {
  auto quantize = [](Matrix3Xd& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i)
      m.data()[i] = static_cast<double>(static_cast<float>(m.data()[i]));
  };
  if (auto* grid = std::get_if<GridModel>(&model)) quantize(grid->params);
  else quantize(std::get<FourierModel>(model).coeffs);
}

void save_model(const std::string& path, const FieldModel& model) {
  nlohmann::json header;
  const Matrix3Xd* params = nullptr;
  if (const auto* grid = std::get_if<GridModel>(&model)) {
    header = {{"kind", "grid"}, {"width", grid->width}, {"height", grid->height}};
    params = &grid->params;
  } else {
    const auto& fourier = std::get<FourierModel>(model);
    header = {{"kind", "fourier"},
              {"width", fourier.width},
              {"height", fourier.height},
              {"order", fourier.order}};
    params = &fourier.coeffs;
  }
  std::vector<float> data(static_cast<std::size_t>(params->size()));
  for (Eigen::Index i = 0; i < params->size(); ++i)
    data[static_cast<std::size_t>(i)] = static_cast<float>(params->data()[i]);
  write_checkpoint(path, header, data);
}

FieldModel load_model(const std::string& path) {
  const auto [header, data] = read_checkpoint(path);
  const std::string kind = header.at("kind");
  auto fill = [&](Matrix3Xd& m) {
    require(static_cast<std::size_t>(m.size()) == data.size(), "load_model: payload size mismatch");
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = data[static_cast<std::size_t>(i)];
  };
  if (kind == "grid") {
    GridModel grid(header.at("width"), header.at("height"));
    fill(grid.params);
    return grid;
  }
  if (kind == "fourier") {
    FourierModel fourier(header.at("width"), header.at("height"), header.at("order"));
    fill(fourier.coeffs);
    return fourier;
  }
  throw std::runtime_error("load_model: unknown model kind: " + kind);
}

std::string to_string(Method m) {
  switch (m) {
    case Method::kMse: return "mse";
    case Method::kRobustPatch: return "robust-patch";
    case Method::kEarr: return "earr";
    case Method::kEntity: return "entity";
  }
  return "?";
}

std::string to_string(ModelKind m) { return m == ModelKind::kGrid ? "grid" : "fourier"; }

Method method_from_string(const std::string& s) {
  if (s == "mse") return Method::kMse;
  if (s == "robust-patch") return Method::kRobustPatch;
  if (s == "earr") return Method::kEarr;
  if (s == "entity") return Method::kEntity;
  throw std::invalid_argument("unknown method: " + s);
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "grid") return ModelKind::kGrid;
  if (s == "fourier") return ModelKind::kFourier;
  throw std::invalid_argument("unknown model kind: " + s);
}

void validate(const TrainConfig& cfg) {
  require(cfg.iterations >= 1, "config: iterations must be positive");
  require(cfg.patch_size >= 2, "config: patch_size must be >= 2");
  require(cfg.batch_pixels > 0 && cfg.batch_pixels % (cfg.patch_size * cfg.patch_size) == 0,
          "config: batch_pixels must be a positive multiple of patch_size^2");
  require(cfg.threshold > 0.0 && cfg.threshold < 1.0, "config: threshold must be in (0,1)");
  require(cfg.finetune_interval >= 1, "config: finetune_interval must be >= 1");
  require(cfg.learning_rate >= 0.0, "config: learning rate must be >= 0");
  require(cfg.fourier_order >= 0, "config: fourier order must be >= 0");
  require(cfg.baseline.inlier_quantile > 0.0 && cfg.baseline.inlier_quantile < 1.0,
          "config: baseline quantile must be in (0,1)");
  require(cfg.baseline.smoothing_majority > 0.0 && cfg.baseline.smoothing_majority <= 1.0,
          "config: baseline majority must be in (0,1]");
}

}  // namespace erank
