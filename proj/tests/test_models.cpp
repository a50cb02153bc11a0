#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "erank/models.hpp"
#include "erank/rng.hpp"

using namespace erank;

namespace {

std::vector<Pixel> random_coords(Rng& rng, int w, int h, int n) {
  std::vector<Pixel> coords(static_cast<std::size_t>(n));
  for (auto& p : coords) p = {rng.uniform_int(0, w - 1), rng.uniform_int(0, h - 1)};
  return coords;
}

Matrix3Xd random_targets(Rng& rng, int n) {
  Matrix3Xd t(3, n);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.next_double();
  return t;
}

// Independent evaluation of the Fourier prediction: explicit double loop over
// the two axis harmonics, no feature vector involved.
Eigen::Vector3d fourier_direct(const FourierModel& m, int x, int y) {
  const double u = (x + 0.5) / m.width, v = (y + 0.5) / m.height;
  const int axis = 2 * m.order + 1;
  auto axis_val = [](int i, double t) {
    if (i == 0) return 1.0;
    const int harmonic = (i + 1) / 2;
    const double a = 2.0 * std::numbers::pi * harmonic * t;
    return i % 2 == 1 ? std::cos(a) : std::sin(a);
  };
  Eigen::Vector3d out = Eigen::Vector3d::Zero();
  for (int iy = 0; iy < axis; ++iy)
    for (int ix = 0; ix < axis; ++ix)
      out += m.coeffs.col(iy * axis + ix) * (axis_val(iy, v) * axis_val(ix, u));
  for (int c = 0; c < 3; ++c) out(c) = clamp01(out(c));
  return out;
}

// Central finite differences of the masked loss with respect to every
// parameter; h = 1e-4.
template <typename Params>
MatrixXd numeric_gradient(FieldModel& model, Params& params, const Matrix3Xd& targets,
                          const std::vector<Pixel>& coords, const ArrayXb& d) {
  const double h = 1e-4;
  MatrixXd grad(params.rows(), params.cols());
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double orig = params.data()[i];
    params.data()[i] = orig + h;
    const double lp = masked_loss(model, targets, coords, d);
    params.data()[i] = orig - h;
    const double lm = masked_loss(model, targets, coords, d);
    params.data()[i] = orig;
    grad.data()[i] = (lp - lm) / (2.0 * h);
  }
  return grad;
}

}  // namespace

TEST_CASE("model_forward: gray grid, constant fourier, bounds checks") {
  FieldModel grid = GridModel(6, 4);
  const auto out = model_forward(grid, {{0, 0}, {5, 3}, {2, 1}});
  CHECK((out.array() == 0.5).all());

  FourierModel fm(6, 4, 3);
  fm.coeffs.setZero();
  fm.coeffs(0, 0) = 1.0;  // constant basis carries (1,0,0)
  FieldModel fourier = fm;
  const auto fout = model_forward(fourier, {{1, 1}, {4, 2}});
  CHECK(fout.row(0).minCoeff() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fout.row(1).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(fout.row(2).cwiseAbs().maxCoeff() <= 1e-12);

  CHECK_THROWS_AS(model_forward(grid, {{6, 0}}), std::invalid_argument);
  CHECK_THROWS_AS(model_forward(fourier, {{0, 4}}), std::invalid_argument);
}

TEST_CASE("model_forward: fourier matches direct basis expansion") {
  Rng rng(31);
  FourierModel fm(16, 16, 4);
  for (Eigen::Index i = 0; i < fm.coeffs.size(); ++i)
    fm.coeffs.data()[i] = rng.uniform(-0.2, 0.2);
  fm.coeffs(0, 0) += 0.5;
  FieldModel model = fm;
  const FourierBasis basis = make_fourier_basis(16, 16, 4);

  for (int trial = 0; trial < 30; ++trial) {
    const int x = rng.uniform_int(0, 15), y = rng.uniform_int(0, 15);
    const auto pred = model_forward(model, {{x, y}});
    const auto pred_basis = model_forward(model, {{x, y}}, &basis);
    const Eigen::Vector3d ref = fourier_direct(fm, x, y);
    CHECK((pred.col(0) - ref).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((pred_basis.col(0) - ref).cwiseAbs().maxCoeff() <= 1e-12);
  }
  // the spec's named query on a 16x16 domain
  const auto q = model_forward(model, {{7, 3}});
  CHECK((q.col(0) - fourier_direct(fm, 7, 3)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("masked_step: fully masked batch is a bit-exact no-op") {
  Rng rng(33);
  FieldModel grid = GridModel(8, 8);
  const Matrix3Xd before = std::get<GridModel>(grid).params;
  const auto coords = random_coords(rng, 8, 8, 16);
  const Matrix3Xd targets = random_targets(rng, 16);
  const ArrayXb d = ArrayXb::Constant(16, false);
  const double loss = masked_step(grid, targets, coords, d, 0.5);
  CHECK(loss == 0.0);
  CHECK((std::get<GridModel>(grid).params.array() == before.array()).all());
}

TEST_CASE("masked_step: single included grid pixel moves by lr*2(p-t)") {
  FieldModel grid = GridModel(4, 4);
  std::get<GridModel>(grid).params.col(5) << 0.7, 0.2, 0.5;
  Matrix3Xd targets(3, 1);
  targets.col(0) << 0.1, 0.9, 0.5;
  const double lr = 0.25;
  masked_step(grid, targets, {{1, 1}}, ArrayXb::Constant(1, true), lr);
  const auto col = std::get<GridModel>(grid).params.col(5);
  CHECK(col(0) == doctest::Approx(0.7 - lr * 2.0 * (0.7 - 0.1)).epsilon(1e-14));
  CHECK(col(1) == doctest::Approx(0.2 - lr * 2.0 * (0.2 - 0.9)).epsilon(1e-14));
  CHECK(col(2) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("masked_step: length mismatch is an error") {
  FieldModel grid = GridModel(4, 4);
  CHECK_THROWS_AS(
      masked_step(grid, Matrix3Xd::Zero(3, 2), {{0, 0}}, ArrayXb::Constant(2, true), 0.1),
      std::invalid_argument);
}

TEST_CASE("masked_step: excluded pixels contribute exactly zero gradient") {
  Rng rng(37);
  for (int trial = 0; trial < 10; ++trial) {
    const auto coords_all = random_coords(rng, 12, 12, 24);
    const Matrix3Xd targets_all = random_targets(rng, 24);
    ArrayXb d = ArrayXb::Constant(24, true);
    for (Eigen::Index i = 0; i < 24; ++i) d(i) = rng.next_double() < 0.5;
    if (d.count() == 0) continue;

    std::vector<Pixel> coords_in;
    Matrix3Xd targets_in(3, d.count());
    Eigen::Index j = 0;
    for (Eigen::Index i = 0; i < 24; ++i) {
      if (!d(i)) continue;
      coords_in.push_back(coords_all[static_cast<std::size_t>(i)]);
      targets_in.col(j++) = targets_all.col(i);
    }

    FourierModel base(12, 12, 2);
    for (Eigen::Index i = 0; i < base.coeffs.size(); ++i)
      base.coeffs.data()[i] = rng.uniform(-0.1, 0.1);
    base.coeffs(0, 0) += 0.5;

    FieldModel with_masked = base;
    FieldModel only_included = base;
    masked_step(with_masked, targets_all, coords_all, d, 0.05);
    masked_step(only_included, targets_in, coords_in,
                ArrayXb::Constant(static_cast<Eigen::Index>(coords_in.size()), true), 0.05);
    CHECK((std::get<FourierModel>(with_masked).coeffs.array() ==
           std::get<FourierModel>(only_included).coeffs.array())
              .all());
  }
}

TEST_CASE("gradient check: grid and fourier match central differences") {
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const auto coords = random_coords(rng, 6, 5, 20);
    const Matrix3Xd targets = random_targets(rng, 20);
    ArrayXb d(20);
    for (Eigen::Index i = 0; i < 20; ++i) d(i) = rng.next_double() < 0.8;
    if (d.count() == 0) d(0) = true;

    {
      GridModel gm(6, 5);
      for (Eigen::Index i = 0; i < gm.params.size(); ++i)
        gm.params.data()[i] = rng.uniform(0.05, 0.95);
      FieldModel model = gm;
      auto& params = std::get<GridModel>(model).params;
      const MatrixXd num = numeric_gradient(model, params, targets, coords, d);

      FieldModel stepped = model;
      masked_step(stepped, targets, coords, d, 1.0);
      const MatrixXd analytic = (params - std::get<GridModel>(stepped).params);
      const double rel = (analytic - num).norm() / std::max(num.norm(), 1e-12);
      CHECK(rel <= 1e-4);
    }
    {
      FourierModel fm(6, 5, 2);
      for (Eigen::Index i = 0; i < fm.coeffs.size(); ++i)
        fm.coeffs.data()[i] = rng.uniform(-0.02, 0.02);
      fm.coeffs(0, 0) += 0.5;
      FieldModel model = fm;
      auto& params = std::get<FourierModel>(model).coeffs;
      const MatrixXd num = numeric_gradient(model, params, targets, coords, d);

      FieldModel stepped = model;
      masked_step(stepped, targets, coords, d, 1.0);
      const MatrixXd analytic = (params - std::get<FourierModel>(stepped).coeffs);
      const double rel = (analytic - num).norm() / std::max(num.norm(), 1e-12);
      CHECK(rel <= 1e-4);
    }
  }
}

TEST_CASE("render_full: gray grid renders uniform gray") {
  FieldModel grid = GridModel(10, 7);
  const Image img = render_full(grid, 10, 7);
  CHECK((img.rgb.array() == 0.5).all());
  CHECK_THROWS_AS(render_full(grid, 7, 10), std::invalid_argument);
}

TEST_CASE("checkpoints: save/load round trip after quantization") {
  Rng rng(43);
  const auto dir = std::filesystem::temp_directory_path() / "erank_model_test";
  std::filesystem::create_directories(dir);

  FourierModel fm(9, 11, 3);
  for (Eigen::Index i = 0; i < fm.coeffs.size(); ++i) fm.coeffs.data()[i] = rng.uniform(-1, 1);
  FieldModel model = fm;
  quantize_params_f32(model);
  save_model((dir / "m.ckpt").string(), model);
  const FieldModel back = load_model((dir / "m.ckpt").string());
  const auto& a = std::get<FourierModel>(model);
  const auto& b = std::get<FourierModel>(back);
  CHECK(b.width == a.width);
  CHECK(b.height == a.height);
  CHECK(b.order == a.order);
  CHECK((a.coeffs.array() == b.coeffs.array()).all());

  FieldModel grid = GridModel(5, 4, 0.25);
  quantize_params_f32(grid);
  save_model((dir / "g.ckpt").string(), grid);
  const FieldModel gback = load_model((dir / "g.ckpt").string());
  CHECK((std::get<GridModel>(gback).params.array() == std::get<GridModel>(grid).params.array())
            .all());
}
