#include "erank/stationary.hpp"

#include <cmath>
#include <functional>

#include "erank/checkpoint.hpp"

namespace erank {

namespace {

double luma(const Eigen::Vector3d& rgb) {
  return 0.299 * rgb(0) + 0.587 * rgb(1) + 0.114 * rgb(2);
}

struct Accumulator {
  Eigen::Vector3d first = Eigen::Vector3d::Zero();  // shift for stable moments
  Eigen::Vector3d shifted_sum = Eigen::Vector3d::Zero();
  Eigen::Vector3d var_sum = Eigen::Vector3d::Zero();
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  double sum_x = 0.0, sum_y = 0.0;
  int min_x = 1 << 30, max_x = -1, min_y = 1 << 30, max_y = -1;
  double grad_sum = 0.0;
  long count = 0;
};

}  // namespace

std::map<int, FeatureVec> extract_features_all(const Image& frame, const EntityMap& emap) {
  require(frame.width == emap.width && frame.height == emap.height,
          "extract_features: image/entity map dimensions differ");

  std::map<int, Accumulator> acc;
  for (int y = 0; y < emap.height; ++y) {
    for (int x = 0; x < emap.width; ++x) {
      const std::int32_t id = emap.at(x, y);
      if (id == kUnassignedId) continue;
      Accumulator& a = acc[id];
      const Eigen::Vector3d rgb = frame.rgb.col(frame.index(x, y));
      if (a.count == 0) a.first = rgb;
      a.shifted_sum += rgb - a.first;
      a.sum_x += x;
      a.sum_y += y;
      a.min_x = std::min(a.min_x, x);
      a.max_x = std::max(a.max_x, x);
      a.min_y = std::min(a.min_y, y);
      a.max_y = std::max(a.max_y, y);
      ++a.count;

      const double y0 = luma(rgb);
      double gx = 0.0, gy = 0.0;
      if (x + 1 < emap.width && emap.at(x + 1, y) == id)
        gx = luma(frame.rgb.col(frame.index(x + 1, y))) - y0;
      if (y + 1 < emap.height && emap.at(x, y + 1) == id)
        gy = luma(frame.rgb.col(frame.index(x, y + 1))) - y0;
      a.grad_sum += std::sqrt(gx * gx + gy * gy);
    }
  }

  // Second pass for the variance, against the final means. The shift makes a
  // constant region come out with exactly zero mean offset and deviation.
  for (auto& [id, a] : acc) a.mean = a.first + a.shifted_sum / static_cast<double>(a.count);
  for (int y = 0; y < emap.height; ++y)
    for (int x = 0; x < emap.width; ++x) {
      const std::int32_t id = emap.at(x, y);
      if (id == kUnassignedId) continue;
      Accumulator& a = acc.at(id);
      const Eigen::Vector3d d = frame.rgb.col(frame.index(x, y)) - a.mean;
      a.var_sum += d.cwiseProduct(d);
    }

  std::map<int, FeatureVec> out;
  const double area = static_cast<double>(frame.pixel_count());
  for (const auto& [id, a] : acc) {
    FeatureVec f;
    const double n = static_cast<double>(a.count);
    for (int c = 0; c < 3; ++c) {
      f(c) = a.mean(c);
      f(3 + c) = std::sqrt(a.var_sum(c) / n);
    }
    f(6) = frame.width > 1 ? (a.sum_x / n) / (frame.width - 1) : 0.5;
    f(7) = frame.height > 1 ? (a.sum_y / n) / (frame.height - 1) : 0.5;
    f(8) = std::log(n / area);
    f(9) = a.grad_sum / n;
    const double bw = a.max_x - a.min_x + 1, bh = a.max_y - a.min_y + 1;
    f(10) = std::min(bw, bh) / std::max(bw, bh);
    f(11) = n / (bw * bh);
    out.emplace(id, f);
  }
  return out;
}

FeatureVec extract_features(const Image& frame, const EntityMap& emap, int entity) {
  const auto all = extract_features_all(frame, emap);
  const auto it = all.find(entity);
  require(it != all.end(), "extract_features: entity absent from map: " + std::to_string(entity));
  return it->second;
}

PseudoLabelSet bootstrap_labels(const BinaryMask& pseudo_semantics, const EntityMap& emap) {
  require(pseudo_semantics.width == emap.width && pseudo_semantics.height == emap.height,
          "bootstrap_labels: dimensions differ");
  std::map<int, std::pair<long, long>> votes;  // entity -> (stuff, total)
  for (Eigen::Index p = 0; p < emap.pixel_count(); ++p) {
    const std::int32_t id = emap.ids(p);
    if (id == kUnassignedId) continue;
    auto& [stuff, total] = votes[id];
    if (pseudo_semantics.bits(p)) ++stuff;
    ++total;
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

ClassifierParams init_classifier(Rng& rng) {
  auto glorot = [&](Eigen::Index rows, Eigen::Index cols) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    MatrixXd w(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = rng.uniform(-limit, limit);
    return w;
  };
  ClassifierParams p;
  p.w1 = glorot(32, 12);
  p.b1 = VectorXd::Zero(32);
  p.w2 = glorot(32, 32);
  p.b2 = VectorXd::Zero(32);
  p.w3 = glorot(32, 32);
  p.b3 = VectorXd::Zero(32);
  p.w4 = glorot(1, 32);
  p.b4 = VectorXd::Zero(1);
  return p;
}

namespace {

struct ForwardState {
  MatrixXd h1, h2, h3;  // post-activation
  Eigen::RowVectorXd z4;
  Eigen::RowVectorXd p;
};

ForwardState forward_pass(const ClassifierParams& w, const MatrixXd& features) {
  ForwardState s;
  s.h1 = ((w.w1 * features).colwise() + w.b1).cwiseMax(0.0);
  s.h2 = ((w.w2 * s.h1).colwise() + w.b2).cwiseMax(0.0);
  s.h3 = ((w.w3 * s.h2).colwise() + w.b3).cwiseMax(0.0);
  s.z4 = (w.w4 * s.h3).row(0).array() + w.b4(0);
  s.p = s.z4.unaryExpr([](double z) { return 1.0 / (1.0 + std::exp(-z)); });
  return s;
}

}  // namespace

double classifier_forward(const ClassifierParams& params, const FeatureVec& f) {
  return forward_pass(params, f).p(0);
}

VectorXd classifier_forward_batch(const ClassifierParams& params, const MatrixXd& features) {
  require(features.rows() == 12, "classifier: features must have 12 rows");
  return forward_pass(params, features).p.transpose();
}

double classifier_loss(const ClassifierParams& params, const MatrixXd& features,
                       const VectorXd& labels) {
  require(features.cols() == labels.size() && features.cols() > 0,
          "classifier_loss: empty or mismatched batch");
  const ForwardState s = forward_pass(params, features);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    const double p = std::min(std::max(s.p(i), 1e-300), 1.0 - 1e-16);
    loss -= labels(i) * std::log(p) + (1.0 - labels(i)) * std::log(1.0 - p);
  }
  return loss / static_cast<double>(labels.size());
}

double classifier_train_step(ClassifierParams& params, const MatrixXd& features,
                             const VectorXd& labels, double lr) {
  require(features.cols() == labels.size() && features.cols() > 0,
          "classifier_train_step: empty or mismatched batch");
  const Eigen::Index n = features.cols();
  const ForwardState s = forward_pass(params, features);

  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = std::min(std::max(s.p(i), 1e-300), 1.0 - 1e-16);
    loss -= labels(i) * std::log(p) + (1.0 - labels(i)) * std::log(1.0 - p);
  }
  loss /= static_cast<double>(n);

  // Logistic + BCE collapses to dL/dz4 = (p - y)/n.
  const Eigen::RowVectorXd dz4 = (s.p.transpose() - labels).transpose() / static_cast<double>(n);
  const MatrixXd dw4 = dz4 * s.h3.transpose();
  const double db4 = dz4.sum();

  MatrixXd dh3 = params.w4.transpose() * dz4;
  MatrixXd dz3 = (s.h3.array() > 0.0).select(dh3, 0.0);
  const MatrixXd dw3 = dz3 * s.h2.transpose();
  const VectorXd db3 = dz3.rowwise().sum();

  MatrixXd dh2 = params.w3.transpose() * dz3;
  MatrixXd dz2 = (s.h2.array() > 0.0).select(dh2, 0.0);
  const MatrixXd dw2 = dz2 * s.h1.transpose();
  const VectorXd db2 = dz2.rowwise().sum();

  MatrixXd dh1 = params.w2.transpose() * dz2;
  MatrixXd dz1 = (s.h1.array() > 0.0).select(dh1, 0.0);
  const MatrixXd dw1 = dz1 * features.transpose();
  const VectorXd db1 = dz1.rowwise().sum();

  params.w4 -= lr * dw4;
  params.b4(0) -= lr * db4;
  params.w3 -= lr * dw3;
  params.b3 -= lr * db3;
  params.w2 -= lr * dw2;
  params.b2 -= lr * db2;
  params.w1 -= lr * dw1;
  params.b1 -= lr * db1;
  return loss;
}

double classifier_train_step(ClassifierParams& params,
                             const std::vector<std::pair<FeatureVec, int>>& batch, double lr) {
  require(!batch.empty(), "classifier_train_step: empty batch");
  MatrixXd features(12, static_cast<Eigen::Index>(batch.size()));
  VectorXd labels(static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    features.col(static_cast<Eigen::Index>(i)) = batch[i].first;
    labels(static_cast<Eigen::Index>(i)) = batch[i].second;
  }
  return classifier_train_step(params, features, labels, lr);
}

void cooperative_finetune(ClassifierParams& params, const std::vector<FeatureVec>& window,
                          double lr) {
  if (window.empty()) return;
  MatrixXd features(12, static_cast<Eigen::Index>(window.size()));
  for (std::size_t i = 0; i < window.size(); ++i)
    features.col(static_cast<Eigen::Index>(i)) = window[i];
  const VectorXd labels = VectorXd::Ones(static_cast<Eigen::Index>(window.size()));
  classifier_train_step(params, features, labels, lr);
}

namespace {

void for_each_tensor(ClassifierParams& p, const std::function<void(MatrixXd&)>& fw,
                     const std::function<void(VectorXd&)>& fb) {
  fw(p.w1);
  fb(p.b1);
  fw(p.w2);
  fb(p.b2);
  fw(p.w3);
  fb(p.b3);
  fw(p.w4);
  fb(p.b4);
}

}  // namespace

void quantize_classifier_f32(ClassifierParams& params) {
  auto qm = [](MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i)
      m.data()[i] = static_cast<double>(static_cast<float>(m.data()[i]));
  };
  auto qv = [](VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i)
      v.data()[i] = static_cast<double>(static_cast<float>(v.data()[i]));
  };
  for_each_tensor(params, qm, qv);
}

void save_classifier(const std::string& path, const ClassifierParams& params) {
  std::vector<float> data;
  auto pm = [&](const MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(static_cast<float>(m(r, c)));
  };
  auto pv = [&](const VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) data.push_back(static_cast<float>(v(i)));
  };
  pm(params.w1);
  pv(params.b1);
  pm(params.w2);
  pv(params.b2);
  pm(params.w3);
  pv(params.b3);
  pm(params.w4);
  pv(params.b4);
  const nlohmann::json header = {{"kind", "classifier"}, {"layers", {12, 32, 32, 32, 1}}};
  write_checkpoint(path, header, data);
}

ClassifierParams load_classifier(const std::string& path) {
  const auto [header, data] = read_checkpoint(path);
  require(header.at("kind") == "classifier", "load_classifier: wrong checkpoint kind");
  ClassifierParams p;
  p.w1.resize(32, 12);
  p.b1.resize(32);
  p.w2.resize(32, 32);
  p.b2.resize(32);
  p.w3.resize(32, 32);
  p.b3.resize(32);
  p.w4.resize(1, 32);
  p.b4.resize(1);
  std::size_t pos = 0;
  auto gm = [&](MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = data.at(pos++);
  };
  auto gv = [&](VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = data.at(pos++);
  };
  for_each_tensor(p, gm, gv);
  require(pos == data.size(), "load_classifier: payload size mismatch");
  return p;
}

}  // namespace erank
