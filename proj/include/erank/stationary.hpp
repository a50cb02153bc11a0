#pragma once

#include <map>
#include <string>
#include <vector>

#include "erank/entity_map.hpp"
#include "erank/image.hpp"
#include "erank/rng.hpp"
#include "erank/types.hpp"

namespace erank {

// Stationary-entity classification: a small MLP maps handcrafted per-entity
// statistics to a stuff probability (stuff = 1 = certainly stationary, always
// kept in training; thing = 0 = decided by residual ranks). Pseudo labels are
// bootstrapped from noisy per-pixel semantics by majority vote, and the
// network is periodically fine-tuned on entities the rank statistics deem
// stationary, adapting it to the scene.

// Feature layout (12 values):
//   0-2  mean RGB over the entity's pixels
//   3-5  per-channel population standard deviation
//   6-7  centroid, normalized to [0,1] by (width-1, height-1)
//   8    log(pixel count / image area), 0 for a full-frame entity
//   9    mean magnitude of forward-difference luminance gradients whose both
//        endpoints lie inside the entity (Rec.601 luma)
//   10   bounding-box aspect, min(bw,bh)/max(bw,bh)
//   11   bounding-box fill ratio, count/(bw*bh)
using FeatureVec = Eigen::Matrix<double, 12, 1>;

FeatureVec extract_features(const Image& frame, const EntityMap& emap, int entity);
std::map<int, FeatureVec> extract_features_all(const Image& frame, const EntityMap& emap);

struct PseudoLabel {
  int label = 0;            // 1 = stuff, 0 = thing; ties resolve to thing
  double vote_fraction = 0.0;  // fraction of the entity's pixels voting stuff
};
using PseudoLabelSet = std::map<int, PseudoLabel>;

// Majority vote of the per-pixel stuff labels within each entity of the map.
PseudoLabelSet bootstrap_labels(const BinaryMask& pseudo_semantics, const EntityMap& emap);

// 12 -> 32 -> 32 -> 32 -> 1 MLP, rectifier hidden activations, logistic output.
struct ClassifierParams {
  MatrixXd w1, w2, w3, w4;
  VectorXd b1, b2, b3, b4;
};

ClassifierParams init_classifier(Rng& rng);

// Probability that the entity is stuff, in (0,1). s(r) = 1 iff p >= 0.5.
double classifier_forward(const ClassifierParams& params, const FeatureVec& f);
VectorXd classifier_forward_batch(const ClassifierParams& params, const MatrixXd& features);

// Mean binary cross-entropy over the batch (features are columns).
double classifier_loss(const ClassifierParams& params, const MatrixXd& features,
                       const VectorXd& labels);

// One gradient-descent step on the mean BCE; returns the pre-step loss.
double classifier_train_step(ClassifierParams& params, const MatrixXd& features,
                             const VectorXd& labels, double lr);
double classifier_train_step(ClassifierParams& params,
                             const std::vector<std::pair<FeatureVec, int>>& batch, double lr);

// One fine-tuning round: a single train step on the accumulated window of
// rank-included entities, all targeted at stuff = 1. No-op on an empty
// window; the caller clears the window afterwards.
void cooperative_finetune(ClassifierParams& params, const std::vector<FeatureVec>& window,
                          double lr);

void quantize_classifier_f32(ClassifierParams& params);
void save_classifier(const std::string& path, const ClassifierParams& params);
ClassifierParams load_classifier(const std::string& path);

}  // namespace erank
