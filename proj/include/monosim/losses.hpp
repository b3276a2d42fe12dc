#pragma once

#include "monosim/autodiff.hpp"
#include "monosim/render.hpp"
#include "monosim/tensor.hpp"

namespace monosim {

// L_scene: mean absolute difference over valid pixels, all channels. An empty
// mask yields loss 0 with zero gradient. Gradient flows to the student only;
// the subgradient at exact ties is 0.
ag::Var scene_loss(const ag::Var& student, const FeatureMap& teacher, const ValidityMask& mask);
double scene_loss_value(const FeatureMap& student, const FeatureMap& teacher,
                        const ValidityMask& mask);

// L_RoI: same contract, denominator n_r.
ag::Var roi_loss(const ag::Var& student, const FeatureMap& teacher, const ValidityMask& mask);
double roi_loss_value(const FeatureMap& student, const FeatureMap& teacher,
                      const ValidityMask& mask);

// Smooth-L1 (x^2/2 below |x| = 1, |x| - 0.5 above), summed over elements with
// nonzero weight, divided by `divisor`.
ag::Var smooth_l1_weighted_mean(const ag::Var& prediction, const Tensor& target,
                                const Tensor& weight, double divisor);

// Binary cross-entropy on probabilities with clamped logs, summed over
// elements with nonzero weight, divided by `divisor`.
ag::Var bce_weighted_mean(const ag::Var& probabilities, const Tensor& targets,
                          const Tensor& weight, double divisor);

struct LossWeights {
  double lambda_scene = 1.0;
  double lambda_roi = 1.0;
};

// L = L_response + lambda_scene * L_scene + lambda_RoI * L_RoI
ag::Var total_loss(const ag::Var& response, const ag::Var& scene, const ag::Var& roi,
                   const LossWeights& weights);

// sigmoid(raw) * glo + (1 - sigmoid(raw)) * loc; gradient reaches the raw
// weight and both losses.
ag::Var fuse_global_local(const ag::Var& loss_glo, const ag::Var& loss_loc,
                          const ag::Var& raw_weight);

// Learnable global/local fusion gates; effective values are sigmoids of the
// raw parameters.
struct FusionWeights {
  ag::Var raw_alpha;
  ag::Var raw_beta;

  double alpha() const;
  double beta() const;
};

}  // namespace monosim
