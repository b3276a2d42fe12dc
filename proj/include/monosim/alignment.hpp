#pragma once

#include <string>

#include "monosim/autodiff.hpp"
#include "monosim/tensor.hpp"

namespace monosim {

// 1x1 convolution + per-channel normalization + rectifier; adjusts a student
// feature map's channel width to the teacher's. Lives only in the training
// graph; the student's inference path never invokes it.
struct AlignmentHead {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  ag::Var weight;  // out x in x 1 x 1
  ag::Var bias;    // out
  ag::Var gamma;   // out
  ag::Var beta;    // out
  ag::BatchNormState norm_state;
  bool use_norm = true;
  bool training = true;
};

// Registers the head's parameters under `prefix.` in `params`.
AlignmentHead make_alignment_head(ag::ParameterSet& params, const std::string& prefix,
                                  std::size_t in_channels, std::size_t out_channels,
                                  Rng& rng);

// Head with externally supplied parameter tensors (tests, gradient checks).
AlignmentHead make_alignment_head_raw(Tensor weight, Tensor bias, Tensor gamma, Tensor beta,
                                      bool use_norm, bool training);

ag::Var align_channels(AlignmentHead& head, const ag::Var& input);
FeatureMap align_channels(AlignmentHead& head, const FeatureMap& input);

}  // namespace monosim
