#include "monosim/alignment.hpp"

namespace monosim {

AlignmentHead make_alignment_head(ag::ParameterSet& params, const std::string& prefix,
                                  std::size_t in_channels, std::size_t out_channels,
                                  Rng& rng) {
  AlignmentHead head;
  head.in_channels = in_channels;
  head.out_channels = out_channels;
  head.weight =
      params.create_fan_in(prefix + ".weight", {out_channels, in_channels, 1, 1}, in_channels, rng);
  head.bias = params.create(prefix + ".bias", Tensor::zeros({out_channels}));
  head.gamma = params.create(prefix + ".gamma", Tensor::full({out_channels}, 1.0));
  head.beta = params.create(prefix + ".beta", Tensor::zeros({out_channels}));
  head.norm_state = ag::BatchNormState(out_channels);
  return head;
}

AlignmentHead make_alignment_head_raw(Tensor weight, Tensor bias, Tensor gamma, Tensor beta,
                                      bool use_norm, bool training) {
  require_rank(weight, 4, "alignment weight");
  AlignmentHead head;
  head.out_channels = weight.dim(0);
  head.in_channels = weight.dim(1);
  head.weight = ag::parameter(std::move(weight));
  head.bias = ag::parameter(std::move(bias));
  head.gamma = ag::parameter(std::move(gamma));
  head.beta = ag::parameter(std::move(beta));
  head.norm_state = ag::BatchNormState(head.out_channels);
  head.use_norm = use_norm;
  head.training = training;
  return head;
}

ag::Var align_channels(AlignmentHead& head, const ag::Var& input) {
  require_rank(input->value, 3, "align_channels input");
  if (input->value.dim(0) != head.in_channels) {
    throw std::invalid_argument("align_channels: input has " +
                                std::to_string(input->value.dim(0)) + " channels, head expects " +
                                std::to_string(head.in_channels));
  }
  ag::Var x = ag::conv2d(input, head.weight, head.bias, 1, 0);
  if (head.use_norm) {
    x = ag::batchnorm2d(x, head.gamma, head.beta, head.norm_state, head.training);
  }
  return ag::relu(x);
}

FeatureMap align_channels(AlignmentHead& head, const FeatureMap& input) {
  return align_channels(head, ag::constant(input))->value;
}

}  // namespace monosim
