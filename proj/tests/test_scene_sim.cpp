#include <cmath>

#include "doctest.h"
#include "fd_helpers.hpp"
#include "monosim/alignment.hpp"
#include "monosim/gradcheck.hpp"
#include "monosim/losses.hpp"
#include "monosim/rng.hpp"

using namespace monosim;

namespace {

Tensor identity_weight(std::size_t channels) {
  Tensor w({channels, channels, 1, 1});
  for (std::size_t c = 0; c < channels; ++c) w.at(c, c, 0, 0) = 1.0;
  return w;
}

// Per-pixel reference: matrix multiply, spatial-statistics normalization,
// rectifier.
FeatureMap align_oracle(const Tensor& weight, const Tensor& bias, const Tensor& gamma,
                        const Tensor& beta, const FeatureMap& input, bool use_norm) {
  const std::size_t c_out = weight.dim(0), c_in = weight.dim(1);
  const std::size_t h = input.dim(1), w = input.dim(2);
  FeatureMap linear({c_out, h, w});
  for (std::size_t u = 0; u < h; ++u) {
    for (std::size_t v = 0; v < w; ++v) {
      for (std::size_t co = 0; co < c_out; ++co) {
        double acc = bias[co];
        for (std::size_t ci = 0; ci < c_in; ++ci) {
          acc += weight.at(co, ci, 0, 0) * input.at(ci, u, v);
        }
        linear.at(co, u, v) = acc;
      }
    }
  }
  FeatureMap out({c_out, h, w});
  const double n = static_cast<double>(h * w);
  for (std::size_t co = 0; co < c_out; ++co) {
    double mean = 0.0, var = 0.0;
    if (use_norm) {
      for (std::size_t u = 0; u < h; ++u)
        for (std::size_t v = 0; v < w; ++v) mean += linear.at(co, u, v);
      mean /= n;
      for (std::size_t u = 0; u < h; ++u)
        for (std::size_t v = 0; v < w; ++v) {
          const double d = linear.at(co, u, v) - mean;
          var += d * d;
        }
      var /= n;
    }
    for (std::size_t u = 0; u < h; ++u) {
      for (std::size_t v = 0; v < w; ++v) {
        double value = linear.at(co, u, v);
        if (use_norm) value = gamma[co] * (value - mean) / std::sqrt(var + 1e-5) + beta[co];
        out.at(co, u, v) = std::max(0.0, value);
      }
    }
  }
  return out;
}

ValidityMask hand_mask() {
  ValidityMask mask(2, 2);
  mask.at(0, 0) = 1;
  mask.at(1, 0) = 1;
  mask.at(1, 1) = 1;
  return mask;
}

}  // namespace

TEST_CASE("alignment head is the identity when configured so") {
  AlignmentHead head = make_alignment_head_raw(identity_weight(4), Tensor::zeros({4}),
                                               Tensor::full({4}, 1.0), Tensor::zeros({4}),
                                               /*use_norm=*/false, /*training=*/false);
  FeatureMap positive = Tensor::full({4, 3, 3}, 2.0);
  FeatureMap out = align_channels(head, positive);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == 2.0);

  FeatureMap negative = Tensor::full({4, 3, 3}, -3.0);
  FeatureMap clamped = align_channels(head, negative);
  for (std::size_t i = 0; i < clamped.size(); ++i) CHECK(clamped[i] == 0.0);
}

TEST_CASE("alignment head rejects channel mismatches") {
  AlignmentHead head = make_alignment_head_raw(identity_weight(4), Tensor::zeros({4}),
                                               Tensor::full({4}, 1.0), Tensor::zeros({4}), true,
                                               true);
  CHECK_THROWS_AS(align_channels(head, FeatureMap({3, 2, 2})), std::invalid_argument);
}

TEST_CASE("alignment head matches the per-pixel oracle") {
  Rng rng(31);
  Tensor weight({4, 8, 1, 1});
  for (std::size_t i = 0; i < weight.size(); ++i) weight[i] = rng.uniform(-0.5, 0.5);
  Tensor bias({4}), gamma({4}), beta({4});
  for (std::size_t i = 0; i < 4; ++i) {
    bias[i] = rng.uniform(-0.2, 0.2);
    gamma[i] = rng.uniform(0.5, 1.5);
    beta[i] = rng.uniform(-0.3, 0.3);
  }
  FeatureMap input({8, 4, 4});
  for (std::size_t i = 0; i < input.size(); ++i) input[i] = rng.uniform(-1.0, 1.0);

  AlignmentHead head = make_alignment_head_raw(weight, bias, gamma, beta, /*use_norm=*/true,
                                               /*training=*/true);
  FeatureMap out = align_channels(head, input);
  FeatureMap expected = align_oracle(weight, bias, gamma, beta, input, true);
  REQUIRE(out.same_shape(expected));
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out[i] == doctest::Approx(expected[i]).epsilon(1e-12));
  }
}

TEST_CASE("evaluation mode uses running statistics") {
  Tensor weight = identity_weight(2);
  AlignmentHead head = make_alignment_head_raw(weight, Tensor::zeros({2}),
                                               Tensor::full({2}, 1.0), Tensor::zeros({2}),
                                               /*use_norm=*/true, /*training=*/false);
  head.norm_state.running_mean[0] = 1.0;
  head.norm_state.running_var[0] = 4.0;
  FeatureMap input = Tensor::full({2, 2, 2}, 3.0);
  FeatureMap out = align_channels(head, input);
  // channel 0: (3 - 1) / sqrt(4 + 1e-5); channel 1: 3 / sqrt(1 + 1e-5)
  CHECK(out.at(0, 0, 0) == doctest::Approx(2.0 / std::sqrt(4.00001)).epsilon(1e-12));
  CHECK(out.at(1, 0, 0) == doctest::Approx(3.0 / std::sqrt(1.00001)).epsilon(1e-12));
}

TEST_CASE("scene loss hand cases") {
  FeatureMap teacher({1, 2, 2});
  teacher.at(0, 0, 0) = 1.0;
  teacher.at(0, 0, 1) = 4.0;
  teacher.at(0, 1, 0) = -2.0;
  teacher.at(0, 1, 1) = 0.5;
  FeatureMap student = teacher;
  ValidityMask mask = hand_mask();

  CHECK(scene_loss_value(student, teacher, mask) == 0.0);

  // absolute differences at valid pixels: 1.0, 2.0, 0.5
  student.at(0, 0, 0) = 2.0;
  student.at(0, 1, 0) = -4.0;
  student.at(0, 1, 1) = 1.0;
  student.at(0, 0, 1) = 100.0;  // masked out
  CHECK(scene_loss_value(student, teacher, mask) ==
        doctest::Approx((1.0 + 2.0 + 0.5) / 3.0).epsilon(1e-15));

  ValidityMask empty(2, 2);
  CHECK(scene_loss_value(student, teacher, empty) == 0.0);
}

TEST_CASE("scene loss ignores masked pixels bit-exactly") {
  Rng rng(77);
  FeatureMap teacher({3, 4, 4}), student({3, 4, 4});
  for (std::size_t i = 0; i < teacher.size(); ++i) {
    teacher[i] = rng.uniform(-1.0, 1.0);
    student[i] = rng.uniform(-1.0, 1.0);
  }
  ValidityMask mask(4, 4);
  for (auto& v : mask.data) v = rng.uniform() < 0.5 ? 1 : 0;
  mask.at(2, 2) = 0;

  const double before = scene_loss_value(student, teacher, mask);
  for (std::size_t c = 0; c < 3; ++c) student.at(c, 2, 2) += rng.uniform(1.0, 5.0);
  CHECK(scene_loss_value(student, teacher, mask) == before);
}

TEST_CASE("scene loss scales linearly") {
  Rng rng(78);
  FeatureMap teacher({2, 3, 3}), student({2, 3, 3});
  for (std::size_t i = 0; i < teacher.size(); ++i) {
    teacher[i] = rng.uniform(-1.0, 1.0);
    student[i] = rng.uniform(-1.0, 1.0);
  }
  ValidityMask mask(3, 3);
  for (auto& v : mask.data) v = 1;
  const double base = scene_loss_value(student, teacher, mask);
  FeatureMap teacher_scaled = teacher, student_scaled = student;
  for (std::size_t i = 0; i < teacher.size(); ++i) {
    teacher_scaled[i] *= 2.5;
    student_scaled[i] *= 2.5;
  }
  CHECK(scene_loss_value(student_scaled, teacher_scaled, mask) ==
        doctest::Approx(2.5 * base).epsilon(1e-12));
}

TEST_CASE("scene loss gradient is the scaled sign at valid pixels") {
  Rng rng(79);
  FeatureMap teacher({2, 3, 3}), student({2, 3, 3});
  for (std::size_t i = 0; i < teacher.size(); ++i) {
    teacher[i] = rng.uniform(-1.0, 1.0);
    student[i] = teacher[i] + (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.2, 1.0);
  }
  ValidityMask mask(3, 3);
  for (std::size_t i = 0; i < mask.data.size(); ++i) mask.data[i] = (i % 2 == 0) ? 1 : 0;
  const double n = static_cast<double>(count_valid(mask));

  ag::Var var = ag::parameter(student);
  ag::Var loss = scene_loss(var, teacher, mask);
  ag::backward(loss);
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t u = 0; u < 3; ++u) {
      for (std::size_t v = 0; v < 3; ++v) {
        const double expected = mask.at(u, v) == 0
                                    ? 0.0
                                    : ((student.at(c, u, v) > teacher.at(c, u, v)) ? 1.0 : -1.0) / n;
        CHECK(var->grad.at(c, u, v) == doctest::Approx(expected).epsilon(1e-12));
      }
    }
  }

  auto build = [&](const std::vector<ag::Var>& in) { return scene_loss(in[0], teacher, mask); };
  CHECK(finite_difference_check(build, {student}, 1e-5, 1e-3).pass);
}

TEST_CASE("scene loss rejects shape mismatches") {
  FeatureMap a({2, 3, 3}), b({2, 3, 4});
  ValidityMask mask(3, 3);
  CHECK_THROWS_AS(scene_loss_value(a, b, mask), std::invalid_argument);
  FeatureMap c({2, 3, 4});
  CHECK_THROWS_AS(scene_loss_value(c, b, mask), std::invalid_argument);
}

TEST_CASE("align_channels passes the gradient suite") {
  for (bool training : {true, false}) {
    auto build = [training](const std::vector<ag::Var>& in) {
      AlignmentHead head;
      head.in_channels = in[0]->value.dim(1);
      head.out_channels = in[0]->value.dim(0);
      head.weight = in[0];
      head.bias = in[1];
      head.gamma = in[2];
      head.beta = in[3];
      head.norm_state = ag::BatchNormState(head.out_channels);
      head.use_norm = true;
      head.training = training;
      return ag::sum(align_channels(head, in[4]));
    };
    auto generate = [](Rng& rng) {
      Tensor weight({3, 5, 1, 1});
      for (std::size_t i = 0; i < weight.size(); ++i) weight[i] = rng.uniform(-0.7, 0.7);
      Tensor bias({3}), gamma({3}), beta({3});
      for (std::size_t i = 0; i < 3; ++i) {
        bias[i] = rng.uniform(-0.2, 0.2);
        gamma[i] = rng.uniform(0.8, 1.2);
        beta[i] = rng.uniform(0.4, 0.8);
      }
      FeatureMap input({5, 3, 3});
      for (std::size_t i = 0; i < input.size(); ++i) input[i] = rng.uniform(-1.0, 1.0);
      return std::vector<Tensor>{weight, bias, gamma, beta, input};
    };
    CHECK(testutil::fd_pass_with_retries(build, generate, training ? 810 : 820));
  }
}
