#include "monosim/losses.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

namespace monosim {

namespace {

ag::Var masked_l1_mean(const ag::Var& student, const FeatureMap& teacher,
                       const ValidityMask& mask, const char* what) {
  require_rank(student->value, 3, what);
  if (!student->value.same_shape(teacher)) {
    throw std::invalid_argument(std::string(what) + ": student/teacher shape mismatch");
  }
  if (mask.height != teacher.dim(1) || mask.width != teacher.dim(2)) {
    throw std::invalid_argument(std::string(what) + ": mask shape mismatch");
  }
  const std::size_t c_dim = teacher.dim(0), h = teacher.dim(1), w = teacher.dim(2);
  const std::size_t n_valid = count_valid(mask);

  double total = 0.0;
  if (n_valid > 0) {
    for (std::size_t u = 0; u < h; ++u) {
      for (std::size_t v = 0; v < w; ++v) {
        if (mask.at(u, v) == 0) continue;
        for (std::size_t c = 0; c < c_dim; ++c) {
          total += std::abs(student->value.at(c, u, v) - teacher.at(c, u, v));
        }
      }
    }
    total /= static_cast<double>(n_valid);
  }

  auto teacher_keep = std::make_shared<FeatureMap>(teacher);
  auto mask_keep = std::make_shared<ValidityMask>(mask);
  return ag::make_op(
      Tensor::scalar(total), {student},
      [c_dim, h, w, n_valid, teacher_keep, mask_keep](ag::Node& self) {
        if (n_valid == 0) return;
        ag::Node& p = *self.parents[0];
        const double g = self.grad[0] / static_cast<double>(n_valid);
        for (std::size_t u = 0; u < h; ++u) {
          for (std::size_t v = 0; v < w; ++v) {
            if (mask_keep->at(u, v) == 0) continue;
            for (std::size_t c = 0; c < c_dim; ++c) {
              const double d = p.value.at(c, u, v) - teacher_keep->at(c, u, v);
              if (d > 0.0) {
                p.grad.at(c, u, v) += g;
              } else if (d < 0.0) {
                p.grad.at(c, u, v) -= g;
              }
              // exact tie: subgradient 0
            }
          }
        }
      });
}

}  // namespace

ag::Var scene_loss(const ag::Var& student, const FeatureMap& teacher, const ValidityMask& mask) {
  return masked_l1_mean(student, teacher, mask, "scene_loss");
}

double scene_loss_value(const FeatureMap& student, const FeatureMap& teacher,
                        const ValidityMask& mask) {
  return scene_loss(ag::constant(student), teacher, mask)->scalar();
}

ag::Var roi_loss(const ag::Var& student, const FeatureMap& teacher, const ValidityMask& mask) {
  return masked_l1_mean(student, teacher, mask, "roi_loss");
}

double roi_loss_value(const FeatureMap& student, const FeatureMap& teacher,
                      const ValidityMask& mask) {
  return roi_loss(ag::constant(student), teacher, mask)->scalar();
}

ag::Var smooth_l1_weighted_mean(const ag::Var& prediction, const Tensor& target,
                                const Tensor& weight, double divisor) {
  if (!prediction->value.same_shape(target) || !prediction->value.same_shape(weight)) {
    throw std::invalid_argument("smooth_l1_weighted_mean: shape mismatch");
  }
  if (!(divisor > 0.0)) throw std::invalid_argument("smooth_l1_weighted_mean: divisor must be > 0");

  double total = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (weight[i] == 0.0) continue;
    const double x = prediction->value[i] - target[i];
    const double ax = std::abs(x);
    total += weight[i] * (ax < 1.0 ? 0.5 * x * x : ax - 0.5);
  }
  total /= divisor;

  auto target_keep = std::make_shared<Tensor>(target);
  auto weight_keep = std::make_shared<Tensor>(weight);
  return ag::make_op(Tensor::scalar(total), {prediction},
                     [divisor, target_keep, weight_keep](ag::Node& self) {
                       ag::Node& p = *self.parents[0];
                       const double g = self.grad[0] / divisor;
                       for (std::size_t i = 0; i < p.value.size(); ++i) {
                         const double wgt = (*weight_keep)[i];
                         if (wgt == 0.0) continue;
                         const double x = p.value[i] - (*target_keep)[i];
                         const double d = std::abs(x) < 1.0 ? x : (x > 0.0 ? 1.0 : -1.0);
                         p.grad[i] += g * wgt * d;
                       }
                     });
}

ag::Var bce_weighted_mean(const ag::Var& probabilities, const Tensor& targets,
                          const Tensor& weight, double divisor) {
  if (!probabilities->value.same_shape(targets) || !probabilities->value.same_shape(weight)) {
    throw std::invalid_argument("bce_weighted_mean: shape mismatch");
  }
  if (!(divisor > 0.0)) throw std::invalid_argument("bce_weighted_mean: divisor must be > 0");
  constexpr double kLogClamp = 1e-12;

  double total = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (weight[i] == 0.0) continue;
    const double p = probabilities->value[i];
    const double t = targets[i];
    total -= weight[i] * (t * std::log(std::max(p, kLogClamp)) +
                          (1.0 - t) * std::log(std::max(1.0 - p, kLogClamp)));
  }
  total /= divisor;

  auto targets_keep = std::make_shared<Tensor>(targets);
  auto weight_keep = std::make_shared<Tensor>(weight);
  return ag::make_op(
      Tensor::scalar(total), {probabilities},
      [divisor, targets_keep, weight_keep](ag::Node& self) {
        ag::Node& p = *self.parents[0];
        const double g = self.grad[0] / divisor;
        for (std::size_t i = 0; i < p.value.size(); ++i) {
          const double wgt = (*weight_keep)[i];
          if (wgt == 0.0) continue;
          const double prob = p.value[i];
          const double t = (*targets_keep)[i];
          double d = 0.0;
          if (prob > kLogClamp) d -= t / prob;
          if (1.0 - prob > kLogClamp) d += (1.0 - t) / (1.0 - prob);
          p.grad[i] += g * wgt * d;
        }
      });
}

ag::Var total_loss(const ag::Var& response, const ag::Var& scene, const ag::Var& roi,
                   const LossWeights& weights) {
  if (!(weights.lambda_scene >= 0.0) || !(weights.lambda_roi >= 0.0)) {
    throw std::invalid_argument("total_loss: weights must be finite and non-negative");
  }
  return ag::add(response,
                 ag::add(ag::scale(scene, weights.lambda_scene), ag::scale(roi, weights.lambda_roi)));
}

ag::Var fuse_global_local(const ag::Var& loss_glo, const ag::Var& loss_loc,
                          const ag::Var& raw_weight) {
  ag::Var w = ag::sigmoid(raw_weight);
  ag::Var one_minus_w = ag::sub(ag::constant(Tensor::scalar(1.0)), w);
  return ag::add(ag::mul(w, loss_glo), ag::mul(one_minus_w, loss_loc));
}

double FusionWeights::alpha() const { return 1.0 / (1.0 + std::exp(-raw_alpha->value[0])); }
double FusionWeights::beta() const { return 1.0 / (1.0 + std::exp(-raw_beta->value[0])); }

}  // namespace monosim
