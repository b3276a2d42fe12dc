#include "monosim/detect.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "monosim/losses.hpp"
#include "monosim/metrics.hpp"

namespace monosim {

std::vector<DetectionBox> make_anchor_grid(const CameraModel& feature_camera,
                                           const AnchorGridConfig& config) {
  if (config.rows == 0 || config.depth_bins == 0) {
    throw std::invalid_argument("make_anchor_grid: empty grid");
  }
  if (!(config.depth_min > 0.0 && config.depth_max > config.depth_min)) {
    throw std::invalid_argument("make_anchor_grid: bad depth range");
  }
  std::vector<DetectionBox> anchors;
  anchors.reserve(config.rows * config.depth_bins);
  const double bin = (config.depth_max - config.depth_min) / static_cast<double>(config.depth_bins);
  for (std::size_t row = 0; row < config.rows; ++row) {
    for (std::size_t d = 0; d < config.depth_bins; ++d) {
      const double z = config.depth_min + (static_cast<double>(d) + 0.5) * bin;
      DetectionBox box;
      box.label = ObjectClass::Car;
      box.x = (static_cast<double>(row) - feature_camera.cx()) * z / feature_camera.fx();
      box.y = config.ground_y - config.anchor_h / 2.0;
      box.z = z;
      box.h = config.anchor_h;
      box.w = config.anchor_w;
      box.l = config.anchor_l;
      box.yaw = 0.0;
      anchors.push_back(box);
    }
  }
  return anchors;
}

std::vector<AnchorMatch> match_anchors(const std::vector<DetectionBox>& anchors,
                                       const SoftLabelSet& labels, double pos_iou,
                                       double neg_iou) {
  std::vector<AnchorMatch> matches(anchors.size());
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    double best = 0.0;
    std::size_t best_label = labels.boxes.size();
    for (std::size_t g = 0; g < labels.boxes.size(); ++g) {
      const double iou = bev_iou(anchors[a], labels.boxes[g]);
      if (iou > best) {
        best = iou;
        best_label = g;
      }
    }
    if (best >= pos_iou && best_label < labels.boxes.size()) {
      matches[a] = {AnchorRole::Positive, best_label};
    } else if (best < neg_iou) {
      matches[a] = {AnchorRole::Negative, 0};
    } else {
      matches[a] = {AnchorRole::Ignore, 0};
    }
  }
  return matches;
}

std::array<double, 7> regression_target(const DetectionBox& anchor, const DetectionBox& label) {
  return {label.x - anchor.x,        label.y - anchor.y,        label.z - anchor.z,
          std::log(label.h / anchor.h), std::log(label.w / anchor.w),
          std::log(label.l / anchor.l), label.yaw};
}

DetectionBox decode_box(const DetectionBox& anchor, const double* params, double confidence) {
  DetectionBox box = anchor;
  box.x = anchor.x + params[0];
  box.y = anchor.y + params[1];
  box.z = anchor.z + params[2];
  box.h = anchor.h * std::exp(params[3]);
  box.w = anchor.w * std::exp(params[4]);
  box.l = anchor.l * std::exp(params[5]);
  box.yaw = params[6];
  box.confidence = confidence;
  return box;
}

std::vector<DetectionBox> decode_boxes(const Tensor& params, const Tensor& objectness,
                                       const std::vector<DetectionBox>& anchors) {
  if (params.rank() != 2 || params.dim(0) != anchors.size() || params.dim(1) != 7 ||
      objectness.size() != anchors.size()) {
    throw std::invalid_argument("decode_boxes: shape mismatch");
  }
  std::vector<DetectionBox> out;
  out.reserve(anchors.size());
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    out.push_back(decode_box(anchors[a], params.data() + a * 7, objectness[a]));
  }
  return out;
}

std::vector<DetectionBox> nms_bev(const std::vector<DetectionBox>& boxes, double iou_threshold,
                                  std::size_t max_keep) {
  std::vector<std::size_t> order(boxes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&boxes](std::size_t a, std::size_t b) {
    return boxes[a].confidence > boxes[b].confidence;
  });
  std::vector<DetectionBox> kept;
  for (std::size_t idx : order) {
    if (kept.size() >= max_keep) break;
    bool suppressed = false;
    for (const DetectionBox& winner : kept) {
      if (bev_iou(boxes[idx], winner) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(boxes[idx]);
  }
  return kept;
}

ag::Var response_loss(const ag::Var& box_params, const ag::Var& objectness,
                      const std::vector<DetectionBox>& anchors, const SoftLabelSet& labels,
                      const std::vector<AnchorMatch>& matches) {
  if (anchors.empty()) {
    throw std::invalid_argument("response_loss: anchor set must not be empty");
  }
  const std::size_t n = anchors.size();
  if (box_params->value.rank() != 2 || box_params->value.dim(0) != n ||
      box_params->value.dim(1) != 7 || objectness->value.size() != n ||
      matches.size() != n) {
    throw std::invalid_argument("response_loss: shape mismatch");
  }

  Tensor reg_target({n, 7});
  Tensor reg_weight({n, 7});
  Tensor obj_target({n});
  Tensor pos_weight({n});
  Tensor neg_weight({n});
  std::size_t n_pos = 0, n_neg = 0;
  for (std::size_t a = 0; a < n; ++a) {
    switch (matches[a].role) {
      case AnchorRole::Positive: {
        if (matches[a].label_index >= labels.boxes.size()) {
          throw std::invalid_argument("response_loss: match references a missing label");
        }
        const auto t = regression_target(anchors[a], labels.boxes[matches[a].label_index]);
        for (std::size_t k = 0; k < 7; ++k) {
          reg_target.at(a, k) = t[k];
          reg_weight.at(a, k) = 1.0;
        }
        obj_target[a] = 1.0;
        pos_weight[a] = 1.0;
        ++n_pos;
        break;
      }
      case AnchorRole::Negative:
        neg_weight[a] = 1.0;
        ++n_neg;
        break;
      case AnchorRole::Ignore:
        break;
    }
  }

  // Positives and negatives are normalized separately so a handful of matched
  // anchors is not drowned out by the negative mass.
  ag::Var reg = smooth_l1_weighted_mean(box_params, reg_target, reg_weight,
                                        static_cast<double>(std::max<std::size_t>(1, n_pos)));
  ag::Var obj = bce_weighted_mean(objectness, obj_target, neg_weight,
                                  static_cast<double>(std::max<std::size_t>(1, n_neg)));
  if (n_pos > 0) {
    obj = ag::add(obj, bce_weighted_mean(objectness, obj_target, pos_weight,
                                         static_cast<double>(n_pos)));
  }
  return ag::add(reg, obj);
}

}  // namespace monosim
