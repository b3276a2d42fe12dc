#include "monosim/teacher.hpp"

#include <algorithm>
#include <cmath>

namespace monosim {

namespace {

// Keeps simulation loss magnitudes comparable to the response loss.
constexpr double kFeatureScale = 0.35;

double scene_feature(std::size_t k, const ScenePoint& p) {
  double value;
  switch (k) {
    case 0:
      value = 1.0;
      break;
    case 1:
      value = p.height;
      break;
    case 2:
      value = p.normal_z;
      break;
    case 3:
      value = p.box_flag;
      break;
    case 4:
      value = p.z / 10.0;
      break;
    case 5:
      value = p.x / 5.0;
      break;
    case 6:
      value = std::exp(-p.z / 10.0);
      break;
    case 7:
      value = std::abs(p.x) / 4.0;
      break;
    default: {
      const double t = static_cast<double>(k - 7);
      value = 0.5 * std::sin(0.37 * t * p.x + 0.23 * t * p.z + 0.11 * static_cast<double>(k)) +
              0.5 * p.box_flag * std::cos(0.19 * static_cast<double>(k) * p.height);
      break;
    }
  }
  return kFeatureScale * value;
}

double roi_feature(std::size_t k, const ScenePoint& p, const DetectionBox& box) {
  // Box-frame offsets (yaw-aligned), normalized by the box dimensions.
  const double cy = std::cos(box.yaw), sy = std::sin(box.yaw);
  const double dx = p.x - box.x, dz = p.z - box.z, dy = p.y - box.y;
  const double lx = dx * cy - dz * sy;
  const double lz = dx * sy + dz * cy;
  double value;
  switch (k) {
    case 0:
      value = 1.0;
      break;
    case 1:
      value = 2.0 * lx / box.w;
      break;
    case 2:
      value = 2.0 * dy / box.h;
      break;
    case 3:
      value = 2.0 * lz / box.l;
      break;
    case 4:
      value = p.normal_z;
      break;
    case 5:
      value = p.height;
      break;
    case 6:
      value = std::sqrt(lx * lx + lz * lz) / (box.w + box.l);
      break;
    default: {
      const double t = static_cast<double>(k - 6);
      value = 0.5 * std::sin(4.0 * 0.41 * t * lx + 2.0 * 0.29 * t * lz +
                             0.07 * static_cast<double>(k));
      break;
    }
  }
  return kFeatureScale * value;
}

}  // namespace

TeacherOutput teacher_forward(const SyntheticScene& scene, const HarnessConfig& config) {
  TeacherOutput out;
  out.predictions.frame_id = scene.frame_id;

  out.scene_points = PointFeatureSet(config.c_ps);
  std::vector<double> feats(config.c_ps);
  for (const ScenePoint& p : scene.points) {
    for (std::size_t k = 0; k < config.c_ps; ++k) feats[k] = scene_feature(k, p);
    out.scene_points.add(feats, p.x, p.y, p.z);
  }

  out.roi_points.resize(scene.boxes.size(), PointFeatureSet(config.c_pr));
  std::vector<double> roi_feats(config.c_pr);
  for (const ScenePoint& p : scene.points) {
    if (p.box_index < 0) continue;
    const auto b = static_cast<std::size_t>(p.box_index);
    for (std::size_t k = 0; k < config.c_pr; ++k) roi_feats[k] = roi_feature(k, p, scene.boxes[b]);
    out.roi_points[b].add(roi_feats, p.x, p.y, p.z);
  }

  // Predictions: ground truth under bounded noise, confidence from the
  // fraction of the box's samples that land inside the image.
  Rng noise(scene.seed * 0x9E3779B97F4A7C15ull + 0x5DEECE66Dull);
  const double h_img = static_cast<double>(scene.image.dim(1));
  const double w_img = static_cast<double>(scene.image.dim(2));
  std::vector<std::size_t> visible(scene.boxes.size(), 0);
  std::vector<std::size_t> total(scene.boxes.size(), 0);
  for (const ScenePoint& p : scene.points) {
    if (p.box_index < 0) continue;
    const auto b = static_cast<std::size_t>(p.box_index);
    ++total[b];
    const auto cam = scene.camera.world_to_camera(p.x, p.y, p.z);
    if (cam[2] <= kDepthCutoff) continue;
    const double u = std::round(scene.camera.fx() * cam[0] / cam[2] + scene.camera.cx());
    const double v = std::round(scene.camera.fy() * cam[1] / cam[2] + scene.camera.cy());
    if (u >= 0.0 && u < h_img && v >= 0.0 && v < w_img) ++visible[b];
  }
  for (std::size_t b = 0; b < scene.boxes.size(); ++b) {
    DetectionBox pred = scene.boxes[b];
    pred.x += noise.normal(0.0, config.teacher_noise);
    pred.y += noise.normal(0.0, config.teacher_noise);
    pred.z += noise.normal(0.0, config.teacher_noise);
    pred.h = std::max(0.1, pred.h + noise.normal(0.0, config.teacher_noise));
    pred.w = std::max(0.1, pred.w + noise.normal(0.0, config.teacher_noise));
    pred.l = std::max(0.1, pred.l + noise.normal(0.0, config.teacher_noise));
    pred.yaw += noise.normal(0.0, config.teacher_noise);
    const double visibility =
        total[b] ? static_cast<double>(visible[b]) / static_cast<double>(total[b]) : 0.0;
    pred.confidence = std::clamp(visibility + 0.05 * noise.uniform(-1.0, 1.0), 0.0, 1.0);
    out.predictions.boxes.push_back(pred);
  }
  return out;
}

std::uint64_t teacher_checksum(const TeacherOutput& teacher) {
  std::uint64_t hash = 1469598103934665603ull;
  auto mix_bytes = [&hash](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      hash ^= bytes[i];
      hash *= 1099511628211ull;
    }
  };
  auto mix_points = [&](const PointFeatureSet& pts) {
    mix_bytes(pts.features.data(), pts.features.size() * sizeof(double));
    mix_bytes(pts.coordinates.data(), pts.coordinates.size() * sizeof(double));
  };
  mix_points(teacher.scene_points);
  for (const auto& roi : teacher.roi_points) mix_points(roi);
  for (const DetectionBox& b : teacher.predictions.boxes) {
    const double fields[9] = {b.x, b.y, b.z, b.h, b.w, b.l, b.yaw, b.confidence,
                              static_cast<double>(b.label)};
    mix_bytes(fields, sizeof(fields));
  }
  return hash;
}

}  // namespace monosim
