#pragma once

#include <cstdint>
#include <vector>

#include "monosim/config.hpp"
#include "monosim/labels.hpp"
#include "monosim/render.hpp"
#include "monosim/scene.hpp"

namespace monosim {

// Frozen analytic stand-in for a point-cloud detector: per-point features are
// closed-form functions of scene geometry, predictions are the ground-truth
// boxes under bounded seeded noise with visibility-derived confidence.
struct TeacherOutput {
  PointFeatureSet scene_points;             // C_ps channels
  std::vector<PointFeatureSet> roi_points;  // one set per ground-truth box, C_pr channels
  SoftLabelSet predictions;
};

TeacherOutput teacher_forward(const SyntheticScene& scene, const HarnessConfig& config);

// FNV-1a over every teacher-side value; unchanged across training steps.
std::uint64_t teacher_checksum(const TeacherOutput& teacher);

}  // namespace monosim
