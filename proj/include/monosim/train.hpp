#pragma once

#include <string>
#include <vector>

#include "monosim/config.hpp"
#include "monosim/metrics.hpp"
#include "monosim/scene.hpp"
#include "monosim/student.hpp"
#include "monosim/teacher.hpp"
#include "monosim/voxel.hpp"

namespace monosim {

struct LossReport {
  double total = 0.0;
  double response = 0.0;
  double scene = 0.0;
  double roi = 0.0;
  double alpha = 0.5;
  double beta = 0.5;
};

struct SceneTeacherMap {
  FeatureMap features;
  ValidityMask mask;
};

// Teacher scene features rendered at the student's scene feature resolution.
SceneTeacherMap build_teacher_scene_map(const SyntheticScene& scene,
                                        const TeacherOutput& teacher,
                                        const HarnessConfig& config);

// Union of the per-box RoI point sets, voxelized and pooled to the student's
// RoI feature resolution.
RoiTeacherMap build_teacher_roi_map(const TeacherOutput& teacher, const HarnessConfig& config);

struct StepLosses {
  ag::Var response;
  ag::Var scene;
  ag::Var roi;
  ag::Var total;
};

// Builds the full training graph for one scene: render + mask, channel
// alignment, masked L1 losses (fused over branches when the global/local pair
// is enabled), soft-label response loss and the weighted total.
StepLosses compose_losses(StudentModel& student, const SyntheticScene& scene,
                          const TeacherOutput& teacher, const HarnessConfig& config);

// compose_losses + one gradient-descent update on student, alignment and
// fusion parameters. The teacher is data and stays untouched.
LossReport train_step(StudentModel& student, const SyntheticScene& scene,
                      const TeacherOutput& teacher, const HarnessConfig& config);

std::vector<std::vector<DetectionBox>> infer_detections(StudentModel& student,
                                                        const std::vector<SyntheticScene>& scenes);

std::vector<std::vector<DetectionBox>> ground_truth_boxes(
    const std::vector<SyntheticScene>& scenes);

// Inference + AP over the scene list (no alignment heads involved).
ApResult evaluate_student(StudentModel& student, const std::vector<SyntheticScene>& scenes,
                          double iou_threshold, RecallSet recall_set);

struct TrainRun {
  StudentModel student;
  std::vector<LossReport> reports;
  std::vector<SyntheticScene> scenes;
};

// Generates `config.train_scenes` scenes from the seed and cycles them for
// the requested number of steps.
TrainRun run_training(const HarnessConfig& config, std::size_t steps, std::uint64_t seed);

// Deterministic scene set for a given seed (training uses offset 0; keep
// evaluation sets on a different offset).
std::vector<SyntheticScene> make_scenes(const HarnessConfig& config, std::uint64_t seed,
                                        std::size_t count, std::uint64_t frame_offset = 0);

std::string metrics_csv(const std::vector<LossReport>& reports);

}  // namespace monosim
