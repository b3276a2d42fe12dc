#pragma once

#include <string>
#include <vector>

#include "monosim/alignment.hpp"
#include "monosim/autodiff.hpp"
#include "monosim/config.hpp"
#include "monosim/detect.hpp"
#include "monosim/losses.hpp"

namespace monosim {

// One simulation branch: a feature head pair plus the alignment heads that
// adapt its channel widths to the teacher's.
struct StudentBranch {
  std::string name;
  ag::Var scene_weight, scene_bias;
  ag::Var roi_weight, roi_bias;
  AlignmentHead align_scene;
  AlignmentHead align_roi;
};

struct PredictionVars {
  ag::Var box_params;  // A x 7
  ag::Var objectness;  // A, probabilities
};

// Tiny trainable detector. The deployed network (trunk, feature heads,
// prediction head) lives in detector_params; alignment heads and fusion gates
// live in simulation_params and are never touched on the inference path.
class StudentModel {
 public:
  StudentModel(const HarnessConfig& config, std::uint64_t seed);

  StudentModel(const StudentModel&) = delete;
  StudentModel& operator=(const StudentModel&) = delete;
  StudentModel(StudentModel&&) = default;
  StudentModel& operator=(StudentModel&&) = default;

  const HarnessConfig& config() const { return config_; }
  ag::ParameterSet& detector_params() { return detector_params_; }
  ag::ParameterSet& simulation_params() { return simulation_params_; }
  const ag::ParameterSet& detector_params() const { return detector_params_; }
  const ag::ParameterSet& simulation_params() const { return simulation_params_; }
  std::vector<StudentBranch>& branches() { return branches_; }
  const std::vector<DetectionBox>& anchors() const { return anchors_; }
  FusionWeights& fusion() { return fusion_; }
  const FusionWeights& fusion() const { return fusion_; }

  ag::Var trunk_forward(const FeatureMap& image);
  ag::Var scene_forward(const ag::Var& trunk, std::size_t branch);
  ag::Var roi_forward(const ag::Var& trunk, std::size_t branch);
  PredictionVars predict(const ag::Var& trunk);

  // Inference path: trunk + prediction head only.
  std::vector<DetectionBox> infer(const FeatureMap& image);

  // Drops alignment heads and fusion gates entirely; the model can still run
  // inference but no longer build simulation losses.
  void drop_simulation_parameters();
  bool has_simulation_parameters() const { return simulation_params_.size() > 0; }

  void save(std::ostream& out) const;
  static StudentModel load(std::istream& in);

 private:
  StudentModel() = default;

  HarnessConfig config_;
  ag::ParameterSet detector_params_;
  ag::ParameterSet simulation_params_;
  ag::Var conv1_weight_, conv1_bias_, conv2_weight_, conv2_bias_;
  ag::Var pred_hidden_weight_, pred_hidden_bias_;
  ag::Var pred_weight_, pred_bias_;
  std::vector<StudentBranch> branches_;
  FusionWeights fusion_;
  std::vector<DetectionBox> anchors_;
};

}  // namespace monosim
