#include "monosim/train.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "monosim/render.hpp"

namespace monosim {

SceneTeacherMap build_teacher_scene_map(const SyntheticScene& scene,
                                        const TeacherOutput& teacher,
                                        const HarnessConfig& config) {
  const std::size_t h = config.scene_feature_height();
  const std::size_t w = config.scene_feature_width();
  SceneTeacherMap out;
  out.features = render_points(teacher.scene_points, scene.feature_camera(h, w), h, w);
  out.mask = compute_validity_mask(out.features);
  return out;
}

RoiTeacherMap build_teacher_roi_map(const TeacherOutput& teacher, const HarnessConfig& config) {
  PointFeatureSet all_roi(config.c_pr);
  for (const PointFeatureSet& roi : teacher.roi_points) all_roi.append(roi);
  return roi_teacher_map(all_roi, {config.voxel_x, config.voxel_y, config.voxel_z}, std::nullopt,
                         config.roi_feature_height(), config.roi_feature_width());
}

StepLosses compose_losses(StudentModel& student, const SyntheticScene& scene,
                          const TeacherOutput& teacher, const HarnessConfig& config) {
  if (!student.has_simulation_parameters()) {
    throw std::invalid_argument("compose_losses: simulation parameters were dropped");
  }
  const SceneTeacherMap scene_map = build_teacher_scene_map(scene, teacher, config);
  const RoiTeacherMap roi_map = build_teacher_roi_map(teacher, config);

  ag::Var trunk = student.trunk_forward(scene.image);

  std::vector<ag::Var> scene_losses, roi_losses;
  for (std::size_t b = 0; b < student.branches().size(); ++b) {
    ag::Var f_ms = student.scene_forward(trunk, b);
    ag::Var aligned_scene = align_channels(student.branches()[b].align_scene, f_ms);
    scene_losses.push_back(scene_loss(aligned_scene, scene_map.features, scene_map.mask));

    ag::Var f_mr = student.roi_forward(trunk, b);
    ag::Var aligned_roi = align_channels(student.branches()[b].align_roi, f_mr);
    roi_losses.push_back(roi_loss(aligned_roi, roi_map.features, roi_map.mask));
  }

  StepLosses losses;
  if (scene_losses.size() == 2) {
    losses.scene = fuse_global_local(scene_losses[0], scene_losses[1], student.fusion().raw_alpha);
    losses.roi = fuse_global_local(roi_losses[0], roi_losses[1], student.fusion().raw_beta);
  } else {
    losses.scene = scene_losses[0];
    losses.roi = roi_losses[0];
  }

  const SoftLabelSet soft = filter_soft_labels(teacher.predictions, config.threshold_policy());
  const std::vector<AnchorMatch> matches =
      match_anchors(student.anchors(), soft, config.pos_iou, config.neg_iou);
  PredictionVars pred = student.predict(trunk);
  losses.response = response_loss(pred.box_params, pred.objectness, student.anchors(), soft, matches);

  losses.total = total_loss(losses.response, losses.scene, losses.roi, config.loss_weights());
  return losses;
}

LossReport train_step(StudentModel& student, const SyntheticScene& scene,
                      const TeacherOutput& teacher, const HarnessConfig& config) {
  StepLosses losses = compose_losses(student, scene, teacher, config);

  const struct {
    const char* name;
    double value;
  } components[] = {{"L_response", losses.response->scalar()},
                    {"L_scene", losses.scene->scalar()},
                    {"L_RoI", losses.roi->scalar()},
                    {"L", losses.total->scalar()}};
  for (const auto& c : components) {
    if (!std::isfinite(c.value)) {
      throw std::runtime_error(std::string("train_step: non-finite loss component ") + c.name);
    }
  }

  student.detector_params().zero_grads();
  student.simulation_params().zero_grads();
  ag::backward(losses.total);
  student.detector_params().sgd_step(config.learning_rate);
  student.simulation_params().sgd_step(config.learning_rate);

  LossReport report;
  report.total = losses.total->scalar();
  report.response = losses.response->scalar();
  report.scene = losses.scene->scalar();
  report.roi = losses.roi->scalar();
  report.alpha = student.fusion().raw_alpha ? student.fusion().alpha() : 0.5;
  report.beta = student.fusion().raw_beta ? student.fusion().beta() : 0.5;
  return report;
}

std::vector<std::vector<DetectionBox>> infer_detections(StudentModel& student,
                                                        const std::vector<SyntheticScene>& scenes) {
  std::vector<std::vector<DetectionBox>> out;
  out.reserve(scenes.size());
  for (const SyntheticScene& scene : scenes) out.push_back(student.infer(scene.image));
  return out;
}

std::vector<std::vector<DetectionBox>> ground_truth_boxes(
    const std::vector<SyntheticScene>& scenes) {
  std::vector<std::vector<DetectionBox>> out;
  out.reserve(scenes.size());
  for (const SyntheticScene& scene : scenes) out.push_back(scene.boxes);
  return out;
}

ApResult evaluate_student(StudentModel& student, const std::vector<SyntheticScene>& scenes,
                          double iou_threshold, RecallSet recall_set) {
  return average_precision(infer_detections(student, scenes), ground_truth_boxes(scenes),
                           iou_threshold, recall_set);
}

std::vector<SyntheticScene> make_scenes(const HarnessConfig& config, std::uint64_t seed,
                                        std::size_t count, std::uint64_t frame_offset) {
  std::vector<SyntheticScene> scenes;
  scenes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t scene_seed = seed * 1000003ull + frame_offset + i;
    Rng rng(scene_seed);
    SyntheticScene scene = generate_scene(rng, config);
    scene.seed = scene_seed;
    scene.frame_id = static_cast<std::int64_t>(frame_offset + i);
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

TrainRun run_training(const HarnessConfig& config, std::size_t steps, std::uint64_t seed) {
  config.validate();
  TrainRun run{StudentModel(config, seed ^ 0xA5A5A5A5ull), {}, {}};
  run.scenes = make_scenes(config, seed, config.train_scenes);
  std::vector<TeacherOutput> teachers;
  teachers.reserve(run.scenes.size());
  for (const SyntheticScene& scene : run.scenes) {
    teachers.push_back(teacher_forward(scene, config));
  }
  run.reports.reserve(steps);
  for (std::size_t step = 0; step < steps; ++step) {
    const std::size_t idx = step % run.scenes.size();
    run.reports.push_back(train_step(run.student, run.scenes[idx], teachers[idx], config));
  }
  return run;
}

std::string metrics_csv(const std::vector<LossReport>& reports) {
  std::ostringstream out;
  out << "step,L,L_response,L_scene,L_RoI,alpha,beta\n";
  out.precision(12);
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const LossReport& r = reports[i];
    out << i << "," << r.total << "," << r.response << "," << r.scene << "," << r.roi << ","
        << r.alpha << "," << r.beta << "\n";
  }
  return out.str();
}

}  // namespace monosim
