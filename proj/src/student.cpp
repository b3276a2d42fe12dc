#include "monosim/student.hpp"

#include <istream>
#include <ostream>
#include <sstream>

#include "monosim/scene.hpp"

namespace monosim {

namespace {

// (bins*fields) x rows column means -> (rows*bins) x fields anchor rows.
ag::Var to_anchor_rows(const ag::Var& colmean, std::size_t rows, std::size_t bins,
                       std::size_t fields) {
  Tensor out({rows * bins, fields});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t d = 0; d < bins; ++d) {
      for (std::size_t k = 0; k < fields; ++k) {
        out.at(r * bins + d, k) = colmean->value.at(d * fields + k, r);
      }
    }
  }
  return ag::make_op(std::move(out), {colmean}, [rows, bins, fields](ag::Node& self) {
    ag::Node& p = *self.parents[0];
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t d = 0; d < bins; ++d) {
        for (std::size_t k = 0; k < fields; ++k) {
          p.grad.at(d * fields + k, r) += self.grad.at(r * bins + d, k);
        }
      }
    }
  });
}

void save_norm_state(std::ostream& out, const std::string& name,
                     const ag::BatchNormState& state) {
  out << name << " " << state.running_mean.size() << "\n";
  out.precision(17);
  for (std::size_t i = 0; i < state.running_mean.size(); ++i) {
    if (i) out << " ";
    out << state.running_mean[i];
  }
  out << "\n";
  for (std::size_t i = 0; i < state.running_var.size(); ++i) {
    if (i) out << " ";
    out << state.running_var[i];
  }
  out << "\n";
}

}  // namespace

StudentModel::StudentModel(const HarnessConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const std::size_t tc = config_.trunk_channels;

  conv1_weight_ = detector_params_.create_fan_in("trunk.conv1.weight", {tc, 3, 3, 3}, 3 * 9, rng);
  conv1_bias_ = detector_params_.create("trunk.conv1.bias", Tensor::zeros({tc}));
  conv2_weight_ =
      detector_params_.create_fan_in("trunk.conv2.weight", {tc, tc, 3, 3}, tc * 9, rng);
  conv2_bias_ = detector_params_.create("trunk.conv2.bias", Tensor::zeros({tc}));

  const std::size_t hidden = config_.pred_hidden;
  pred_hidden_weight_ =
      detector_params_.create_fan_in("pred.hidden.weight", {hidden, tc, 3, 3}, tc * 9, rng);
  pred_hidden_bias_ = detector_params_.create("pred.hidden.bias", Tensor::zeros({hidden}));
  const std::size_t pred_channels = config_.depth_bins * 8;
  pred_weight_ =
      detector_params_.create_fan_in("pred.weight", {pred_channels, hidden, 1, 1}, hidden, rng);
  // Objectness channels start at a low-confidence prior so the few positive
  // anchors are not drowned out by the negative mass early in training.
  Tensor pred_bias = Tensor::zeros({pred_channels});
  for (std::size_t bin = 0; bin < config_.depth_bins; ++bin) pred_bias[bin * 8 + 7] = -2.2;
  pred_bias_ = detector_params_.create("pred.bias", std::move(pred_bias));

  const std::vector<std::string> names =
      config_.global_local ? std::vector<std::string>{"glo", "loc"}
                           : std::vector<std::string>{"main"};
  for (const std::string& name : names) {
    StudentBranch branch;
    branch.name = name;
    branch.scene_weight = detector_params_.create_fan_in("scene." + name + ".weight",
                                                         {config_.c_ms, tc, 3, 3}, tc * 9, rng);
    branch.scene_bias = detector_params_.create("scene." + name + ".bias",
                                                Tensor::zeros({config_.c_ms}));
    branch.roi_weight = detector_params_.create_fan_in("roi." + name + ".weight",
                                                       {config_.c_mr, tc, 3, 3}, tc * 9, rng);
    branch.roi_bias = detector_params_.create("roi." + name + ".bias",
                                              Tensor::zeros({config_.c_mr}));
    branch.align_scene = make_alignment_head(simulation_params_, "align_scene." + name,
                                             config_.c_ms, config_.c_ps, rng);
    branch.align_roi = make_alignment_head(simulation_params_, "align_roi." + name,
                                           config_.c_mr, config_.c_pr, rng);
    branches_.push_back(std::move(branch));
  }

  fusion_.raw_alpha = simulation_params_.create("fusion.alpha_raw", Tensor::scalar(0.0));
  fusion_.raw_beta = simulation_params_.create("fusion.beta_raw", Tensor::scalar(0.0));

  AnchorGridConfig anchor_config;
  anchor_config.rows = config_.scene_feature_height();
  anchor_config.depth_bins = config_.depth_bins;
  anchor_config.depth_min = config_.depth_min;
  anchor_config.depth_max = config_.depth_max;
  anchor_config.ground_y = kGroundY;
  const CameraModel feature_camera =
      default_camera(config_.image_height, config_.image_width)
          .scaled(static_cast<double>(config_.scene_feature_height()) /
                      static_cast<double>(config_.image_height),
                  static_cast<double>(config_.scene_feature_width()) /
                      static_cast<double>(config_.image_width));
  anchors_ = make_anchor_grid(feature_camera, anchor_config);
}

ag::Var StudentModel::trunk_forward(const FeatureMap& image) {
  if (image.rank() != 3 || image.dim(0) != 3 || image.dim(1) != config_.image_height ||
      image.dim(2) != config_.image_width) {
    throw std::invalid_argument("StudentModel: unexpected input image shape " +
                                shape_to_string(image.shape()));
  }
  ag::Var x = ag::constant(image);
  x = ag::relu(ag::conv2d(x, conv1_weight_, conv1_bias_, 2, 1));
  x = ag::relu(ag::conv2d(x, conv2_weight_, conv2_bias_, 2, 1));
  return x;
}

ag::Var StudentModel::scene_forward(const ag::Var& trunk, std::size_t branch) {
  StudentBranch& b = branches_.at(branch);
  return ag::conv2d(trunk, b.scene_weight, b.scene_bias, 1, 1);
}

ag::Var StudentModel::roi_forward(const ag::Var& trunk, std::size_t branch) {
  StudentBranch& b = branches_.at(branch);
  return ag::conv2d(trunk, b.roi_weight, b.roi_bias, 2, 1);
}

PredictionVars StudentModel::predict(const ag::Var& trunk) {
  const std::size_t rows = config_.scene_feature_height();
  const std::size_t bins = config_.depth_bins;
  ag::Var hidden = ag::relu(ag::conv2d(trunk, pred_hidden_weight_, pred_hidden_bias_, 1, 1));
  ag::Var head = ag::conv2d(hidden, pred_weight_, pred_bias_, 1, 0);
  ag::Var colmean = ag::mean_last_axis(head);           // (bins*8) x rows
  ag::Var rowsmat = to_anchor_rows(colmean, rows, bins, 8);  // (rows*bins) x 8
  const std::size_t n_anchors = rows * bins;
  PredictionVars out;
  out.box_params = ag::slice_rows_cols(rowsmat, 0, n_anchors, 0, 7);
  ag::Var logits = ag::reshape(ag::slice_rows_cols(rowsmat, 0, n_anchors, 7, 8), {n_anchors});
  out.objectness = ag::sigmoid(logits);
  return out;
}

std::vector<DetectionBox> StudentModel::infer(const FeatureMap& image) {
  ag::Var trunk = trunk_forward(image);
  PredictionVars pred = predict(trunk);
  std::vector<DetectionBox> raw =
      decode_boxes(pred.box_params->value, pred.objectness->value, anchors_);
  return nms_bev(raw, config_.nms_iou, config_.max_detections);
}

void StudentModel::drop_simulation_parameters() {
  simulation_params_ = ag::ParameterSet();
  for (StudentBranch& b : branches_) {
    b.align_scene = AlignmentHead();
    b.align_roi = AlignmentHead();
  }
  fusion_ = FusionWeights();
}

void StudentModel::save(std::ostream& out) const {
  out << "monosim-checkpoint v1\n";
  out << "config-begin\n";
  save_config(out, config_);
  out << "config-end\n";
  out << "detector\n";
  detector_params_.save(out);
  out << "simulation\n";
  simulation_params_.save(out);
  out << "normstates " << branches_.size() * 2 << "\n";
  for (const StudentBranch& b : branches_) {
    save_norm_state(out, "align_scene." + b.name, b.align_scene.norm_state);
    save_norm_state(out, "align_roi." + b.name, b.align_roi.norm_state);
  }
  out << "end\n";
}

StudentModel StudentModel::load(std::istream& in) {
  std::string tag, version;
  if (!(in >> tag >> version) || tag != "monosim-checkpoint" || version != "v1") {
    throw std::runtime_error("checkpoint: bad header");
  }
  std::string line;
  std::getline(in, line);
  if (!std::getline(in, line) || line != "config-begin") {
    throw std::runtime_error("checkpoint: missing config");
  }
  std::ostringstream config_text;
  while (std::getline(in, line) && line != "config-end") config_text << line << "\n";
  std::istringstream config_in(config_text.str());
  const HarnessConfig config = parse_config(config_in);

  StudentModel model(config, 0);
  std::string section;
  if (!(in >> section) || section != "detector") {
    throw std::runtime_error("checkpoint: missing detector section");
  }
  model.detector_params_.load(in);
  if (!(in >> section) || section != "simulation") {
    throw std::runtime_error("checkpoint: missing simulation section");
  }
  model.simulation_params_.load(in);
  std::size_t n_states = 0;
  if (!(in >> section >> n_states) || section != "normstates") {
    throw std::runtime_error("checkpoint: missing normstates section");
  }
  for (std::size_t s = 0; s < n_states; ++s) {
    std::string name;
    std::size_t channels = 0;
    if (!(in >> name >> channels)) throw std::runtime_error("checkpoint: truncated normstate");
    Tensor mean({channels}), var({channels});
    for (std::size_t i = 0; i < channels; ++i) in >> mean[i];
    for (std::size_t i = 0; i < channels; ++i) in >> var[i];
    if (!in) throw std::runtime_error("checkpoint: truncated normstate values");
    bool found = false;
    for (StudentBranch& b : model.branches_) {
      if (name == "align_scene." + b.name) {
        b.align_scene.norm_state.running_mean = mean;
        b.align_scene.norm_state.running_var = var;
        found = true;
      } else if (name == "align_roi." + b.name) {
        b.align_roi.norm_state.running_mean = mean;
        b.align_roi.norm_state.running_var = var;
        found = true;
      }
    }
    if (!found) throw std::runtime_error("checkpoint: unknown normstate " + name);
  }
  if (!(in >> section) || section != "end") {
    throw std::runtime_error("checkpoint: missing end marker");
  }
  return model;
}

}  // namespace monosim
