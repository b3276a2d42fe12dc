#include "monosim/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace monosim {

void HarnessConfig::validate() const {
  if (min_boxes > max_boxes) throw std::invalid_argument("config: min_boxes > max_boxes");
  if (image_height % 8 != 0 || image_width % 8 != 0) {
    throw std::invalid_argument("config: image dims must be multiples of 8");
  }
  if (!(depth_min > 0.0 && depth_max > depth_min)) {
    throw std::invalid_argument("config: bad depth range");
  }
  if (depth_bins == 0) throw std::invalid_argument("config: depth_bins must be >= 1");
  if (box_points < 20) throw std::invalid_argument("config: need at least 20 points per box");
  threshold_policy().validate();
  if (!(lambda_scene >= 0.0) || !(lambda_roi >= 0.0)) {
    throw std::invalid_argument("config: loss weights must be non-negative");
  }
}

namespace {

template <typename T>
struct Field {
  T HarnessConfig::* member;
};

using Setter = std::function<void(HarnessConfig&, const std::string&)>;
using Getter = std::function<std::string(const HarnessConfig&)>;

struct FieldIO {
  Setter set;
  Getter get;
};

std::map<std::string, FieldIO> field_table() {
  std::map<std::string, FieldIO> table;
  auto add_size = [&table](const std::string& key, std::size_t HarnessConfig::* member) {
    table[key] = {[member](HarnessConfig& c, const std::string& v) {
                    c.*member = static_cast<std::size_t>(std::stoull(v));
                  },
                  [member](const HarnessConfig& c) { return std::to_string(c.*member); }};
  };
  auto add_double = [&table](const std::string& key, double HarnessConfig::* member) {
    table[key] = {[member](HarnessConfig& c, const std::string& v) { c.*member = std::stod(v); },
                  [member](const HarnessConfig& c) {
                    std::ostringstream out;
                    out.precision(17);
                    out << c.*member;
                    return out.str();
                  }};
  };
  auto add_bool = [&table](const std::string& key, bool HarnessConfig::* member) {
    table[key] = {[member](HarnessConfig& c, const std::string& v) {
                    if (v == "true" || v == "1") {
                      c.*member = true;
                    } else if (v == "false" || v == "0") {
                      c.*member = false;
                    } else {
                      throw std::invalid_argument("config: bad boolean '" + v + "'");
                    }
                  },
                  [member](const HarnessConfig& c) { return (c.*member) ? "true" : "false"; }};
  };

  add_size("min_boxes", &HarnessConfig::min_boxes);
  add_size("max_boxes", &HarnessConfig::max_boxes);
  add_size("ground_points", &HarnessConfig::ground_points);
  add_size("box_points", &HarnessConfig::box_points);
  add_size("image_height", &HarnessConfig::image_height);
  add_size("image_width", &HarnessConfig::image_width);
  add_double("depth_min", &HarnessConfig::depth_min);
  add_double("depth_max", &HarnessConfig::depth_max);
  add_size("trunk_channels", &HarnessConfig::trunk_channels);
  add_size("pred_hidden", &HarnessConfig::pred_hidden);
  add_size("c_ms", &HarnessConfig::c_ms);
  add_size("c_ps", &HarnessConfig::c_ps);
  add_size("c_mr", &HarnessConfig::c_mr);
  add_size("c_pr", &HarnessConfig::c_pr);
  add_bool("global_local", &HarnessConfig::global_local);
  add_size("voxel_x", &HarnessConfig::voxel_x);
  add_size("voxel_y", &HarnessConfig::voxel_y);
  add_size("voxel_z", &HarnessConfig::voxel_z);
  add_size("depth_bins", &HarnessConfig::depth_bins);
  add_double("pos_iou", &HarnessConfig::pos_iou);
  add_double("neg_iou", &HarnessConfig::neg_iou);
  add_double("nms_iou", &HarnessConfig::nms_iou);
  add_size("max_detections", &HarnessConfig::max_detections);
  add_double("learning_rate", &HarnessConfig::learning_rate);
  add_double("lambda_scene", &HarnessConfig::lambda_scene);
  add_double("lambda_roi", &HarnessConfig::lambda_roi);
  add_double("car_threshold", &HarnessConfig::car_threshold);
  add_double("ped_threshold", &HarnessConfig::ped_threshold);
  add_double("cyc_threshold", &HarnessConfig::cyc_threshold);
  add_double("teacher_noise", &HarnessConfig::teacher_noise);
  add_size("train_scenes", &HarnessConfig::train_scenes);
  return table;
}

}  // namespace

HarnessConfig parse_config(std::istream& in) {
  HarnessConfig config;
  const auto table = field_table();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config line " + std::to_string(line_no) + ": expected key=value");
    }
    auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    auto it = table.find(key);
    if (it == table.end()) {
      throw std::runtime_error("config line " + std::to_string(line_no) + ": unknown key '" +
                               key + "'");
    }
    it->second.set(config, value);
  }
  config.validate();
  return config;
}

HarnessConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  return parse_config(in);
}

void save_config(std::ostream& out, const HarnessConfig& config) {
  for (const auto& [key, io] : field_table()) {
    out << key << "=" << io.get(config) << "\n";
  }
}

}  // namespace monosim
