#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "monosim/camera.hpp"
#include "monosim/config.hpp"
#include "monosim/labels.hpp"
#include "monosim/rng.hpp"
#include "monosim/tensor.hpp"

namespace monosim {

// Ground plane height; the camera sits at y = 0 looking down +z, y positive
// downward.
inline constexpr double kGroundY = 1.5;

// One LiDAR-like sample: position plus the raw per-point channels the teacher
// builds on. box_index is -1 for ground points.
struct ScenePoint {
  double x = 0.0, y = 0.0, z = 0.0;
  double height = 0.0;    // above ground
  double normal_z = 0.0;  // z component of the surface normal
  double box_flag = 0.0;  // 1 when sampled on a box surface
  int box_index = -1;
};

struct SyntheticScene {
  std::uint64_t seed = 0;
  std::int64_t frame_id = 0;
  std::vector<DetectionBox> boxes;  // ground truth, confidence 1
  std::vector<ScenePoint> points;
  CameraModel camera;  // image-resolution camera
  FeatureMap image;    // 3 x H x W: depth, intensity, semantic

  CameraModel feature_camera(std::size_t feature_height, std::size_t feature_width) const;
};

// Camera whose rows span the lateral extent and whose columns span the
// vertical extent of the default scene volume.
CameraModel default_camera(std::size_t image_height, std::size_t image_width);

// Deterministic given the rng stream: non-overlapping boxes in BEV, >= 20
// surface samples per box, ground-plane clutter, and the rendered 3-channel
// input image.
SyntheticScene generate_scene(Rng& rng, const HarnessConfig& config);

void save_scene(std::ostream& out, const SyntheticScene& scene);
SyntheticScene load_scene(std::istream& in);
void save_scene_file(const std::string& path, const SyntheticScene& scene);
SyntheticScene load_scene_file(const std::string& path);

// scene_NNNNNN.txt files in a directory, sorted by frame id.
std::vector<SyntheticScene> load_scene_dir(const std::string& dir);

}  // namespace monosim
