#include "monosim/scene.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "monosim/metrics.hpp"
#include "monosim/render.hpp"

namespace monosim {

namespace {

// Disjointness margin (meters) between generated boxes in BEV.
constexpr double kPlacementGap = 0.5;

bool bev_disjoint(const DetectionBox& a, const DetectionBox& b, double gap) {
  DetectionBox ea = a, eb = b;
  ea.w += gap;
  ea.l += gap;
  return bev_iou(ea, eb) == 0.0;
}

}  // namespace

CameraModel SyntheticScene::feature_camera(std::size_t feature_height,
                                           std::size_t feature_width) const {
  const double row_scale =
      static_cast<double>(feature_height) / static_cast<double>(image.dim(1));
  const double col_scale =
      static_cast<double>(feature_width) / static_cast<double>(image.dim(2));
  return camera.scaled(row_scale, col_scale);
}

CameraModel default_camera(std::size_t image_height, std::size_t image_width) {
  const double h = static_cast<double>(image_height);
  const double w = static_cast<double>(image_width);
  CameraModel camera;
  camera.intrinsics = {h * 9.0 / 8.0, 0.0, h / 2.0, 0.0, 2.5 * w, 5.0 * w / 12.0, 0.0, 0.0, 1.0};
  camera.validate();
  return camera;
}

SyntheticScene generate_scene(Rng& rng, const HarnessConfig& config) {
  config.validate();
  SyntheticScene scene;
  scene.camera = default_camera(config.image_height, config.image_width);

  const std::size_t n_boxes =
      config.min_boxes + rng.uniform_int(config.max_boxes - config.min_boxes + 1);
  for (std::size_t b = 0; b < n_boxes; ++b) {
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      DetectionBox box;
      box.label = ObjectClass::Car;
      box.z = rng.uniform(config.depth_min + 1.0, config.depth_max - 1.0);
      const double x_bound = std::min(3.4, 0.3 * box.z);
      box.x = rng.uniform(-x_bound, x_bound);
      box.h = rng.uniform(1.5, 1.7);
      box.w = rng.uniform(1.55, 1.75);
      box.l = rng.uniform(3.7, 4.3);
      box.yaw = rng.uniform(-0.3, 0.3);
      box.y = kGroundY - box.h / 2.0;
      box.confidence = 1.0;
      bool clear = true;
      for (const DetectionBox& other : scene.boxes) {
        if (!bev_disjoint(box, other, kPlacementGap)) {
          clear = false;
          break;
        }
      }
      if (clear) {
        scene.boxes.push_back(box);
        placed = true;
      }
    }
    if (!placed) {
      throw std::runtime_error("generate_scene: could not place box " + std::to_string(b) +
                               " without BEV overlap; relax the box/area configuration");
    }
  }

  // Ground clutter.
  for (std::size_t i = 0; i < config.ground_points; ++i) {
    ScenePoint p;
    p.z = rng.uniform(config.depth_min, config.depth_max);
    const double x_bound = 0.42 * p.z;
    p.x = rng.uniform(-x_bound, x_bound);
    p.y = kGroundY;
    p.height = 0.0;
    p.normal_z = 0.0;
    p.box_flag = 0.0;
    p.box_index = -1;
    scene.points.push_back(p);
  }

  // Surface samples per box, area-weighted over top and the four sides.
  for (std::size_t b = 0; b < scene.boxes.size(); ++b) {
    const DetectionBox& box = scene.boxes[b];
    const double cy = std::cos(box.yaw), sy = std::sin(box.yaw);
    struct Face {
      double area;
      int kind;  // 0 top, 1 +z, 2 -z, 3 +x, 4 -x (local axes)
    };
    const Face faces[5] = {{box.w * box.l, 0},
                           {box.w * box.h, 1},
                           {box.w * box.h, 2},
                           {box.l * box.h, 3},
                           {box.l * box.h, 4}};
    double total_area = 0.0;
    for (const Face& f : faces) total_area += f.area;

    for (std::size_t i = 0; i < config.box_points; ++i) {
      double pick = rng.uniform(0.0, total_area);
      int kind = faces[4].kind;
      for (const Face& f : faces) {
        if (pick < f.area) {
          kind = f.kind;
          break;
        }
        pick -= f.area;
      }
      double lx = 0.0, ly = 0.0, lz = 0.0;
      double nx = 0.0, ny = 0.0, nz = 0.0;
      switch (kind) {
        case 0:  // top; up is -y
          lx = rng.uniform(-box.w / 2.0, box.w / 2.0);
          lz = rng.uniform(-box.l / 2.0, box.l / 2.0);
          ly = -box.h / 2.0;
          ny = -1.0;
          break;
        case 1:
          lx = rng.uniform(-box.w / 2.0, box.w / 2.0);
          ly = rng.uniform(-box.h / 2.0, box.h / 2.0);
          lz = box.l / 2.0;
          nz = 1.0;
          break;
        case 2:
          lx = rng.uniform(-box.w / 2.0, box.w / 2.0);
          ly = rng.uniform(-box.h / 2.0, box.h / 2.0);
          lz = -box.l / 2.0;
          nz = -1.0;
          break;
        case 3:
          lz = rng.uniform(-box.l / 2.0, box.l / 2.0);
          ly = rng.uniform(-box.h / 2.0, box.h / 2.0);
          lx = box.w / 2.0;
          nx = 1.0;
          break;
        default:
          lz = rng.uniform(-box.l / 2.0, box.l / 2.0);
          ly = rng.uniform(-box.h / 2.0, box.h / 2.0);
          lx = -box.w / 2.0;
          nx = -1.0;
          break;
      }
      ScenePoint p;
      p.x = box.x + lx * cy + lz * sy;
      p.z = box.z - lx * sy + lz * cy;
      p.y = box.y + ly;
      p.height = kGroundY - p.y;
      p.normal_z = -nx * sy + nz * cy;
      (void)ny;
      p.box_flag = 1.0;
      p.box_index = static_cast<int>(b);
      scene.points.push_back(p);
    }
  }

  // Input image: depth, intensity, semantic channels rendered from the cloud.
  PointFeatureSet image_points(3);
  for (const ScenePoint& p : scene.points) {
    const double depth_feature = p.z / 20.0;
    const double intensity = 0.5 + 0.25 * std::sin(1.7 * p.x) + 0.25 * std::cos(0.9 * p.z);
    image_points.add({depth_feature, intensity, p.box_flag}, p.x, p.y, p.z);
  }
  scene.image =
      render_points(image_points, scene.camera, config.image_height, config.image_width);
  return scene;
}

void save_scene(std::ostream& out, const SyntheticScene& scene) {
  out.precision(17);
  out << "monosim-scene v1\n";
  out << "seed " << scene.seed << "\n";
  out << "frame " << scene.frame_id << "\n";
  out << "camera\n";
  save_camera(out, scene.camera);
  out << "boxes " << scene.boxes.size() << "\n";
  for (const DetectionBox& b : scene.boxes) {
    out << to_string(b.label) << " " << b.x << " " << b.y << " " << b.z << " " << b.h << " "
        << b.w << " " << b.l << " " << b.yaw << " " << b.confidence << "\n";
  }
  out << "points " << scene.points.size() << "\n";
  for (const ScenePoint& p : scene.points) {
    out << p.x << " " << p.y << " " << p.z << " " << p.height << " " << p.normal_z << " "
        << p.box_flag << " " << p.box_index << "\n";
  }
  out << "image " << scene.image.dim(0) << " " << scene.image.dim(1) << " " << scene.image.dim(2)
      << "\n";
  for (std::size_t i = 0; i < scene.image.size(); ++i) {
    out << scene.image[i] << ((i + 1) % 16 == 0 ? "\n" : " ");
  }
  out << "\nend\n";
}

SyntheticScene load_scene(std::istream& in) {
  SyntheticScene scene;
  std::string tag, version;
  if (!(in >> tag >> version) || tag != "monosim-scene" || version != "v1") {
    throw std::runtime_error("scene: bad header");
  }
  auto expect = [&in](const char* want) {
    std::string got;
    if (!(in >> got) || got != want) {
      throw std::runtime_error(std::string("scene: expected section '") + want + "'");
    }
  };
  expect("seed");
  in >> scene.seed;
  expect("frame");
  in >> scene.frame_id;
  expect("camera");
  scene.camera = load_camera(in);
  expect("boxes");
  std::size_t n_boxes = 0;
  in >> n_boxes;
  for (std::size_t i = 0; i < n_boxes; ++i) {
    std::string cls;
    DetectionBox b;
    in >> cls >> b.x >> b.y >> b.z >> b.h >> b.w >> b.l >> b.yaw >> b.confidence;
    auto parsed = class_from_string(cls);
    if (!parsed || !in) throw std::runtime_error("scene: bad box record");
    b.label = *parsed;
    scene.boxes.push_back(b);
  }
  expect("points");
  std::size_t n_points = 0;
  in >> n_points;
  for (std::size_t i = 0; i < n_points; ++i) {
    ScenePoint p;
    in >> p.x >> p.y >> p.z >> p.height >> p.normal_z >> p.box_flag >> p.box_index;
    if (!in) throw std::runtime_error("scene: bad point record");
    scene.points.push_back(p);
  }
  expect("image");
  std::size_t c = 0, h = 0, w = 0;
  in >> c >> h >> w;
  scene.image = FeatureMap({c, h, w});
  for (std::size_t i = 0; i < scene.image.size(); ++i) {
    if (!(in >> scene.image[i])) throw std::runtime_error("scene: truncated image");
  }
  expect("end");
  return scene;
}

void save_scene_file(const std::string& path, const SyntheticScene& scene) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("scene: cannot open " + path + " for writing");
  save_scene(out, scene);
}

SyntheticScene load_scene_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("scene: cannot open " + path);
  return load_scene(in);
}

std::vector<SyntheticScene> load_scene_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("scene_", 0) == 0 && name.size() > 4 &&
        name.substr(name.size() - 4) == ".txt") {
      files.push_back(entry.path().string());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("scene: no scene_*.txt files in " + dir);
  std::vector<SyntheticScene> scenes;
  scenes.reserve(files.size());
  for (const std::string& f : files) scenes.push_back(load_scene_file(f));
  return scenes;
}

}  // namespace monosim
