#include "monosim/camera.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace monosim {

void CameraModel::validate() const {
  if (!(fx() > 0.0) || !(fy() > 0.0)) {
    throw std::invalid_argument("CameraModel: focal lengths must be positive");
  }
  // R * R^T must equal the identity within 1e-9.
  const auto& rt = extrinsics;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      double dot = 0.0;
      for (int k = 0; k < 3; ++k) dot += rt[r * 4 + k] * rt[c * 4 + k];
      const double expected = (r == c) ? 1.0 : 0.0;
      if (std::abs(dot - expected) > 1e-9) {
        throw std::invalid_argument("CameraModel: rotation block is not orthonormal");
      }
    }
  }
}

CameraModel CameraModel::scaled(double row_scale, double col_scale) const {
  CameraModel out = *this;
  out.intrinsics[0] = intrinsics[0] * row_scale;
  out.intrinsics[2] = intrinsics[2] * row_scale;
  out.intrinsics[4] = intrinsics[4] * col_scale;
  out.intrinsics[5] = intrinsics[5] * col_scale;
  return out;
}

void save_camera(std::ostream& out, const CameraModel& camera) {
  out.precision(17);
  for (int i = 0; i < 9; ++i) out << camera.intrinsics[i] << (i == 8 ? "\n" : " ");
  for (int i = 0; i < 12; ++i) out << camera.extrinsics[i] << (i == 11 ? "\n" : " ");
}

CameraModel load_camera(std::istream& in) {
  CameraModel camera;
  for (int i = 0; i < 9; ++i) {
    if (!(in >> camera.intrinsics[i])) throw std::runtime_error("camera: truncated K");
  }
  for (int i = 0; i < 12; ++i) {
    if (!(in >> camera.extrinsics[i])) throw std::runtime_error("camera: truncated RT");
  }
  camera.validate();
  return camera;
}

void save_camera_file(const std::string& path, const CameraModel& camera) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("camera: cannot open " + path + " for writing");
  save_camera(out, camera);
}

CameraModel load_camera_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("camera: cannot open " + path);
  return load_camera(in);
}

}  // namespace monosim
