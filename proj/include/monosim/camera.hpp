#pragma once

#include <array>
#include <iosfwd>
#include <string>

namespace monosim {

// Pinhole camera: intrinsics K (3x3, zero skew) and extrinsics RT (3x4)
// mapping world coordinates to camera coordinates.
struct CameraModel {
  std::array<double, 9> intrinsics{1, 0, 0, 0, 1, 0, 0, 0, 1};   // K, row-major
  std::array<double, 12> extrinsics{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};  // RT, row-major

  double fx() const { return intrinsics[0]; }
  double fy() const { return intrinsics[4]; }
  double cx() const { return intrinsics[2]; }
  double cy() const { return intrinsics[5]; }

  // p_cam = RT * [q; 1]
  std::array<double, 3> world_to_camera(double x, double y, double z) const {
    const auto& rt = extrinsics;
    return {rt[0] * x + rt[1] * y + rt[2] * z + rt[3],
            rt[4] * x + rt[5] * y + rt[6] * z + rt[7],
            rt[8] * x + rt[9] * y + rt[10] * z + rt[11]};
  }

  // fx > 0, fy > 0, rotation block orthonormal within 1e-9.
  void validate() const;

  // Intrinsics rescaled for a raster that is (row_scale, col_scale) times the
  // original one.
  CameraModel scaled(double row_scale, double col_scale) const;
};

// Plain-text serialization: row-major K (9 numbers) then RT (12 numbers),
// whitespace-separated.
void save_camera(std::ostream& out, const CameraModel& camera);
CameraModel load_camera(std::istream& in);
void save_camera_file(const std::string& path, const CameraModel& camera);
CameraModel load_camera_file(const std::string& path);

}  // namespace monosim
