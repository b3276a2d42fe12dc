#pragma once

#include <cstdint>
#include <vector>

#include "monosim/camera.hpp"
#include "monosim/tensor.hpp"

namespace monosim {

// N feature vectors (C channels each) paired with N world-frame coordinates.
struct PointFeatureSet {
  std::size_t count = 0;
  std::size_t channels = 0;
  std::vector<double> features;     // count x channels, row-major
  std::vector<double> coordinates;  // count x 3

  PointFeatureSet() = default;
  explicit PointFeatureSet(std::size_t channels) : channels(channels) {}

  double feature(std::size_t i, std::size_t c) const { return features[i * channels + c]; }
  double coord(std::size_t i, std::size_t axis) const { return coordinates[i * 3 + axis]; }

  void add(const std::vector<double>& feats, double x, double y, double z);
  void append(const PointFeatureSet& other);
  bool all_finite() const;
};

// H x W binary map marking pixels where rendered teacher features exist.
struct ValidityMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> data;  // 0 or 1

  ValidityMask() = default;
  ValidityMask(std::size_t h, std::size_t w) : height(h), width(w), data(h * w, 0) {}

  std::uint8_t at(std::size_t u, std::size_t v) const { return data[u * width + v]; }
  std::uint8_t& at(std::size_t u, std::size_t v) { return data[u * width + v]; }
};

// Points with camera depth below this are treated as behind the camera.
inline constexpr double kDepthCutoff = 1e-6;

// Projects each point to camera coordinates, rasterizes to the nearest pixel
// (round half away from zero) and resolves collisions by smallest depth,
// breaking depth ties by lowest input index. Pixels no point reaches hold
// exactly zero in every channel.
FeatureMap render_points(const PointFeatureSet& points, const CameraModel& camera,
                         std::size_t out_height, std::size_t out_width);

// mask(u,v) = 0 iff the channel sum at (u,v) is exactly zero.
ValidityMask compute_validity_mask(const FeatureMap& rendered);

std::size_t count_valid(const ValidityMask& mask);

}  // namespace monosim
