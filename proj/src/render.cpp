#include "monosim/render.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace monosim {

void PointFeatureSet::add(const std::vector<double>& feats, double x, double y, double z) {
  if (count == 0 && channels == 0) channels = feats.size();
  if (feats.size() != channels) {
    throw std::invalid_argument("PointFeatureSet: feature width mismatch");
  }
  features.insert(features.end(), feats.begin(), feats.end());
  coordinates.push_back(x);
  coordinates.push_back(y);
  coordinates.push_back(z);
  ++count;
}

void PointFeatureSet::append(const PointFeatureSet& other) {
  if (other.count == 0) return;
  if (count == 0) {
    *this = other;
    return;
  }
  if (other.channels != channels) {
    throw std::invalid_argument("PointFeatureSet: feature width mismatch on append");
  }
  features.insert(features.end(), other.features.begin(), other.features.end());
  coordinates.insert(coordinates.end(), other.coordinates.begin(), other.coordinates.end());
  count += other.count;
}

bool PointFeatureSet::all_finite() const {
  for (double v : features)
    if (!std::isfinite(v)) return false;
  for (double v : coordinates)
    if (!std::isfinite(v)) return false;
  return true;
}

FeatureMap render_points(const PointFeatureSet& points, const CameraModel& camera,
                         std::size_t out_height, std::size_t out_width) {
  if (out_height == 0 || out_width == 0) {
    throw std::invalid_argument("render_points: output dims must be >= 1");
  }
  if (!points.all_finite()) {
    throw std::invalid_argument("render_points: non-finite point data");
  }
  const std::size_t c_dim = points.channels ? points.channels : 1;
  FeatureMap out({c_dim, out_height, out_width});

  std::vector<double> depth(out_height * out_width, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < points.count; ++i) {
    const auto p = camera.world_to_camera(points.coord(i, 0), points.coord(i, 1),
                                          points.coord(i, 2));
    const double z = p[2];
    if (z <= kDepthCutoff) continue;
    const double u_f = std::round(camera.fx() * p[0] / z + camera.cx());
    const double v_f = std::round(camera.fy() * p[1] / z + camera.cy());
    if (u_f < 0.0 || u_f >= static_cast<double>(out_height)) continue;
    if (v_f < 0.0 || v_f >= static_cast<double>(out_width)) continue;
    const std::size_t u = static_cast<std::size_t>(u_f);
    const std::size_t v = static_cast<std::size_t>(v_f);
    const std::size_t pixel = u * out_width + v;
    // Strict < keeps the lowest-index point on exact depth ties.
    if (z < depth[pixel]) {
      depth[pixel] = z;
      for (std::size_t c = 0; c < c_dim; ++c) out.at(c, u, v) = points.feature(i, c);
    }
  }
  return out;
}

ValidityMask compute_validity_mask(const FeatureMap& rendered) {
  require_rank(rendered, 3, "compute_validity_mask");
  if (rendered.dim(0) == 0) {
    throw std::invalid_argument("compute_validity_mask: need at least one channel");
  }
  const std::size_t c_dim = rendered.dim(0), h = rendered.dim(1), w = rendered.dim(2);
  ValidityMask mask(h, w);
  for (std::size_t u = 0; u < h; ++u) {
    for (std::size_t v = 0; v < w; ++v) {
      double sum = 0.0;
      for (std::size_t c = 0; c < c_dim; ++c) sum += rendered.at(c, u, v);
      mask.at(u, v) = (sum == 0.0) ? 0 : 1;
    }
  }
  return mask;
}

std::size_t count_valid(const ValidityMask& mask) {
  std::size_t n = 0;
  for (std::uint8_t v : mask.data) n += (v == 1);
  return n;
}

}  // namespace monosim
