#include <cmath>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "monosim/camera.hpp"
#include "monosim/render.hpp"
#include "monosim/rng.hpp"

using namespace monosim;

namespace {

// Exhaustive per-pixel nearest-depth reference: for each pixel, scan every
// point and keep the closest one that lands there.
FeatureMap render_oracle(const PointFeatureSet& points, const CameraModel& camera,
                         std::size_t out_height, std::size_t out_width) {
  const std::size_t c_dim = points.channels ? points.channels : 1;
  FeatureMap out({c_dim, out_height, out_width});
  for (std::size_t u = 0; u < out_height; ++u) {
    for (std::size_t v = 0; v < out_width; ++v) {
      double best_z = std::numeric_limits<double>::infinity();
      std::size_t best = points.count;
      for (std::size_t i = 0; i < points.count; ++i) {
        const auto p = camera.world_to_camera(points.coord(i, 0), points.coord(i, 1),
                                              points.coord(i, 2));
        if (p[2] <= kDepthCutoff) continue;
        const double uf = std::round(camera.fx() * p[0] / p[2] + camera.cx());
        const double vf = std::round(camera.fy() * p[1] / p[2] + camera.cy());
        if (uf != static_cast<double>(u) || vf != static_cast<double>(v)) continue;
        if (p[2] < best_z) {
          best_z = p[2];
          best = i;
        }
      }
      if (best < points.count) {
        for (std::size_t c = 0; c < c_dim; ++c) out.at(c, u, v) = points.feature(best, c);
      }
    }
  }
  return out;
}

CameraModel test_camera(std::size_t size) {
  CameraModel camera;
  camera.intrinsics = {30.0, 0.0, static_cast<double>(size) / 2.0,
                       0.0,  30.0, static_cast<double>(size) / 2.0,
                       0.0,  0.0,  1.0};
  return camera;
}

// In-frustum points with pixel targets away from rounding boundaries and
// well-separated depths, so reference comparisons are stable.
PointFeatureSet random_frustum_points(Rng& rng, std::size_t n, std::size_t size,
                                      std::size_t channels) {
  const CameraModel camera = test_camera(size);
  PointFeatureSet points(channels);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform(0.0, static_cast<double>(size) - 0.51);
    const double v = rng.uniform(0.0, static_cast<double>(size) - 0.51);
    const double z = rng.uniform(2.0, 15.0);
    const double x = (u - camera.cx()) * z / camera.fx();
    const double y = (v - camera.cy()) * z / camera.fy();
    std::vector<double> feats(channels);
    for (std::size_t c = 0; c < channels; ++c) feats[c] = rng.uniform(0.5, 2.0);
    points.add(feats, x, y, z);
  }
  return points;
}

bool maps_equal(const FeatureMap& a, const FeatureMap& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("principal point projection") {
  CameraModel camera;
  camera.intrinsics = {1, 0, 2, 0, 1, 2, 0, 0, 1};
  PointFeatureSet points(1);
  points.add({7.0}, 0.0, 0.0, 5.0);
  FeatureMap map = render_points(points, camera, 5, 5);
  for (std::size_t u = 0; u < 5; ++u) {
    for (std::size_t v = 0; v < 5; ++v) {
      CHECK(map.at(0, u, v) == ((u == 2 && v == 2) ? 7.0 : 0.0));
    }
  }
}

TEST_CASE("empty point set renders to zero") {
  PointFeatureSet points(1);
  FeatureMap map = render_points(points, CameraModel{}, 5, 5);
  for (std::size_t i = 0; i < map.size(); ++i) CHECK(map[i] == 0.0);
}

TEST_CASE("points behind the camera are discarded") {
  PointFeatureSet points(1);
  points.add({3.0}, 0.0, 0.0, -5.0);
  points.add({4.0}, 0.0, 0.0, 0.0);
  FeatureMap map = render_points(points, CameraModel{}, 4, 4);
  for (std::size_t i = 0; i < map.size(); ++i) CHECK(map[i] == 0.0);
}

TEST_CASE("non-finite coordinates are rejected") {
  PointFeatureSet points(1);
  points.add({1.0}, std::numeric_limits<double>::quiet_NaN(), 0.0, 5.0);
  CHECK_THROWS_AS(render_points(points, CameraModel{}, 4, 4), std::invalid_argument);
}

TEST_CASE("rendering matches the exhaustive oracle") {
  Rng rng(101);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t size = 24;
    PointFeatureSet points = random_frustum_points(rng, 50, size, 3);
    const CameraModel camera = test_camera(size);
    CHECK(maps_equal(render_points(points, camera, size, size),
                     render_oracle(points, camera, size, size)));
  }
}

TEST_CASE("z-buffer keeps the nearest point, ties break to lowest index") {
  CameraModel camera;
  camera.intrinsics = {1, 0, 1, 0, 1, 1, 0, 0, 1};
  PointFeatureSet points(1);
  points.add({5.0}, 0.0, 0.0, 8.0);
  points.add({9.0}, 0.0, 0.0, 4.0);  // nearer, wins
  FeatureMap map = render_points(points, camera, 3, 3);
  CHECK(map.at(0, 1, 1) == 9.0);

  PointFeatureSet tied(1);
  tied.add({1.0}, 0.0, 0.0, 4.0);
  tied.add({2.0}, 0.0, 0.0, 4.0);
  FeatureMap tie_map = render_points(tied, camera, 3, 3);
  CHECK(tie_map.at(0, 1, 1) == 1.0);
}

TEST_CASE("validity mask follows the channel sum") {
  FeatureMap zeros({3, 4, 4});
  ValidityMask zero_mask = compute_validity_mask(zeros);
  CHECK(count_valid(zero_mask) == 0);

  FeatureMap single({3, 4, 4});
  single.at(1, 2, 3) = 1.5;
  ValidityMask one_mask = compute_validity_mask(single);
  CHECK(count_valid(one_mask) == 1);
  CHECK(one_mask.at(2, 3) == 1);

  Rng rng(55);
  FeatureMap random_map({4, 8, 8});
  for (std::size_t i = 0; i < random_map.size(); ++i) random_map[i] = rng.uniform(0.1, 1.0);
  std::size_t zeroed = 0;
  for (std::size_t u = 0; u < 8; ++u) {
    for (std::size_t v = 0; v < 8; ++v) {
      if (rng.uniform() < 0.3) {
        for (std::size_t c = 0; c < 4; ++c) random_map.at(c, u, v) = 0.0;
        ++zeroed;
      }
    }
  }
  ValidityMask mask = compute_validity_mask(random_map);
  for (std::size_t u = 0; u < 8; ++u) {
    for (std::size_t v = 0; v < 8; ++v) {
      double sum = 0.0;
      for (std::size_t c = 0; c < 4; ++c) sum += random_map.at(c, u, v);
      CHECK(mask.at(u, v) == (sum == 0.0 ? 0 : 1));
    }
  }
  CHECK(count_valid(mask) == 64 - zeroed);
}

TEST_CASE("count_valid basics") {
  ValidityMask empty(4, 4);
  CHECK(count_valid(empty) == 0);
  ValidityMask full(4, 4);
  for (auto& v : full.data) v = 1;
  CHECK(count_valid(full) == 16);
}

TEST_CASE("render and mask agree on covered pixels") {
  Rng rng(77);
  const std::size_t size = 16;
  PointFeatureSet points = random_frustum_points(rng, 40, size, 2);
  const CameraModel camera = test_camera(size);
  FeatureMap map = render_points(points, camera, size, size);
  ValidityMask mask = compute_validity_mask(map);
  FeatureMap reference = render_oracle(points, camera, size, size);
  for (std::size_t u = 0; u < size; ++u) {
    for (std::size_t v = 0; v < size; ++v) {
      bool covered = false;
      for (std::size_t c = 0; c < 2; ++c) covered |= reference.at(c, u, v) != 0.0;
      CHECK(mask.at(u, v) == (covered ? 1 : 0));
    }
  }
}

TEST_CASE("projection invariance under exact rigid transforms") {
  Rng rng(303);
  const std::size_t size = 16;
  PointFeatureSet points = random_frustum_points(rng, 30, size, 2);
  const CameraModel camera = test_camera(size);
  FeatureMap base = render_points(points, camera, size, size);

  // T: 90-degree rotation about z composed with a half-unit translation; both
  // exact in floating point. T^-1 likewise.
  // R = [[0,-1,0],[1,0,0],[0,0,1]], t = (0.5, -1.5, 2.0)
  PointFeatureSet moved(points.channels);
  for (std::size_t i = 0; i < points.count; ++i) {
    const double x = points.coord(i, 0), y = points.coord(i, 1), z = points.coord(i, 2);
    std::vector<double> feats(points.channels);
    for (std::size_t c = 0; c < points.channels; ++c) feats[c] = points.feature(i, c);
    moved.add(feats, -y + 0.5, x - 1.5, z + 2.0);
  }
  // RT' = RT * T^-1 with RT identity: T^-1 rotation [[0,1,0],[-1,0,0],[0,0,1]],
  // translation -R^-1 t = (-(-1.5)... ) computed by hand below.
  CameraModel adjusted = camera;
  adjusted.extrinsics = {0, 1, 0, 1.5, -1, 0, 0, 0.5, 0, 0, 1, -2.0};
  adjusted.validate();
  FeatureMap transformed = render_points(moved, adjusted, size, size);
  CHECK(maps_equal(base, transformed));
}

TEST_CASE("adding a point never decreases the valid count") {
  Rng rng(909);
  const std::size_t size = 12;
  const CameraModel camera = test_camera(size);
  PointFeatureSet points = random_frustum_points(rng, 20, size, 1);
  std::size_t previous = count_valid(compute_validity_mask(render_points(points, camera, size, size)));
  for (int extra = 0; extra < 10; ++extra) {
    PointFeatureSet addition = random_frustum_points(rng, 1, size, 1);
    points.add({addition.feature(0, 0)}, addition.coord(0, 0), addition.coord(0, 1),
               addition.coord(0, 2));
    const std::size_t now =
        count_valid(compute_validity_mask(render_points(points, camera, size, size)));
    CHECK(now >= previous);
    previous = now;
  }
}

TEST_CASE("camera serialization round trip") {
  CameraModel camera = test_camera(32);
  camera.extrinsics = {1, 0, 0, 0.25, 0, 1, 0, -0.5, 0, 0, 1, 1.75};
  std::stringstream buffer;
  save_camera(buffer, camera);
  CameraModel loaded = load_camera(buffer);
  for (int i = 0; i < 9; ++i) CHECK(loaded.intrinsics[i] == camera.intrinsics[i]);
  for (int i = 0; i < 12; ++i) CHECK(loaded.extrinsics[i] == camera.extrinsics[i]);
}

TEST_CASE("camera validation rejects bad models") {
  CameraModel camera;
  camera.intrinsics[0] = -1.0;
  CHECK_THROWS_AS(camera.validate(), std::invalid_argument);

  CameraModel skewed;
  skewed.extrinsics[0] = 0.9;  // breaks orthonormality
  CHECK_THROWS_AS(skewed.validate(), std::invalid_argument);
}
