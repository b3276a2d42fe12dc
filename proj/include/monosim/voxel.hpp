#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "monosim/render.hpp"
#include "monosim/tensor.hpp"

namespace monosim {

struct Box3D {
  std::array<double, 3> min{0, 0, 0};
  std::array<double, 3> max{1, 1, 1};
};

struct VoxelDims {
  std::size_t x = 16;
  std::size_t y = 16;
  std::size_t z = 8;
};

struct VoxelGrid {
  VoxelDims dims;
  Box3D bounds;
  std::size_t channels = 0;
  Tensor features;                  // x, y, z, channel
  std::vector<std::uint32_t> counts;  // x * y * z

  std::uint32_t count_at(std::size_t ix, std::size_t iy, std::size_t iz) const {
    return counts[(ix * dims.y + iy) * dims.z + iz];
  }
};

// A FeatureMap of shape C x X x Y obtained by collapsing a voxel grid along z.
using BEVGrid = FeatureMap;

// Points land in floor((q - min) / cell) per axis; exact upper-boundary points
// clamp into the last cell, points outside the bounds are discarded. Each
// occupied cell holds the arithmetic mean of its points' features.
VoxelGrid voxelize(const PointFeatureSet& points, VoxelDims dims, const Box3D& bounds);

// BEV(c,x,y) = mean over occupied z cells at (x,y); empty columns hold 0.
BEVGrid bev_collapse(const VoxelGrid& grid);

// Adaptive partition mean pooling (identity when sizes already match).
FeatureMap adaptive_avg_pool_map(const FeatureMap& input, std::size_t out_height,
                                 std::size_t out_width);

// Axis-aligned bounding box of the point set expanded by 1e-6 m per side.
Box3D default_roi_bounds(const PointFeatureSet& points);

struct RoiTeacherMap {
  FeatureMap features;  // C x H_mr x W_mr
  ValidityMask mask;
};

// voxelize -> bev_collapse -> adaptive_avg_pool, then the validity mask of the
// pooled map. Bounds default to the point set's expanded bounding box.
RoiTeacherMap roi_teacher_map(const PointFeatureSet& points, VoxelDims dims,
                              const std::optional<Box3D>& bounds, std::size_t out_height,
                              std::size_t out_width);

}  // namespace monosim
