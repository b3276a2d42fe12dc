#include "monosim/voxel.hpp"

#include <cmath>
#include <stdexcept>

namespace monosim {

VoxelGrid voxelize(const PointFeatureSet& points, VoxelDims dims, const Box3D& bounds) {
  if (dims.x == 0 || dims.y == 0 || dims.z == 0) {
    throw std::invalid_argument("voxelize: dims must be >= 1");
  }
  for (int axis = 0; axis < 3; ++axis) {
    if (!(bounds.min[axis] < bounds.max[axis])) {
      throw std::invalid_argument("voxelize: degenerate bounds on axis " + std::to_string(axis));
    }
  }
  const std::size_t c_dim = points.channels ? points.channels : 1;
  VoxelGrid grid;
  grid.dims = dims;
  grid.bounds = bounds;
  grid.channels = c_dim;
  grid.features = Tensor::zeros({dims.x, dims.y, dims.z, c_dim});
  grid.counts.assign(dims.x * dims.y * dims.z, 0);

  const std::array<std::size_t, 3> n{dims.x, dims.y, dims.z};
  std::array<double, 3> cell{};
  for (int axis = 0; axis < 3; ++axis) {
    cell[axis] = (bounds.max[axis] - bounds.min[axis]) / static_cast<double>(n[axis]);
  }

  for (std::size_t i = 0; i < points.count; ++i) {
    std::array<std::size_t, 3> idx{};
    bool inside = true;
    for (int axis = 0; axis < 3 && inside; ++axis) {
      const double q = points.coord(i, static_cast<std::size_t>(axis));
      if (q < bounds.min[axis] || q > bounds.max[axis]) {
        inside = false;
        break;
      }
      double f = std::floor((q - bounds.min[axis]) / cell[axis]);
      if (f < 0.0) f = 0.0;
      std::size_t k = static_cast<std::size_t>(f);
      if (k >= n[axis]) k = n[axis] - 1;  // exact upper boundary
      idx[axis] = k;
    }
    if (!inside) continue;
    const std::size_t flat = (idx[0] * dims.y + idx[1]) * dims.z + idx[2];
    ++grid.counts[flat];
    for (std::size_t c = 0; c < c_dim; ++c) {
      grid.features.at(idx[0], idx[1], idx[2], c) += points.feature(i, c);
    }
  }

  for (std::size_t ix = 0; ix < dims.x; ++ix) {
    for (std::size_t iy = 0; iy < dims.y; ++iy) {
      for (std::size_t iz = 0; iz < dims.z; ++iz) {
        const std::uint32_t cnt = grid.count_at(ix, iy, iz);
        if (cnt == 0) continue;
        for (std::size_t c = 0; c < c_dim; ++c) {
          grid.features.at(ix, iy, iz, c) /= static_cast<double>(cnt);
        }
      }
    }
  }
  return grid;
}

BEVGrid bev_collapse(const VoxelGrid& grid) {
  const std::size_t c_dim = grid.channels;
  BEVGrid bev({c_dim, grid.dims.x, grid.dims.y});
  for (std::size_t ix = 0; ix < grid.dims.x; ++ix) {
    for (std::size_t iy = 0; iy < grid.dims.y; ++iy) {
      std::size_t occupied = 0;
      for (std::size_t iz = 0; iz < grid.dims.z; ++iz) {
        if (grid.count_at(ix, iy, iz) > 0) ++occupied;
      }
      if (occupied == 0) continue;
      for (std::size_t c = 0; c < c_dim; ++c) {
        double s = 0.0;
        for (std::size_t iz = 0; iz < grid.dims.z; ++iz) {
          if (grid.count_at(ix, iy, iz) > 0) s += grid.features.at(ix, iy, iz, c);
        }
        bev.at(c, ix, iy) = s / static_cast<double>(occupied);
      }
    }
  }
  return bev;
}

FeatureMap adaptive_avg_pool_map(const FeatureMap& input, std::size_t out_height,
                                 std::size_t out_width) {
  require_rank(input, 3, "adaptive_avg_pool_map");
  if (out_height == 0 || out_width == 0) {
    throw std::invalid_argument("adaptive_avg_pool_map: output dims must be >= 1");
  }
  const std::size_t c_dim = input.dim(0), a = input.dim(1), b = input.dim(2);
  FeatureMap out({c_dim, out_height, out_width});
  for (std::size_t c = 0; c < c_dim; ++c) {
    for (std::size_t i = 0; i < out_height; ++i) {
      const std::size_t r0 = (i * a) / out_height;
      const std::size_t r1 = ((i + 1) * a + out_height - 1) / out_height;
      for (std::size_t j = 0; j < out_width; ++j) {
        const std::size_t c0 = (j * b) / out_width;
        const std::size_t c1 = ((j + 1) * b + out_width - 1) / out_width;
        double s = 0.0;
        for (std::size_t r = r0; r < r1; ++r)
          for (std::size_t q = c0; q < c1; ++q) s += input.at(c, r, q);
        out.at(c, i, j) = s / static_cast<double>((r1 - r0) * (c1 - c0));
      }
    }
  }
  return out;
}

Box3D default_roi_bounds(const PointFeatureSet& points) {
  Box3D box;
  if (points.count == 0) return box;
  for (int axis = 0; axis < 3; ++axis) {
    double lo = points.coord(0, static_cast<std::size_t>(axis));
    double hi = lo;
    for (std::size_t i = 1; i < points.count; ++i) {
      const double q = points.coord(i, static_cast<std::size_t>(axis));
      lo = std::min(lo, q);
      hi = std::max(hi, q);
    }
    box.min[axis] = lo - 1e-6;
    box.max[axis] = hi + 1e-6;
  }
  return box;
}

RoiTeacherMap roi_teacher_map(const PointFeatureSet& points, VoxelDims dims,
                              const std::optional<Box3D>& bounds, std::size_t out_height,
                              std::size_t out_width) {
  RoiTeacherMap out;
  const std::size_t c_dim = points.channels ? points.channels : 1;
  if (points.count == 0) {
    out.features = Tensor::zeros({c_dim, out_height, out_width});
    out.mask = ValidityMask(out_height, out_width);
    return out;
  }
  const Box3D box = bounds ? *bounds : default_roi_bounds(points);
  const VoxelGrid grid = voxelize(points, dims, box);
  const BEVGrid bev = bev_collapse(grid);
  out.features = adaptive_avg_pool_map(bev, out_height, out_width);
  out.mask = compute_validity_mask(out.features);
  return out;
}

}  // namespace monosim
