#include "cbma/geometry.hpp"

#include <cmath>
#include <string>

#include "cbma/error.hpp"

namespace cbma {

double squared_distance(const WorldPoint& a, const WorldPoint& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

double euclidean_distance(const WorldPoint& a, const WorldPoint& b) {
  return std::sqrt(squared_distance(a, b));
}

void GridGeometry::validate() const {
  for (int axis = 0; axis < 3; ++axis) {
    if (dims[axis] <= 0)
      throw ValidationError("grid dimension " + std::to_string(axis) + " must be positive");
    if (!(voxel_size[axis] > 0.0) || !std::isfinite(voxel_size[axis]))
      throw ValidationError("voxel size " + std::to_string(axis) + " must be positive and finite");
    if (!std::isfinite(origin[axis]))
      throw ValidationError("grid origin must be finite");
  }
}

std::array<double, 3> continuous_index(const WorldPoint& p, const GridGeometry& g) {
  return {(p.x - g.origin[0]) / g.voxel_size[0], (p.y - g.origin[1]) / g.voxel_size[1],
          (p.z - g.origin[2]) / g.voxel_size[2]};
}

WorldPoint voxel_to_world(const VoxelIndex& v, const GridGeometry& g) {
  return {g.origin[0] + v.i * g.voxel_size[0], g.origin[1] + v.j * g.voxel_size[1],
          g.origin[2] + v.k * g.voxel_size[2]};
}

std::optional<VoxelIndex> world_to_voxel(const WorldPoint& p, const GridGeometry& g) {
  const auto c = continuous_index(p, g);
  for (double value : c)
    if (!std::isfinite(value) || std::abs(value) > 1e9) return std::nullopt;
  const VoxelIndex v{static_cast<int>(std::lround(c[0])), static_cast<int>(std::lround(c[1])),
                     static_cast<int>(std::lround(c[2]))};
  if (!g.in_bounds(v)) return std::nullopt;
  return v;
}

}  // namespace cbma
