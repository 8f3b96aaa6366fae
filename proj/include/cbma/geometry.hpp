#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>

namespace cbma {

/// A point in atlas (world) space, millimetres.
struct WorldPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const WorldPoint&, const WorldPoint&) = default;
};

struct VoxelIndex {
  int i = 0;
  int j = 0;
  int k = 0;

  friend bool operator==(const VoxelIndex&, const VoxelIndex&) = default;
};

double euclidean_distance(const WorldPoint& a, const WorldPoint& b);
double squared_distance(const WorldPoint& a, const WorldPoint& b);

/// Lattice description shared by every volume on the same grid.
///
/// Voxel (0,0,0) is centred at `origin`; axes are aligned with world axes.
/// Linear storage is x-fastest: index = i + nx * (j + ny * k).
struct GridGeometry {
  std::array<int, 3> dims{1, 1, 1};
  std::array<double, 3> voxel_size{1.0, 1.0, 1.0};
  std::array<double, 3> origin{0.0, 0.0, 0.0};

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
           static_cast<std::size_t>(dims[2]);
  }

  bool in_bounds(const VoxelIndex& v) const {
    return v.i >= 0 && v.j >= 0 && v.k >= 0 && v.i < dims[0] && v.j < dims[1] && v.k < dims[2];
  }

  std::size_t linear(const VoxelIndex& v) const {
    return static_cast<std::size_t>(v.i) +
           static_cast<std::size_t>(dims[0]) *
               (static_cast<std::size_t>(v.j) + static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(v.k));
  }

  VoxelIndex unlinear(std::size_t index) const {
    const auto nx = static_cast<std::size_t>(dims[0]);
    const auto ny = static_cast<std::size_t>(dims[1]);
    return {static_cast<int>(index % nx), static_cast<int>((index / nx) % ny),
            static_cast<int>(index / (nx * ny))};
  }

  /// Throws ValidationError when dims or voxel sizes are not positive/finite.
  void validate() const;

  friend bool operator==(const GridGeometry&, const GridGeometry&) = default;
};

/// Fractional voxel coordinates of a world point: (p - origin) / voxel_size.
std::array<double, 3> continuous_index(const WorldPoint& p, const GridGeometry& g);

WorldPoint voxel_to_world(const VoxelIndex& v, const GridGeometry& g);

/// Nearest voxel centre by component-wise rounding; empty when out of bounds.
std::optional<VoxelIndex> world_to_voxel(const WorldPoint& p, const GridGeometry& g);

}  // namespace cbma
