#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cbma/error.hpp"
#include "cbma/geometry.hpp"

namespace cbma {

/// Dense scalar field on a regular lattice.
template <typename T>
class VolumeGrid {
public:
  using value_type = T;

  VolumeGrid() = default;
  explicit VolumeGrid(GridGeometry geometry, T fill = T{})
      : geometry_(geometry), data_((geometry.validate(), geometry.voxel_count()), fill) {}
  VolumeGrid(GridGeometry geometry, std::vector<T> data) : geometry_(geometry), data_(std::move(data)) {
    geometry_.validate();
    if (data_.size() != geometry_.voxel_count())
      throw ValidationError("volume payload length does not match grid dimensions");
  }

  const GridGeometry& geometry() const { return geometry_; }
  std::size_t size() const { return data_.size(); }

  T& operator[](std::size_t index) { return data_[index]; }
  const T& operator[](std::size_t index) const { return data_[index]; }
  T& at(const VoxelIndex& v) { return data_[geometry_.linear(v)]; }
  const T& at(const VoxelIndex& v) const { return data_[geometry_.linear(v)]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  friend bool operator==(const VolumeGrid&, const VolumeGrid&) = default;

private:
  GridGeometry geometry_;
  std::vector<T> data_;
};

using MaskGrid = VolumeGrid<std::uint8_t>;
using RealGrid = VolumeGrid<double>;

/// The analysis domain: a boolean grid with a precomputed list of in-mask voxels.
///
/// "Mask index" refers to the position of a voxel in `voxels()`; most
/// per-voxel arrays in the toolkit are stored in mask-index order.
class BrainMask {
public:
  explicit BrainMask(MaskGrid grid);

  const MaskGrid& grid() const { return grid_; }
  const GridGeometry& geometry() const { return grid_.geometry(); }
  std::size_t size() const { return voxels_.size(); }

  /// Grid linear indices of the in-mask voxels, ascending.
  std::span<const std::uint32_t> voxels() const { return voxels_; }

  /// -1 when the grid voxel lies outside the mask.
  std::int32_t mask_index(std::size_t grid_index) const { return lookup_[grid_index]; }
  bool contains(const VoxelIndex& v) const {
    return geometry().in_bounds(v) && lookup_[geometry().linear(v)] >= 0;
  }
  /// True when the nearest voxel centre to `p` is inside the mask.
  bool contains(const WorldPoint& p) const;

  WorldPoint world(std::size_t mask_index) const {
    return voxel_to_world(geometry().unlinear(voxels_[mask_index]), geometry());
  }

  std::uint64_t hash() const { return hash_; }

  /// Scatter mask-ordered values into a dense grid (zeros outside the mask).
  RealGrid scatter(std::span<const double> values) const;
  /// Gather the in-mask values of a dense grid.
  std::vector<double> gather(const RealGrid& grid) const;

private:
  MaskGrid grid_;
  std::vector<std::uint32_t> voxels_;
  std::vector<std::int32_t> lookup_;
  std::uint64_t hash_ = 0;
};

using MaskPtr = std::shared_ptr<const BrainMask>;

/// Ellipsoidal test mask spanning the MNI bounding box x in [-90,90],
/// y in [-126,90], z in [-72,108] with semi-axes (70, 85, 75) mm about the box
/// centre. `voxel_mm` must divide 180 and 216 evenly (2 and 4 are typical).
BrainMask make_test_mask(double voxel_mm = 2.0);

enum class Method { MKDA, ALE, SDM };

std::string_view to_string(Method method);
Method method_from_string(std::string_view text);

/// Meta-analytic statistic map. Out-of-mask values are exactly zero.
struct StatImage {
  RealGrid grid;
  Method method = Method::ALE;
  MaskPtr mask;
  /// Optional description of the configuration that produced the image,
  /// compared against Monte Carlo nulls before FWE thresholding.
  std::string config_key;

  double max_value() const;
  /// Grid linear index of the first in-mask voxel attaining the maximum.
  std::size_t argmax() const;
};

}  // namespace cbma
