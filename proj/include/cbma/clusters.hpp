#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "cbma/volume.hpp"

namespace cbma {

enum class Connectivity { Face = 6, Edge = 18, Vertex = 26 };

Connectivity connectivity_from_int(int n);

struct Cluster {
  /// Grid linear indices, ascending.
  std::vector<std::size_t> voxels;
  std::size_t size = 0;
  std::size_t peak_index = 0;
  double peak_value = 0.0;
  WorldPoint peak_world;
  /// Cluster-level corrected p where a procedure defines one, else NaN.
  double corrected_p = std::numeric_limits<double>::quiet_NaN();
};

/// Connected components of nonzero voxels, ordered by their first voxel in
/// scan order.
std::vector<Cluster> cluster_label(const MaskGrid& sig, Connectivity connectivity = Connectivity::Vertex);

/// Size of the largest component among `voxels` (grid indices). `scratch`
/// must be a zeroed grid of matching geometry and is returned zeroed.
std::size_t max_cluster_size(std::span<const std::size_t> voxels, MaskGrid& scratch, Connectivity connectivity);

/// Fills peak fields: the voxel with the largest `values` entry (lowest index
/// on ties), or with the smallest when `prefer_low` is set.
void annotate_peaks(std::vector<Cluster>& clusters, const RealGrid& values, bool prefer_low = false);

}  // namespace cbma
