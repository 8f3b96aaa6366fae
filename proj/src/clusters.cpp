#include "cbma/clusters.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "cbma/error.hpp"

namespace cbma {

namespace {

std::vector<std::array<int, 3>> neighbour_offsets(Connectivity c) {
  std::vector<std::array<int, 3>> out;
  for (int dk = -1; dk <= 1; ++dk)
    for (int dj = -1; dj <= 1; ++dj)
      for (int di = -1; di <= 1; ++di) {
        const int order = std::abs(di) + std::abs(dj) + std::abs(dk);
        if (order == 0) continue;
        if (c == Connectivity::Face && order > 1) continue;
        if (c == Connectivity::Edge && order > 2) continue;
        out.push_back({di, dj, dk});
      }
  return out;
}

// Flood fill from `seed`, marking visited voxels with 2 in `grid`.
template <typename Visit>
void flood(MaskGrid& grid, std::size_t seed, const std::vector<std::array<int, 3>>& offsets,
           std::vector<std::size_t>& stack, Visit&& visit) {
  const auto& g = grid.geometry();
  stack.clear();
  stack.push_back(seed);
  grid[seed] = 2;
  while (!stack.empty()) {
    const auto index = stack.back();
    stack.pop_back();
    visit(index);
    const auto v = g.unlinear(index);
    for (const auto& o : offsets) {
      const VoxelIndex u{v.i + o[0], v.j + o[1], v.k + o[2]};
      if (!g.in_bounds(u)) continue;
      const auto n = g.linear(u);
      if (grid[n] == 1) {
        grid[n] = 2;
        stack.push_back(n);
      }
    }
  }
}

}  // namespace

Connectivity connectivity_from_int(int n) {
  switch (n) {
    case 6: return Connectivity::Face;
    case 18: return Connectivity::Edge;
    case 26: return Connectivity::Vertex;
    default: throw ConfigError("connectivity must be 6, 18 or 26");
  }
}

std::vector<Cluster> cluster_label(const MaskGrid& sig, Connectivity connectivity) {
  MaskGrid work(sig.geometry(), 0);
  for (std::size_t i = 0; i < sig.size(); ++i) work[i] = sig[i] != 0 ? 1 : 0;
  const auto offsets = neighbour_offsets(connectivity);
  std::vector<std::size_t> stack;
  std::vector<Cluster> clusters;
  for (std::size_t i = 0; i < work.size(); ++i) {
    if (work[i] != 1) continue;
    Cluster c;
    c.corrected_p = std::numeric_limits<double>::quiet_NaN();
    flood(work, i, offsets, stack, [&](std::size_t index) { c.voxels.push_back(index); });
    std::sort(c.voxels.begin(), c.voxels.end());
    c.size = c.voxels.size();
    c.peak_index = c.voxels.front();
    c.peak_world = voxel_to_world(sig.geometry().unlinear(c.peak_index), sig.geometry());
    clusters.push_back(std::move(c));
  }
  return clusters;
}

std::size_t max_cluster_size(std::span<const std::size_t> voxels, MaskGrid& scratch, Connectivity connectivity) {
  static thread_local std::vector<std::array<int, 3>> offsets;
  static thread_local Connectivity cached = Connectivity::Vertex;
  if (offsets.empty() || cached != connectivity) {
    offsets = neighbour_offsets(connectivity);
    cached = connectivity;
  }
  for (auto v : voxels) scratch[v] = 1;
  std::vector<std::size_t> stack;
  std::size_t best = 0;
  for (auto v : voxels) {
    if (scratch[v] != 1) continue;
    std::size_t size = 0;
    flood(scratch, v, offsets, stack, [&](std::size_t) { ++size; });
    best = std::max(best, size);
  }
  for (auto v : voxels) scratch[v] = 0;
  return best;
}

void annotate_peaks(std::vector<Cluster>& clusters, const RealGrid& values, bool prefer_low) {
  for (auto& c : clusters) {
    std::size_t best = c.voxels.front();
    for (auto v : c.voxels) {
      const bool better = prefer_low ? values[v] < values[best] : values[v] > values[best];
      if (better) best = v;
    }
    c.peak_index = best;
    c.peak_value = values[best];
    c.peak_world = voxel_to_world(values.geometry().unlinear(best), values.geometry());
  }
}

}  // namespace cbma
