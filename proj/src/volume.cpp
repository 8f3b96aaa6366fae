#include "cbma/volume.hpp"

#include <cmath>
#include <limits>

#include "cbma/hashing.hpp"

namespace cbma {

BrainMask::BrainMask(MaskGrid grid) : grid_(std::move(grid)) {
  const auto n = grid_.size();
  if (n > std::numeric_limits<std::uint32_t>::max())
    throw ValidationError("mask grid too large");
  lookup_.assign(n, -1);
  for (std::size_t index = 0; index < n; ++index) {
    if (grid_[index] != 0) {
      grid_[index] = 1;
      lookup_[index] = static_cast<std::int32_t>(voxels_.size());
      voxels_.push_back(static_cast<std::uint32_t>(index));
    }
  }
  if (voxels_.empty()) throw ValidationError("mask contains no voxels");

  Fnv1a h;
  const auto& g = grid_.geometry();
  h.bytes(g.dims.data(), sizeof g.dims).bytes(g.voxel_size.data(), sizeof g.voxel_size);
  h.bytes(g.origin.data(), sizeof g.origin).bytes(grid_.data().data(), grid_.size());
  hash_ = h.digest();
}

bool BrainMask::contains(const WorldPoint& p) const {
  const auto v = world_to_voxel(p, geometry());
  return v && lookup_[geometry().linear(*v)] >= 0;
}

RealGrid BrainMask::scatter(std::span<const double> values) const {
  if (values.size() != voxels_.size())
    throw ValidationError("value count does not match mask size");
  RealGrid out(geometry(), 0.0);
  for (std::size_t m = 0; m < voxels_.size(); ++m) out[voxels_[m]] = values[m];
  return out;
}

std::vector<double> BrainMask::gather(const RealGrid& grid) const {
  if (grid.geometry() != geometry()) throw ValidationError("grid geometry does not match mask");
  std::vector<double> out(voxels_.size());
  for (std::size_t m = 0; m < voxels_.size(); ++m) out[m] = grid[voxels_[m]];
  return out;
}

BrainMask make_test_mask(double voxel_mm) {
  const double extent[3] = {180.0, 216.0, 180.0};
  GridGeometry g;
  g.voxel_size = {voxel_mm, voxel_mm, voxel_mm};
  g.origin = {-90.0, -126.0, -72.0};
  for (int axis = 0; axis < 3; ++axis) {
    const double steps = extent[axis] / voxel_mm;
    if (!(voxel_mm > 0.0) || std::abs(steps - std::round(steps)) > 1e-9)
      throw ValidationError("test mask voxel size must divide the bounding box evenly");
    g.dims[axis] = static_cast<int>(std::lround(steps)) + 1;
  }
  const WorldPoint centre{0.0, -18.0, 18.0};
  const double semi[3] = {70.0, 85.0, 75.0};
  MaskGrid grid(g, 0);
  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i) {
        const auto p = voxel_to_world({i, j, k}, g);
        const double ex = (p.x - centre.x) / semi[0];
        const double ey = (p.y - centre.y) / semi[1];
        const double ez = (p.z - centre.z) / semi[2];
        if (ex * ex + ey * ey + ez * ez <= 1.0) grid.at({i, j, k}) = 1;
      }
  return BrainMask(std::move(grid));
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::MKDA: return "MKDA";
    case Method::ALE: return "ALE";
    case Method::SDM: return "SDM";
  }
  return "?";
}

Method method_from_string(std::string_view text) {
  std::string upper(text);
  for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (upper == "MKDA") return Method::MKDA;
  if (upper == "ALE") return Method::ALE;
  if (upper == "SDM") return Method::SDM;
  throw ConfigError("unknown method '" + std::string(text) + "'");
}

double StatImage::max_value() const { return grid[argmax()]; }

std::size_t StatImage::argmax() const {
  if (!mask) throw ValidationError("statistic image has no mask");
  const auto voxels = mask->voxels();
  std::size_t best = voxels.front();
  for (auto index : voxels)
    if (grid[index] > grid[best]) best = index;
  return best;
}

}  // namespace cbma
