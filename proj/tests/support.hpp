#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <random>
#include <string>

#include "cbma/volume.hpp"

namespace testing {

/// Box mask of the given dims (all voxels in mask unless `hole` is set,
/// which drops voxel (0,0,0)).
inline cbma::MaskPtr box_mask(int nx, int ny, int nz, double mm = 2.0, std::array<double, 3> origin = {0, 0, 0},
                              bool hole = false) {
  cbma::GridGeometry g;
  g.dims = {nx, ny, nz};
  g.voxel_size = {mm, mm, mm};
  g.origin = origin;
  cbma::MaskGrid grid(g, 1);
  if (hole) grid[0] = 0;
  return std::make_shared<const cbma::BrainMask>(std::move(grid));
}

/// Centred cube of side `n` voxels with the world origin at its middle voxel.
inline cbma::MaskPtr centred_cube(int n, double mm = 2.0) {
  const double o = -mm * (n - 1) / 2.0;
  return box_mask(n, n, n, mm, {o, o, o});
}

inline cbma::MaskPtr test_mask(double mm) {
  return std::make_shared<const cbma::BrainMask>(cbma::make_test_mask(mm));
}

class TempDir {
public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("cbma_test_" + std::to_string(std::random_device{}()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

}  // namespace testing
