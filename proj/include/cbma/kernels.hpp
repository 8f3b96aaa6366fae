#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cbma/foci.hpp"
#include "cbma/volume.hpp"

namespace cbma {

enum class SigmaMode { Fixed, FromSampleSize };

/// Which kernel to place around each focus and how wide.
struct KernelSpec {
  Method method = Method::ALE;
  /// Sphere radius (MKDA) or Gaussian standard deviation (ALE, SDM), mm.
  double size_mm = 4.0;
  /// ALE only: FromSampleSize ignores `size_mm` and uses ale_sigma().
  SigmaMode sigma_mode = SigmaMode::Fixed;

  static KernelSpec mkda(double radius_mm) { return {Method::MKDA, radius_mm, SigmaMode::Fixed}; }
  static KernelSpec ale(double sigma_mm) { return {Method::ALE, sigma_mm, SigmaMode::Fixed}; }
  static KernelSpec ale_from_sample_size() { return {Method::ALE, 0.0, SigmaMode::FromSampleSize}; }
  static KernelSpec sdm(double sigma_mm) { return {Method::SDM, sigma_mm, SigmaMode::Fixed}; }

  void validate() const;
  /// Kernel width for a study with `n_participants` subjects.
  double width_for(int n_participants) const;
  /// "mkda:10", "ale:4", "ale:auto", "sdm:20".
  std::string to_string() const;
  static KernelSpec parse(std::string_view text);

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

/// Gaussian kernels are evaluated out to this many standard deviations.
inline constexpr double kGaussianTruncation = 5.0;

/// ALE kernel width. FromSampleSize follows sigma(n) = 4 * sqrt(12 / n) mm.
double ale_sigma(int n_participants, SigmaMode mode, double fixed_sigma_mm = 4.0);

/// How SDM treats foci that carry no T value.
enum class SignPolicy { Require, AssumePositive };

/// Per-study map stored sparsely in mask-index order. Voxels absent from
/// `voxels` hold exactly zero.
struct StudyMap {
  MaskPtr mask;
  std::string study_id;
  Method method = Method::ALE;
  std::vector<std::uint32_t> voxels;
  std::vector<double> values;

  RealGrid to_grid() const;
  /// Value at a mask index (binary search).
  double at(std::uint32_t mask_index) const;
  double max_value() const;
};

/// Raw kernel evaluation around one focus on a fixed mask.
///
/// Voxels are visited in ascending grid order. The voxel-centred entry
/// points reproduce the general path bit for bit for integer positions,
/// which lets Monte Carlo replicates reuse a precomputed stencil.
class FocusKernel {
public:
  FocusKernel(Method method, double width_mm, MaskPtr mask);

  Method method() const { return method_; }
  double width() const { return width_; }
  const BrainMask& mask() const { return *mask_; }

  /// Calls f(mask_index, raw) for every in-mask voxel within the kernel
  /// support of a focus at fractional voxel position `c`. `raw` is 1 for the
  /// sphere and exp(-d^2 / 2 sigma^2) for the Gaussians.
  template <typename F>
  void for_each(const std::array<double, 3>& c, F&& f) const;

  /// Same visit for a focus sitting on the centre of in-mask voxel `mask_index`.
  template <typename F>
  void for_each_centered(std::uint32_t mask_index, F&& f) const;

  /// Compensated sum of raw values over the in-mask support.
  double mass(const std::array<double, 3>& c) const;
  double centered_mass(std::uint32_t mask_index) const;

  /// Fills the centred-mass cache (ALE Monte Carlo). Safe to call once
  /// before concurrent use; afterwards centered_mass() is a table lookup.
  void prepare_centered_masses(int jobs = 1);

  /// Snaps near-integer coordinates so voxel-centred foci hit the stencil exactly.
  std::array<double, 3> position(const WorldPoint& p) const;

private:
  struct Offset {
    int di, dj, dk;
    double raw;
  };
  double raw_value(double d2) const;

  Method method_;
  double width_;
  MaskPtr mask_;
  double cutoff2_;
  double inv_two_sigma2_;
  std::array<double, 3> reach_;  // support half-width in voxels per axis
  std::vector<Offset> stencil_;
  std::vector<double> centered_mass_;
};

/// Normalised ALE map of a single focus (sums to one over the mask).
RealGrid ale_focus_map(const Focus& focus, double sigma_mm, const MaskPtr& mask);

StudyMap mkda_study_map(const Study& study, double radius_mm, const MaskPtr& mask);
StudyMap ale_study_map(const Study& study, double sigma_mm, const MaskPtr& mask);
StudyMap sdm_study_map(const Study& study, double sigma_mm, const MaskPtr& mask,
                       SignPolicy policy = SignPolicy::Require);

/// All study maps of a dataset for one kernel; studies are processed in parallel.
std::vector<StudyMap> build_study_maps(const FociDataset& dataset, const KernelSpec& kernel, const MaskPtr& mask,
                                       SignPolicy policy = SignPolicy::Require, int jobs = 1);

/// Dense scratch used to assemble one study map from its focus maps.
class StudyScratch {
public:
  explicit StudyScratch(std::size_t n_mask = 0);
  void resize(std::size_t n_mask);

  void add(Method method, std::uint32_t mask_index, double value) {
    if (!touched_flag_[mask_index]) {
      touched_flag_[mask_index] = 1;
      touched_.push_back(mask_index);
      buffer_[mask_index] = 0.0;
    }
    double& slot = buffer_[mask_index];
    switch (method) {
      case Method::MKDA: slot = 1.0; break;
      case Method::ALE: slot = value > slot ? value : slot; break;
      case Method::SDM: slot += value; break;
    }
  }

  /// Emits nonzero study-map values (SDM sums clamped to [-1,1]) and clears
  /// the scratch. With `sorted`, output is in ascending mask-index order.
  void finish(Method method, std::vector<std::uint32_t>& voxels, std::vector<double>& values, bool sorted);

private:
  std::vector<double> buffer_;
  std::vector<std::uint8_t> touched_flag_;
  std::vector<std::uint32_t> touched_;
};

// ---------------------------------------------------------------------------

inline double FocusKernel::raw_value(double d2) const {
  return method_ == Method::MKDA ? 1.0 : std::exp(-d2 * inv_two_sigma2_);
}

template <typename F>
void FocusKernel::for_each(const std::array<double, 3>& c, F&& f) const {
  const auto& g = mask_->geometry();
  int lo[3];
  int hi[3];
  for (int a = 0; a < 3; ++a) {
    const double l = std::ceil(c[a] - reach_[a]) - 1.0;
    const double h = std::floor(c[a] + reach_[a]) + 1.0;
    if (h < 0.0 || l > g.dims[a] - 1.0) return;
    lo[a] = l < 0.0 ? 0 : static_cast<int>(l);
    hi[a] = h > g.dims[a] - 1.0 ? g.dims[a] - 1 : static_cast<int>(h);
  }
  const auto& vs = g.voxel_size;
  for (int k = lo[2]; k <= hi[2]; ++k) {
    const double dz = (k - c[2]) * vs[2];
    for (int j = lo[1]; j <= hi[1]; ++j) {
      const double dy = (j - c[1]) * vs[1];
      const std::size_t row = g.linear({0, j, k});
      for (int i = lo[0]; i <= hi[0]; ++i) {
        const double dx = (i - c[0]) * vs[0];
        const double d2 = dx * dx + dy * dy + dz * dz;
        if (d2 > cutoff2_) continue;
        const auto m = mask_->mask_index(row + static_cast<std::size_t>(i));
        if (m < 0) continue;
        f(static_cast<std::uint32_t>(m), raw_value(d2));
      }
    }
  }
}

template <typename F>
void FocusKernel::for_each_centered(std::uint32_t mask_index, F&& f) const {
  const auto& g = mask_->geometry();
  const auto v = g.unlinear(mask_->voxels()[mask_index]);
  for (const auto& o : stencil_) {
    const VoxelIndex u{v.i + o.di, v.j + o.dj, v.k + o.dk};
    if (!g.in_bounds(u)) continue;
    const auto m = mask_->mask_index(g.linear(u));
    if (m < 0) continue;
    f(static_cast<std::uint32_t>(m), o.raw);
  }
}

}  // namespace cbma
