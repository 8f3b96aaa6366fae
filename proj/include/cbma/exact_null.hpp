#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cbma/kernels.hpp"
#include "cbma/null_distribution.hpp"
#include "cbma/statistics.hpp"

namespace cbma {

inline constexpr double kDefaultBinWidth = 1e-5;

/// How each study's map value enters the binned statistic.
///
/// A value sits at position x = -log(1 - L) / h (ALE) or (w_i / W) * x / h
/// (MKDA, SDM) on the bin lattice. Binary MKDA maps round x to the nearest
/// bin and the statistic is the sum of rounded terms, so observed values land
/// exactly on null atoms. Continuous maps (ALE, SDM) spread each value over
/// its two neighbouring bins with weights that keep its mean, and the observed
/// statistic is the rounded sum of positions; rounding tiny kernel tails to
/// zero one study at a time would otherwise shift the whole null downwards.
/// Spreading in turn adds up to half a bin of noise per study, so split
/// models are convolved on a lattice `oversample` times finer and the result
/// is summed back onto bins of width h.
struct NullModel {
  Method method = Method::ALE;
  NullAxis axis = NullAxis::ComplementLog;
  double bin_width = kDefaultBinWidth;
  std::vector<double> scale;
  /// Linear two-bin spreading (continuous maps) instead of rounding.
  bool split = true;
  /// Odd refinement factor of the convolution lattice.
  int oversample = 1;

  double position(std::size_t study, double value) const;
  std::int64_t contribution(std::size_t study, double value) const;
  /// What a value adds to a voxel's running position: the position itself
  /// when split, else its rounded contribution. Round the total to get the bin.
  double term(std::size_t study, double value) const {
    return split ? position(study, value) : static_cast<double>(contribution(study, value));
  }
};

/// `weights` supplies the study count for ALE and the linear scale otherwise.
NullModel make_null_model(Method method, const StudyWeights& weights, double bin_width = kDefaultBinWidth);

/// Null of the binned statistic when every study map is read at an
/// independent, uniformly drawn in-mask voxel. Per-study value histograms are
/// convolved on the model axis (FFT); mass beyond a Chernoff bound of
/// `tail_epsilon` is dropped before transforming, so the result is exact up to
/// binning and that bound.
NullDistribution exact_null(std::span<const StudyMap> maps, const NullModel& model, double tail_epsilon = 1e-20);

NullDistribution ale_exact_null(std::span<const StudyMap> maps, const BrainMask& mask,
                                double bin_width = kDefaultBinWidth);

/// Per-mask-voxel binned statistic consistent with exact_null(): the rounded
/// sum of term() over studies.
std::vector<std::int64_t> binned_statistic(std::span<const StudyMap> maps, const NullModel& model);

/// Right-tail uncorrected p-values, P(null >= stat), own bin included.
/// Out-of-mask voxels get p = 1.
RealGrid p_uncorrected(const StatImage& stat, const NullDistribution& null);
RealGrid p_uncorrected(std::span<const std::int64_t> binned, const BrainMask& mask, const NullDistribution& null);

/// Version string of the FFT library in use.
const char* fft_library_version();

}  // namespace cbma
