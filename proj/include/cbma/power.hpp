#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cbma/analysis.hpp"
#include "cbma/simulation.hpp"
#include "cbma/thresholding.hpp"

namespace cbma {

/// Radius of the 95% probability sphere of an isotropic 3D Gaussian:
/// sd * sqrt(chi-square(3) 0.95 quantile).
double r95_radius(double scatter_sd_mm);

/// Grid indices of in-mask voxels within r95 of each centre.
std::vector<std::vector<std::size_t>> true_voxels_by_center(const SimConfig& cfg);

/// 0-based indices of centres with at least one significant voxel centre
/// within r95.
std::vector<int> detected_centers(const ThresholdResult& result, const SimConfig& cfg);

/// Fraction of true voxels (union over centres) that are significant.
double true_positive_rate(const ThresholdResult& result, const SimConfig& cfg);

struct Measure {
  double mean = 0.0;
  double se = 0.0;
};

/// 0: P(at least one centre detected), 1: P(all centres detected),
/// 2: mean number detected, 3: mean voxel-wise true positive rate.
using PowerMeasures = std::array<Measure, 4>;

PowerMeasures power_measures(const std::vector<int>& detection_counts, const std::vector<double>& tprs,
                             int n_centers = 8);

struct PowerCell {
  int n_studies = 0;
  double valid_fraction = 0.0;
  int replicates = 0;
  PowerMeasures measures;
  /// Summed replicate wall time, seconds.
  double runtime_s = 0.0;
};

struct PowerReport {
  std::vector<PowerCell> cells;
  std::string fingerprint;
  int n_centers = 8;

  friend bool operator==(const PowerReport& a, const PowerReport& b);
};

struct SweepConfig {
  std::vector<int> n_studies{20, 60, 120};
  std::vector<double> valid_fractions{0.0, 0.25, 0.5, 0.75, 1.0};
  int replicates = 100;
  /// Template for the generator; n_studies, valid_fraction and seed are set per replicate.
  SimConfig sim;
  /// Analysis settings; seed and jobs are set per replicate.
  AnalysisConfig analysis;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool progress = false;

  std::string fingerprint() const;
};

/// Replicate r of cell (I, p) seeds both simulation and analysis from
/// stream (seed, I, round(p * 1e6), r), so every cell is reproducible on its own.
PowerReport sweep(const SweepConfig& config);

/// Generated dataset for one sweep replicate (same streams as sweep()).
FociDataset sweep_replicate_dataset(const SweepConfig& config, int n_studies, double valid_fraction, int replicate,
                                    std::uint64_t* analysis_seed = nullptr);

}  // namespace cbma
