#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cbma/clusters.hpp"
#include "cbma/null_distribution.hpp"
#include "cbma/volume.hpp"

namespace cbma {

struct Procedure {
  enum class Kind { FDR, FWEvoxel, FWEcluster, Fixed };
  Kind kind = Kind::FDR;
  /// alpha for FDR/FWE, the cut for Fixed.
  double level = 0.05;
  /// Cluster-forming uncorrected p (FWEcluster only).
  double forming_p = 0.0;

  std::string to_string() const;
};

struct ThresholdResult {
  MaskGrid sig;
  RealGrid p_uncorrected;
  RealGrid p_corrected;
  std::vector<Cluster> clusters;
  Procedure procedure;

  std::size_t n_significant() const;
};

/// Benjamini-Hochberg step-up over the in-mask p-values. Ties are ordered by
/// voxel index and every voxel sharing the critical p is rejected.
ThresholdResult fdr_threshold(const RealGrid& p, const BrainMask& mask, double alpha,
                              Connectivity connectivity = Connectivity::Vertex);

/// Voxel-wise FWE from a Monte Carlo maximum: p = (1 + #{max >= stat}) / (1 + n).
/// `p_unc`, when given, is carried through as the uncorrected map; otherwise
/// the corrected map is reported in both slots.
ThresholdResult fwe_threshold(const StatImage& stat, const NullDistribution& null, double alpha,
                              const RealGrid* p_unc = nullptr, Connectivity connectivity = Connectivity::Vertex);

/// sig(v) = p(v) < cut, inside `mask`.
ThresholdResult fixed_threshold(const RealGrid& p, const BrainMask& mask, double cut,
                                Connectivity connectivity = Connectivity::Vertex);

/// Cluster-extent FWE: voxels with p < forming_p form clusters, which survive
/// when their size strictly exceeds the (1 - alpha) quantile of the null
/// maximum cluster size.
ThresholdResult cluster_fwe(const StatImage& stat, const RealGrid& p_unc, double forming_p,
                            const NullDistribution& null_cluster_sizes, double alpha,
                            Connectivity connectivity = Connectivity::Vertex);

/// Clusters of a result as rows: id, size, peak world coordinate, peak value, corrected p.
nlohmann::json cluster_table_json(const ThresholdResult& result);
std::string cluster_table_csv(const ThresholdResult& result);

}  // namespace cbma
