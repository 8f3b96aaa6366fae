#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "cbma/clusters.hpp"
#include "cbma/exact_null.hpp"
#include "cbma/foci.hpp"
#include "cbma/kernels.hpp"
#include "cbma/null_distribution.hpp"
#include "cbma/statistics.hpp"

namespace cbma {

/// Fingerprint of everything a null distribution depends on apart from
/// n_iter and seed: dataset content, kernel, weights, sign policy and mask.
std::string analysis_key(const FociDataset& dataset, const KernelSpec& kernel, const StudyWeights& weights,
                         const BrainMask& mask, SignPolicy policy = SignPolicy::Require);

struct McOptions {
  std::size_t n_iter = 1000;
  std::uint64_t seed = 0;
  int jobs = 1;
  SignPolicy policy = SignPolicy::Require;

  /// Record the largest cluster of voxels whose uncorrected p under
  /// `cluster_null` falls below `forming_p`.
  const NullDistribution* cluster_null = nullptr;
  double forming_p = 0.001;
  Connectivity connectivity = Connectivity::Vertex;

  /// Binning of the voxel statistic, as used for the observed data. When set,
  /// the cluster-forming rule reads replicate voxels through it (otherwise
  /// through cluster_null->bin_of on the statistic value).
  const NullModel* model = nullptr;
  /// Pool every voxel's binned statistic over all replicates into an
  /// estimate of the voxel-wise marginal null (needs `model`).
  bool marginal = false;
};

struct McNullResult {
  NullDistribution max_stat;
  std::optional<NullDistribution> max_cluster;
  std::optional<NullDistribution> marginal;
};

/// Focus-level Monte Carlo: in every replicate each focus of each study is
/// moved to an independent uniform in-mask voxel centre (SDM foci keep their
/// sign), the statistic image is recomputed and the requested summaries are
/// recorded. Replicate r, study i draws from stream (seed, r, i), so results
/// do not depend on `jobs`.
McNullResult mc_null(const FociDataset& dataset, const KernelSpec& kernel, const StudyWeights& weights,
                     const MaskPtr& mask, const McOptions& options);

NullDistribution mc_null_max(const FociDataset& dataset, const KernelSpec& kernel, const StudyWeights& weights,
                             const MaskPtr& mask, std::size_t n_iter, std::uint64_t seed, int jobs = 1,
                             SignPolicy policy = SignPolicy::Require);

/// Smallest bin whose right tail falls below `forming_p` (max_bin + 1 when none does).
std::int64_t forming_bin(const NullDistribution& null, double forming_p);

}  // namespace cbma
