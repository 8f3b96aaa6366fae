#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cbma/clusters.hpp"
#include "cbma/exact_null.hpp"
#include "cbma/foci.hpp"
#include "cbma/kernels.hpp"
#include "cbma/null_distribution.hpp"
#include "cbma/statistics.hpp"
#include "cbma/thresholding.hpp"

namespace cbma {

/// How the voxel-wise (uncorrected) null is obtained.
enum class NullSource { Exact, MonteCarlo };

struct InferenceSpec {
  Procedure::Kind kind = Procedure::Kind::FDR;
  /// alpha for FDR/FWE/cluster, the p cut for Fixed.
  double alpha = 0.05;
  /// Monte Carlo replicates for FWE, cluster FWE and the pooled marginal null.
  std::size_t n_iter = 1000;
  double forming_p = 0.001;
  NullSource null_source = NullSource::Exact;
  Connectivity connectivity = Connectivity::Vertex;
  double bin_width = kDefaultBinWidth;

  void validate() const;
  std::string to_string() const;
};

struct AnalysisConfig {
  KernelSpec kernel;
  double weight_exponent = 1.0;
  SignPolicy policy = SignPolicy::Require;
  InferenceSpec inference;
  std::uint64_t seed = 0;
  int jobs = 1;
};

/// Optional persistent store for null distributions, keyed by null_cache_key().
class NullStore {
public:
  virtual ~NullStore() = default;
  virtual std::optional<NullDistribution> load(const std::string& key) = 0;
  virtual void store(const std::string& key, const NullDistribution& null) = 0;
};

struct AnalysisResult {
  StudyWeights weights;
  std::vector<StudyMap> maps;
  StatImage stat;
  NullDistribution voxel_null;
  RealGrid p_uncorrected;
  std::optional<NullDistribution> max_null;
  std::optional<NullDistribution> cluster_null;
  ThresholdResult threshold;
};

/// Study maps, statistic, voxel-wise null and p-values, then the configured
/// thresholding procedure.
AnalysisResult run_analysis(const FociDataset& dataset, const MaskPtr& mask, const AnalysisConfig& config,
                            NullStore* store = nullptr);

}  // namespace cbma
