#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "cbma/foci.hpp"
#include "cbma/kernels.hpp"
#include "cbma/volume.hpp"

namespace cbma {

struct StudyWeights {
  std::vector<double> values;
  double total = 0.0;

  static StudyWeights from_values(std::vector<double> values);
  static StudyWeights uniform(std::size_t n) { return from_values(std::vector<double>(n, 1.0)); }
};

/// w_i = n_i^exponent.
StudyWeights weights_from_participants(const FociDataset& dataset, double exponent);

/// Voxel-wise combination of study maps into a meta-analytic statistic.
///
/// MKDA and SDM accumulate w_i * value and divide by the weight total at the
/// end; ALE accumulates log1p(-L_i) and reports -expm1 of the sum. Each voxel
/// sees studies in the order they were added, so results are independent of
/// how studies or voxels are scheduled.
class StatisticAccumulator {
public:
  StatisticAccumulator() = default;
  StatisticAccumulator(Method method, std::size_t n_mask, double weight_total);

  void reset();
  void add_study(std::span<const std::uint32_t> voxels, std::span<const double> values, double weight);
  void add_study(const StudyMap& map, double weight) { add_study(map.voxels, map.values, weight); }

  double value(std::uint32_t mask_index) const { return finalize(sum_[mask_index]); }
  /// Largest statistic over the whole mask (untouched voxels count as 0).
  double max_value() const;
  std::span<const std::uint32_t> touched() const { return touched_; }
  std::vector<double> values() const;

private:
  double finalize(double sum) const { return method_ == Method::ALE ? -std::expm1(sum) : sum / weight_total_; }

  Method method_ = Method::ALE;
  double weight_total_ = 1.0;
  std::vector<double> sum_;
  std::vector<std::uint8_t> flag_;
  std::vector<std::uint32_t> touched_;
};

/// m(v) = sum_i w_i M_i(v) / sum_i w_i.
StatImage mkda_statistic(std::span<const StudyMap> maps, const StudyWeights& weights);
/// l(v) = 1 - prod_i (1 - L_i(v)).
StatImage ale_statistic(std::span<const StudyMap> maps);
/// s(v) = sum_i w_i S_i(v) / sum_i w_i.
StatImage sdm_statistic(std::span<const StudyMap> maps, const StudyWeights& weights);
StatImage compute_statistic(Method method, std::span<const StudyMap> maps, const StudyWeights& weights);

/// {"method", "max", "argmax_world", "argmax_index", "mask_voxels", "mask_volume_mm3"}.
nlohmann::json summary_json(const StatImage& image);

}  // namespace cbma
