#include "cbma/statistics.hpp"

#include <cmath>

#include "cbma/error.hpp"

namespace cbma {

StudyWeights StudyWeights::from_values(std::vector<double> values) {
  StudyWeights w;
  for (double v : values)
    if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("study weights must be positive and finite");
  w.values = std::move(values);
  for (double v : w.values) w.total += v;
  return w;
}

StudyWeights weights_from_participants(const FociDataset& dataset, double exponent) {
  if (!(exponent >= 0.0) || !std::isfinite(exponent)) throw ConfigError("weight exponent must be a nonnegative number");
  std::vector<double> w;
  w.reserve(dataset.studies.size());
  for (const auto& s : dataset.studies) w.push_back(std::pow(static_cast<double>(s.n_participants), exponent));
  return StudyWeights::from_values(std::move(w));
}

StatisticAccumulator::StatisticAccumulator(Method method, std::size_t n_mask, double weight_total)
    : method_(method), weight_total_(weight_total), sum_(n_mask, 0.0), flag_(n_mask, 0) {
  if (method != Method::ALE && !(weight_total > 0.0)) throw ValidationError("weight total must be positive");
}

void StatisticAccumulator::reset() {
  for (auto m : touched_) {
    sum_[m] = 0.0;
    flag_[m] = 0;
  }
  touched_.clear();
}

void StatisticAccumulator::add_study(std::span<const std::uint32_t> voxels, std::span<const double> values,
                                     double weight) {
  for (std::size_t n = 0; n < voxels.size(); ++n) {
    const auto m = voxels[n];
    if (!flag_[m]) {
      flag_[m] = 1;
      touched_.push_back(m);
    }
    if (method_ == Method::ALE)
      sum_[m] += std::log1p(-values[n]);
    else
      sum_[m] += weight * values[n];
  }
}

double StatisticAccumulator::max_value() const {
  double best = touched_.size() < sum_.size() ? 0.0 : -INFINITY;
  for (auto m : touched_) best = std::max(best, finalize(sum_[m]));
  return best;
}

std::vector<double> StatisticAccumulator::values() const {
  std::vector<double> out(sum_.size(), 0.0);
  for (auto m : touched_) out[m] = finalize(sum_[m]);
  return out;
}

namespace {

StatImage combine(Method method, std::span<const StudyMap> maps, const StudyWeights* weights) {
  if (maps.empty()) throw ValidationError("at least one study map is required");
  const auto& mask = maps.front().mask;
  if (!mask) throw ValidationError("study map has no mask");
  for (const auto& m : maps) {
    if (!m.mask || (m.mask != mask && m.mask->hash() != mask->hash()))
      throw ValidationError("study maps were built on different masks");
    if (m.method != method) throw ValidationError("study map method does not match the statistic");
  }
  if (weights && weights->values.size() != maps.size())
    throw ValidationError("weight count does not match the number of studies");
  StatisticAccumulator acc(method, mask->size(), weights ? weights->total : 1.0);
  for (std::size_t i = 0; i < maps.size(); ++i) acc.add_study(maps[i], weights ? weights->values[i] : 1.0);
  StatImage image;
  image.method = method;
  image.mask = mask;
  image.grid = mask->scatter(acc.values());
  return image;
}

}  // namespace

StatImage mkda_statistic(std::span<const StudyMap> maps, const StudyWeights& weights) {
  return combine(Method::MKDA, maps, &weights);
}

StatImage ale_statistic(std::span<const StudyMap> maps) { return combine(Method::ALE, maps, nullptr); }

StatImage sdm_statistic(std::span<const StudyMap> maps, const StudyWeights& weights) {
  return combine(Method::SDM, maps, &weights);
}

StatImage compute_statistic(Method method, std::span<const StudyMap> maps, const StudyWeights& weights) {
  return method == Method::ALE ? ale_statistic(maps) : combine(method, maps, &weights);
}

nlohmann::json summary_json(const StatImage& image) {
  const auto index = image.argmax();
  const auto& g = image.grid.geometry();
  const auto v = g.unlinear(index);
  const auto p = voxel_to_world(v, g);
  const double voxel_volume = g.voxel_size[0] * g.voxel_size[1] * g.voxel_size[2];
  return {{"method", std::string(to_string(image.method))},
          {"max", image.grid[index]},
          {"argmax_world", {p.x, p.y, p.z}},
          {"argmax_index", {v.i, v.j, v.k}},
          {"mask_voxels", image.mask->size()},
          {"mask_volume_mm3", static_cast<double>(image.mask->size()) * voxel_volume}};
}

}  // namespace cbma
