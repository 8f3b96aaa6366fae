#include "cbma/thresholding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cbma/error.hpp"
#include "cbma/io_util.hpp"

namespace cbma {

namespace {

void check_alpha(double alpha, const char* what) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError(std::string(what) + " must lie strictly between 0 and 1");
}

void check_grid(const RealGrid& p, const BrainMask& mask) {
  if (p.geometry() != mask.geometry()) throw ValidationError("p-value grid does not match the mask geometry");
}

ThresholdResult start(const RealGrid& p, Procedure procedure) {
  ThresholdResult r;
  r.sig = MaskGrid(p.geometry(), 0);
  r.p_uncorrected = p;
  r.p_corrected = RealGrid(p.geometry(), 1.0);
  r.procedure = procedure;
  return r;
}

void label(ThresholdResult& r, Connectivity connectivity, const RealGrid* stat) {
  r.clusters = cluster_label(r.sig, connectivity);
  if (stat)
    annotate_peaks(r.clusters, *stat);
  else
    annotate_peaks(r.clusters, r.p_uncorrected, true);
  for (auto& c : r.clusters) {
    if (!stat) c.peak_value = r.p_uncorrected[c.peak_index];
    c.corrected_p = r.p_corrected[c.peak_index];
  }
}

}  // namespace

std::string Procedure::to_string() const {
  std::ostringstream out;
  switch (kind) {
    case Kind::FDR: out << "FDR(" << format_double(level) << ")"; break;
    case Kind::FWEvoxel: out << "FWEvoxel(" << format_double(level) << ")"; break;
    case Kind::FWEcluster:
      out << "FWEcluster(" << format_double(level) << "," << format_double(forming_p) << ")";
      break;
    case Kind::Fixed: out << "Fixed(" << format_double(level) << ")"; break;
  }
  return out.str();
}

std::size_t ThresholdResult::n_significant() const {
  return static_cast<std::size_t>(std::count_if(sig.data().begin(), sig.data().end(), [](auto v) { return v != 0; }));
}

ThresholdResult fdr_threshold(const RealGrid& p, const BrainMask& mask, double alpha, Connectivity connectivity) {
  check_alpha(alpha, "FDR alpha");
  check_grid(p, mask);
  auto r = start(p, {Procedure::Kind::FDR, alpha, 0.0});
  const auto voxels = mask.voxels();
  const std::size_t V = voxels.size();
  std::vector<std::uint32_t> order(V);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return p[voxels[a]] < p[voxels[b]]; });

  std::size_t k = 0;  // number of rejections by the step-up rule
  for (std::size_t i = V; i >= 1; --i) {
    if (p[voxels[order[i - 1]]] <= static_cast<double>(i) * alpha / static_cast<double>(V)) {
      k = i;
      break;
    }
  }
  if (k > 0) {
    const double critical = p[voxels[order[k - 1]]];
    for (auto g : voxels)
      if (p[g] <= critical) r.sig[g] = 1;
  }
  double running = 1.0;
  for (std::size_t i = V; i >= 1; --i) {
    const auto g = voxels[order[i - 1]];
    running = std::min(running, static_cast<double>(V) * p[g] / static_cast<double>(i));
    r.p_corrected[g] = std::min(running, 1.0);
  }
  label(r, connectivity, nullptr);
  return r;
}

ThresholdResult fwe_threshold(const StatImage& stat, const NullDistribution& null, double alpha, const RealGrid* p_unc,
                              Connectivity connectivity) {
  check_alpha(alpha, "FWE alpha");
  if (!null.is_empirical()) throw ValidationError("FWE thresholding needs a Monte Carlo maximum null");
  if (null.method() != stat.method) throw ValidationError("null distribution and statistic use different methods");
  if (!stat.config_key.empty() && !null.fingerprint().empty() && stat.config_key != null.fingerprint())
    throw FingerprintMismatch("null distribution was built for a different configuration");
  if (!stat.mask) throw ValidationError("statistic image has no mask");
  const auto& mask = *stat.mask;
  RealGrid p_fwe(stat.grid.geometry(), 1.0);
  const double denom = 1.0 + static_cast<double>(null.n_iter());
  for (auto g : mask.voxels())
    p_fwe[g] = (1.0 + static_cast<double>(null.count_at_least(stat.grid[g]))) / denom;
  auto r = start(p_unc ? *p_unc : p_fwe, {Procedure::Kind::FWEvoxel, alpha, 0.0});
  r.p_corrected = p_fwe;
  for (auto g : mask.voxels())
    if (p_fwe[g] <= alpha) r.sig[g] = 1;
  label(r, connectivity, &stat.grid);
  return r;
}

ThresholdResult fixed_threshold(const RealGrid& p, const BrainMask& mask, double cut, Connectivity connectivity) {
  check_alpha(cut, "fixed p cut");
  check_grid(p, mask);
  auto r = start(p, {Procedure::Kind::Fixed, cut, 0.0});
  r.p_corrected = p;
  for (auto g : mask.voxels())
    if (p[g] < cut) r.sig[g] = 1;
  label(r, connectivity, nullptr);
  return r;
}

ThresholdResult cluster_fwe(const StatImage& stat, const RealGrid& p_unc, double forming_p,
                            const NullDistribution& null_cluster_sizes, double alpha, Connectivity connectivity) {
  check_alpha(alpha, "cluster alpha");
  check_alpha(forming_p, "cluster forming p");
  if (!null_cluster_sizes.is_empirical()) throw ValidationError("cluster FWE needs a Monte Carlo cluster-size null");
  if (!stat.config_key.empty() && !null_cluster_sizes.fingerprint().empty() &&
      stat.config_key != null_cluster_sizes.fingerprint())
    throw FingerprintMismatch("cluster-size null was built for a different configuration");
  if (!stat.mask) throw ValidationError("statistic image has no mask");
  check_grid(p_unc, *stat.mask);

  auto r = start(p_unc, {Procedure::Kind::FWEcluster, alpha, forming_p});
  MaskGrid supra(p_unc.geometry(), 0);
  for (auto g : stat.mask->voxels())
    if (p_unc[g] < forming_p) supra[g] = 1;
  auto candidates = cluster_label(supra, connectivity);
  const double cut = null_cluster_sizes.quantile(1.0 - alpha);
  const double denom = 1.0 + static_cast<double>(null_cluster_sizes.n_iter());
  for (auto& c : candidates) {
    const double size = static_cast<double>(c.size);
    c.corrected_p = (1.0 + static_cast<double>(null_cluster_sizes.count_at_least(size))) / denom;
    for (auto g : c.voxels) r.p_corrected[g] = c.corrected_p;
    if (size > cut) {
      for (auto g : c.voxels) r.sig[g] = 1;
      r.clusters.push_back(std::move(c));
    }
  }
  annotate_peaks(r.clusters, stat.grid);
  return r;
}

nlohmann::json cluster_table_json(const ThresholdResult& result) {
  auto rows = nlohmann::json::array();
  std::size_t id = 1;
  for (const auto& c : result.clusters) {
    nlohmann::json row;
    row["id"] = id++;
    row["size"] = c.size;
    row["peak"] = {c.peak_world.x, c.peak_world.y, c.peak_world.z};
    row["peak_value"] = c.peak_value;
    if (std::isnan(c.corrected_p))
      row["corrected_p"] = nullptr;
    else
      row["corrected_p"] = c.corrected_p;
    rows.push_back(row);
  }
  return rows;
}

std::string cluster_table_csv(const ThresholdResult& result) {
  std::ostringstream out;
  out << "cluster,size,peak_x,peak_y,peak_z,peak_value,corrected_p\n";
  std::size_t id = 1;
  for (const auto& c : result.clusters) {
    out << id++ << ',' << c.size << ',' << format_double(c.peak_world.x) << ',' << format_double(c.peak_world.y) << ','
        << format_double(c.peak_world.z) << ',' << format_double(c.peak_value) << ','
        << (std::isnan(c.corrected_p) ? std::string() : format_double(c.corrected_p)) << '\n';
  }
  return out.str();
}

}  // namespace cbma
