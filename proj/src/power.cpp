#include "cbma/power.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <iostream>
#include <mutex>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>

#include "cbma/error.hpp"
#include "cbma/hashing.hpp"
#include "cbma/io_util.hpp"
#include "cbma/random.hpp"

namespace cbma {

double r95_radius(double scatter_sd_mm) {
  const boost::math::chi_squared chi2(3.0);
  return scatter_sd_mm * std::sqrt(boost::math::quantile(chi2, 0.95));
}

std::vector<std::vector<std::size_t>> true_voxels_by_center(const SimConfig& cfg) {
  const double r = r95_radius(cfg.scatter_sd_mm);
  std::vector<std::vector<std::size_t>> out(cfg.centers.size());
  const auto& mask = *cfg.mask;
  for (std::size_t m = 0; m < mask.size(); ++m) {
    const auto w = mask.world(m);
    for (std::size_t c = 0; c < cfg.centers.size(); ++c)
      if (euclidean_distance(w, cfg.centers[c]) <= r) out[c].push_back(mask.voxels()[m]);
  }
  return out;
}

std::vector<int> detected_centers(const ThresholdResult& result, const SimConfig& cfg) {
  const double r = r95_radius(cfg.scatter_sd_mm);
  const auto& g = result.sig.geometry();
  std::vector<int> out;
  for (std::size_t c = 0; c < cfg.centers.size(); ++c) {
    const auto ci = continuous_index(cfg.centers[c], g);
    int lo[3];
    int hi[3];
    for (int a = 0; a < 3; ++a) {
      const double reach = r / g.voxel_size[a];
      lo[a] = std::max(0, static_cast<int>(std::floor(ci[a] - reach)));
      hi[a] = std::min(g.dims[a] - 1, static_cast<int>(std::ceil(ci[a] + reach)));
    }
    bool hit = false;
    for (int k = lo[2]; k <= hi[2] && !hit; ++k)
      for (int j = lo[1]; j <= hi[1] && !hit; ++j)
        for (int i = lo[0]; i <= hi[0] && !hit; ++i) {
          const VoxelIndex v{i, j, k};
          if (result.sig.at(v) && euclidean_distance(voxel_to_world(v, g), cfg.centers[c]) <= r) hit = true;
        }
    if (hit) out.push_back(static_cast<int>(c));
  }
  return out;
}

double true_positive_rate(const ThresholdResult& result, const SimConfig& cfg) {
  std::vector<std::size_t> all;
  for (const auto& v : true_voxels_by_center(cfg)) all.insert(all.end(), v.begin(), v.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  if (all.empty()) return 0.0;
  std::size_t hits = 0;
  for (auto g : all) hits += result.sig[g] != 0;
  return static_cast<double>(hits) / static_cast<double>(all.size());
}

namespace {

Measure mean_se(const std::vector<double>& x) {
  Measure m;
  const double n = static_cast<double>(x.size());
  for (double v : x) m.mean += v;
  m.mean /= n;
  if (x.size() > 1) {
    double ss = 0.0;
    for (double v : x) ss += (v - m.mean) * (v - m.mean);
    m.se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return m;
}

std::uint64_t fraction_key(double p) { return static_cast<std::uint64_t>(std::llround(p * 1e6)); }

}  // namespace

PowerMeasures power_measures(const std::vector<int>& detection_counts, const std::vector<double>& tprs, int n_centers) {
  if (detection_counts.empty()) throw ValidationError("power measures need at least one replicate");
  if (tprs.size() != detection_counts.size()) throw ValidationError("detections and TPRs differ in length");
  std::vector<double> any;
  std::vector<double> all;
  std::vector<double> count;
  for (int d : detection_counts) {
    any.push_back(d >= 1 ? 1.0 : 0.0);
    all.push_back(d >= n_centers ? 1.0 : 0.0);
    count.push_back(static_cast<double>(d));
  }
  return {mean_se(any), mean_se(all), mean_se(count), mean_se(tprs)};
}

bool operator==(const PowerReport& a, const PowerReport& b) {
  if (a.fingerprint != b.fingerprint || a.n_centers != b.n_centers || a.cells.size() != b.cells.size()) return false;
  for (std::size_t c = 0; c < a.cells.size(); ++c) {
    const auto& x = a.cells[c];
    const auto& y = b.cells[c];
    if (x.n_studies != y.n_studies || x.valid_fraction != y.valid_fraction || x.replicates != y.replicates)
      return false;
    for (int m = 0; m < 4; ++m)
      if (x.measures[m].mean != y.measures[m].mean || x.measures[m].se != y.measures[m].se) return false;
  }
  return true;
}

std::string SweepConfig::fingerprint() const {
  std::ostringstream out;
  out << "B=" << replicates << ";I=";
  for (int i : n_studies) out << i << ',';
  out << ";p=";
  for (double p : valid_fractions) out << format_double(p) << ',';
  out << ";kernel=" << analysis.kernel.to_string() << ";w=" << format_double(analysis.weight_exponent)
      << ";inference=" << analysis.inference.to_string() << ";sd=" << format_double(sim.scatter_sd_mm)
      << ";n=" << sim.n_participants << ";seed=" << seed << ";mask=" << to_hex(sim.mask ? sim.mask->hash() : 0)
      << ";centers=";
  for (const auto& c : sim.centers) out << format_double(c.x) << ' ' << format_double(c.y) << ' ' << format_double(c.z) << ',';
  out << ";dist=";
  for (double d : sim.report_dist) out << format_double(d) << ',';
  return Fnv1a().text(out.str()).hex();
}

FociDataset sweep_replicate_dataset(const SweepConfig& config, int n_studies, double valid_fraction, int replicate,
                                    std::uint64_t* analysis_seed) {
  auto rng = make_stream(config.seed, {static_cast<std::uint64_t>(n_studies), fraction_key(valid_fraction),
                                       static_cast<std::uint64_t>(replicate)});
  auto sim = config.sim;
  sim.n_studies = n_studies;
  sim.valid_fraction = valid_fraction;
  sim.seed = rng();
  const auto second = rng();
  if (analysis_seed) *analysis_seed = second;
  return gen_dataset(sim);
}

PowerReport sweep(const SweepConfig& config) {
  if (config.n_studies.empty() || config.valid_fractions.empty()) throw ConfigError("sweep grids must be nonempty");
  if (config.replicates < 1) throw ConfigError("replicates must be at least 1");
  for (int i : config.n_studies)
    if (i < 1) throw ConfigError("numbers of studies must be positive");
  for (double p : config.valid_fractions)
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("valid fractions must lie in [0, 1]");
  config.sim.validate();
  config.analysis.kernel.validate();
  config.analysis.inference.validate();

  struct Task {
    std::size_t cell;
    int replicate;
  };
  const std::size_t n_cells = config.n_studies.size() * config.valid_fractions.size();
  const auto B = static_cast<std::size_t>(config.replicates);
  std::vector<Task> tasks;
  for (std::size_t c = 0; c < n_cells; ++c)
    for (int r = 0; r < config.replicates; ++r) tasks.push_back({c, r});

  std::vector<int> detections(tasks.size(), 0);
  std::vector<double> tprs(tasks.size(), 0.0);
  std::vector<double> seconds(tasks.size(), 0.0);
  std::vector<std::exception_ptr> errors(tasks.size());
  std::vector<std::size_t> remaining(n_cells, B);
  std::size_t cells_done = 0;
  std::mutex progress_mutex;

  // Precomputed once; the union of true voxels is the same for every replicate.
  const auto truth = true_voxels_by_center(config.sim);
  std::vector<std::size_t> true_union;
  for (const auto& v : truth) true_union.insert(true_union.end(), v.begin(), v.end());
  std::sort(true_union.begin(), true_union.end());
  true_union.erase(std::unique(true_union.begin(), true_union.end()), true_union.end());

  const int jobs = std::max(1, config.jobs);
#pragma omp parallel for schedule(dynamic, 1) num_threads(jobs)
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto start = std::chrono::steady_clock::now();
    const auto& task = tasks[t];
    const int I = config.n_studies[task.cell / config.valid_fractions.size()];
    const double p = config.valid_fractions[task.cell % config.valid_fractions.size()];
    try {
      std::uint64_t analysis_seed = 0;
      const auto dataset = sweep_replicate_dataset(config, I, p, task.replicate, &analysis_seed);
      auto acfg = config.analysis;
      acfg.seed = analysis_seed;
      acfg.jobs = 1;
      const auto result = run_analysis(dataset, config.sim.mask, acfg);
      detections[t] = static_cast<int>(detected_centers(result.threshold, config.sim).size());
      std::size_t hits = 0;
      for (auto g : true_union) hits += result.threshold.sig[g] != 0;
      tprs[t] = true_union.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(true_union.size());
    } catch (...) {
      errors[t] = std::current_exception();
    }
    seconds[t] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (config.progress) {
      std::lock_guard lock(progress_mutex);
      if (--remaining[task.cell] == 0) {
        ++cells_done;
        std::cerr << "power: cell I=" << I << " p=" << format_double(p) << " done (" << cells_done << '/' << n_cells
                  << ")\n";
      }
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  PowerReport report;
  report.fingerprint = config.fingerprint();
  report.n_centers = static_cast<int>(config.sim.centers.size());
  for (std::size_t c = 0; c < n_cells; ++c) {
    PowerCell cell;
    cell.n_studies = config.n_studies[c / config.valid_fractions.size()];
    cell.valid_fraction = config.valid_fractions[c % config.valid_fractions.size()];
    cell.replicates = config.replicates;
    const std::vector<int> d(detections.begin() + static_cast<std::ptrdiff_t>(c * B),
                             detections.begin() + static_cast<std::ptrdiff_t>((c + 1) * B));
    const std::vector<double> tp(tprs.begin() + static_cast<std::ptrdiff_t>(c * B),
                                 tprs.begin() + static_cast<std::ptrdiff_t>((c + 1) * B));
    cell.measures = power_measures(d, tp, report.n_centers);
    for (std::size_t r = c * B; r < (c + 1) * B; ++r) cell.runtime_s += seconds[r];
    report.cells.push_back(cell);
  }
  return report;
}

}  // namespace cbma
