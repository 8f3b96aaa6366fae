#include "cbma/analysis.hpp"

#include <sstream>

#include "cbma/error.hpp"
#include "cbma/io_util.hpp"
#include "cbma/monte_carlo.hpp"
#include "cbma/null_cache.hpp"

namespace cbma {

void InferenceSpec::validate() const {
  const bool is_cut = kind == Procedure::Kind::Fixed;
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ConfigError(std::string(is_cut ? "p cut" : "alpha") + " must lie strictly between 0 and 1");
  const bool needs_mc = kind == Procedure::Kind::FWEvoxel || kind == Procedure::Kind::FWEcluster ||
                        null_source == NullSource::MonteCarlo;
  if (needs_mc && n_iter < 1) throw ConfigError("n_iter must be at least 1");
  if (kind == Procedure::Kind::FWEcluster && !(forming_p > 0.0 && forming_p < 1.0))
    throw ConfigError("cluster forming p must lie strictly between 0 and 1");
  if (!(bin_width > 0.0)) throw ConfigError("bin width must be positive");
}

std::string InferenceSpec::to_string() const {
  std::ostringstream out;
  out << Procedure{kind, alpha, forming_p}.to_string() << ";null="
      << (null_source == NullSource::Exact ? "exact" : "mc");
  if (kind == Procedure::Kind::FWEvoxel || kind == Procedure::Kind::FWEcluster || null_source == NullSource::MonteCarlo)
    out << ";n_iter=" << n_iter;
  out << ";conn=" << static_cast<int>(connectivity) << ";bin=" << format_double(bin_width);
  return out.str();
}

namespace {

template <typename Compute>
NullDistribution cached(NullStore* store, const std::string& key, const std::string& fingerprint, Compute&& compute) {
  if (store) {
    if (auto hit = store->load(key)) return std::move(*hit);
  }
  auto null = compute();
  null.set_fingerprint(fingerprint);
  if (store) store->store(key, null);
  return null;
}

}  // namespace

AnalysisResult run_analysis(const FociDataset& dataset, const MaskPtr& mask, const AnalysisConfig& config,
                            NullStore* store) {
  if (!mask) throw ValidationError("analysis needs a mask");
  config.kernel.validate();
  const auto& inf = config.inference;
  inf.validate();
  dataset.validate();

  AnalysisResult r;
  const Method method = config.kernel.method;
  r.weights = method == Method::ALE ? StudyWeights::uniform(dataset.studies.size())
                                    : weights_from_participants(dataset, config.weight_exponent);
  r.maps = build_study_maps(dataset, config.kernel, mask, config.policy, config.jobs);
  r.stat = compute_statistic(method, r.maps, r.weights);
  const auto key = analysis_key(dataset, config.kernel, r.weights, *mask, config.policy);
  r.stat.config_key = key;

  const auto model = make_null_model(method, r.weights, inf.bin_width);
  const auto binned = binned_statistic(r.maps, model);
  const std::string bin_tag = "bin=" + format_double(inf.bin_width) + ";os=" + std::to_string(model.oversample);

  McOptions mc;
  mc.n_iter = inf.n_iter;
  mc.seed = config.seed;
  mc.jobs = config.jobs;
  mc.policy = config.policy;
  mc.connectivity = inf.connectivity;

  if (inf.null_source == NullSource::Exact) {
    r.voxel_null = cached(store, null_cache_key(key, "exact", 0, 0, bin_tag), key,
                          [&] { return exact_null(r.maps, model); });
  } else {
    r.voxel_null = cached(store, null_cache_key(key, "marginal", inf.n_iter, config.seed, bin_tag), key, [&] {
      auto o = mc;
      o.model = &model;
      o.marginal = true;
      return *mc_null(dataset, config.kernel, r.weights, mask, o).marginal;
    });
  }
  r.p_uncorrected = p_uncorrected(binned, *mask, r.voxel_null);

  switch (inf.kind) {
    case Procedure::Kind::FDR:
      r.threshold = fdr_threshold(r.p_uncorrected, *mask, inf.alpha, inf.connectivity);
      break;
    case Procedure::Kind::Fixed:
      r.threshold = fixed_threshold(r.p_uncorrected, *mask, inf.alpha, inf.connectivity);
      break;
    case Procedure::Kind::FWEvoxel:
      r.max_null = cached(store, null_cache_key(key, "max", inf.n_iter, config.seed), key,
                          [&] { return mc_null(dataset, config.kernel, r.weights, mask, mc).max_stat; });
      r.threshold = fwe_threshold(r.stat, *r.max_null, inf.alpha, &r.p_uncorrected, inf.connectivity);
      break;
    case Procedure::Kind::FWEcluster: {
      std::ostringstream extra;
      extra << bin_tag << ";forming=" << format_double(inf.forming_p) << ";conn=" << static_cast<int>(inf.connectivity)
            << ";null=" << (inf.null_source == NullSource::Exact ? "exact" : "mc");
      r.cluster_null = cached(store, null_cache_key(key, "cluster", inf.n_iter, config.seed, extra.str()), key, [&] {
        auto o = mc;
        o.cluster_null = &r.voxel_null;
        o.model = &model;
        o.forming_p = inf.forming_p;
        return *mc_null(dataset, config.kernel, r.weights, mask, o).max_cluster;
      });
      r.threshold = cluster_fwe(r.stat, r.p_uncorrected, inf.forming_p, *r.cluster_null, inf.alpha, inf.connectivity);
      break;
    }
  }
  // Report cluster peaks by statistic value for every procedure.
  std::vector<double> corrected;
  for (const auto& c : r.threshold.clusters) corrected.push_back(c.corrected_p);
  annotate_peaks(r.threshold.clusters, r.stat.grid);
  for (std::size_t c = 0; c < r.threshold.clusters.size(); ++c) {
    auto& cl = r.threshold.clusters[c];
    cl.corrected_p = inf.kind == Procedure::Kind::FWEcluster ? corrected[c] : r.threshold.p_corrected[cl.peak_index];
  }
  return r;
}

}  // namespace cbma
