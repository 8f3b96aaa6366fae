#include "cbma/monte_carlo.hpp"

#include <algorithm>
#include <exception>
#include <map>
#include <unordered_map>

#include <omp.h>

#include "cbma/error.hpp"
#include "cbma/hashing.hpp"
#include "cbma/random.hpp"

namespace cbma {

std::string analysis_key(const FociDataset& dataset, const KernelSpec& kernel, const StudyWeights& weights,
                         const BrainMask& mask, SignPolicy policy) {
  Fnv1a h;
  h.value(dataset.hash()).text(kernel.to_string()).value(mask.hash());
  h.value(static_cast<int>(kernel.method == Method::SDM ? policy : SignPolicy::Require));
  for (double w : weights.values) h.value(w);
  return h.hex();
}

std::int64_t forming_bin(const NullDistribution& null, double forming_p) {
  const auto& hist = null.hist();
  std::int64_t lo = hist.min_bin;
  std::int64_t hi = null.max_bin() + 1;
  // tail_at_bin is non-increasing: find the first bin with tail < forming_p.
  while (lo < hi) {
    const auto mid = lo + (hi - lo) / 2;
    if (null.tail_at_bin(mid) < forming_p)
      hi = mid;
    else
      lo = mid + 1;
  }
  return lo;
}

namespace {

struct Workspace {
  StudyScratch scratch;
  StatisticAccumulator acc;
  std::vector<std::uint32_t> voxels;
  std::vector<double> values;
  std::vector<double> binned;
  std::vector<std::uint8_t> binned_flag;
  std::vector<std::uint32_t> binned_touched;
  std::vector<std::size_t> supra;
  MaskGrid cluster_grid;
  std::unordered_map<std::int64_t, std::uint64_t> marginal;
};

}  // namespace

McNullResult mc_null(const FociDataset& dataset, const KernelSpec& kernel, const StudyWeights& weights,
                     const MaskPtr& mask, const McOptions& options) {
  if (!mask) throw ValidationError("Monte Carlo null requires a mask");
  if (options.n_iter < 1) throw ConfigError("n_iter must be at least 1");
  kernel.validate();
  const auto& studies = dataset.studies;
  if (weights.values.size() != studies.size())
    throw ValidationError("weight count does not match the number of studies");
  if (options.cluster_null && !options.cluster_null->is_histogram())
    throw ValidationError("cluster forming threshold needs a histogram null");
  if (options.marginal && !options.model) throw ConfigError("a pooled marginal null needs a null model");

  const Method method = kernel.method;
  const std::size_t n_mask = mask->size();
  const int jobs = std::max(1, options.jobs);

  // One stencil per distinct kernel width.
  std::map<double, std::size_t> width_slot;
  std::vector<FocusKernel> kernels;
  std::vector<std::size_t> study_kernel(studies.size());
  std::vector<std::vector<double>> signs(studies.size());
  for (std::size_t i = 0; i < studies.size(); ++i) {
    const double w = kernel.width_for(studies[i].n_participants);
    auto [it, inserted] = width_slot.emplace(w, kernels.size());
    if (inserted) kernels.emplace_back(method, w, mask);
    study_kernel[i] = it->second;
    for (const auto& f : studies[i].foci) {
      double s = 1.0;
      if (method == Method::SDM) {
        if (f.t_value)
          s = *f.t_value < 0.0 ? -1.0 : 1.0;
        else if (options.policy == SignPolicy::Require)
          throw ValidationError("study '" + studies[i].id + "' has a focus without a T value (use --assume-positive)");
      }
      signs[i].push_back(s);
    }
  }
  if (method == Method::ALE)
    for (auto& k : kernels) k.prepare_centered_masses(jobs);

  const double weight_total = method == Method::ALE ? 1.0 : weights.total;
  const std::int64_t cutoff_bin = options.cluster_null ? forming_bin(*options.cluster_null, options.forming_p) : 0;
  const NullModel* model = options.model;

  std::vector<double> max_samples(options.n_iter, 0.0);
  std::vector<double> cluster_samples(options.cluster_null ? options.n_iter : 0, 0.0);
  std::vector<std::unordered_map<std::int64_t, std::uint64_t>> marginals;
  std::vector<std::exception_ptr> errors(options.n_iter);

  std::vector<Workspace> spaces(static_cast<std::size_t>(jobs));

#pragma omp parallel num_threads(jobs)
  {
    auto& ws = spaces[static_cast<std::size_t>(omp_get_thread_num())];
    ws.scratch.resize(n_mask);
    ws.acc = StatisticAccumulator(method, n_mask, weight_total);
    if (options.cluster_null) ws.cluster_grid = MaskGrid(mask->geometry(), 0);
    if (model) {
      ws.binned.assign(n_mask, 0.0);
      ws.binned_flag.assign(n_mask, 0);
    }
    std::uniform_int_distribution<std::uint32_t> uniform(0, static_cast<std::uint32_t>(n_mask - 1));

#pragma omp for schedule(dynamic, 1)
    for (std::size_t r = 0; r < options.n_iter; ++r) {
      try {
        ws.acc.reset();
        for (std::size_t i = 0; i < studies.size(); ++i) {
          const auto& fk = kernels[study_kernel[i]];
          auto rng = make_stream(options.seed, {r, i});
          for (std::size_t f = 0; f < studies[i].foci.size(); ++f) {
            const auto m = uniform(rng);
            switch (method) {
              case Method::MKDA:
                fk.for_each_centered(m, [&](std::uint32_t v, double) { ws.scratch.add(Method::MKDA, v, 1.0); });
                break;
              case Method::ALE: {
                const double total = fk.centered_mass(m);
                fk.for_each_centered(m, [&](std::uint32_t v, double raw) { ws.scratch.add(Method::ALE, v, raw / total); });
                break;
              }
              case Method::SDM: {
                const double s = signs[i][f];
                fk.for_each_centered(m, [&](std::uint32_t v, double raw) { ws.scratch.add(Method::SDM, v, s * raw); });
                break;
              }
            }
          }
          ws.scratch.finish(method, ws.voxels, ws.values, false);
          ws.acc.add_study(ws.voxels, ws.values, weights.values[i]);
          if (model) {
            for (std::size_t n = 0; n < ws.voxels.size(); ++n) {
              const auto v = ws.voxels[n];
              if (!ws.binned_flag[v]) {
                ws.binned_flag[v] = 1;
                ws.binned_touched.push_back(v);
              }
              ws.binned[v] += model->term(i, ws.values[n]);
            }
          }
        }
        max_samples[r] = ws.acc.max_value();

        if (options.cluster_null) {
          ws.supra.clear();
          if (model) {
            for (auto v : ws.binned_touched)
              if (std::llround(ws.binned[v]) >= cutoff_bin) ws.supra.push_back(mask->voxels()[v]);
          } else {
            for (auto v : ws.acc.touched())
              if (options.cluster_null->bin_of(ws.acc.value(v)) >= cutoff_bin) ws.supra.push_back(mask->voxels()[v]);
          }
          cluster_samples[r] = static_cast<double>(max_cluster_size(ws.supra, ws.cluster_grid, options.connectivity));
        }
        if (model) {
          std::size_t zero = n_mask - ws.binned_touched.size();
          for (auto v : ws.binned_touched) {
            if (options.marginal) ++ws.marginal[std::llround(ws.binned[v])];
            ws.binned[v] = 0.0;
            ws.binned_flag[v] = 0;
          }
          ws.binned_touched.clear();
          if (options.marginal && zero) ws.marginal[0] += zero;
        }
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  const auto key = analysis_key(dataset, kernel, weights, *mask, options.policy);
  McNullResult out;
  out.max_stat = NullDistribution::empirical_max(method, std::move(max_samples), key);
  if (options.cluster_null) out.max_cluster = NullDistribution::empirical_max(method, std::move(cluster_samples), key);
  if (options.marginal) {
    // Integer counts merge exactly, so the schedule cannot change the result.
    std::map<std::int64_t, std::uint64_t> counts;
    for (auto& ws : spaces)
      for (const auto& [bin, c] : ws.marginal) counts[bin] += c;
    BinnedHistogram hist;
    hist.axis = model->axis;
    hist.bin_width = model->bin_width;
    hist.exact = false;
    hist.min_bin = counts.begin()->first;
    hist.probs.assign(static_cast<std::size_t>(counts.rbegin()->first - hist.min_bin + 1), 0.0);
    const double total = static_cast<double>(n_mask) * static_cast<double>(options.n_iter);
    for (const auto& [bin, c] : counts)
      hist.probs[static_cast<std::size_t>(bin - hist.min_bin)] = static_cast<double>(c) / total;
    out.marginal = NullDistribution::histogram(method, std::move(hist), key);
  }
  return out;
}

NullDistribution mc_null_max(const FociDataset& dataset, const KernelSpec& kernel, const StudyWeights& weights,
                             const MaskPtr& mask, std::size_t n_iter, std::uint64_t seed, int jobs, SignPolicy policy) {
  McOptions options;
  options.n_iter = n_iter;
  options.seed = seed;
  options.jobs = jobs;
  options.policy = policy;
  return mc_null(dataset, kernel, weights, mask, options).max_stat;
}

}  // namespace cbma
