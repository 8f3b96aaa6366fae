#include "cbma/exact_null.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <mutex>

#include <fftw3.h>

#include "cbma/error.hpp"

namespace cbma {

namespace {

// Planner calls are not thread-safe in FFTW; execution on distinct arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t bytes) : ptr(fftw_malloc(bytes)) {
    if (!ptr) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(ptr); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  void* ptr;
};

struct Plan {
  fftw_plan plan = nullptr;
  ~Plan() {
    if (plan) {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(plan);
    }
  }
};

std::size_t next_smooth(std::size_t n) {
  for (std::size_t m = std::max<std::size_t>(n, 1);; ++m) {
    std::size_t r = m;
    for (std::size_t f : {2, 3, 5})
      while (r % f == 0) r /= f;
    if (r == 1) return m;
  }
}

struct StudyHistogram {
  std::int64_t min_bin = 0;
  std::int64_t max_bin = 0;
  std::vector<std::pair<std::int64_t, double>> bins;  // absolute bin, probability
};

StudyHistogram study_histogram(const StudyMap& map, std::size_t study, const NullModel& model, std::size_t n_mask) {
  // (bin, count) pieces; a split value contributes two fractional pieces.
  std::vector<std::pair<std::int64_t, double>> pieces;
  pieces.reserve(2 * map.values.size() + 1);
  for (double v : map.values) {
    if (!model.split) {
      pieces.emplace_back(model.contribution(study, v), 1.0);
      continue;
    }
    const double x = model.position(study, v) * model.oversample;
    const double lo = std::floor(x);
    const double frac = x - lo;
    const auto bin = static_cast<std::int64_t>(lo);
    if (frac < 1.0) pieces.emplace_back(bin, 1.0 - frac);
    if (frac > 0.0) pieces.emplace_back(bin + 1, frac);
  }
  if (n_mask > map.values.size()) pieces.emplace_back(0, static_cast<double>(n_mask - map.values.size()));
  std::sort(pieces.begin(), pieces.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  StudyHistogram h;
  const double inv = 1.0 / static_cast<double>(n_mask);
  for (std::size_t i = 0; i < pieces.size();) {
    const auto bin = pieces[i].first;
    double count = 0.0;
    for (; i < pieces.size() && pieces[i].first == bin; ++i) count += pieces[i].second;
    if (count > 0.0) h.bins.emplace_back(bin, count * inv);
  }
  h.min_bin = h.bins.front().first;
  h.max_bin = h.bins.back().first;
  return h;
}

// Upper bound on log E[exp(theta * (B - min))] using 64 coarse buckets whose
// values are rounded up, so the resulting Chernoff bound stays valid.
struct CoarseMgf {
  std::vector<double> log_prob;
  std::vector<double> upper;
};

CoarseMgf coarse(const StudyHistogram& h) {
  constexpr std::int64_t kBuckets = 64;
  const std::int64_t span = h.max_bin - h.min_bin + 1;
  const std::int64_t width = (span + kBuckets - 1) / kBuckets;
  std::vector<double> mass(static_cast<std::size_t>(kBuckets), 0.0);
  for (const auto& [bin, p] : h.bins) mass[static_cast<std::size_t>((bin - h.min_bin) / width)] += p;
  CoarseMgf c;
  for (std::int64_t b = 0; b < kBuckets; ++b) {
    if (mass[static_cast<std::size_t>(b)] <= 0.0) continue;
    c.log_prob.push_back(std::log(mass[static_cast<std::size_t>(b)]));
    c.upper.push_back(static_cast<double>(std::min(span - 1, (b + 1) * width - 1)));
  }
  return c;
}

double log_mgf(const CoarseMgf& c, double theta) {
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < c.upper.size(); ++k) peak = std::max(peak, c.log_prob[k] + theta * c.upper[k]);
  double s = 0.0;
  for (std::size_t k = 0; k < c.upper.size(); ++k) s += std::exp(c.log_prob[k] + theta * c.upper[k] - peak);
  return peak + std::log(s);
}

// Fine bin f belongs to coarse bin round(f / k); k is odd, so no fine bin
// straddles two coarse ones.
BinnedHistogram coarsen(BinnedHistogram fine, int k) {
  if (k == 1) return fine;
  const std::int64_t half = (k - 1) / 2;
  auto coarse_of = [&](std::int64_t f) {
    const std::int64_t g = f + half;
    return (g >= 0 ? g : g - (k - 1)) / k;
  };
  BinnedHistogram out;
  out.axis = fine.axis;
  out.bin_width = fine.bin_width;
  out.exact = fine.exact;
  out.min_bin = coarse_of(fine.min_bin);
  const std::int64_t last = coarse_of(fine.min_bin + static_cast<std::int64_t>(fine.probs.size()) - 1);
  out.probs.assign(static_cast<std::size_t>(last - out.min_bin + 1), 0.0);
  for (std::size_t b = 0; b < fine.probs.size(); ++b)
    out.probs[static_cast<std::size_t>(coarse_of(fine.min_bin + static_cast<std::int64_t>(b)) - out.min_bin)] +=
        fine.probs[b];
  return out;
}

}  // namespace

double NullModel::position(std::size_t study, double value) const {
  if (value == 0.0) return 0.0;
  if (axis == NullAxis::ComplementLog) return to_axis(axis, value) / bin_width;
  return scale[study] * value / bin_width;
}

std::int64_t NullModel::contribution(std::size_t study, double value) const {
  return std::llround(position(study, value));
}

NullModel make_null_model(Method method, const StudyWeights& weights, double bin_width) {
  if (!(bin_width > 0.0) || !std::isfinite(bin_width)) throw ConfigError("null bin width must be positive");
  NullModel model;
  model.method = method;
  model.bin_width = bin_width;
  model.split = method != Method::MKDA;
  model.oversample = model.split ? 15 : 1;
  if (method == Method::ALE) {
    model.axis = NullAxis::ComplementLog;
    model.scale.assign(weights.values.size(), 1.0);
  } else {
    model.axis = NullAxis::Linear;
    for (double w : weights.values) model.scale.push_back(w / weights.total);
  }
  return model;
}

NullDistribution exact_null(std::span<const StudyMap> maps, const NullModel& model, double tail_epsilon) {
  if (maps.empty()) throw ValidationError("exact null needs at least one study map");
  if (model.scale.size() != maps.size()) throw ValidationError("null model does not match the number of studies");
  const auto& mask = maps.front().mask;
  if (!mask) throw ValidationError("study map has no mask");
  for (const auto& m : maps)
    if (!m.mask || m.mask->hash() != mask->hash()) throw ValidationError("study maps were built on different masks");
  const std::size_t n_mask = mask->size();
  if (model.oversample < 1 || model.oversample % 2 == 0) throw ConfigError("null oversampling must be odd");

  std::vector<StudyHistogram> hists;
  hists.reserve(maps.size());
  std::int64_t min_total = 0;
  std::int64_t span_total = 0;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    hists.push_back(study_histogram(maps[i], i, model, n_mask));
    min_total += hists.back().min_bin;
    span_total += hists.back().max_bin - hists.back().min_bin;
  }

  BinnedHistogram out;
  out.axis = model.axis;
  out.bin_width = model.bin_width;
  out.exact = true;
  out.min_bin = min_total;

  if (maps.size() == 1) {
    const auto& h = hists.front();
    out.probs.assign(static_cast<std::size_t>(h.max_bin - h.min_bin + 1), 0.0);
    for (const auto& [bin, p] : h.bins) out.probs[static_cast<std::size_t>(bin - h.min_bin)] += p;
    return NullDistribution::histogram(model.method, coarsen(std::move(out), model.oversample));
  }

  // Truncation point from a Chernoff bound on the shifted sum.
  std::int64_t support = span_total;
  if (span_total > 4096) {
    std::vector<CoarseMgf> mgfs;
    mgfs.reserve(hists.size());
    for (const auto& h : hists) mgfs.push_back(coarse(h));
    const double log_eps = std::log(tail_epsilon);
    double best = static_cast<double>(span_total);
    for (int k = 0; k <= 48; ++k) {
      const double theta = std::ldexp(1.0, -32 + k);
      double sum = 0.0;
      for (const auto& c : mgfs) sum += log_mgf(c, theta);
      best = std::min(best, (sum - log_eps) / theta);
    }
    std::int64_t bound = static_cast<std::int64_t>(std::ceil(best));
    for (const auto& h : hists) bound = std::max(bound, h.max_bin - h.min_bin);
    support = std::min(span_total, bound);
  }

  const std::size_t length = next_smooth(static_cast<std::size_t>(support) + 1);
  const std::size_t n_freq = length / 2 + 1;
  FftwBuffer real_buf(sizeof(double) * length);
  FftwBuffer freq_buf(sizeof(fftw_complex) * n_freq);
  auto* real = static_cast<double*>(real_buf.ptr);
  auto* freq = static_cast<fftw_complex*>(freq_buf.ptr);
  Plan forward;
  Plan backward;
  {
    std::lock_guard lock(planner_mutex());
    forward.plan = fftw_plan_dft_r2c_1d(static_cast<int>(length), real, freq, FFTW_ESTIMATE);
    backward.plan = fftw_plan_dft_c2r_1d(static_cast<int>(length), freq, real, FFTW_ESTIMATE);
  }
  if (!forward.plan || !backward.plan) throw NumericError("FFT planning failed");

  std::vector<std::complex<double>> spectrum(n_freq, {1.0, 0.0});
  for (const auto& h : hists) {
    std::fill(real, real + length, 0.0);
    for (const auto& [bin, p] : h.bins) {
      const auto shifted = static_cast<std::size_t>(bin - h.min_bin);
      if (shifted < length) real[shifted] += p;
    }
    fftw_execute_dft_r2c(forward.plan, real, freq);
    for (std::size_t f = 0; f < n_freq; ++f) spectrum[f] *= std::complex<double>(freq[f][0], freq[f][1]);
  }
  for (std::size_t f = 0; f < n_freq; ++f) {
    freq[f][0] = spectrum[f].real();
    freq[f][1] = spectrum[f].imag();
  }
  fftw_execute_dft_c2r(backward.plan, freq, real);

  out.probs.assign(static_cast<std::size_t>(support) + 1, 0.0);
  const double inv_length = 1.0 / static_cast<double>(length);
  double peak = 0.0;
  for (std::size_t b = 0; b < out.probs.size(); ++b) {
    out.probs[b] = real[b] * inv_length;
    peak = std::max(peak, out.probs[b]);
  }
  // Transform round-off sits near 1e-16 of the peak; anything below this
  // floor is indistinguishable from zero.
  const double floor = 1e-14 * peak;
  for (auto& p : out.probs)
    if (p < floor) p = 0.0;
  return NullDistribution::histogram(model.method, coarsen(std::move(out), model.oversample));
}

NullDistribution ale_exact_null(std::span<const StudyMap> maps, const BrainMask& mask, double bin_width) {
  for (const auto& m : maps) {
    if (m.method != Method::ALE) throw ValidationError("ALE exact null requires ALE study maps");
    if (!m.mask || m.mask->hash() != mask.hash()) throw ValidationError("study map mask differs from the analysis mask");
  }
  return exact_null(maps, make_null_model(Method::ALE, StudyWeights::uniform(maps.size()), bin_width));
}

std::vector<std::int64_t> binned_statistic(std::span<const StudyMap> maps, const NullModel& model) {
  if (maps.empty()) throw ValidationError("binned statistic needs at least one study map");
  if (model.scale.size() != maps.size()) throw ValidationError("null model does not match the number of studies");
  std::vector<double> sum(maps.front().mask->size(), 0.0);
  for (std::size_t i = 0; i < maps.size(); ++i)
    for (std::size_t n = 0; n < maps[i].voxels.size(); ++n) sum[maps[i].voxels[n]] += model.term(i, maps[i].values[n]);
  std::vector<std::int64_t> out(sum.size());
  for (std::size_t v = 0; v < sum.size(); ++v) out[v] = std::llround(sum[v]);
  return out;
}

RealGrid p_uncorrected(const StatImage& stat, const NullDistribution& null) {
  if (!null.is_histogram())
    throw ValidationError("uncorrected p-values need a histogram null; use FWE thresholding for maximum nulls");
  if (null.method() != stat.method) throw ValidationError("null distribution and statistic use different methods");
  RealGrid p(stat.grid.geometry(), 1.0);
  for (auto index : stat.mask->voxels()) p[index] = null.tail(stat.grid[index]);
  return p;
}

RealGrid p_uncorrected(std::span<const std::int64_t> binned, const BrainMask& mask, const NullDistribution& null) {
  if (!null.is_histogram()) throw ValidationError("uncorrected p-values need a histogram null");
  if (binned.size() != mask.size()) throw ValidationError("binned statistic does not match the mask");
  RealGrid p(mask.geometry(), 1.0);
  const auto vox = mask.voxels();
  for (std::size_t m = 0; m < binned.size(); ++m) p[vox[m]] = null.tail_at_bin(binned[m]);
  return p;
}

const char* fft_library_version() { return fftw_version; }

}  // namespace cbma
