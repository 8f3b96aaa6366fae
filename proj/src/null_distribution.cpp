#include "cbma/null_distribution.hpp"

#include <algorithm>
#include <cmath>

#include "cbma/error.hpp"

namespace cbma {

namespace {
constexpr double kMaxComplementLog = 40.0;
}

double to_axis(NullAxis axis, double value) {
  if (axis == NullAxis::Linear) return value;
  if (value >= 1.0) return kMaxComplementLog;
  return std::min(-std::log1p(-value), kMaxComplementLog);
}

NullDistribution NullDistribution::empirical_max(Method method, std::vector<double> samples, std::string fingerprint) {
  if (samples.empty()) throw ValidationError("an empirical null needs at least one sample");
  for (double s : samples)
    if (!std::isfinite(s)) throw ValidationError("empirical null samples must be finite");
  std::sort(samples.begin(), samples.end());
  NullDistribution n;
  n.method_ = method;
  n.fingerprint_ = std::move(fingerprint);
  n.data_ = EmpiricalMax{std::move(samples)};
  return n;
}

NullDistribution NullDistribution::histogram(Method method, BinnedHistogram hist, std::string fingerprint,
                                             bool renormalize) {
  if (!(hist.bin_width > 0.0)) throw ValidationError("histogram bin width must be positive");
  if (hist.probs.empty()) throw ValidationError("histogram null has no bins");
  long double total = 0.0L;
  for (auto& p : hist.probs) {
    if (!(p > 0.0)) p = 0.0;
    total += p;
  }
  if (!(total > 0.0L)) throw ValidationError("histogram null has no mass");
  if (std::abs(static_cast<double>(total) - 1.0) > 1e-6)
    throw ValidationError("histogram null probabilities do not sum to one");
  if (renormalize)
    for (auto& p : hist.probs) p = static_cast<double>(p / total);
  while (hist.probs.size() > 1 && hist.probs.back() == 0.0) hist.probs.pop_back();
  std::size_t lead = 0;
  while (lead + 1 < hist.probs.size() && hist.probs[lead] == 0.0) ++lead;
  if (lead > 0) {
    hist.probs.erase(hist.probs.begin(), hist.probs.begin() + static_cast<std::ptrdiff_t>(lead));
    hist.min_bin += static_cast<std::int64_t>(lead);
  }

  NullDistribution n;
  n.method_ = method;
  n.fingerprint_ = std::move(fingerprint);
  n.survival_.resize(hist.probs.size());
  long double acc = 0.0L;
  for (std::size_t b = hist.probs.size(); b-- > 0;) {
    acc += hist.probs[b];
    n.survival_[b] = std::min(1.0, static_cast<double>(acc));
  }
  n.survival_[0] = 1.0;
  n.data_ = std::move(hist);
  return n;
}

const EmpiricalMax& NullDistribution::empirical() const {
  if (!is_empirical()) throw ValidationError("null distribution is not an empirical maximum sample");
  return std::get<EmpiricalMax>(data_);
}

const BinnedHistogram& NullDistribution::hist() const {
  if (!is_histogram()) throw ValidationError("null distribution is not a binned histogram");
  return std::get<BinnedHistogram>(data_);
}

std::size_t NullDistribution::count_at_least(double value) const {
  const auto& s = empirical().samples;
  return static_cast<std::size_t>(s.end() - std::lower_bound(s.begin(), s.end(), value));
}

double NullDistribution::quantile(double q) const {
  const auto& s = empirical().samples;
  if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("quantile level must lie in [0,1]");
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(s.size())));
  rank = std::clamp<std::size_t>(rank, 1, s.size());
  return s[rank - 1];
}

std::int64_t NullDistribution::bin_of(double value) const {
  const auto& h = hist();
  return std::llround(to_axis(h.axis, value) / h.bin_width);
}

std::int64_t NullDistribution::max_bin() const {
  const auto& h = hist();
  return h.min_bin + static_cast<std::int64_t>(h.probs.size()) - 1;
}

double NullDistribution::support_min() const {
  const auto& h = hist();
  return static_cast<double>(h.min_bin) * h.bin_width;
}

double NullDistribution::tail_at_bin(std::int64_t bin) const {
  const auto& h = hist();
  if (bin <= h.min_bin) return 1.0;
  if (bin > max_bin()) return 0.0;
  return survival_[static_cast<std::size_t>(bin - h.min_bin)];
}

bool operator==(const NullDistribution& a, const NullDistribution& b) {
  if (a.method_ != b.method_ || a.fingerprint_ != b.fingerprint_ || a.data_.index() != b.data_.index()) return false;
  if (a.is_empirical()) return a.empirical().samples == b.empirical().samples;
  const auto& x = a.hist();
  const auto& y = b.hist();
  return x.axis == y.axis && x.bin_width == y.bin_width && x.min_bin == y.min_bin && x.probs == y.probs &&
         x.exact == y.exact;
}

}  // namespace cbma
