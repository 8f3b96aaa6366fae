#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "cbma/volume.hpp"

namespace cbma {

/// Axis on which a binned null is accumulated. The statistic is a sum of
/// independent per-study contributions on this axis:
///   Linear:         value itself (weighted means: MKDA, SDM)
///   ComplementLog:  u = -log(1 - value)  (ALE: 1 - prod(1 - L_i) <-> sum of u_i)
enum class NullAxis { Linear, ComplementLog };

/// Sorted sample of a Monte Carlo maximum (statistic or cluster size).
struct EmpiricalMax {
  std::vector<double> samples;
};

/// Probability histogram over integer bins `min_bin .. min_bin + probs.size() - 1`
/// of the transformed statistic, bin b covering values rounding to b * bin_width.
struct BinnedHistogram {
  NullAxis axis = NullAxis::Linear;
  double bin_width = 1e-5;
  std::int64_t min_bin = 0;
  std::vector<double> probs;
  /// true for exact enumeration, false for a pooled Monte Carlo estimate.
  bool exact = true;
};

class NullDistribution {
public:
  NullDistribution() = default;

  static NullDistribution empirical_max(Method method, std::vector<double> samples, std::string fingerprint = {});
  /// Clamps tiny negative probabilities, renormalises (unless told the input
  /// is already normalised, as for cached nulls) and checks the sum.
  static NullDistribution histogram(Method method, BinnedHistogram hist, std::string fingerprint = {},
                                    bool renormalize = true);

  bool is_empirical() const { return std::holds_alternative<EmpiricalMax>(data_); }
  bool is_histogram() const { return std::holds_alternative<BinnedHistogram>(data_); }
  const EmpiricalMax& empirical() const;
  const BinnedHistogram& hist() const;

  Method method() const { return method_; }
  const std::string& fingerprint() const { return fingerprint_; }
  void set_fingerprint(std::string fp) { fingerprint_ = std::move(fp); }

  // Empirical maximum ------------------------------------------------------
  std::size_t n_iter() const { return empirical().samples.size(); }
  /// #{samples >= value}.
  std::size_t count_at_least(double value) const;
  /// Inverse-ECDF quantile: the ceil(q * n)-th smallest sample.
  double quantile(double q) const;

  // Histogram --------------------------------------------------------------
  /// Bin of a statistic value on this null's axis (round to nearest).
  std::int64_t bin_of(double value) const;
  std::int64_t max_bin() const;
  /// Lower end of the support on the transformed axis.
  double support_min() const;
  /// P(B >= bin), the right tail including `bin` itself.
  double tail_at_bin(std::int64_t bin) const;
  double tail(double value) const { return tail_at_bin(bin_of(value)); }
  /// P(B <= bin).
  double cdf_at_bin(std::int64_t bin) const { return 1.0 - tail_at_bin(bin + 1); }

  friend bool operator==(const NullDistribution& a, const NullDistribution& b);

private:
  Method method_ = Method::ALE;
  std::string fingerprint_;
  std::variant<EmpiricalMax, BinnedHistogram> data_;
  std::vector<double> survival_;
};

/// Transforms a statistic value onto a null axis (ComplementLog caps at 40).
double to_axis(NullAxis axis, double value);

}  // namespace cbma
