#include "cbma/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cbma/error.hpp"
#include "cbma/io_util.hpp"

namespace cbma {

namespace {

// Neumaier summation; the visiting order is fixed by FocusKernel.
struct CompensatedSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      carry += (sum - t) + x;
    else
      carry += (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + carry; }
};

void check_mask(const MaskPtr& mask) {
  if (!mask) throw ValidationError("kernel maps require a mask");
}

}  // namespace

void KernelSpec::validate() const {
  if (method == Method::ALE && sigma_mode == SigmaMode::FromSampleSize) return;
  if (!(size_mm > 0.0) || !std::isfinite(size_mm)) {
    throw ConfigError(method == Method::MKDA ? "MKDA radius must be positive" : "kernel sigma must be positive");
  }
}

double KernelSpec::width_for(int n_participants) const {
  if (method == Method::ALE) return ale_sigma(n_participants, sigma_mode, size_mm);
  return size_mm;
}

std::string KernelSpec::to_string() const {
  std::string name(cbma::to_string(method));
  for (auto& c : name) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (method == Method::ALE && sigma_mode == SigmaMode::FromSampleSize) return name + ":auto";
  return name + ":" + format_double(size_mm);
}

KernelSpec KernelSpec::parse(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw ConfigError("kernel must look like 'ale:4', 'ale:auto', 'mkda:10' or 'sdm:20'");
  KernelSpec spec;
  spec.method = method_from_string(text.substr(0, colon));
  const std::string arg(text.substr(colon + 1));
  if (arg == "auto") {
    if (spec.method != Method::ALE) throw ConfigError("only ALE supports a sample-size-dependent kernel");
    spec.sigma_mode = SigmaMode::FromSampleSize;
    spec.size_mm = 0.0;
    return spec;
  }
  std::istringstream in(arg);
  double v = 0.0;
  if (!(in >> v) || !in.eof()) throw ConfigError("kernel width '" + arg + "' is not a number");
  spec.size_mm = v;
  spec.validate();
  return spec;
}

double ale_sigma(int n_participants, SigmaMode mode, double fixed_sigma_mm) {
  if (n_participants < 1) throw ValidationError("participant count must be at least 1");
  if (mode == SigmaMode::Fixed) return fixed_sigma_mm;
  return 4.0 * std::sqrt(12.0 / n_participants);
}

FocusKernel::FocusKernel(Method method, double width_mm, MaskPtr mask)
    : method_(method), width_(width_mm), mask_(std::move(mask)) {
  check_mask(mask_);
  if (!(width_mm > 0.0) || !std::isfinite(width_mm)) throw ConfigError("kernel width must be positive");
  const double radius = method == Method::MKDA ? width_mm : kGaussianTruncation * width_mm;
  cutoff2_ = radius * radius;
  inv_two_sigma2_ = method == Method::MKDA ? 0.0 : 1.0 / (2.0 * width_mm * width_mm);
  const auto& vs = mask_->geometry().voxel_size;
  for (int a = 0; a < 3; ++a) reach_[a] = radius / vs[a];

  int r[3];
  for (int a = 0; a < 3; ++a) r[a] = static_cast<int>(std::ceil(reach_[a])) + 1;
  for (int dk = -r[2]; dk <= r[2]; ++dk) {
    const double dz = static_cast<double>(dk) * vs[2];
    for (int dj = -r[1]; dj <= r[1]; ++dj) {
      const double dy = static_cast<double>(dj) * vs[1];
      for (int di = -r[0]; di <= r[0]; ++di) {
        const double dx = static_cast<double>(di) * vs[0];
        const double d2 = dx * dx + dy * dy + dz * dz;
        if (d2 > cutoff2_) continue;
        stencil_.push_back({di, dj, dk, raw_value(d2)});
      }
    }
  }
}

std::array<double, 3> FocusKernel::position(const WorldPoint& p) const {
  auto c = continuous_index(p, mask_->geometry());
  for (auto& v : c) {
    const double r = std::round(v);
    if (std::abs(v - r) < 1e-9) v = r;
  }
  return c;
}

double FocusKernel::mass(const std::array<double, 3>& c) const {
  CompensatedSum s;
  for_each(c, [&](std::uint32_t, double raw) { s.add(raw); });
  return s.value();
}

double FocusKernel::centered_mass(std::uint32_t mask_index) const {
  if (!centered_mass_.empty()) return centered_mass_[mask_index];
  CompensatedSum s;
  for_each_centered(mask_index, [&](std::uint32_t, double raw) { s.add(raw); });
  return s.value();
}

void FocusKernel::prepare_centered_masses(int jobs) {
  if (!centered_mass_.empty()) return;
  std::vector<double> table(mask_->size());
  const auto n = static_cast<std::int64_t>(table.size());
#pragma omp parallel for schedule(static) num_threads(jobs > 0 ? jobs : 1)
  for (std::int64_t m = 0; m < n; ++m) {
    CompensatedSum s;
    for_each_centered(static_cast<std::uint32_t>(m), [&](std::uint32_t, double raw) { s.add(raw); });
    table[static_cast<std::size_t>(m)] = s.value();
  }
  centered_mass_ = std::move(table);
}

RealGrid StudyMap::to_grid() const {
  check_mask(mask);
  RealGrid grid(mask->geometry(), 0.0);
  const auto vox = mask->voxels();
  for (std::size_t n = 0; n < voxels.size(); ++n) grid[vox[voxels[n]]] = values[n];
  return grid;
}

double StudyMap::at(std::uint32_t mask_index) const {
  const auto it = std::lower_bound(voxels.begin(), voxels.end(), mask_index);
  if (it == voxels.end() || *it != mask_index) return 0.0;
  return values[static_cast<std::size_t>(it - voxels.begin())];
}

double StudyMap::max_value() const {
  double best = 0.0;
  for (double v : values) best = std::max(best, v);
  return best;
}

StudyScratch::StudyScratch(std::size_t n_mask) { resize(n_mask); }

void StudyScratch::resize(std::size_t n_mask) {
  buffer_.assign(n_mask, 0.0);
  touched_flag_.assign(n_mask, 0);
  touched_.clear();
}

void StudyScratch::finish(Method method, std::vector<std::uint32_t>& voxels, std::vector<double>& values, bool sorted) {
  voxels.clear();
  values.clear();
  if (sorted) std::sort(touched_.begin(), touched_.end());
  for (auto m : touched_) {
    double v = buffer_[m];
    if (method == Method::SDM) v = std::clamp(v, -1.0, 1.0);
    if (v != 0.0) {
      voxels.push_back(m);
      values.push_back(v);
    }
    touched_flag_[m] = 0;
    buffer_[m] = 0.0;
  }
  touched_.clear();
}

RealGrid ale_focus_map(const Focus& focus, double sigma_mm, const MaskPtr& mask) {
  check_mask(mask);
  FocusKernel kernel(Method::ALE, sigma_mm, mask);
  const auto c = kernel.position(focus.position);
  const double total = kernel.mass(c);
  if (!(total > 0.0)) throw NumericError("focus mass underflow: no in-mask voxel within the kernel support");
  RealGrid grid(mask->geometry(), 0.0);
  const auto vox = mask->voxels();
  kernel.for_each(c, [&](std::uint32_t m, double raw) { grid[vox[m]] = raw / total; });
  return grid;
}

namespace {

StudyMap assemble(const Study& study, const FocusKernel& kernel, const MaskPtr& mask, SignPolicy policy) {
  StudyMap out;
  out.mask = mask;
  out.study_id = study.id;
  out.method = kernel.method();
  StudyScratch scratch(mask->size());
  for (const auto& focus : study.foci) {
    const auto c = kernel.position(focus.position);
    switch (kernel.method()) {
      case Method::MKDA:
        kernel.for_each(c, [&](std::uint32_t m, double) { scratch.add(Method::MKDA, m, 1.0); });
        break;
      case Method::ALE: {
        const double total = kernel.mass(c);
        if (!(total > 0.0))
          throw NumericError("focus mass underflow in study '" + study.id + "': no in-mask voxel within 5 sigma");
        kernel.for_each(c, [&](std::uint32_t m, double raw) { scratch.add(Method::ALE, m, raw / total); });
        break;
      }
      case Method::SDM: {
        double sign = 1.0;
        if (focus.t_value) {
          sign = *focus.t_value < 0.0 ? -1.0 : 1.0;
        } else if (policy == SignPolicy::Require) {
          throw ValidationError("study '" + study.id + "' has a focus without a T value (use --assume-positive)");
        }
        kernel.for_each(c, [&](std::uint32_t m, double raw) { scratch.add(Method::SDM, m, sign * raw); });
        break;
      }
    }
  }
  scratch.finish(kernel.method(), out.voxels, out.values, true);
  return out;
}

}  // namespace

StudyMap mkda_study_map(const Study& study, double radius_mm, const MaskPtr& mask) {
  check_mask(mask);
  return assemble(study, FocusKernel(Method::MKDA, radius_mm, mask), mask, SignPolicy::Require);
}

StudyMap ale_study_map(const Study& study, double sigma_mm, const MaskPtr& mask) {
  check_mask(mask);
  return assemble(study, FocusKernel(Method::ALE, sigma_mm, mask), mask, SignPolicy::Require);
}

StudyMap sdm_study_map(const Study& study, double sigma_mm, const MaskPtr& mask, SignPolicy policy) {
  check_mask(mask);
  return assemble(study, FocusKernel(Method::SDM, sigma_mm, mask), mask, policy);
}

std::vector<StudyMap> build_study_maps(const FociDataset& dataset, const KernelSpec& kernel, const MaskPtr& mask,
                                       SignPolicy policy, int jobs) {
  check_mask(mask);
  kernel.validate();
  const auto n = static_cast<std::int64_t>(dataset.studies.size());
  std::vector<StudyMap> maps(dataset.studies.size());
  // One kernel per distinct width; FromSampleSize widths vary with n.
  std::vector<double> widths(maps.size());
  for (std::size_t i = 0; i < maps.size(); ++i) widths[i] = kernel.width_for(dataset.studies[i].n_participants);
  std::vector<double> distinct = widths;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<FocusKernel> kernels;
  kernels.reserve(distinct.size());
  for (double w : distinct) kernels.emplace_back(kernel.method, w, mask);

  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) num_threads(jobs > 0 ? jobs : 1)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      const auto idx = static_cast<std::size_t>(i);
      const auto pos = std::lower_bound(distinct.begin(), distinct.end(), widths[idx]) - distinct.begin();
      maps[idx] = assemble(dataset.studies[idx], kernels[static_cast<std::size_t>(pos)], mask, policy);
    } catch (...) {
#pragma omp critical(cbma_study_maps)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return maps;
}

}  // namespace cbma
