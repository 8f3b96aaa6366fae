#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "cbma/foci.hpp"
#include "cbma/random.hpp"
#include "cbma/volume.hpp"

namespace cbma {

/// Generator for synthetic datasets mixing valid studies (foci scattered
/// around fixed population centres) with noise studies (uniform foci).
struct SimConfig {
  std::vector<WorldPoint> centers;
  /// P(a centre contributes 0, 1, 2, 3 foci to a valid study).
  std::array<double, 4> report_dist{0.35, 0.50, 0.10, 0.05};
  double scatter_sd_mm = 4.0;
  MaskPtr mask;
  int n_studies = 20;
  double valid_fraction = 0.0;
  int n_participants = 12;
  std::uint64_t seed = 0;

  /// Throws ValidationError on a bad distribution, empty centre list,
  /// out-of-mask centres or non-positive sizes.
  void validate() const;
  /// Number of valid studies, round(I * p).
  int n_valid() const;
};

/// Eight centres on the corners of a box inscribed in the default test mask:
/// x = +-30, y = -18 +- 36, z = 18 +- 30 (all pairwise distances >= 60 mm).
std::vector<WorldPoint> default_centers();

SimConfig default_sim_config(MaskPtr mask);

/// Draws from `report_dist`.
int draw_report_count(const SimConfig& cfg, Rng& rng);

Study gen_valid_study(const SimConfig& cfg, Rng& rng);
Study gen_noise_study(const SimConfig& cfg, Rng& rng);

/// round(I p) valid studies followed by noise studies; study s draws from
/// stream (seed, s). Studies are labelled "valid" or "noise".
FociDataset gen_dataset(const SimConfig& cfg);

/// Centres, per-study class and configuration.
nlohmann::json truth_json(const SimConfig& cfg, const FociDataset& dataset);

}  // namespace cbma
