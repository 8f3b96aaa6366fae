#include "cbma/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "cbma/error.hpp"
#include "cbma/hashing.hpp"

namespace cbma {

void SimConfig::validate() const {
  if (!mask) throw ValidationError("simulation needs a mask");
  if (centers.empty()) throw ValidationError("simulation needs at least one population centre");
  double total = 0.0;
  for (double p : report_dist) {
    if (!(p >= 0.0)) throw ValidationError("report distribution probabilities must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("report distribution must sum to one");
  if (!(scatter_sd_mm >= 0.0) || !std::isfinite(scatter_sd_mm))
    throw ValidationError("scatter SD must be a nonnegative finite length");
  if (n_studies < 1) throw ValidationError("number of studies must be at least 1");
  if (!(valid_fraction >= 0.0 && valid_fraction <= 1.0)) throw ValidationError("valid fraction must lie in [0, 1]");
  if (n_participants < 1) throw ValidationError("participants per study must be at least 1");
  for (const auto& c : centers)
    if (!mask->contains(c)) throw ValidationError("population centre lies outside the mask");
}

int SimConfig::n_valid() const {
  const double ip = n_studies * valid_fraction;
  const double rounded = std::round(ip);
  if (std::abs(ip - rounded) > 1e-9)
    warn("I*p = " + std::to_string(ip) + " is not an integer; using " + std::to_string(static_cast<int>(rounded)) +
         " valid studies");
  return static_cast<int>(rounded);
}

std::vector<WorldPoint> default_centers() {
  std::vector<WorldPoint> out;
  for (double z : {-12.0, 48.0})
    for (double y : {-54.0, 18.0})
      for (double x : {-30.0, 30.0}) out.push_back({x, y, z});
  return out;
}

SimConfig default_sim_config(MaskPtr mask) {
  SimConfig cfg;
  cfg.centers = default_centers();
  cfg.mask = std::move(mask);
  return cfg;
}

int draw_report_count(const SimConfig& cfg, Rng& rng) {
  std::discrete_distribution<int> dist(cfg.report_dist.begin(), cfg.report_dist.end());
  return dist(rng);
}

namespace {

Study blank_study(const SimConfig& cfg, const char* label) {
  Study s;
  s.label = label;
  s.n_participants = cfg.n_participants;
  return s;
}

}  // namespace

Study gen_valid_study(const SimConfig& cfg, Rng& rng) {
  auto study = blank_study(cfg, "valid");
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const auto& c : cfg.centers) {
    const int count = draw_report_count(cfg, rng);
    for (int f = 0; f < count; ++f) {
      int tries = 0;
      while (true) {
        const WorldPoint p{c.x + cfg.scatter_sd_mm * normal(rng), c.y + cfg.scatter_sd_mm * normal(rng),
                           c.z + cfg.scatter_sd_mm * normal(rng)};
        if (cfg.mask->contains(p)) {
          study.foci.push_back({p, std::nullopt});
          break;
        }
        if (++tries >= 10000) throw ValidationError("center too close to mask boundary");
      }
    }
  }
  return study;
}

Study gen_noise_study(const SimConfig& cfg, Rng& rng) {
  auto study = blank_study(cfg, "noise");
  int count = 0;
  for (std::size_t c = 0; c < cfg.centers.size(); ++c) count += draw_report_count(cfg, rng);
  std::uniform_int_distribution<std::size_t> uniform(0, cfg.mask->size() - 1);
  for (int f = 0; f < count; ++f) study.foci.push_back({cfg.mask->world(uniform(rng)), std::nullopt});
  return study;
}

FociDataset gen_dataset(const SimConfig& cfg) {
  cfg.validate();
  const int n_valid = cfg.n_valid();
  FociDataset ds;
  ds.atlas = AtlasTag::MNI;
  for (int s = 0; s < cfg.n_studies; ++s) {
    auto rng = make_stream(cfg.seed, {static_cast<std::uint64_t>(s)});
    auto study = s < n_valid ? gen_valid_study(cfg, rng) : gen_noise_study(cfg, rng);
    study.id = "sim" + std::to_string(s + 1);
    study.author = "sim";
    study.year = std::to_string(s + 1);
    ds.studies.push_back(std::move(study));
  }
  return ds;
}

nlohmann::json truth_json(const SimConfig& cfg, const FociDataset& dataset) {
  nlohmann::json j;
  auto centers = nlohmann::json::array();
  for (const auto& c : cfg.centers) centers.push_back({c.x, c.y, c.z});
  j["centers"] = centers;
  auto studies = nlohmann::json::array();
  for (const auto& s : dataset.studies) studies.push_back({{"id", s.id}, {"class", s.label}, {"foci", s.foci.size()}});
  j["studies"] = studies;
  j["seed"] = cfg.seed;
  j["config"] = {{"n_studies", cfg.n_studies},
                 {"valid_fraction", cfg.valid_fraction},
                 {"n_valid", std::count_if(dataset.studies.begin(), dataset.studies.end(),
                                           [](const Study& s) { return s.label == "valid"; })},
                 {"scatter_sd_mm", cfg.scatter_sd_mm},
                 {"report_dist", cfg.report_dist},
                 {"n_participants", cfg.n_participants},
                 {"mask_hash", to_hex(cfg.mask->hash())},
                 {"mask_voxels", cfg.mask->size()}};
  return j;
}

}  // namespace cbma
