#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "cbma/error.hpp"
#include "cbma/kernels.hpp"
#include "cbma/statistics.hpp"
#include "support.hpp"

using namespace cbma;

namespace {

/// Study map from dense mask-ordered values (zeros dropped).
StudyMap dense_map(const MaskPtr& mask, Method method, const std::vector<double>& values, std::string id = "s") {
  StudyMap m;
  m.mask = mask;
  m.method = method;
  m.study_id = std::move(id);
  for (std::size_t v = 0; v < values.size(); ++v)
    if (values[v] != 0.0) {
      m.voxels.push_back(static_cast<std::uint32_t>(v));
      m.values.push_back(values[v]);
    }
  return m;
}

std::vector<StudyMap> random_maps(const MaskPtr& mask, Method method, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<StudyMap> maps;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> values(mask->size());
    for (auto& v : values) {
      const double r = u(rng);
      if (r < 0.5) continue;
      switch (method) {
        case Method::MKDA: v = 1.0; break;
        case Method::ALE: v = 0.3 * u(rng); break;
        case Method::SDM: v = 2.0 * u(rng) - 1.0; break;
      }
    }
    maps.push_back(dense_map(mask, method, values, "s" + std::to_string(i)));
  }
  return maps;
}

double at(const StatImage& img, std::size_t mask_index) { return img.grid[img.mask->voxels()[mask_index]]; }

}  // namespace

TEST_CASE("weights_from_participants") {
  FociDataset ds;
  for (int n : {23, 8, 11}) ds.studies.push_back({"s" + std::to_string(n), "", "", "", n, {}});
  const auto w0 = weights_from_participants(ds, 0.0);
  CHECK(w0.values == std::vector<double>{1, 1, 1});
  CHECK(w0.total == 3.0);
  const auto w1 = weights_from_participants(ds, 1.0);
  CHECK(w1.values == std::vector<double>{23, 8, 11});
  CHECK(w1.total == 42.0);
  FociDataset one;
  one.studies.push_back({"a", "", "", "", 16, {}});
  CHECK(weights_from_participants(one, 0.5).values[0] == 4.0);
  CHECK_THROWS(weights_from_participants(one, -1.0));
  CHECK_THROWS_AS(StudyWeights::from_values({1.0, 0.0}), ValidationError);
}

TEST_CASE("MKDA statistic is the weighted proportion of activating studies") {
  const auto mask = testing::box_mask(2, 1, 1);
  const auto a = dense_map(mask, Method::MKDA, {1, 1});
  const auto b = dense_map(mask, Method::MKDA, {1, 0});
  const std::vector<StudyMap> maps{a, b};
  const auto all = mkda_statistic(maps, StudyWeights::from_values({5, 7}));
  CHECK(at(all, 0) == 1.0);
  const auto m = mkda_statistic(std::vector<StudyMap>{b, dense_map(mask, Method::MKDA, {0, 0})},
                                StudyWeights::from_values({2, 1}));
  CHECK(at(m, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(at(m, 1) == 0.0);
}

TEST_CASE("ALE statistic is the probabilistic union") {
  const auto mask = testing::box_mask(2, 1, 1);
  const std::vector<StudyMap> maps{dense_map(mask, Method::ALE, {0.1, 0}), dense_map(mask, Method::ALE, {0.2, 0})};
  const auto l = ale_statistic(maps);
  CHECK(at(l, 0) == doctest::Approx(0.28).epsilon(1e-15));
  CHECK(at(l, 1) == 0.0);
}

TEST_CASE("SDM statistic is the weighted mean and cancels contradicting studies") {
  const auto mask = testing::box_mask(3, 1, 1);
  const auto s1 = dense_map(mask, Method::SDM, {1, -0.5, 0.25});
  const auto single = sdm_statistic(std::vector<StudyMap>{s1}, StudyWeights::from_values({3}));
  for (std::size_t v = 0; v < 3; ++v) CHECK(at(single, v) == s1.at(static_cast<std::uint32_t>(v)));
  const auto s2 = dense_map(mask, Method::SDM, {-1, 0, 0});
  const auto both = sdm_statistic(std::vector<StudyMap>{s1, s2}, StudyWeights::uniform(2));
  CHECK(at(both, 0) == 0.0);
}

TEST_CASE("Weighted statistics are invariant to common rescaling of the weights") {
  const auto mask = testing::box_mask(6, 5, 4);
  for (Method method : {Method::MKDA, Method::SDM}) {
    const auto maps = random_maps(mask, method, 7, 42);
    std::vector<double> w{3, 1, 4, 1, 5, 9, 2};
    const auto base = compute_statistic(method, maps, StudyWeights::from_values(w));
    std::vector<double> w4 = w;
    std::vector<double> w3 = w;
    for (auto& x : w4) x *= 4.0;
    for (auto& x : w3) x *= 3.0;
    const auto by4 = compute_statistic(method, maps, StudyWeights::from_values(w4));
    const auto by3 = compute_statistic(method, maps, StudyWeights::from_values(w3));
    CHECK(by4.grid == base.grid);
    CHECK(by3.argmax() == base.argmax());
    for (std::size_t n = 0; n < base.grid.size(); ++n) REQUIRE(std::abs(by3.grid[n] - base.grid[n]) <= 1e-15);
  }
}

TEST_CASE("ALE is permutation invariant and monotone") {
  const auto mask = testing::box_mask(6, 5, 4);
  auto maps = random_maps(mask, Method::ALE, 9, 7);
  const auto base = ale_statistic(maps);
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(maps.begin(), maps.end(), rng);
    const auto shuffled = ale_statistic(maps);
    for (std::size_t n = 0; n < base.grid.size(); ++n) REQUIRE(std::abs(shuffled.grid[n] - base.grid[n]) <= 1e-15);
  }
  auto raised = maps;
  for (auto& v : raised[0].values) v = std::min(1.0, v + 0.1);
  const auto up = ale_statistic(raised);
  for (std::size_t n = 0; n < base.grid.size(); ++n) REQUIRE(up.grid[n] >= ale_statistic(maps).grid[n]);
}

TEST_CASE("Adding an all-zero study") {
  const auto mask = testing::box_mask(6, 5, 4);
  for (Method method : {Method::MKDA, Method::ALE, Method::SDM}) {
    auto maps = random_maps(mask, method, 5, 99);
    std::vector<double> w{2, 3, 5, 7, 11};
    const auto before = compute_statistic(method, maps, StudyWeights::from_values(w));
    maps.push_back(dense_map(mask, method, std::vector<double>(mask->size(), 0.0), "zero"));
    w.push_back(6);
    const auto after = compute_statistic(method, maps, StudyWeights::from_values(w));
    for (std::size_t n = 0; n < before.grid.size(); ++n) {
      if (method == Method::ALE)
        REQUIRE(after.grid[n] == before.grid[n]);
      else
        REQUIRE(after.grid[n] == doctest::Approx(before.grid[n] * 28.0 / 34.0).epsilon(1e-14));
    }
  }
}

TEST_CASE("Statistic images: ranges, zeros outside the mask and input checks") {
  const auto mask = testing::box_mask(5, 5, 5, 2.0, {0, 0, 0}, true);
  for (Method method : {Method::MKDA, Method::ALE, Method::SDM}) {
    const auto maps = random_maps(mask, method, 6, 5);
    const auto img = compute_statistic(method, maps, StudyWeights::uniform(6));
    CHECK(img.grid[0] == 0.0);
    for (double v : img.grid.data()) {
      REQUIRE(v >= (method == Method::SDM ? -1.0 : 0.0));
      REQUIRE(v <= 1.0);
    }
    if (method != Method::ALE)
      CHECK_THROWS_AS(compute_statistic(method, maps, StudyWeights::uniform(5)), ValidationError);
  }
  const auto other = testing::box_mask(5, 5, 5);
  auto mixed = random_maps(mask, Method::MKDA, 2, 1);
  mixed.push_back(random_maps(other, Method::MKDA, 1, 2).front());
  CHECK_THROWS_AS(mkda_statistic(mixed, StudyWeights::uniform(3)), ValidationError);
  CHECK_THROWS_AS(ale_statistic(random_maps(mask, Method::MKDA, 2, 1)), ValidationError);
  CHECK_THROWS_AS(ale_statistic(std::vector<StudyMap>{}), ValidationError);
}

TEST_CASE("Accumulator values depend only on each voxel's own study values") {
  const auto mask = testing::box_mask(4, 4, 4);
  const auto maps = random_maps(mask, Method::SDM, 4, 17);
  const auto img = sdm_statistic(maps, StudyWeights::from_values({1, 2, 3, 4}));
  for (std::size_t v = 0; v < mask->size(); ++v) {
    double num = 0.0;
    for (std::size_t i = 0; i < maps.size(); ++i) num += (i + 1.0) * maps[i].at(static_cast<std::uint32_t>(v));
    REQUIRE(at(img, v) == doctest::Approx(num / 10.0).epsilon(1e-14));
  }
}

TEST_CASE("summary_json") {
  const auto mask = testing::box_mask(3, 3, 3, 2.0, {-2, -2, -2});
  const auto map = dense_map(mask, Method::MKDA, [&] {
    std::vector<double> v(mask->size(), 0.0);
    v[13] = 1.0;
    return v;
  }());
  const auto img = mkda_statistic(std::vector<StudyMap>{map}, StudyWeights::uniform(1));
  const auto j = summary_json(img);
  CHECK(j["max"] == 1.0);
  CHECK(j["argmax_world"] == nlohmann::json::array({0.0, 0.0, 0.0}));
  CHECK(j["mask_voxels"] == 27);
  CHECK(j["mask_volume_mm3"] == 216.0);
  CHECK(j["method"] == "MKDA");
}
