#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "cbma/error.hpp"
#include "cbma/kernels.hpp"
#include "support.hpp"

using namespace cbma;

namespace {

Study study_with(std::vector<Focus> foci, int n = 10) {
  Study s;
  s.id = "s";
  s.n_participants = n;
  s.foci = std::move(foci);
  return s;
}

Focus at(double x, double y, double z, std::optional<double> t = std::nullopt) { return {{x, y, z}, t}; }

double value_at(const StudyMap& map, const WorldPoint& p) {
  const auto& g = map.mask->geometry();
  const auto v = world_to_voxel(p, g);
  REQUIRE(v.has_value());
  const auto m = map.mask->mask_index(g.linear(*v));
  REQUIRE(m >= 0);
  return map.at(static_cast<std::uint32_t>(m));
}

}  // namespace

TEST_CASE("MKDA sphere membership is focus-to-voxel-centre distance <= r") {
  const auto mask = testing::centred_cube(21);
  const auto map = mkda_study_map(study_with({at(0, 0, 0)}), 10.0, mask);
  CHECK(value_at(map, {6, 8, 0}) == 1.0);
  CHECK(value_at(map, {6, 8, 2}) == 0.0);
  CHECK(value_at(map, {0, 0, 10}) == 1.0);
  CHECK(value_at(map, {0, 0, 12}) == 0.0);
  for (double v : map.values) CHECK(v == 1.0);

  const auto empty = mkda_study_map(study_with({}), 10.0, mask);
  CHECK(empty.voxels.empty());
  CHECK(empty.max_value() == 0.0);
}

TEST_CASE("MKDA is invariant to the order and multiplicity of foci") {
  const auto mask = testing::centred_cube(21);
  const auto a = mkda_study_map(study_with({at(0, 0, 0), at(8, 2, -4)}), 6.0, mask);
  const auto b = mkda_study_map(study_with({at(8, 2, -4), at(0, 0, 0), at(0, 0, 0), at(8, 2, -4)}), 6.0, mask);
  CHECK(a.voxels == b.voxels);
  CHECK(a.values == b.values);
}

TEST_CASE("ale_sigma") {
  CHECK(ale_sigma(12, SigmaMode::FromSampleSize) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(ale_sigma(48, SigmaMode::FromSampleSize) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(ale_sigma(7, SigmaMode::Fixed, 4.0) == 4.0);
  CHECK(KernelSpec::ale_from_sample_size().width_for(48) == doctest::Approx(2.0));
}

TEST_CASE("ALE focus map is normalised over the mask and Gaussian in shape") {
  const auto mask = testing::test_mask(2.0);
  const Focus f = at(10, -30, 20);
  const auto map = ale_focus_map(f, 4.0, mask);
  double total = 0.0;
  for (double v : map.data()) total += v;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  const auto& g = mask->geometry();
  const auto c = *world_to_voxel(f.position, g);
  const double peak = map.at(c);
  const double off = map.at({c.i + 2, c.j, c.k});
  CHECK(off / peak == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  // Outside the mask the map is exactly zero.
  for (std::size_t n = 0; n < map.size(); ++n)
    if (mask->mask_index(n) < 0) REQUIRE(map[n] == 0.0);
}

TEST_CASE("ALE focus map at the centre of the ellipsoid is reflection symmetric") {
  const auto mask = testing::test_mask(2.0);
  const auto map = ale_focus_map(at(0, -18, 18), 4.0, mask);
  const VoxelIndex c{45, 54, 45};
  for (int dk = -8; dk <= 8; ++dk)
    for (int dj = -8; dj <= 8; ++dj)
      for (int di = -8; di <= 8; ++di) {
        const double v = map.at({c.i + di, c.j + dj, c.k + dk});
        CHECK(std::abs(v - map.at({c.i - di, c.j + dj, c.k + dk})) <= 1e-12);
        CHECK(std::abs(v - map.at({c.i + di, c.j - dj, c.k + dk})) <= 1e-12);
        CHECK(std::abs(v - map.at({c.i + di, c.j + dj, c.k - dk})) <= 1e-12);
      }
}

TEST_CASE("ALE focus mass underflow") {
  const auto mask = testing::centred_cube(11);
  try {
    ale_study_map(study_with({at(200, 0, 0)}), 4.0, mask);
    FAIL("expected an error");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("focus mass underflow") != std::string::npos);
  }
}

TEST_CASE("ALE study map takes the voxel-wise maximum over focus maps") {
  const auto mask = testing::test_mask(2.0);
  const Focus f = at(10, -30, 20);
  const auto single = ale_study_map(study_with({f}), 4.0, mask);
  const auto focus_map = ale_focus_map(f, 4.0, mask);
  CHECK(single.to_grid() == focus_map);

  const auto twice = ale_study_map(study_with({f, f}), 4.0, mask);
  CHECK(twice.to_grid() == focus_map);

  const Focus g = at(10, 10, 20);  // 40 mm away
  const auto pair = ale_study_map(study_with({f, g}), 4.0, mask);
  const auto gmap = ale_focus_map(g, 4.0, mask);
  const auto& geo = mask->geometry();
  CHECK(value_at(pair, f.position) == focus_map.at(*world_to_voxel(f.position, geo)));
  CHECK(value_at(pair, g.position) == gmap.at(*world_to_voxel(g.position, geo)));
  // Everywhere equal to the max of the two focus maps.
  const auto grid = pair.to_grid();
  for (std::size_t n = 0; n < grid.size(); ++n) REQUIRE(grid[n] == std::max(focus_map[n], gmap[n]));
}

TEST_CASE("SDM study map: signed unnormalised Gaussians clamped to [-1, 1]") {
  const auto mask = testing::centred_cube(21);
  const auto one = sdm_study_map(study_with({at(0, 0, 0, 3.0)}), 4.0, mask);
  CHECK(value_at(one, {0, 0, 0}) == 1.0);
  CHECK(value_at(one, {4, 0, 0}) == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));

  const auto two = sdm_study_map(study_with({at(0, 0, 0, 3.0), at(0, 0, 0, 2.0)}), 4.0, mask);
  CHECK(value_at(two, {0, 0, 0}) == 1.0);

  const auto cancel = sdm_study_map(study_with({at(0, 0, 0, 3.0), at(0, 0, 0, -2.0)}), 4.0, mask);
  CHECK(value_at(cancel, {0, 0, 0}) == 0.0);

  CHECK_THROWS_AS(sdm_study_map(study_with({at(0, 0, 0)}), 4.0, mask), ValidationError);
  const auto assumed = sdm_study_map(study_with({at(0, 0, 0)}), 4.0, mask, SignPolicy::AssumePositive);
  CHECK(value_at(assumed, {0, 0, 0}) == 1.0);
}

TEST_CASE("SDM: negating every T value negates the map exactly") {
  const auto mask = testing::centred_cube(21);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> coord(-18, 18);
  std::uniform_real_distribution<double> tval(-6, 6);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Focus> pos;
    std::vector<Focus> neg;
    for (int f = 0; f < 5; ++f) {
      double t = tval(rng);
      if (t == 0.0) t = 1.0;
      const Focus focus = at(coord(rng), coord(rng), coord(rng), t);
      pos.push_back(focus);
      neg.push_back(focus);
      neg.back().t_value = -t;
    }
    const auto a = sdm_study_map(study_with(pos), 6.0, mask);
    const auto b = sdm_study_map(study_with(neg), 6.0, mask);
    REQUIRE(a.voxels == b.voxels);
    for (std::size_t n = 0; n < a.values.size(); ++n) {
      REQUIRE(a.values[n] == -b.values[n]);
      REQUIRE(std::abs(a.values[n]) <= 1.0);
    }
  }
}

TEST_CASE("Shrinking the mask never increases MKDA or SDM values") {
  const auto big = testing::centred_cube(15);
  const auto& g = big->geometry();
  MaskGrid smaller(g, 0);
  for (std::size_t n = 0; n < smaller.size(); ++n) smaller[n] = (n % 3) != 0;
  const auto small = std::make_shared<const BrainMask>(smaller);
  const auto study = study_with({at(2, 2, 2, 2.0), at(-4, 6, 0, 1.0), at(6, -6, 4, 5.0)});
  for (int method = 0; method < 2; ++method) {
    const auto a = method ? sdm_study_map(study, 4.0, big) : mkda_study_map(study, 6.0, big);
    const auto b = method ? sdm_study_map(study, 4.0, small) : mkda_study_map(study, 6.0, small);
    const auto ga = a.to_grid();
    const auto gb = b.to_grid();
    for (std::size_t n = 0; n < ga.size(); ++n)
      if (small->mask_index(n) >= 0) REQUIRE(gb[n] <= ga[n]);
  }
}

TEST_CASE("Voxel-centred stencil reproduces the general kernel path bit for bit") {
  const auto mask = testing::test_mask(4.0);
  for (Method m : {Method::MKDA, Method::ALE, Method::SDM}) {
    FocusKernel k(m, m == Method::MKDA ? 10.0 : 4.0, mask);
    if (m == Method::ALE) k.prepare_centered_masses();
    for (std::uint32_t idx : {0u, 17u, 1000u, static_cast<std::uint32_t>(mask->size() - 1)}) {
      std::vector<std::pair<std::uint32_t, double>> general;
      std::vector<std::pair<std::uint32_t, double>> centred;
      const auto c = k.position(mask->world(idx));
      k.for_each(c, [&](std::uint32_t v, double raw) { general.emplace_back(v, raw); });
      k.for_each_centered(idx, [&](std::uint32_t v, double raw) { centred.emplace_back(v, raw); });
      REQUIRE(general == centred);
      if (m == Method::ALE) CHECK(k.mass(c) == k.centered_mass(idx));
    }
  }
}

TEST_CASE("Kernel specs parse and print") {
  CHECK(KernelSpec::parse("mkda:10") == KernelSpec::mkda(10));
  CHECK(KernelSpec::parse("ALE:4") == KernelSpec::ale(4));
  CHECK(KernelSpec::parse("ale:auto") == KernelSpec::ale_from_sample_size());
  CHECK(KernelSpec::parse("sdm:20").to_string() == "sdm:20");
  CHECK_THROWS_AS(KernelSpec::parse("sdm"), ConfigError);
  CHECK_THROWS_AS(KernelSpec::parse("mkda:-1"), ConfigError);
  CHECK_THROWS_AS(KernelSpec::parse("gauss:3"), ConfigError);
  CHECK_THROWS_AS(KernelSpec::parse("mkda:auto"), ConfigError);
}

TEST_CASE("build_study_maps does not depend on the number of workers") {
  const auto mask = testing::test_mask(4.0);
  FociDataset ds;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> x(-50, 50);
  for (int s = 0; s < 12; ++s) {
    Study st = study_with({}, 8 + s);
    st.id = "s" + std::to_string(s);
    for (int f = 0; f < 4; ++f) st.foci.push_back(at(x(rng), x(rng) - 18, x(rng) + 18, 2.0));
    ds.studies.push_back(st);
  }
  for (const auto& spec : {KernelSpec::mkda(10), KernelSpec::ale_from_sample_size(), KernelSpec::sdm(8)}) {
    const auto a = build_study_maps(ds, spec, mask, SignPolicy::Require, 1);
    const auto b = build_study_maps(ds, spec, mask, SignPolicy::Require, 4);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].voxels == b[i].voxels);
      CHECK(a[i].values == b[i].values);
    }
  }
}
