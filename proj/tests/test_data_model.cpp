#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "cbma/error.hpp"
#include "cbma/foci_csv.hpp"
#include "cbma/geometry.hpp"
#include "cbma/io_util.hpp"
#include "cbma/volume.hpp"
#include "cbma/volume_io.hpp"
#include "support.hpp"

using namespace cbma;

namespace {

GridGeometry grid10() {
  GridGeometry g;
  g.dims = {10, 10, 10};
  g.voxel_size = {2, 2, 2};
  return g;
}

const char* kEmotionExcerpt =
    "Author,Year,Emotion,X,Y,Z,Participants\n"
    "Damasio,2000,fear,-10,-62,-17,23\n"
    ",,,-1,-66,-1,23\n"
    ",,,34,3,32,23\n"
    "Damasio,2000,anger,-2,-29,-12,23\n"
    "Philips,2004,disgust,4,-20,15,8\n"
    ",,,7,-17,9,8\n"
    ",,,4,-63,26,8\n"
    "Baker,1997,sad,36,20,-8,11\n"
    ",,,-44,32,-8,11\n"
    "Baker,1997,happy,-26,28,0,11\n"
    ",,,-34,52,8,11\n"
    "Williams,2005,anger,7,31,28,13\n"
    ",,,7,28,-7,13\n";

FociDataset parse(const std::string& text) {
  std::istringstream in(text);
  return parse_foci_csv(in);
}

}  // namespace

TEST_CASE("world_to_voxel rounds component-wise and rejects out-of-bounds points") {
  const auto g = grid10();
  CHECK(world_to_voxel({0, 0, 0}, g) == VoxelIndex{0, 0, 0});
  CHECK(world_to_voxel({1.1, 0, 0}, g) == VoxelIndex{1, 0, 0});
  CHECK_FALSE(world_to_voxel({-3, 0, 0}, g).has_value());
  CHECK_FALSE(world_to_voxel({0, 0, 19.5}, g).has_value());
  CHECK(world_to_voxel({0, 0, 18.9}, g) == VoxelIndex{0, 0, 9});
}

TEST_CASE("voxel_to_world then world_to_voxel is the identity on every in-bounds index") {
  GridGeometry g;
  g.dims = {7, 5, 4};
  g.voxel_size = {2.0, 3.0, 1.5};
  g.origin = {-90.0, -126.0, -72.0};
  std::size_t visited = 0;
  for (std::size_t n = 0; n < g.voxel_count(); ++n) {
    const auto v = g.unlinear(n);
    CHECK(g.linear(v) == n);
    CHECK(world_to_voxel(voxel_to_world(v, g), g) == v);
    ++visited;
  }
  CHECK(visited == 7u * 5u * 4u);
}

TEST_CASE("euclidean_distance") {
  CHECK(euclidean_distance({0, 0, 0}, {0, 0, 0}) == 0.0);
  CHECK(euclidean_distance({0, 0, 0}, {6, 8, 0}) == doctest::Approx(10.0).epsilon(1e-15));
  CHECK(euclidean_distance({1, 2, 3}, {1, 2, 7}) == 4.0);
}

TEST_CASE("grid validation") {
  GridGeometry g;
  g.dims = {0, 1, 1};
  CHECK_THROWS_AS(g.validate(), ValidationError);
  g.dims = {1, 1, 1};
  g.voxel_size = {1, -1, 1};
  CHECK_THROWS_AS(g.validate(), ValidationError);
  CHECK_THROWS_AS(RealGrid(grid10(), std::vector<double>(5)), ValidationError);
}

TEST_CASE("BrainMask counts and indexes in-mask voxels") {
  auto g = grid10();
  MaskGrid grid(g, 0);
  grid[3] = 1;
  grid[17] = 5;
  grid[999] = 1;
  BrainMask mask(grid);
  CHECK(mask.size() == 3);
  CHECK(mask.voxels()[0] == 3);
  CHECK(mask.voxels()[1] == 17);
  CHECK(mask.mask_index(17) == 1);
  CHECK(mask.mask_index(4) == -1);
  CHECK(mask.grid()[17] == 1);
  CHECK(mask.contains(WorldPoint{6, 0, 0}));
  CHECK_FALSE(mask.contains(WorldPoint{8, 0, 0}));

  CHECK_THROWS_AS(BrainMask(MaskGrid(g, 0)), ValidationError);
}

TEST_CASE("default test mask geometry") {
  const auto m2 = make_test_mask(2.0);
  CHECK(m2.geometry().dims == std::array<int, 3>{91, 109, 91});
  CHECK(m2.geometry().origin == std::array<double, 3>{-90, -126, -72});
  const auto m4 = make_test_mask(4.0);
  CHECK(m4.geometry().dims == std::array<int, 3>{46, 55, 46});
  // Ellipsoid volume 4/3 pi 70 85 75 mm^3, sampled at 8 mm^3 per voxel.
  const double expected = 4.0 / 3.0 * 3.141592653589793 * 70 * 85 * 75 / 8.0;
  CHECK(static_cast<double>(m2.size()) == doctest::Approx(expected).epsilon(0.01));
  CHECK(m2.contains(WorldPoint{0, -18, 18}));
  CHECK_FALSE(m2.contains(WorldPoint{0, -18, 18 + 76}));
  CHECK_FALSE(m2.contains(WorldPoint{-90, -126, -72}));
}

TEST_CASE("emotion table excerpt groups continuation rows into studies") {
  const auto ds = parse(kEmotionExcerpt);
  REQUIRE(ds.studies.size() == 6);
  const auto& fear = ds.studies[0];
  CHECK(fear.author == "Damasio");
  CHECK(fear.year == "2000");
  CHECK(fear.label == "fear");
  CHECK(fear.n_participants == 23);
  REQUIRE(fear.foci.size() == 3);
  CHECK(fear.foci[2].position == WorldPoint{34, 3, 32});
  CHECK(ds.studies[1].label == "anger");
  CHECK(ds.studies[1].foci.size() == 1);
  CHECK(ds.studies[2].n_participants == 8);
  CHECK(ds.total_foci() == 13);
  // Two studies from the same experiment stay separate.
  CHECK(ds.studies[0].id != ds.studies[1].id);
}

TEST_CASE("CSV errors") {
  SUBCASE("no studies") {
    try {
      parse("Author,Year,Emotion,X,Y,Z,Participants\n");
      FAIL("expected an error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("no studies") != std::string::npos);
    }
  }
  SUBCASE("malformed coordinate names the row") {
    try {
      parse("Author,Year,Emotion,X,Y,Z,Participants\nA,2000,fear,1,2,3,10\nA,2000,fear,abc,2,3,10\n");
      FAIL("expected an error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }
  SUBCASE("inconsistent participants") {
    CHECK_THROWS_AS(parse("Author,Year,Emotion,X,Y,Z,Participants\nA,2000,fear,1,2,3,10\n,,,4,5,6,11\n"),
                    ValidationError);
  }
  SUBCASE("missing column") {
    CHECK_THROWS_AS(parse("Author,Year,Emotion,X,Y,Participants\nA,2000,fear,1,2,10\n"), ParseError);
  }
  SUBCASE("zero T value") {
    CHECK_THROWS_AS(parse("Author,Year,Emotion,X,Y,Z,Participants,T\nA,2000,fear,1,2,3,10,0\n"), ValidationError);
  }
}

TEST_CASE("CSV extras: quoting, CRLF, T values and empty-foci studies") {
  const auto ds = parse(
      "\xEF\xBB\xBFstudyid,author,year,label,x,y,z,n,t\r\n"
      "s1,\"Smith, J\",1999,\"fear\",1.5,-2,3,20,-3.2\r\n"
      "s2,Jones,2001,anger,,,,12,\r\n");
  REQUIRE(ds.studies.size() == 2);
  CHECK(ds.studies[0].author == "Smith, J");
  REQUIRE(ds.studies[0].foci.size() == 1);
  CHECK(ds.studies[0].foci[0].t_value == -3.2);
  CHECK(ds.studies[1].foci.empty());
  CHECK(ds.studies[1].n_participants == 12);
}

TEST_CASE("column mapping sidecar") {
  testing::TempDir dir;
  {
    std::ofstream csv(dir / "data.csv");
    csv << "who,when,what,x_mm,y_mm,z_mm,subjects\nA,2000,fear,1,2,3,10\n";
    std::ofstream json(dir / "data.csv.columns.json");
    json << R"({"author": "who", "year": "when", "label": ["what"], "x": "x_mm", "y": "y_mm", "z": "z_mm",
               "participants": "subjects", "atlas": "Talairach"})";
  }
  const auto ds = load_foci_csv(dir / "data.csv");
  REQUIRE(ds.studies.size() == 1);
  CHECK(ds.studies[0].foci[0].position == WorldPoint{1, 2, 3});
  CHECK(ds.atlas == AtlasTag::Talairach);
}

TEST_CASE("CSV round trip reproduces the dataset") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> coord(-80.0, 80.0);
  std::uniform_int_distribution<int> count(0, 5);
  std::bernoulli_distribution has_t(0.5);
  for (int trial = 0; trial < 25; ++trial) {
    FociDataset ds;
    ds.atlas = trial % 2 ? AtlasTag::MNI : AtlasTag::Unspecified;
    const int n_studies = 1 + trial % 7;
    for (int s = 0; s < n_studies; ++s) {
      Study st;
      st.id = "study-" + std::to_string(s);
      st.author = "Author " + std::to_string(s);
      st.year = std::to_string(1990 + s);
      st.label = s % 2 ? "fear" : "anger, mixed";
      st.n_participants = 5 + s;
      const bool with_t = has_t(rng);
      for (int f = count(rng); f > 0; --f) {
        Focus focus{{coord(rng), coord(rng), coord(rng)}, std::nullopt};
        if (with_t) focus.t_value = coord(rng) + 100.0;
        st.foci.push_back(focus);
      }
      ds.studies.push_back(st);
    }
    testing::TempDir dir;
    save_foci_csv(dir / "d.csv", ds);
    const auto back = load_foci_csv(dir / "d.csv");
    CHECK(back == ds);
  }
}

TEST_CASE("dataset validation") {
  FociDataset ds;
  CHECK_THROWS_AS(ds.validate(), ValidationError);
  ds.studies.push_back({"a", "", "", "", 10, {}});
  ds.studies.push_back({"a", "", "", "", 10, {}});
  CHECK_THROWS_AS(ds.validate(), ValidationError);
  ds.studies[1].id = "b";
  ds.validate();
  ds.studies[1].n_participants = 0;
  CHECK_THROWS_AS(ds.validate(), ValidationError);
  ds.studies[1].n_participants = 3;
  ds.studies[1].foci.push_back({{std::nan(""), 0, 0}, std::nullopt});
  CHECK_THROWS_AS(ds.validate(), ValidationError);
}

TEST_CASE("VGRID1 and NIfTI-1 round trips") {
  testing::TempDir dir;
  GridGeometry g;
  g.dims = {4, 3, 2};
  g.voxel_size = {2.0, 2.5, 3.0};
  g.origin = {-90.0, -126.0, -72.0};
  RealGrid real(g);
  MaskGrid mask(g);
  for (std::size_t i = 0; i < real.size(); ++i) {
    real[i] = 0.1 * static_cast<double>(i) - 1.0 / 3.0;
    mask[i] = static_cast<std::uint8_t>(i % 2);
  }
  for (const char* name : {"r.vgrid", "r.nii"}) {
    write_volume(dir / name, AnyVolume{real});
    CHECK(std::get<RealGrid>(read_volume(dir / name)) == real);
  }
  for (const char* name : {"m.vgrid", "m.nii"}) {
    write_volume(dir / name, AnyVolume{mask});
    CHECK(std::get<MaskGrid>(read_volume(dir / name)) == mask);
  }
  // NIfTI header: sizeof_hdr 348, magic "n+1", vox_offset 352.
  const auto bytes = read_file(dir / "r.nii");
  REQUIRE(bytes.size() == 352 + real.size() * sizeof(double));
  std::int32_t hdr = 0;
  std::memcpy(&hdr, bytes.data(), 4);
  CHECK(hdr == 348);
  CHECK(bytes.substr(344, 3) == "n+1");

  const auto loaded = load_mask(dir / "m.nii");
  CHECK(loaded.size() == real.size() / 2);
  CHECK_THROWS_AS(read_volume(dir / "missing.vgrid"), IoError);
  write_atomic(dir / "junk.vgrid", "not a volume");
  CHECK_THROWS(read_volume(dir / "junk.vgrid"));
}
