#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cbma/cli.hpp"
#include "cbma/io_util.hpp"
#include "cbma/report.hpp"
#include "cbma/volume_io.hpp"
#include "support.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cbma_run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  Run r;
  r.code = cbma::run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) { return cbma::read_file(p); }

nlohmann::json json_file(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

void write(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

/// Error record printed on standard error.
nlohmann::json error_of(const Run& r) {
  const auto pos = r.err.find("error: ");
  REQUIRE(pos != std::string::npos);
  const auto end = r.err.find('\n', pos);
  return nlohmann::json::parse(r.err.substr(pos + 7, end - pos - 7));
}

/// Simulated 12-study dataset on the 4 mm test mask.
fs::path simulated(const testing::TempDir& dir, const std::string& name = "sim") {
  const auto r = cbma_run({"simulate", "--mask", "test:4", "--studies", "12", "--valid-fraction", "0.5", "--seed", "3",
                           "--out", (dir / name).string()});
  REQUIRE(r.code == 0);
  return dir / name / "foci.csv";
}

}  // namespace

TEST_CASE("presets, version and help") {
  const auto r = cbma_run({"presets"});
  CHECK(r.code == 0);
  for (const char* name : {"paper-mkda", "paper-ale", "paper-sdm", "paper-sim", "appendix-a-mkda", "appendix-a-sdm"})
    CHECK(r.out.find(name) != std::string::npos);
  const auto v = cbma_run({"--version"});
  CHECK(v.code == 0);
  CHECK(v.out.find("0.1.0") != std::string::npos);
  const auto h = cbma_run({"analyze", "--help"});
  CHECK(h.code == 0);
  CHECK(h.out.find("--kernel") != std::string::npos);
}

TEST_CASE("simulate is reproducible for a fixed seed") {
  testing::TempDir dir;
  for (const char* name : {"a", "b"}) {
    const auto r = cbma_run({"simulate", "--mask", "test:4", "--studies", "30", "--valid-fraction", "0.5", "--seed",
                             "7", "--out", (dir / name).string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("foci.csv") != std::string::npos);
  }
  CHECK(slurp(dir / "a" / "foci.csv") == slurp(dir / "b" / "foci.csv"));
  CHECK(slurp(dir / "a" / "truth.json") == slurp(dir / "b" / "truth.json"));
  const auto prov = json_file(dir / "a" / "provenance.json");
  CHECK(prov["seed"] == 7);
  CHECK(prov["seed_generated"] == false);

  const auto r = cbma_run({"simulate", "--mask", "test:4", "--out", (dir / "c").string()});
  REQUIRE(r.code == 0);
  const auto generated = json_file(dir / "c" / "provenance.json");
  CHECK(generated["seed_generated"] == true);
  const auto rerun = generated["rerun"].get<std::vector<std::string>>();
  REQUIRE(rerun.size() >= 2);
  CHECK(rerun[rerun.size() - 2] == "--seed");
  // Re-running with the recorded seed reproduces the dataset.
  std::vector<std::string> again(rerun.begin() + 1, rerun.end());
  for (std::size_t k = 0; k + 1 < again.size(); ++k)
    if (again[k] == "--out") again[k + 1] = (dir / "d").string();
  REQUIRE(cbma_run(again).code == 0);
  CHECK(slurp(dir / "c" / "foci.csv") == slurp(dir / "d" / "foci.csv"));
}

TEST_CASE("analyze writes maps, tables and provenance") {
  testing::TempDir dir;
  const auto foci = simulated(dir);
  const auto out = dir / "ale";
  const auto r = cbma_run({"analyze", "--dataset", foci.string(), "--mask", "test:4", "--kernel", "ale:4", "--inference",
                           "fdr", "--alpha", "0.05", "--format", "both", "--export-maps", "--seed", "1", "--out",
                           out.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  for (const char* f : {"stat.vgrid", "stat.nii", "p_uncorrected.vgrid", "p_corrected.nii", "significant.vgrid",
                        "clusters.csv", "clusters.json", "summary.json", "provenance.json"})
    CHECK_MESSAGE(fs::exists(out / f), f);
  CHECK(fs::exists(out / "maps"));
  const auto summary = json_file(out / "summary.json");
  CHECK(summary.dump().find("FDR(0.05)") != std::string::npos);
  const auto prov = json_file(out / "provenance.json");
  CHECK(prov["command"] == "analyze");
  CHECK(prov["options"]["kernel"] == "ale:4");
  CHECK(prov["versions"]["cbma"] == "0.1.0");

  SUBCASE("convert round trip") {
    const auto nii = dir / "stat.nii";
    const auto back = dir / "stat.vgrid";
    REQUIRE(cbma_run({"convert", (out / "stat.vgrid").string(), nii.string()}).code == 0);
    REQUIRE(cbma_run({"convert", nii.string(), back.string()}).code == 0);
    CHECK(slurp(back) == slurp(out / "stat.vgrid"));
  }
}

TEST_CASE("layering: explicit flags over config file over preset") {
  testing::TempDir dir;
  const auto foci = simulated(dir);
  write(dir / "run.cfg",
        "# analysis settings\npreset = paper-ale\n[analysis]\nalpha = 0.01\nweight_exponent = 0.5\nmask = test:4\n");
  const auto out = dir / "layered";
  const auto r = cbma_run({"analyze", "--config", (dir / "run.cfg").string(), "--dataset", foci.string(), "--alpha",
                           "0.02", "--seed", "1", "--out", out.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto opts = json_file(out / "provenance.json")["options"];
  CHECK(opts["kernel"] == "ale:auto");  // preset
  CHECK(opts["weight-exponent"] == "0.5");  // config file
  CHECK(opts["alpha"] == "0.02");  // flag
  CHECK(opts["mask"] == "test:4");
}

TEST_CASE("error records and exit codes") {
  testing::TempDir dir;
  const auto foci = simulated(dir);

  auto r = cbma_run({"analyze", "--dataset", (dir / "missing.csv").string(), "--kernel", "ale:4", "--out",
                     (dir / "x").string()});
  CHECK(r.code == 3);
  CHECK(error_of(r)["kind"] == "IoError");

  r = cbma_run({"analyze", "--dataset", foci.string(), "--kernel", "gauss:4", "--out", (dir / "x").string()});
  CHECK(r.code == 2);
  CHECK(error_of(r)["kind"] == "ConfigError");

  r = cbma_run({"analyze", "--dataset", foci.string(), "--out", (dir / "x").string()});
  CHECK(r.code == 2);
  CHECK(error_of(r)["message"].get<std::string>().find("--kernel") != std::string::npos);

  r = cbma_run({"analyze", "--no-such-flag"});
  CHECK(r.code == 2);

  r = cbma_run({"analyze", "--dataset", foci.string(), "--kernel", "ale:4", "--inference", "fwe", "--n-iter", "10",
                "--mask", "test:4", "--out", (dir / "x").string()});
  CHECK(r.code == 2);

  write(dir / "bad.csv", "study_id,x,y,z,n\na,1,2,3,10\na,1,2,oops,10\n");
  r = cbma_run({"analyze", "--dataset", (dir / "bad.csv").string(), "--kernel", "ale:4", "--out",
                (dir / "x").string()});
  CHECK(r.code == 4);
  CHECK(error_of(r)["kind"] == "ParseError");

  r = cbma_run({"power", "--I-grid", "10,x", "--out", (dir / "p").string(), "--quiet"});
  CHECK(r.code == 2);
}

TEST_CASE("foci outside the mask give an empty result, not an error") {
  testing::TempDir dir;
  write(dir / "far.csv", "study_id,x,y,z,n\na,500,500,500,10\nb,-500,0,0,12\n");
  const auto out = dir / "empty";
  const auto r = cbma_run({"analyze", "--dataset", (dir / "far.csv").string(), "--mask", "test:4", "--kernel",
                           "mkda:10", "--seed", "1", "--out", out.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(json_file(out / "clusters.json").empty());
}

TEST_CASE("null files and the cache directory") {
  testing::TempDir dir;
  const auto foci = simulated(dir);
  const std::vector<std::string> base{"--dataset", foci.string(), "--mask", "test:4", "--kernel", "mkda:10",
                                      "--n-iter", "100", "--seed", "5"};
  auto with = [&](std::vector<std::string> head, std::vector<std::string> tail) {
    head.insert(head.end(), base.begin(), base.end());
    head.insert(head.end(), tail.begin(), tail.end());
    return head;
  };

  const auto null_path = dir / "max.null";
  auto r = cbma_run(with({"null", "--kind", "max"}, {"--out", null_path.string()}));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(fs::exists(null_path));
  CHECK(json_file(null_path.string() + ".json")["n_iter"] == 100);

  r = cbma_run(with({"analyze", "--inference", "fwe"}, {"--null-file", null_path.string(), "--out",
                                                        (dir / "a1").string()}));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  r = cbma_run(with({"analyze", "--inference", "fwe"}, {"--out", (dir / "a2").string()}));
  REQUIRE(r.code == 0);
  CHECK(slurp(dir / "a1" / "p_corrected.vgrid") == slurp(dir / "a2" / "p_corrected.vgrid"));

  // Same null file, different kernel.
  r = cbma_run({"analyze", "--dataset", foci.string(), "--mask", "test:4", "--kernel", "mkda:8", "--inference", "fwe",
                "--n-iter", "100", "--seed", "5", "--null-file", null_path.string(), "--out", (dir / "a3").string()});
  CHECK(r.code == 6);
  CHECK(error_of(r)["kind"] == "FingerprintMismatch");

  const auto cache = dir / "cache";
  fs::create_directories(cache);
  ::setenv("CBMA_CACHE_DIR", cache.string().c_str(), 1);
  r = cbma_run(with({"analyze", "--inference", "fwe"}, {"--out", (dir / "c1").string()}));
  REQUIRE(r.code == 0);
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(cache)) ++files;
  CHECK(files >= 1);
  r = cbma_run(with({"analyze", "--inference", "fwe"}, {"--out", (dir / "c2").string()}));
  REQUIRE(r.code == 0);
  ::unsetenv("CBMA_CACHE_DIR");
  CHECK(slurp(dir / "c1" / "p_corrected.vgrid") == slurp(dir / "c2" / "p_corrected.vgrid"));
  CHECK(slurp(dir / "c1" / "p_corrected.vgrid") == slurp(dir / "a2" / "p_corrected.vgrid"));
}

TEST_CASE("power with the default grid writes a full report") {
  testing::TempDir dir;
  const auto out = dir / "power";
  const auto r = cbma_run({"power", "--replicates", "1", "--seed", "11", "--quiet", "--out", out.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto report = cbma::load_report(out / "report.csv");
  CHECK(report.cells.size() == 15);
  for (const char* f : {"report.json", "timing.csv", "provenance.json", "mean_tpr_by_p.svg", "any_detected_by_ip.svg"})
    CHECK_MESSAGE(fs::exists(out / f), f);
}
