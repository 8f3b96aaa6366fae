#include "cbma/cli.hpp"

#include <charconv>
#include <cstdlib>
#include <iostream>
#include <map>
#include <memory>

#include <omp.h>

#include <CLI11.hpp>

#include "cbma/analysis.hpp"
#include "cbma/error.hpp"
#include "cbma/foci_csv.hpp"
#include "cbma/hashing.hpp"
#include "cbma/io_util.hpp"
#include "cbma/monte_carlo.hpp"
#include "cbma/null_cache.hpp"
#include "cbma/power.hpp"
#include "cbma/random.hpp"
#include "cbma/report.hpp"
#include "cbma/simulation.hpp"
#include "cbma/volume_io.hpp"
#include "cli_internal.hpp"

namespace cbma {

namespace cli {
namespace {

namespace fs = std::filesystem;

std::ostream* g_warning_stream = nullptr;

void warning_to_stream(const std::string& message) {
  if (g_warning_stream) *g_warning_stream << "warning: " << message << '\n';
}

struct Common {
  std::string config;
  std::string preset;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  int jobs = 1;
  std::string out;
};

struct AnalysisOptions {
  std::string kernel;
  double weight_exponent = 1.0;
  bool assume_positive = false;
  std::string inference = "fdr";
  double alpha = 0.05;
  std::size_t n_iter = 1000;
  double forming_p = 0.001;
  std::string null = "exact";
  int connectivity = 26;
  double bin_width = kDefaultBinWidth;
};

struct DatasetOptions {
  std::string dataset;
  std::string columns;
  std::string mask = "test:2";
};

void add_common(CLI::App* sub, Common& c, bool seeded, const std::string& out_help) {
  sub->add_option("--config", c.config, "key = value file; explicit flags take precedence");
  sub->add_option("--preset", c.preset, "named parameter set (see 'cbma presets')");
  if (seeded) c.seed_opt = sub->add_option("--seed", c.seed, "master seed (generated and recorded when absent)");
  c.jobs = std::max(1, omp_get_num_procs());
  sub->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--out", c.out, out_help);
}

void add_dataset(CLI::App* sub, DatasetOptions& d) {
  sub->add_option("--dataset", d.dataset, "foci CSV");
  sub->add_option("--columns", d.columns, "JSON column mapping (default: <dataset>.columns.json when present)");
  sub->add_option("--mask", d.mask, "mask volume, or test:<mm> for the built-in ellipsoid");
}

void add_analysis(CLI::App* sub, AnalysisOptions& a) {
  sub->add_option("--kernel", a.kernel, "mkda:<radius>, ale:<sigma>, ale:auto or sdm:<sigma>");
  sub->add_option("--weight-exponent", a.weight_exponent, "study weights n_i^e (MKDA, SDM)");
  sub->add_flag("--assume-positive", a.assume_positive, "SDM: treat foci without T values as positive");
  sub->add_option("--inference", a.inference, "fdr, fwe, fixed or cluster");
  sub->add_option("--alpha", a.alpha, "FDR/FWE level, or the p cut for fixed");
  sub->add_option("--n-iter", a.n_iter, "Monte Carlo replicates");
  sub->add_option("--forming-p", a.forming_p, "cluster-forming uncorrected p");
  sub->add_option("--null", a.null, "voxel-wise null: exact or mc");
  sub->add_option("--connectivity", a.connectivity, "cluster connectivity: 6, 18 or 26");
  sub->add_option("--bin-width", a.bin_width, "null histogram bin width");
}

void layer(CLI::App* sub, Common& c, const std::string& command) {
  Settings from_file;
  if (!c.config.empty()) {
    from_file = parse_config_text(read_file(c.config));
    for (auto it = from_file.begin(); it != from_file.end();) {
      if (it->first == "preset") {
        if (c.preset.empty()) c.preset = it->second;
        it = from_file.erase(it);
      } else {
        ++it;
      }
    }
    apply_settings(*sub, from_file, c.config);
  }
  if (!c.preset.empty()) apply_settings(*sub, find_preset(c.preset, command).settings, "preset " + c.preset, true);
}

bool resolve_seed(Common& c) {
  if (c.seed_opt && c.seed_opt->count() > 0) return false;
  c.seed = random_seed();
  return true;
}

AnalysisConfig analysis_config(const AnalysisOptions& a, const Common& c) {
  if (a.kernel.empty()) throw ConfigError("--kernel is required (for example ale:4, mkda:10 or sdm:20)");
  AnalysisConfig cfg;
  cfg.kernel = KernelSpec::parse(a.kernel);
  if (!(a.weight_exponent >= 0.0)) throw ConfigError("weight exponent must be nonnegative");
  cfg.weight_exponent = a.weight_exponent;
  cfg.policy = a.assume_positive ? SignPolicy::AssumePositive : SignPolicy::Require;
  auto& inf = cfg.inference;
  if (a.inference == "fdr")
    inf.kind = Procedure::Kind::FDR;
  else if (a.inference == "fwe")
    inf.kind = Procedure::Kind::FWEvoxel;
  else if (a.inference == "fixed")
    inf.kind = Procedure::Kind::Fixed;
  else if (a.inference == "cluster")
    inf.kind = Procedure::Kind::FWEcluster;
  else
    throw ConfigError("inference must be fdr, fwe, fixed or cluster");
  if (a.null == "exact")
    inf.null_source = NullSource::Exact;
  else if (a.null == "mc")
    inf.null_source = NullSource::MonteCarlo;
  else
    throw ConfigError("null must be exact or mc");
  inf.alpha = a.alpha;
  inf.n_iter = a.n_iter;
  inf.forming_p = a.forming_p;
  inf.connectivity = connectivity_from_int(a.connectivity);
  inf.bin_width = a.bin_width;
  if ((inf.kind == Procedure::Kind::FWEvoxel || inf.kind == Procedure::Kind::FWEcluster) && inf.n_iter < 100)
    throw ConfigError("FWE inference needs at least 100 Monte Carlo iterations");
  inf.validate();
  cfg.seed = c.seed;
  cfg.jobs = c.jobs;
  return cfg;
}

FociDataset load_dataset(const DatasetOptions& d) {
  if (d.dataset.empty()) throw ConfigError("--dataset is required");
  auto ds = d.columns.empty() ? load_foci_csv(d.dataset) : load_foci_csv(d.dataset, load_column_mapping(d.columns));
  ds.validate();
  if (ds.atlas == AtlasTag::Talairach)
    warn("dataset is tagged Talairach but masks are taken as MNI; coordinates are used unconverted");
  return ds;
}

std::unique_ptr<DirectoryNullStore> cache_store() {
  const char* dir = std::getenv("CBMA_CACHE_DIR");
  if (!dir || !*dir) return nullptr;
  return std::make_unique<DirectoryNullStore>(dir);
}

fs::path require_out(const Common& c) {
  if (c.out.empty()) throw ConfigError("--out is required");
  return c.out;
}

std::string safe_name(const std::string& id) {
  std::string s;
  for (char ch : id) s += std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '.' ? ch : '_';
  return s;
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(',', start);
    if (end == std::string::npos) end = text.size();
    const auto item = text.substr(start, end - start);
    T value{};
    const auto* first = item.data();
    const auto* last = item.data() + item.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (item.empty() || ec != std::errc() || ptr != last)
      throw ConfigError(std::string("bad ") + what + " list entry '" + item + "'");
    out.push_back(value);
    start = end + 1;
  }
  return out;
}

void emit(std::ostream& out, const std::vector<fs::path>& paths) {
  for (const auto& p : paths) out << p.string() << '\n';
}

// ---------------------------------------------------------------------------

class Recorder : public NullStore {
public:
  explicit Recorder(NullStore* inner) : inner_(inner) {}
  std::optional<NullDistribution> load(const std::string& key) override {
    auto hit = inner_ ? inner_->load(key) : std::nullopt;
    if (hit) seen[key] = *hit;
    return hit;
  }
  void store(const std::string& key, const NullDistribution& null) override {
    seen[key] = null;
    if (inner_) inner_->store(key, null);
  }
  std::map<std::string, NullDistribution> seen;

private:
  NullStore* inner_;
};

struct AnalyzeCmd {
  Common common;
  DatasetOptions data;
  AnalysisOptions analysis;
  std::string format = "vgrid";
  bool export_maps = false;
  std::string null_file;
  CLI::App* app = nullptr;

  void attach(CLI::App& root) {
    app = root.add_subcommand("analyze", "statistic image, p-values, thresholded map and cluster table");
    add_common(app, common, true, "output directory");
    add_dataset(app, data);
    add_analysis(app, analysis);
    app->add_option("--format", format, "volume format: vgrid, nifti or both");
    app->add_flag("--export-maps", export_maps, "also write every study map");
    app->add_option("--null-file", null_file, "precomputed null from 'cbma null'");
  }

  std::vector<fs::path> run(const std::vector<std::string>& args) {
    layer(app, common, "analyze");
    const bool generated = resolve_seed(common);
    const auto dir = require_out(common);
    const auto fmt = parse_format(format);
    const auto cfg = analysis_config(analysis, common);
    const auto dataset = load_dataset(data);
    const auto mask = resolve_mask(data.mask);

    auto cache = cache_store();
    std::unique_ptr<FileNullStore> file_store;
    NullStore* store = cache.get();
    if (!null_file.empty()) {
      file_store = std::make_unique<FileNullStore>(null_file, cache.get());
      store = file_store.get();
    }
    const auto result = run_analysis(dataset, mask, cfg, store);
    if (file_store) file_store->check_used();

    fs::create_directories(dir);
    std::vector<fs::path> written;
    auto add = [&](std::vector<fs::path> p) { written.insert(written.end(), p.begin(), p.end()); };
    add(write_volume_outputs(dir, "stat", result.stat.grid, fmt));
    add(write_volume_outputs(dir, "p_uncorrected", result.threshold.p_uncorrected, fmt));
    add(write_volume_outputs(dir, "p_corrected", result.threshold.p_corrected, fmt));
    add(write_volume_outputs(dir, "significant", result.threshold.sig, fmt));
    if (export_maps) {
      fs::create_directories(dir / "maps");
      for (std::size_t i = 0; i < result.maps.size(); ++i)
        add(write_volume_outputs(dir / "maps", std::to_string(i + 1) + "_" + safe_name(result.maps[i].study_id),
                                 result.maps[i].to_grid(), fmt));
    }
    write_atomic(dir / "clusters.csv", cluster_table_csv(result.threshold));
    written.push_back(dir / "clusters.csv");
    write_atomic(dir / "clusters.json", cluster_table_json(result.threshold).dump(2) + "\n");
    written.push_back(dir / "clusters.json");

    auto summary = summary_json(result.stat);
    summary["n_studies"] = dataset.studies.size();
    summary["n_foci"] = dataset.total_foci();
    summary["dataset_hash"] = to_hex(dataset.hash());
    summary["kernel"] = cfg.kernel.to_string();
    summary["procedure"] = result.threshold.procedure.to_string();
    summary["inference"] = cfg.inference.to_string();
    summary["n_significant"] = result.threshold.n_significant();
    summary["n_clusters"] = result.threshold.clusters.size();
    summary["config_key"] = result.stat.config_key;
    if (result.max_null) summary["null_max_95"] = result.max_null->quantile(0.95);
    write_atomic(dir / "summary.json", summary.dump(2) + "\n");
    written.push_back(dir / "summary.json");

    auto prov = provenance_json("analyze", args, *app, common.seed, generated);
    prov["dataset_hash"] = to_hex(dataset.hash());
    prov["mask_hash"] = to_hex(mask->hash());
    write_atomic(dir / "provenance.json", prov.dump(2) + "\n");
    written.push_back(dir / "provenance.json");
    return written;
  }
};

struct NullCmd {
  Common common;
  DatasetOptions data;
  AnalysisOptions analysis;
  std::string kind = "max";
  CLI::App* app = nullptr;

  void attach(CLI::App& root) {
    app = root.add_subcommand("null", "build and store a null distribution");
    add_common(app, common, true, "output null file");
    add_dataset(app, data);
    add_analysis(app, analysis);
    app->add_option("--kind", kind, "max, cluster, exact or marginal");
  }

  std::vector<fs::path> run(const std::vector<std::string>& args) {
    layer(app, common, "null");
    const bool generated = resolve_seed(common);
    const fs::path path = require_out(common);
    auto opts = analysis;
    if (kind == "max") {
      opts.inference = "fwe";
    } else if (kind == "cluster") {
      opts.inference = "cluster";
    } else if (kind == "exact") {
      opts.inference = "fdr";
      opts.null = "exact";
    } else if (kind == "marginal") {
      opts.inference = "fdr";
      opts.null = "mc";
    } else {
      throw ConfigError("null kind must be max, cluster, exact or marginal");
    }
    opts.alpha = 0.05;  // thresholding level does not enter the null
    const auto cfg = analysis_config(opts, common);
    const auto dataset = load_dataset(data);
    const auto mask = resolve_mask(data.mask);
    auto cache = cache_store();
    Recorder recorder(cache.get());
    run_analysis(dataset, mask, cfg, &recorder);

    const std::string tag = "-" + kind + "-";
    for (const auto& [key, null] : recorder.seen) {
      if (key.find(tag) == std::string::npos) continue;
      save_null(path, null, key);
      nlohmann::json info{{"key", key}, {"kind", kind}, {"method", std::string(to_string(null.method()))}};
      if (null.is_empirical()) {
        info["n_iter"] = null.n_iter();
        info["quantile_95"] = null.quantile(0.95);
      } else {
        info["bins"] = null.hist().probs.size();
        info["min_bin"] = null.hist().min_bin;
        info["bin_width"] = null.hist().bin_width;
      }
      info["provenance"] = provenance_json("null", args, *app, common.seed, generated);
      const fs::path meta = path.string() + ".json";
      write_atomic(meta, info.dump(2) + "\n");
      return {path, meta};
    }
    throw Error("null distribution of kind '" + kind + "' was not produced");
  }
};

struct SimulateCmd {
  Common common;
  std::string mask = "test:2";
  int n_studies = 20;
  double valid_fraction = 0.0;
  double scatter_sd = 4.0;
  int participants = 12;
  CLI::App* app = nullptr;

  void attach(CLI::App& root) {
    app = root.add_subcommand("simulate", "synthetic dataset of valid and noise studies");
    add_common(app, common, true, "output directory");
    app->add_option("--mask", mask, "mask volume, or test:<mm> for the built-in ellipsoid");
    app->add_option("--studies", n_studies, "number of studies I");
    app->add_option("--valid-fraction", valid_fraction, "fraction p of valid studies");
    app->add_option("--scatter-sd", scatter_sd, "SD of foci around their centre, mm");
    app->add_option("--participants", participants, "participants per study");
  }

  std::vector<fs::path> run(const std::vector<std::string>& args) {
    layer(app, common, "simulate");
    const bool generated = resolve_seed(common);
    const auto dir = require_out(common);
    auto cfg = default_sim_config(resolve_mask(mask));
    cfg.n_studies = n_studies;
    cfg.valid_fraction = valid_fraction;
    cfg.scatter_sd_mm = scatter_sd;
    cfg.n_participants = participants;
    cfg.seed = common.seed;
    const auto dataset = gen_dataset(cfg);
    fs::create_directories(dir);
    save_foci_csv(dir / "foci.csv", dataset);
    write_atomic(dir / "truth.json", truth_json(cfg, dataset).dump(2) + "\n");
    write_atomic(dir / "provenance.json", provenance_json("simulate", args, *app, common.seed, generated).dump(2) + "\n");
    return {dir / "foci.csv", dir / "truth.json", dir / "provenance.json"};
  }
};

struct PowerCmd {
  Common common;
  AnalysisOptions analysis;
  std::string mask = "test:4";
  std::string i_grid = "20,60,120";
  std::string p_grid = "0,0.25,0.5,0.75,1";
  int replicates = 100;
  double scatter_sd = 4.0;
  int participants = 12;
  bool quiet = false;
  CLI::App* app = nullptr;

  void attach(CLI::App& root) {
    app = root.add_subcommand("power", "replicated simulation and analysis over an (I, p) grid");
    add_common(app, common, true, "output directory");
    add_analysis(app, analysis);
    analysis.kernel = "ale:4";
    app->get_option("--kernel")->default_str("ale:4");
    app->add_option("--mask", mask, "mask volume, or test:<mm> for the built-in ellipsoid");
    app->add_option("--I-grid", i_grid, "comma-separated numbers of studies");
    app->add_option("--p-grid", p_grid, "comma-separated valid fractions");
    app->add_option("--replicates", replicates, "datasets per cell (B)");
    app->add_option("--scatter-sd", scatter_sd, "SD of foci around their centre, mm");
    app->add_option("--participants", participants, "participants per study");
    app->add_flag("--quiet", quiet, "no progress on standard error");
  }

  std::vector<fs::path> run(const std::vector<std::string>& args) {
    layer(app, common, "power");
    const bool generated = resolve_seed(common);
    const auto dir = require_out(common);
    SweepConfig sweep_cfg;
    sweep_cfg.n_studies = parse_list<int>(i_grid, "I-grid");
    sweep_cfg.valid_fractions = parse_list<double>(p_grid, "p-grid");
    sweep_cfg.replicates = replicates;
    sweep_cfg.sim = default_sim_config(resolve_mask(mask));
    sweep_cfg.sim.scatter_sd_mm = scatter_sd;
    sweep_cfg.sim.n_participants = participants;
    sweep_cfg.analysis = analysis_config(analysis, common);
    sweep_cfg.seed = common.seed;
    sweep_cfg.jobs = common.jobs;
    sweep_cfg.progress = !quiet;
    const auto report = sweep(sweep_cfg);
    fs::create_directories(dir);
    auto written = emit_report(report, dir);
    write_atomic(dir / "provenance.json", provenance_json("power", args, *app, common.seed, generated).dump(2) + "\n");
    written.push_back(dir / "provenance.json");
    return written;
  }
};

struct ConvertCmd {
  std::string in;
  std::string out;
  CLI::App* app = nullptr;

  void attach(CLI::App& root) {
    app = root.add_subcommand("convert", "convert volumes between VGRID1 and NIfTI-1 (.nii)");
    app->add_option("input", in, "source volume")->required();
    app->add_option("output", out, "destination volume; .nii selects NIfTI-1")->required();
  }

  std::vector<fs::path> run() {
    write_volume(out, read_volume(in));
    return {out};
  }
};

}  // namespace
}  // namespace cli

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  using namespace cli;
  CLI::App app{"Coordinate-based meta-analysis: MKDA, ALE and SDM with exact and Monte Carlo inference", "cbma"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.set_version_flag("--version", CBMA_VERSION);

  AnalyzeCmd analyze;
  NullCmd null_cmd;
  SimulateCmd simulate;
  PowerCmd power;
  ConvertCmd convert;
  analyze.attach(app);
  null_cmd.attach(app);
  simulate.attach(app);
  power.attach(app);
  convert.attach(app);
  auto* list = app.add_subcommand("presets", "list named parameter sets");

  const auto previous_stream = g_warning_stream;
  g_warning_stream = &err;
  const auto previous_sink = set_warning_sink(&warning_to_stream);
  struct Restore {
    std::ostream* stream;
    WarningSink sink;
    ~Restore() {
      g_warning_stream = stream;
      set_warning_sink(sink);
    }
  } restore{previous_stream, previous_sink};

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << error_record(ConfigError(e.what())) << '\n';
    return 2;
  }

  try {
    std::vector<std::filesystem::path> written;
    if (analyze.app->parsed())
      written = analyze.run(args);
    else if (null_cmd.app->parsed())
      written = null_cmd.run(args);
    else if (simulate.app->parsed())
      written = simulate.run(args);
    else if (power.app->parsed())
      written = power.run(args);
    else if (convert.app->parsed())
      written = convert.run();
    else if (list->parsed())
      for (const auto& p : presets()) {
        out << p.name << " (";
        for (std::size_t c = 0; c < p.commands.size(); ++c) out << (c ? ", " : "") << p.commands[c];
        out << "): " << p.description << '\n';
        for (const auto& [k, v] : p.settings) out << "    " << k << " = " << v << '\n';
      }
    emit(out, written);
    return 0;
  } catch (const std::exception& e) {
    err << error_record(e) << '\n';
    return exit_code_for(e);
  }
}

}  // namespace cbma
