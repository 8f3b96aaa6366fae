#include <algorithm>
#include <sstream>

#include <CLI11.hpp>

#include "cbma/error.hpp"
#include "cli_internal.hpp"

namespace cbma::cli {

namespace {

std::string grid_text(double start, double stop, double step) {
  std::ostringstream out;
  const int n = static_cast<int>(std::llround((stop - start) / step));
  for (int i = 0; i <= n; ++i) {
    if (i) out << ',';
    out << start + step * i;
  }
  return out.str();
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

const std::vector<Preset>& presets() {
  static const std::vector<Preset> all = {
      {"paper-mkda",
       {"analyze", "null"},
       {{"kernel", "mkda:10"}, {"weight-exponent", "1"}, {"inference", "fwe"}, {"alpha", "0.05"}, {"n-iter", "10000"}},
       "MKDA, 10 mm spheres, participant weights, voxel-wise FWE 0.05 from 10000 Monte Carlo maxima"},
      {"paper-ale",
       {"analyze", "null"},
       {{"kernel", "ale:auto"}, {"inference", "fdr"}, {"alpha", "0.05"}, {"null", "exact"}},
       "ALE, sample-size dependent sigma, exact null, FDR 0.05"},
      {"paper-sdm",
       {"analyze", "null"},
       {{"kernel", "sdm:20"},
        {"weight-exponent", "1"},
        {"null", "mc"},
        {"n-iter", "500"},
        {"inference", "fixed"},
        {"alpha", "0.001"}},
       "SDM, 20 mm Gaussian, 500 Monte Carlo randomisations, uncorrected p < 0.001"},
      {"paper-sim",
       {"power", "simulate"},
       {{"kernel", "ale:4"},
        {"inference", "fdr"},
        {"alpha", "0.05"},
        {"null", "exact"},
        {"I-grid", "20,40,60,80,100,120"},
        {"p-grid", grid_text(0.0, 1.0, 0.05)},
        {"replicates", "1000"},
        {"scatter-sd", "4"},
        {"participants", "12"},
        {"mask", "test:2"}},
       "full simulation grid: ALE sigma 4 mm, FDR 0.05, I = 20..120, p = 0..1 by 0.05, B = 1000"},
      {"appendix-a-mkda",
       {"power"},
       {{"kernel", "mkda:10"}, {"inference", "fdr"}, {"alpha", "0.05"}, {"null", "exact"}, {"weight-exponent", "1"}},
       "MKDA 10 mm spheres under exact-null FDR 0.05"},
      {"appendix-a-sdm",
       {"power"},
       {{"kernel", "sdm:4"},
        {"inference", "fdr"},
        {"alpha", "0.05"},
        {"null", "exact"},
        {"weight-exponent", "1"},
        {"assume-positive", "true"}},
       "SDM 4 mm Gaussians (positive foci) under exact-null FDR 0.05"},
  };
  return all;
}

const Preset& find_preset(const std::string& name, const std::string& command) {
  for (const auto& p : presets()) {
    if (p.name != name) continue;
    if (std::find(p.commands.begin(), p.commands.end(), command) == p.commands.end())
      throw ConfigError("preset '" + name + "' does not apply to '" + command + "'");
    return p;
  }
  throw ConfigError("unknown preset '" + name + "'");
}

Settings parse_config_text(const std::string& text) {
  Settings out;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value in config file", number);
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front())
      value = value.substr(1, value.size() - 2);
    if (key.empty()) throw ParseError("empty key in config file", number);
    std::replace(key.begin(), key.end(), '_', '-');
    out.emplace_back(key, value);
  }
  return out;
}

void apply_settings(CLI::App& app, const Settings& settings, const std::string& origin, bool skip_unknown) {
  for (const auto& [key, value] : settings) {
    auto* opt = app.get_option_no_throw("--" + key);
    if (!opt && skip_unknown) continue;
    if (!opt || key == "config" || key == "preset")
      throw ConfigError("unknown setting '" + key + "' in " + origin + " for '" + app.get_name() + "'");
    if (opt->count() > 0) continue;
    opt->add_result(value);
    try {
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw ConfigError("bad value '" + value + "' for '" + key + "' in " + origin + ": " + e.what());
    }
  }
}

nlohmann::json option_values(const CLI::App& app) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto* opt : app.get_options()) {
    const auto& name = opt->get_lnames();
    if (name.empty() || name.front() == "help") continue;
    if (opt->count() > 0) {
      const auto& results = opt->results();
      if (results.size() == 1)
        j[name.front()] = results.front();
      else
        j[name.front()] = results;
    } else {
      j[name.front()] = opt->get_default_str();
    }
  }
  return j;
}

}  // namespace cbma::cli
