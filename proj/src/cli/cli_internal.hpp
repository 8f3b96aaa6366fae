#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cbma/analysis.hpp"
#include "cbma/volume_io.hpp"

namespace CLI {
class App;
}

namespace cbma::cli {

using Settings = std::vector<std::pair<std::string, std::string>>;

/// Option values a preset supplies for one subcommand.
struct Preset {
  std::string name;
  std::vector<std::string> commands;
  Settings settings;
  std::string description;
};

const std::vector<Preset>& presets();
const Preset& find_preset(const std::string& name, const std::string& command);

/// key = value lines; '#' starts a comment; values may be quoted.
Settings parse_config_text(const std::string& text);

/// Applies settings to options of `app` that were not given on the command
/// line (or by an earlier layer). Unknown keys raise ConfigError unless
/// `skip_unknown` is set.
void apply_settings(CLI::App& app, const Settings& settings, const std::string& origin, bool skip_unknown = false);

/// Every option of `app` with its final value, for provenance.
nlohmann::json option_values(const CLI::App& app);

/// "test:2" or "test:4" for the built-in ellipsoid, otherwise a volume file.
MaskPtr resolve_mask(const std::string& spec);

enum class VolumeFormat { VGrid, Nifti, Both };
VolumeFormat parse_format(const std::string& text);

/// Writes `<dir>/<stem>.vgrid` and/or `<dir>/<stem>.nii`; returns the paths.
std::vector<std::filesystem::path> write_volume_outputs(const std::filesystem::path& dir, const std::string& stem,
                                                        const AnyVolume& volume, VolumeFormat format);

nlohmann::json provenance_json(const std::string& command, const std::vector<std::string>& args,
                               const CLI::App& sub, std::optional<std::uint64_t> seed, bool seed_generated);

/// `error: {"kind":...,"message":...}` on one line.
std::string error_record(const std::exception& e);
int exit_code_for(const std::exception& e);

/// Null store backed by a directory of "<key>.null" files.
class DirectoryNullStore : public NullStore {
public:
  explicit DirectoryNullStore(std::filesystem::path dir) : dir_(std::move(dir)) {}
  std::optional<NullDistribution> load(const std::string& key) override;
  void store(const std::string& key, const NullDistribution& null) override;

private:
  std::filesystem::path dir_;
};

/// Serves one explicitly supplied null file, which must match a requested key.
class FileNullStore : public NullStore {
public:
  FileNullStore(std::filesystem::path path, NullStore* fallback) : path_(std::move(path)), fallback_(fallback) {}
  std::optional<NullDistribution> load(const std::string& key) override;
  void store(const std::string& key, const NullDistribution& null) override;
  /// Throws FingerprintMismatch unless the file matched some request.
  void check_used() const;

private:
  std::filesystem::path path_;
  NullStore* fallback_;
  bool used_ = false;
};

}  // namespace cbma::cli
