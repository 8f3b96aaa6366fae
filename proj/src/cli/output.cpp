#include <sstream>

#include <CLI11.hpp>

#include "cbma/error.hpp"
#include "cbma/exact_null.hpp"
#include "cbma/hashing.hpp"
#include "cbma/null_cache.hpp"
#include "cbma/volume_io.hpp"
#include "cli_internal.hpp"

#ifndef CBMA_VERSION
#define CBMA_VERSION "0.0.0"
#endif

namespace cbma::cli {

MaskPtr resolve_mask(const std::string& spec) {
  if (spec.rfind("test:", 0) == 0) {
    double mm = 0.0;
    try {
      std::size_t used = 0;
      mm = std::stod(spec.substr(5), &used);
      if (used != spec.size() - 5) throw std::invalid_argument(spec);
    } catch (const std::exception&) {
      throw ConfigError("bad test mask spec '" + spec + "' (expected test:<voxel mm>)");
    }
    return std::make_shared<const BrainMask>(make_test_mask(mm));
  }
  return std::make_shared<const BrainMask>(load_mask(spec));
}

VolumeFormat parse_format(const std::string& text) {
  if (text == "vgrid") return VolumeFormat::VGrid;
  if (text == "nifti") return VolumeFormat::Nifti;
  if (text == "both") return VolumeFormat::Both;
  throw ConfigError("format must be vgrid, nifti or both");
}

std::vector<std::filesystem::path> write_volume_outputs(const std::filesystem::path& dir, const std::string& stem,
                                                        const AnyVolume& volume, VolumeFormat format) {
  std::vector<std::filesystem::path> out;
  if (format != VolumeFormat::Nifti) out.push_back(dir / (stem + ".vgrid"));
  if (format != VolumeFormat::VGrid) out.push_back(dir / (stem + ".nii"));
  for (const auto& p : out) write_volume(p, volume);
  return out;
}

nlohmann::json provenance_json(const std::string& command, const std::vector<std::string>& args, const CLI::App& sub,
                               std::optional<std::uint64_t> seed, bool seed_generated) {
  nlohmann::json j;
  j["command"] = command;
  j["args"] = args;
  j["options"] = option_values(sub);
  if (seed) {
    j["seed"] = *seed;
    j["seed_generated"] = seed_generated;
  }
  std::vector<std::string> rerun{"cbma", command};
  for (const auto& [key, value] : j["options"].items()) {
    if (key == "config" || key == "preset" || key == "jobs" || key == "seed") continue;
    if (value.is_string()) {
      const auto text = value.get<std::string>();
      if (text.empty()) continue;
      const auto* opt = sub.get_option_no_throw("--" + key);
      if (opt && opt->get_type_size() == 0) {
        if (text == "true" || text == "1") rerun.push_back("--" + key);
        continue;
      }
      rerun.push_back("--" + key);
      rerun.push_back(text);
    }
  }
  if (seed) {
    rerun.push_back("--seed");
    rerun.push_back(std::to_string(*seed));
  }
  j["rerun"] = rerun;
  j["versions"] = {{"cbma", CBMA_VERSION}, {"fft", fft_library_version()}, {"compiler", __VERSION__}};
  return j;
}

std::string error_record(const std::exception& e) {
  std::string kind = "Error";
  if (const auto* ce = dynamic_cast<const Error*>(&e))
    kind = ce->kind();
  else if (dynamic_cast<const std::bad_alloc*>(&e))
    kind = "OutOfMemory";
  nlohmann::json j{{"kind", kind}, {"message", e.what()}};
  return "error: " + j.dump();
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const IoError*>(&e)) return 3;
  if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const ValidationError*>(&e)) return 4;
  if (dynamic_cast<const NumericError*>(&e)) return 5;
  if (dynamic_cast<const FingerprintMismatch*>(&e)) return 6;
  return 1;
}

std::optional<NullDistribution> DirectoryNullStore::load(const std::string& key) {
  const auto path = dir_ / (key + ".null");
  if (!std::filesystem::exists(path)) return std::nullopt;
  return load_null(path, key);
}

void DirectoryNullStore::store(const std::string& key, const NullDistribution& null) {
  save_null(dir_ / (key + ".null"), null, key);
}

namespace {

// Second dash-separated field of a cache key names the kind of null.
std::string key_kind(const std::string& key) {
  const auto a = key.find('-');
  if (a == std::string::npos) return {};
  const auto b = key.find('-', a + 1);
  return key.substr(a + 1, b == std::string::npos ? std::string::npos : b - a - 1);
}

}  // namespace

std::optional<NullDistribution> FileNullStore::load(const std::string& key) {
  const auto stored = peek_null_key(path_);
  if (stored == key) {
    used_ = true;
    return load_null(path_, key);
  }
  if (key_kind(stored) == key_kind(key))
    throw FingerprintMismatch(path_.string() + ": null file was built for a different configuration");
  return fallback_ ? fallback_->load(key) : std::nullopt;
}

void FileNullStore::store(const std::string& key, const NullDistribution& null) {
  if (fallback_) fallback_->store(key, null);
}

void FileNullStore::check_used() const {
  if (!used_)
    throw FingerprintMismatch(path_.string() + ": null file was built for a different configuration (key " +
                              peek_null_key(path_) + ")");
}

}  // namespace cbma::cli
