#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "cbma/null_distribution.hpp"

namespace cbma {

/// Key for a stored null: the analysis fingerprint plus what the sample
/// depends on beyond it (null kind, iteration count, seed, extra options).
std::string null_cache_key(const std::string& analysis_key, const std::string& kind, std::uint64_t n_iter,
                           std::uint64_t seed, const std::string& extra = {});

/// Binary "CBMANULL1" file holding one null distribution and its key.
void save_null(const std::filesystem::path& path, const NullDistribution& null, const std::string& key);

/// Throws FingerprintMismatch when `expected_key` is non-empty and differs
/// from the stored key.
NullDistribution load_null(const std::filesystem::path& path, const std::string& expected_key = {});

/// Stored key of a cache file.
std::string peek_null_key(const std::filesystem::path& path);

}  // namespace cbma
