#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cbma/foci.hpp"

namespace cbma {

/// Maps logical foci-table fields onto CSV header names.
///
/// Each field lists accepted header names; the first one present in the file
/// wins (matching is case-insensitive). `study_id`, when present in the file,
/// takes precedence over the (author, year, label) triple for grouping rows.
struct ColumnMapping {
  std::vector<std::string> study_id{"StudyID", "Study ID", "Study_ID", "ID"};
  std::vector<std::string> author{"Author"};
  std::vector<std::string> year{"Year"};
  std::vector<std::string> label{"Emotion", "Label", "Contrast"};
  std::vector<std::string> x{"X"};
  std::vector<std::string> y{"Y"};
  std::vector<std::string> z{"Z"};
  std::vector<std::string> participants{"Participants", "N", "Subjects"};
  std::vector<std::string> t_value{"T", "t_value", "TValue"};
  AtlasTag atlas = AtlasTag::Unspecified;
};

/// Reads a JSON sidecar such as {"label": "Emotion", "x": "x_mm", "atlas": "MNI"}.
/// Values may be a string or a list of strings; missing keys keep defaults.
ColumnMapping load_column_mapping(const std::filesystem::path& path);

/// Sidecar lookup convention: `<csv path>.columns.json`, if it exists.
std::filesystem::path default_mapping_path(const std::filesystem::path& csv_path);

FociDataset parse_foci_csv(std::istream& in, const ColumnMapping& mapping = {});
FociDataset load_foci_csv(const std::filesystem::path& path, const ColumnMapping& mapping);
/// Uses the sidecar next to the file when present, defaults otherwise.
FociDataset load_foci_csv(const std::filesystem::path& path);

/// Writes one row per focus with fully repeated identity columns. Studies
/// without foci are written as a single row with blank coordinates.
void write_foci_csv(std::ostream& out, const FociDataset& dataset);
void save_foci_csv(const std::filesystem::path& path, const FociDataset& dataset);

}  // namespace cbma
