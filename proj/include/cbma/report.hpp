#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cbma/power.hpp"

namespace cbma {

inline constexpr const char* kMeasureNames[4] = {"any_detected", "all_detected", "mean_detected", "mean_tpr"};

std::string report_csv(const PowerReport& report);
std::string timing_csv(const PowerReport& report);
nlohmann::json report_json(const PowerReport& report);
PowerReport parse_report_csv(const std::string& text);
PowerReport load_report(const std::filesystem::path& csv_path);

/// Line chart of one measure against p (by_ip = false) or I*p, one line per I.
std::string report_svg(const PowerReport& report, int measure, bool by_ip);

/// report.csv, report.json, timing.csv and <measure>_by_p.svg / <measure>_by_ip.svg.
/// Returns the written paths.
std::vector<std::filesystem::path> emit_report(const PowerReport& report, const std::filesystem::path& dir);

}  // namespace cbma
