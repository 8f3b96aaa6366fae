#include "cbma/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "cbma/error.hpp"
#include "cbma/io_util.hpp"

namespace cbma {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_number(const std::string& text, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ParseError("bad number '" + text + "' in report", line);
  }
}

const char* const kPalette[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666"};

std::string fmt(double v) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(2);
  out << v;
  return out.str();
}

}  // namespace

std::string report_csv(const PowerReport& report) {
  std::ostringstream out;
  out << "I,p,B";
  for (const auto* name : kMeasureNames) out << ',' << name << ',' << name << "_se";
  out << ",fingerprint\n";
  for (const auto& c : report.cells) {
    out << c.n_studies << ',' << format_double(c.valid_fraction) << ',' << c.replicates;
    for (const auto& m : c.measures) out << ',' << format_double(m.mean) << ',' << format_double(m.se);
    out << ',' << report.fingerprint << '\n';
  }
  return out.str();
}

std::string timing_csv(const PowerReport& report) {
  std::ostringstream out;
  out << "I,p,B,runtime_s\n";
  for (const auto& c : report.cells)
    out << c.n_studies << ',' << format_double(c.valid_fraction) << ',' << c.replicates << ','
        << format_double(c.runtime_s) << '\n';
  return out.str();
}

nlohmann::json report_json(const PowerReport& report) {
  nlohmann::json j;
  j["fingerprint"] = report.fingerprint;
  j["n_centers"] = report.n_centers;
  auto cells = nlohmann::json::array();
  for (const auto& c : report.cells) {
    nlohmann::json cell{{"I", c.n_studies}, {"p", c.valid_fraction}, {"B", c.replicates}};
    for (int m = 0; m < 4; ++m) cell[kMeasureNames[m]] = {{"mean", c.measures[m].mean}, {"se", c.measures[m].se}};
    cells.push_back(cell);
  }
  j["cells"] = cells;
  return j;
}

PowerReport parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty report file", 1);
  const auto header = split(line, ',');
  if (header.size() != 12 || header[0] != "I" || header.back() != "fingerprint")
    throw ParseError("unexpected report header", 1);
  PowerReport report;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 12) throw ParseError("expected 12 columns", number);
    PowerCell c;
    c.n_studies = static_cast<int>(parse_number(cells[0], number));
    c.valid_fraction = parse_number(cells[1], number);
    c.replicates = static_cast<int>(parse_number(cells[2], number));
    for (int m = 0; m < 4; ++m) {
      c.measures[m].mean = parse_number(cells[3 + 2 * m], number);
      c.measures[m].se = parse_number(cells[4 + 2 * m], number);
    }
    report.fingerprint = cells[11];
    report.cells.push_back(c);
  }
  return report;
}

PowerReport load_report(const std::filesystem::path& csv_path) {
  auto report = parse_report_csv(read_file(csv_path));
  const auto json_path = csv_path.parent_path() / "report.json";
  if (std::filesystem::exists(json_path)) {
    const auto j = nlohmann::json::parse(read_file(json_path));
    report.n_centers = j.value("n_centers", report.n_centers);
  }
  return report;
}

std::string report_svg(const PowerReport& report, int measure, bool by_ip) {
  constexpr double W = 640, H = 420, L = 70, R = 130, T = 40, Bm = 60;
  std::map<int, std::vector<std::pair<double, double>>> lines;
  double x_max = 0.0;
  for (const auto& c : report.cells) {
    const double x = by_ip ? c.n_studies * c.valid_fraction : c.valid_fraction;
    lines[c.n_studies].push_back({x, c.measures[measure].mean});
    x_max = std::max(x_max, x);
  }
  if (x_max <= 0.0) x_max = 1.0;
  const double y_max = measure == 2 ? static_cast<double>(report.n_centers) : 1.0;
  auto px = [&](double x) { return L + (W - L - R) * x / x_max; };
  auto py = [&](double y) { return H - Bm - (H - T - Bm) * y / y_max; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << kMeasureNames[measure]
      << (by_ip ? " vs I*p" : " vs p") << "</text>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << py(0) << "\" x2=\"" << px(x_max) << "\" y2=\"" << py(0) << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << py(0) << "\" x2=\"" << L << "\" y2=\"" << py(y_max) << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = x_max * t / 4.0;
    const double yv = y_max * t / 4.0;
    out << "<text x=\"" << fmt(px(xv)) << "\" y=\"" << fmt(py(0) + 18) << "\" text-anchor=\"middle\">" << fmt(xv) << "</text>\n";
    out << "<text x=\"" << L - 8 << "\" y=\"" << fmt(py(yv) + 4) << "\" text-anchor=\"end\">" << fmt(yv) << "</text>\n";
  }
  out << "<text x=\"" << fmt(px(x_max / 2)) << "\" y=\"" << H - 18 << "\" text-anchor=\"middle\">" << (by_ip ? "I*p" : "p")
      << "</text>\n";
  std::size_t colour = 0;
  for (auto& [I, pts] : lines) {
    std::sort(pts.begin(), pts.end());
    const char* stroke = kPalette[colour % 8];
    out << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : pts) out << fmt(px(x)) << ',' << fmt(py(y)) << ' ';
    out << "\"/>\n";
    for (const auto& [x, y] : pts)
      out << "<circle cx=\"" << fmt(px(x)) << "\" cy=\"" << fmt(py(y)) << "\" r=\"3\" fill=\"" << stroke << "\"/>\n";
    const double ly = T + 20.0 * static_cast<double>(colour);
    out << "<line x1=\"" << W - R + 15 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 40 << "\" y2=\"" << ly
        << "\" stroke=\"" << stroke << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << W - R + 46 << "\" y=\"" << ly + 4 << "\">I=" << I << "</text>\n";
    ++colour;
  }
  out << "</svg>\n";
  return out.str();
}

std::vector<std::filesystem::path> emit_report(const PowerReport& report, const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> written;
  auto put = [&](const std::filesystem::path& name, const std::string& content) {
    write_atomic(dir / name, content);
    written.push_back(dir / name);
  };
  put("report.csv", report_csv(report));
  put("report.json", report_json(report).dump(2) + "\n");
  put("timing.csv", timing_csv(report));
  for (int m = 0; m < 4; ++m) {
    put(std::string(kMeasureNames[m]) + "_by_p.svg", report_svg(report, m, false));
    put(std::string(kMeasureNames[m]) + "_by_ip.svg", report_svg(report, m, true));
  }
  return written;
}

}  // namespace cbma
