#include "cbma/foci_csv.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cbma/error.hpp"
#include "cbma/io_util.hpp"

namespace cbma {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Splits one CSV record. Quoted fields may contain commas, doubled quotes and
// newlines; in the latter case further physical lines are pulled from `in`.
std::vector<std::string> read_record(std::istream& in, std::string line, std::size_t& line_no) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  std::size_t i = 0;
  while (true) {
    if (i >= line.size()) {
      if (quoted) {
        std::string next;
        if (!std::getline(in, next)) throw ParseError("unterminated quoted field", line_no);
        ++line_no;
        if (!next.empty() && next.back() == '\r') next.pop_back();
        field += '\n';
        line = std::move(next);
        i = 0;
        continue;
      }
      break;
    }
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
    ++i;
  }
  fields.push_back(std::move(field));
  return fields;
}

std::optional<std::size_t> resolve(const std::vector<std::string>& header, const std::vector<std::string>& names) {
  for (const auto& name : names) {
    const auto wanted = lower(name);
    for (std::size_t c = 0; c < header.size(); ++c)
      if (lower(trim(header[c])) == wanted) return c;
  }
  return std::nullopt;
}

double parse_number(const std::string& text, const char* column, std::size_t line) {
  const auto s = trim(text);
  double value = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (s.empty() || ec != std::errc{} || ptr != last || !std::isfinite(value))
    throw ParseError(std::string(column) + "='" + s + "' is not a finite number", line);
  return value;
}

int parse_participants(const std::string& text, std::size_t line) {
  const double value = parse_number(text, "Participants", line);
  if (value != std::floor(value) || value < 1.0 || value > 1e9)
    throw ParseError("Participants='" + trim(text) + "' is not a positive integer", line);
  return static_cast<int>(value);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> names_from_json(const nlohmann::json& value, const char* key) {
  if (value.is_string()) return {value.get<std::string>()};
  if (value.is_array()) {
    std::vector<std::string> names;
    for (const auto& v : value) {
      if (!v.is_string()) throw ConfigError(std::string("column mapping '") + key + "' must list strings");
      names.push_back(v.get<std::string>());
    }
    return names;
  }
  throw ConfigError(std::string("column mapping '") + key + "' must be a string or list of strings");
}

}  // namespace

ColumnMapping load_column_mapping(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("column mapping '" + path.string() + "': " + e.what());
  }
  if (!doc.is_object()) throw ConfigError("column mapping must be a JSON object");
  ColumnMapping m;
  const std::pair<const char*, std::vector<std::string>*> fields[] = {
      {"study_id", &m.study_id}, {"author", &m.author}, {"year", &m.year},
      {"label", &m.label},       {"x", &m.x},           {"y", &m.y},
      {"z", &m.z},               {"participants", &m.participants}, {"t_value", &m.t_value}};
  for (const auto& [key, target] : fields)
    if (doc.contains(key)) *target = names_from_json(doc[key], key);
  if (doc.contains("atlas")) m.atlas = atlas_from_string(doc["atlas"].get<std::string>());
  for (const auto& [key, value] : doc.items()) {
    const bool known = key == "atlas" || std::any_of(std::begin(fields), std::end(fields),
                                                     [&](const auto& f) { return key == f.first; });
    if (!known) throw ConfigError("unknown column mapping key '" + key + "'");
  }
  return m;
}

std::filesystem::path default_mapping_path(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p += ".columns.json";
  return p;
}

FociDataset parse_foci_csv(std::istream& in, const ColumnMapping& mapping) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    header = read_record(in, line, line_no);
    break;
  }
  if (header.empty()) throw ValidationError("no studies: file has no header row");

  const auto col_id = resolve(header, mapping.study_id);
  const auto col_author = resolve(header, mapping.author);
  const auto col_year = resolve(header, mapping.year);
  const auto col_label = resolve(header, mapping.label);
  const auto col_x = resolve(header, mapping.x);
  const auto col_y = resolve(header, mapping.y);
  const auto col_z = resolve(header, mapping.z);
  const auto col_n = resolve(header, mapping.participants);
  const auto col_t = resolve(header, mapping.t_value);
  if (!col_x || !col_y || !col_z) throw ParseError("header lacks X, Y or Z columns", line_no);
  if (!col_n) throw ParseError("header lacks a participants column", line_no);
  if (!col_id && (!col_author || !col_year || !col_label))
    throw ParseError("header lacks Author, Year and Label columns (and no study id column)", line_no);

  FociDataset dataset;
  dataset.atlas = mapping.atlas;
  std::map<std::string, std::size_t> by_key;
  std::string author;
  std::string year;
  std::string label;
  std::string sid;
  std::optional<std::size_t> current;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::size_t row_line = line_no;
    auto fields = read_record(in, line, line_no);
    if (fields.size() < header.size()) fields.resize(header.size());
    if (fields.size() > header.size()) throw ParseError("row has more fields than the header", row_line);
    auto cell = [&](const std::optional<std::size_t>& c) { return c ? trim(fields[*c]) : std::string(); };

    const auto a = cell(col_author);
    const auto y = cell(col_year);
    const auto l = cell(col_label);
    const auto id = cell(col_id);
    const bool continuation = a.empty() && y.empty() && l.empty() && id.empty();
    if (continuation) {
      if (!current) throw ParseError("first data row has no study identity", row_line);
    } else {
      if (!a.empty()) author = a;
      if (!y.empty()) year = y;
      if (!l.empty()) label = l;
      if (col_id) {
        if (!id.empty()) sid = id;
      }
      std::string key = col_id && !sid.empty() ? sid : author + " " + year + " " + label;
      auto it = by_key.find(key);
      if (it == by_key.end()) {
        Study s;
        s.id = key;
        s.author = author;
        s.year = year;
        s.label = label;
        s.n_participants = 0;
        dataset.studies.push_back(std::move(s));
        it = by_key.emplace(key, dataset.studies.size() - 1).first;
      }
      current = it->second;
    }
    Study& study = dataset.studies[*current];

    const auto n_text = cell(col_n);
    if (!n_text.empty()) {
      const int n = parse_participants(n_text, row_line);
      if (study.n_participants == 0) {
        study.n_participants = n;
      } else if (study.n_participants != n) {
        throw ValidationError("line " + std::to_string(row_line) + ": study '" + study.id +
                              "' has inconsistent participant counts (" + std::to_string(study.n_participants) +
                              " vs " + std::to_string(n) + ")");
      }
    } else if (study.n_participants == 0) {
      throw ParseError("study '" + study.id + "' has no participant count", row_line);
    }

    const auto xs = cell(col_x);
    const auto ys = cell(col_y);
    const auto zs = cell(col_z);
    if (xs.empty() && ys.empty() && zs.empty()) continue;  // study row without foci
    Focus f;
    f.position = {parse_number(xs, "X", row_line), parse_number(ys, "Y", row_line), parse_number(zs, "Z", row_line)};
    const auto ts = cell(col_t);
    if (!ts.empty()) {
      const double t = parse_number(ts, "T", row_line);
      if (t == 0.0) throw ValidationError("line " + std::to_string(row_line) + ": T value must be nonzero");
      f.t_value = t;
    }
    study.foci.push_back(f);
  }
  if (dataset.studies.empty()) throw ValidationError("no studies");
  dataset.validate();
  return dataset;
}

FociDataset load_foci_csv(const std::filesystem::path& path, const ColumnMapping& mapping) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open foci file '" + path.string() + "'");
  return parse_foci_csv(in, mapping);
}

FociDataset load_foci_csv(const std::filesystem::path& path) {
  const auto sidecar = default_mapping_path(path);
  if (std::filesystem::exists(sidecar)) return load_foci_csv(path, load_column_mapping(sidecar));
  return load_foci_csv(path, ColumnMapping{});
}

void write_foci_csv(std::ostream& out, const FociDataset& dataset) {
  bool any_t = false;
  for (const auto& s : dataset.studies)
    for (const auto& f : s.foci) any_t = any_t || f.t_value.has_value();
  out << "StudyID,Author,Year,Label,X,Y,Z,Participants";
  if (any_t) out << ",T";
  out << '\n';
  for (const auto& s : dataset.studies) {
    const auto identity = csv_field(s.id) + ',' + csv_field(s.author) + ',' + csv_field(s.year) + ',' +
                          csv_field(s.label) + ',';
    if (s.foci.empty()) {
      out << identity << ",,," << s.n_participants;
      if (any_t) out << ',';
      out << '\n';
      continue;
    }
    for (const auto& f : s.foci) {
      out << identity << format_double(f.position.x) << ',' << format_double(f.position.y) << ','
          << format_double(f.position.z) << ',' << s.n_participants;
      if (any_t) out << ',' << (f.t_value ? format_double(*f.t_value) : std::string());
      out << '\n';
    }
  }
}

void save_foci_csv(const std::filesystem::path& path, const FociDataset& dataset) {
  write_atomic(path, [&](std::ostream& out) { write_foci_csv(out, dataset); });
  if (dataset.atlas != AtlasTag::Unspecified) {
    nlohmann::json sidecar{{"atlas", std::string(to_string(dataset.atlas))}};
    write_atomic(default_mapping_path(path), sidecar.dump(2) + "\n");
  }
}

}  // namespace cbma
