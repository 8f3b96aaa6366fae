#include "cbma/foci.hpp"

#include <cctype>
#include <cmath>
#include <unordered_set>

#include "cbma/error.hpp"
#include "cbma/hashing.hpp"

namespace cbma {

std::string_view to_string(AtlasTag tag) {
  switch (tag) {
    case AtlasTag::MNI: return "MNI";
    case AtlasTag::Talairach: return "Talairach";
    case AtlasTag::Unspecified: return "Unspecified";
  }
  return "Unspecified";
}

AtlasTag atlas_from_string(std::string_view text) {
  std::string lower(text);
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "mni") return AtlasTag::MNI;
  if (lower == "talairach" || lower == "tal") return AtlasTag::Talairach;
  if (lower.empty() || lower == "unspecified") return AtlasTag::Unspecified;
  throw ConfigError("unknown atlas tag '" + std::string(text) + "'");
}

std::size_t FociDataset::total_foci() const {
  std::size_t n = 0;
  for (const auto& s : studies) n += s.foci.size();
  return n;
}

void FociDataset::validate() const {
  if (studies.empty()) throw ValidationError("no studies");
  std::unordered_set<std::string> ids;
  for (const auto& s : studies) {
    if (!ids.insert(s.id).second) throw ValidationError("duplicate study id '" + s.id + "'");
    if (s.n_participants < 1)
      throw ValidationError("study '" + s.id + "' must have at least one participant");
    for (const auto& f : s.foci) {
      if (!std::isfinite(f.position.x) || !std::isfinite(f.position.y) || !std::isfinite(f.position.z))
        throw ValidationError("study '" + s.id + "' has a non-finite coordinate");
      if (f.t_value && (!std::isfinite(*f.t_value) || *f.t_value == 0.0))
        throw ValidationError("study '" + s.id + "' has a zero or non-finite T value");
    }
  }
}

std::uint64_t FociDataset::hash() const {
  Fnv1a h;
  h.text(to_string(atlas));
  for (const auto& s : studies) {
    h.text(s.id).value(s.n_participants).value(static_cast<std::uint64_t>(s.foci.size()));
    for (const auto& f : s.foci) {
      h.value(f.position.x).value(f.position.y).value(f.position.z);
      const double t = f.t_value.value_or(0.0);
      h.value(t);
    }
  }
  return h.digest();
}

}  // namespace cbma
