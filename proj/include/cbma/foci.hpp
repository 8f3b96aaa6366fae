#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cbma/geometry.hpp"

namespace cbma {

/// One reported activation peak.
struct Focus {
  WorldPoint position;
  /// Signed test statistic reported alongside the peak, if any.
  std::optional<double> t_value;

  friend bool operator==(const Focus&, const Focus&) = default;
};

struct Study {
  std::string id;
  std::string author;
  std::string year;
  /// Contrast label (e.g. the emotion studied); "valid"/"noise" for simulated data.
  std::string label;
  int n_participants = 1;
  std::vector<Focus> foci;

  friend bool operator==(const Study&, const Study&) = default;
};

enum class AtlasTag { MNI, Talairach, Unspecified };

std::string_view to_string(AtlasTag tag);
AtlasTag atlas_from_string(std::string_view text);

struct FociDataset {
  std::vector<Study> studies;
  AtlasTag atlas = AtlasTag::Unspecified;

  std::size_t total_foci() const;
  /// Throws ValidationError on empty datasets, duplicate ids, bad participant
  /// counts or non-finite coordinates.
  void validate() const;
  /// Content hash over study ids, participant counts and foci.
  std::uint64_t hash() const;

  friend bool operator==(const FociDataset&, const FociDataset&) = default;
};

}  // namespace cbma
