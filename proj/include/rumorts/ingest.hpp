#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace rumorts {

/// A source post and the creation times of every reaction to it.
struct Conversation {
  std::string id;
  std::string event;
  int label = 0;  // 0 = non-rumour, 1 = rumour
  std::int64_t source_time = 0;
  std::vector<std::int64_t> reaction_times;  // epoch seconds, any order

  bool operator==(const Conversation&) const = default;
};

struct RawDataset {
  std::vector<Conversation> conversations;  // sorted by (event, id)
  std::vector<std::string> events;          // sorted, distinct

  bool operator==(const RawDataset&) const = default;
};

struct EventCounts {
  std::int64_t rumours = 0;
  std::int64_t non_rumours = 0;
  std::int64_t total() const { return rumours + non_rumours; }
};

struct LoadIssue {
  std::string path;
  std::string message;
};

struct LoadSummary {
  std::map<std::string, EventCounts> loaded;
  std::vector<std::string> excluded_events;
  std::vector<LoadIssue> errors;    // dropped conversations
  std::vector<LoadIssue> warnings;  // kept conversations with oddities
  std::int64_t dropped_reactions = 0;

  nlohmann::json to_json() const;
};

struct LoadResult {
  RawDataset dataset;
  LoadSummary summary;
};

namespace ingest {

/// Parses Twitter's `created_at` format, e.g. "Wed Jan 07 11:06:08 +0000 2015",
/// into UTC epoch seconds. Throws DataError naming the bad field.
std::int64_t parse_timestamp(std::string_view text);

/// Inverse of parse_timestamp, always rendered in +0000.
std::string format_timestamp(std::int64_t epoch_seconds);

/// Reports reactions earlier than the source and duplicate reaction times.
std::vector<std::string> validate_conversation(const Conversation& conv);

/// Lower-case alphanumerics of an event name with the PHEME
/// "-all-rnr-threads" suffix removed; used to match --events filters.
std::string event_key(std::string_view name);

/// Event directory name with the "-all-rnr-threads" suffix stripped.
std::string canonical_event_name(std::string_view directory_name);

/// Events skipped unless named explicitly in a filter.
const std::vector<std::string>& default_excluded_events();

/// Loads `<root>/<event>/<rumours|non-rumours>/<id>/{source-tweets,reactions}/*.json`.
/// With no filter every event except the default exclusions is loaded.
LoadResult load_dataset(const std::filesystem::path& root,
                        const std::optional<std::vector<std::string>>& event_filter = std::nullopt);

/// Writes a dataset back out in the same directory layout.
void write_dataset(const RawDataset& dataset, const std::filesystem::path& root);

/// Per-event rumour/non-rumour table with percentages and a total row.
std::string format_inspect_table(const RawDataset& dataset);

std::map<std::string, EventCounts> count_by_event(const RawDataset& dataset);

/// Stable 64-bit FNV-1a digest of the dataset contents.
std::uint64_t dataset_hash(const RawDataset& dataset);

}  // namespace ingest
}  // namespace rumorts
