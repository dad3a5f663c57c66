#include "rumorts/ingest.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "rumorts/error.hpp"

namespace fs = std::filesystem;

namespace rumorts {

nlohmann::json LoadSummary::to_json() const {
  nlohmann::json events = nlohmann::json::object();
  std::int64_t rumours = 0;
  std::int64_t non_rumours = 0;
  for (const auto& [name, counts] : loaded) {
    events[name] = {{"rumours", counts.rumours},
                    {"non_rumours", counts.non_rumours},
                    {"total", counts.total()}};
    rumours += counts.rumours;
    non_rumours += counts.non_rumours;
  }
  auto issues = [](const std::vector<LoadIssue>& list) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& issue : list) out.push_back({{"path", issue.path}, {"message", issue.message}});
    return out;
  };
  return {{"events", events},
          {"totals", {{"rumours", rumours}, {"non_rumours", non_rumours}, {"total", rumours + non_rumours}}},
          {"excluded_events", excluded_events},
          {"dropped_conversations", errors.size()},
          {"dropped_reactions", dropped_reactions},
          {"errors", issues(errors)},
          {"warnings", issues(warnings)}};
}

namespace ingest {
namespace {

constexpr std::array<std::string_view, 7> kWeekdays = {"Sun", "Mon", "Tue", "Wed", "Thu", "Fri", "Sat"};
constexpr std::array<std::string_view, 12> kMonths = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                                      "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
constexpr std::string_view kThreadSuffix = "-all-rnr-threads";

// Days since 1970-01-01 in the proleptic Gregorian calendar.
constexpr std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

struct Civil {
  std::int64_t year;
  unsigned month;
  unsigned day;
};

constexpr Civil civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  return {static_cast<std::int64_t>(yoe) + era * 400 + (m <= 2), m, d};
}

constexpr bool is_leap(std::int64_t y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

unsigned days_in_month(std::int64_t y, unsigned m) {
  static constexpr std::array<unsigned, 12> kDays = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && is_leap(y) ? 29 : kDays[m - 1];
}

[[noreturn]] void bad_field(std::string_view field, std::string_view text) {
  throw DataError("invalid timestamp " + std::string(field) + " in \"" + std::string(text) + "\"");
}

std::int64_t parse_digits(std::string_view token, std::size_t width, std::string_view field,
                          std::string_view text) {
  if (token.size() != width) bad_field(field, text);
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) bad_field(field, text);
  return value;
}

std::vector<std::string_view> split_spaces(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && text[i] == ' ') ++i;
    const std::size_t start = i;
    while (i < text.size() && text[i] != ' ') ++i;
    if (i > start) out.push_back(text.substr(start, i - start));
  }
  return out;
}

std::int64_t read_created_at(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open " + file.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed JSON in " + file.string() + ": " + e.what());
  }
  const auto it = doc.find("created_at");
  if (it == doc.end() || !it->is_string())
    throw DataError("missing created_at in " + file.string());
  return parse_timestamp(it->get<std::string>());
}

std::vector<fs::path> json_files(const fs::path& dir) {
  std::vector<fs::path> files;
  if (!fs::is_directory(dir)) return files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && !name.starts_with(".") && entry.path().extension() == ".json")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<fs::path> subdirectories(const fs::path& dir) {
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() && !entry.path().filename().string().starts_with("."))
      dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

bool keep_event(const std::string& key, const std::optional<std::vector<std::string>>& filter) {
  if (filter) {
    return std::any_of(filter->begin(), filter->end(),
                       [&](const std::string& name) { return event_key(name) == key; });
  }
  const auto& excluded = default_excluded_events();
  return std::none_of(excluded.begin(), excluded.end(),
                      [&](const std::string& name) { return event_key(name) == key; });
}

void fnv_bytes(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}

void fnv_string(std::uint64_t& h, const std::string& s) {
  const std::uint64_t n = s.size();
  fnv_bytes(h, &n, sizeof n);
  fnv_bytes(h, s.data(), s.size());
}

void fnv_int(std::uint64_t& h, std::int64_t v) { fnv_bytes(h, &v, sizeof v); }

}  // namespace

std::int64_t parse_timestamp(std::string_view text) {
  const auto tokens = split_spaces(text);
  if (tokens.size() != 6) bad_field("layout (expected 6 fields)", text);

  if (std::find(kWeekdays.begin(), kWeekdays.end(), tokens[0]) == kWeekdays.end())
    bad_field("day-of-week", text);
  const auto month_it = std::find(kMonths.begin(), kMonths.end(), tokens[1]);
  if (month_it == kMonths.end()) bad_field("month", text);
  const auto month = static_cast<unsigned>(month_it - kMonths.begin()) + 1;

  const std::int64_t year = parse_digits(tokens[5], 4, "year", text);
  const std::int64_t day = parse_digits(tokens[2], 2, "day", text);
  if (day < 1 || day > days_in_month(year, month)) bad_field("day", text);

  const auto clock = tokens[3];
  if (clock.size() != 8 || clock[2] != ':' || clock[5] != ':') bad_field("time", text);
  const std::int64_t hour = parse_digits(clock.substr(0, 2), 2, "hour", text);
  const std::int64_t minute = parse_digits(clock.substr(3, 2), 2, "minute", text);
  const std::int64_t second = parse_digits(clock.substr(6, 2), 2, "second", text);
  if (hour > 23) bad_field("hour", text);
  if (minute > 59) bad_field("minute", text);
  if (second > 60) bad_field("second", text);

  const auto zone = tokens[4];
  if (zone.size() != 5 || (zone[0] != '+' && zone[0] != '-')) bad_field("zone offset", text);
  const std::int64_t zone_hours = parse_digits(zone.substr(1, 2), 2, "zone offset", text);
  const std::int64_t zone_minutes = parse_digits(zone.substr(3, 2), 2, "zone offset", text);
  if (zone_minutes > 59) bad_field("zone offset", text);
  const std::int64_t offset = (zone[0] == '+' ? 1 : -1) * (zone_hours * 3600 + zone_minutes * 60);

  const std::int64_t local = days_from_civil(year, month, static_cast<unsigned>(day)) * 86400 +
                             hour * 3600 + minute * 60 + second;
  return local - offset;
}

std::string format_timestamp(std::int64_t epoch_seconds) {
  std::int64_t days = epoch_seconds / 86400;
  std::int64_t rem = epoch_seconds % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  const Civil date = civil_from_days(days);
  // 1970-01-01 was a Thursday.
  const auto weekday = static_cast<std::size_t>(((days % 7) + 7 + 4) % 7);
  std::ostringstream out;
  out << kWeekdays[weekday] << ' ' << kMonths[date.month - 1] << ' ' << std::setfill('0')
      << std::setw(2) << date.day << ' ' << std::setw(2) << rem / 3600 << ':' << std::setw(2)
      << (rem / 60) % 60 << ':' << std::setw(2) << rem % 60 << " +0000 " << std::setw(4)
      << date.year;
  return out.str();
}

std::vector<std::string> validate_conversation(const Conversation& conv) {
  std::vector<std::string> warnings;
  for (const auto t : conv.reaction_times) {
    if (t < conv.source_time) {
      warnings.push_back("reaction precedes source by " + std::to_string(conv.source_time - t) + " s");
    }
  }
  auto sorted = conv.reaction_times;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i] == sorted[i - 1] && (i == 1 || sorted[i - 2] != sorted[i]))
      warnings.push_back("duplicate reaction timestamp " + std::to_string(sorted[i]));
  }
  return warnings;
}

std::string canonical_event_name(std::string_view directory_name) {
  if (directory_name.ends_with(kThreadSuffix))
    directory_name.remove_suffix(kThreadSuffix.size());
  return std::string(directory_name);
}

std::string event_key(std::string_view name) {
  const std::string canonical = canonical_event_name(name);
  std::string key;
  for (const char c : canonical) {
    if (std::isalnum(static_cast<unsigned char>(c)))
      key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return key;
}

const std::vector<std::string>& default_excluded_events() {
  static const std::vector<std::string> kExcluded = {"prince-toronto", "ebola-essien"};
  return kExcluded;
}

LoadResult load_dataset(const fs::path& root, const std::optional<std::vector<std::string>>& event_filter) {
  if (!fs::is_directory(root)) throw DataError("dataset root is not a directory: " + root.string());
  if (event_filter && event_filter->empty()) throw UsageError("event filter is empty");

  LoadResult result;
  auto& summary = result.summary;
  std::set<std::string> seen_ids;

  for (const auto& event_dir : subdirectories(root)) {
    const std::string event = canonical_event_name(event_dir.filename().string());
    if (!keep_event(event_key(event), event_filter)) {
      summary.excluded_events.push_back(event);
      continue;
    }
    auto& counts = summary.loaded[event];
    for (const auto& [branch, label] : {std::pair<std::string, int>{"rumours", 1}, {"non-rumours", 0}}) {
      const fs::path branch_dir = event_dir / branch;
      if (!fs::is_directory(branch_dir)) continue;
      for (const auto& conv_dir : subdirectories(branch_dir)) {
        Conversation conv;
        conv.id = conv_dir.filename().string();
        conv.event = event;
        conv.label = label;
        try {
          const auto sources = json_files(conv_dir / "source-tweets");
          if (sources.size() != 1) {
            throw DataError("expected exactly one source post, found " + std::to_string(sources.size()));
          }
          conv.source_time = read_created_at(sources.front());
          for (const auto& reaction : json_files(conv_dir / "reactions"))
            conv.reaction_times.push_back(read_created_at(reaction));
        } catch (const DataError& e) {
          summary.errors.push_back({conv_dir.string(), e.what()});
          continue;
        }
        if (!seen_ids.insert(conv.id).second) {
          summary.errors.push_back({conv_dir.string(), "duplicate conversation id " + conv.id});
          continue;
        }
        for (auto& warning : validate_conversation(conv))
          summary.warnings.push_back({conv_dir.string(), std::move(warning)});
        const auto before = conv.reaction_times.size();
        std::erase_if(conv.reaction_times, [&](std::int64_t t) { return t < conv.source_time; });
        summary.dropped_reactions += static_cast<std::int64_t>(before - conv.reaction_times.size());

        (label == 1 ? counts.rumours : counts.non_rumours) += 1;
        result.dataset.conversations.push_back(std::move(conv));
      }
    }
    if (counts.total() == 0) summary.loaded.erase(event);
  }

  if (result.dataset.conversations.empty())
    throw DataError("no conversations found under " + root.string());

  auto& convs = result.dataset.conversations;
  std::sort(convs.begin(), convs.end(), [](const Conversation& a, const Conversation& b) {
    return std::tie(a.event, a.id) < std::tie(b.event, b.id);
  });
  for (const auto& [name, counts] : summary.loaded) result.dataset.events.push_back(name);
  return result;
}

void write_dataset(const RawDataset& dataset, const fs::path& root) {
  auto write_post = [](const fs::path& file, const std::string& id, std::int64_t t) {
    std::ofstream out(file);
    if (!out) throw DataError("cannot write " + file.string());
    out << nlohmann::json{{"id_str", id}, {"created_at", format_timestamp(t)}}.dump() << '\n';
  };
  for (const auto& conv : dataset.conversations) {
    const fs::path dir = root / conv.event / (conv.label == 1 ? "rumours" : "non-rumours") / conv.id;
    fs::create_directories(dir / "source-tweets");
    fs::create_directories(dir / "reactions");
    write_post(dir / "source-tweets" / (conv.id + ".json"), conv.id, conv.source_time);
    for (std::size_t i = 0; i < conv.reaction_times.size(); ++i) {
      const std::string rid = conv.id + "r" + std::to_string(i);
      write_post(dir / "reactions" / (rid + ".json"), rid, conv.reaction_times[i]);
    }
  }
}

std::map<std::string, EventCounts> count_by_event(const RawDataset& dataset) {
  std::map<std::string, EventCounts> counts;
  for (const auto& conv : dataset.conversations)
    (conv.label == 1 ? counts[conv.event].rumours : counts[conv.event].non_rumours) += 1;
  return counts;
}

std::string format_inspect_table(const RawDataset& dataset) {
  const auto counts = count_by_event(dataset);
  auto with_commas = [](std::int64_t v) {
    std::string digits = std::to_string(v);
    for (int i = static_cast<int>(digits.size()) - 3; i > 0; i -= 3) digits.insert(static_cast<std::size_t>(i), ",");
    return digits;
  };
  auto cell = [&](std::int64_t part, std::int64_t total) {
    std::ostringstream s;
    s << with_commas(part) << " (" << std::fixed << std::setprecision(2)
      << (total > 0 ? 100.0 * static_cast<double>(part) / static_cast<double>(total) : 0.0) << "%)";
    return s.str();
  };

  std::size_t width = 5;
  for (const auto& [name, c] : counts) width = std::max(width, name.size());

  std::ostringstream out;
  auto row = [&](const std::string& name, const std::string& r, const std::string& n, const std::string& t) {
    out << std::left << std::setw(static_cast<int>(width)) << name << "  " << std::right << std::setw(16) << r
        << "  " << std::setw(16) << n << "  " << std::setw(7) << t << '\n';
  };
  row("Event", "Rumors", "Non-rumors", "Total");
  EventCounts total;
  for (const auto& [name, c] : counts) {
    row(name, cell(c.rumours, c.total()), cell(c.non_rumours, c.total()), with_commas(c.total()));
    total.rumours += c.rumours;
    total.non_rumours += c.non_rumours;
  }
  row("Total", cell(total.rumours, total.total()), cell(total.non_rumours, total.total()),
      with_commas(total.total()));
  return out.str();
}

std::uint64_t dataset_hash(const RawDataset& dataset) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& conv : dataset.conversations) {
    fnv_string(h, conv.id);
    fnv_string(h, conv.event);
    fnv_int(h, conv.label);
    fnv_int(h, conv.source_time);
    auto times = conv.reaction_times;
    std::sort(times.begin(), times.end());
    fnv_int(h, static_cast<std::int64_t>(times.size()));
    for (const auto t : times) fnv_int(h, t);
  }
  return h;
}

}  // namespace ingest
}  // namespace rumorts
