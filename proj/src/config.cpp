#include "rumorts/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "rumorts/error.hpp"

namespace rumorts {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  text = trim(text);
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw UsageError("invalid value '" + std::string(text) + "' for " + std::string(key));
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  text = trim(text);
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw UsageError("invalid boolean '" + std::string(text) + "' for " + std::string(key));
}

}  // namespace

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto piece = trim(text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (!piece.empty()) out.emplace_back(piece);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

void PipelineConfig::validate() const {
  if (interval_seconds <= 0) throw UsageError("interval must be positive");
  if (svd_rank < 0) throw UsageError("svd rank must be non-negative (0 selects the default)");
  if (!std::isfinite(learning_rate) || learning_rate <= 0.0) throw UsageError("learning rate must be positive");
  if (batch_size < 1) throw UsageError("batch size must be at least 1");
  if (epochs < 0) throw UsageError("epochs must be non-negative");
  if (jobs < 1) throw UsageError("jobs must be at least 1");
}

nlohmann::json PipelineConfig::to_json() const {
  return {{"interval_seconds", interval_seconds},
          {"interval_minutes", static_cast<double>(interval_seconds) / 60.0},
          {"svd_rank", svd_rank},
          {"impl", to_string(impl)},
          {"learning_rate", learning_rate},
          {"batch_size", batch_size},
          {"epochs", epochs},
          {"seed", seed},
          {"fit_on_all", fit_on_all},
          {"bootstrap", bootstrap},
          {"dropout_placement", "after every recurrent layer"},
          {"lg_order", "lstm->gru"}};
}

void RunConfig::set(std::string_view raw_key, std::string_view raw_value) {
  std::string key(trim(raw_key));
  std::replace(key.begin(), key.end(), '_', '-');
  const std::string_view value = trim(raw_value);
  auto& p = pipeline;

  if (key == "root") {
    root = std::string(value);
  } else if (key == "events") {
    auto list = split_list(value);
    if (list.empty()) throw UsageError("events list is empty");
    events = std::move(list);
  } else if (key == "out") {
    out = std::string(value);
  } else if (key == "interval-min") {
    const auto minutes = parse_number<std::int64_t>(key, value);
    if (minutes <= 0) throw UsageError("interval-min must be positive");
    p.interval_seconds = minutes * 60;
  } else if (key == "svd-rank") {
    p.svd_rank = parse_number<Eigen::Index>(key, value);
  } else if (key == "impl") {
    p.impl = parse_impl(value);
  } else if (key == "lr") {
    p.learning_rate = parse_number<double>(key, value);
  } else if (key == "batch") {
    p.batch_size = parse_number<int>(key, value);
  } else if (key == "epochs") {
    p.epochs = parse_number<int>(key, value);
  } else if (key == "seed") {
    p.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "jobs") {
    p.jobs = parse_number<int>(key, value);
  } else if (key == "fit-on-all") {
    p.fit_on_all = parse_bool(key, value);
  } else if (key == "bootstrap") {
    p.bootstrap = parse_bool(key, value);
  } else if (key == "save-models") {
    p.save_models = std::string(value);
  } else {
    throw UsageError("unknown configuration key '" + std::string(raw_key) + "'");
  }
  p.validate();
}

void RunConfig::validate() const { pipeline.validate(); }

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j = pipeline.to_json();
  j["root"] = root;
  j["events"] = events ? nlohmann::json(*events) : nlohmann::json(nullptr);
  return j;
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::string_view s = trim(line);
    if (s.empty() || s.front() == '#' || s.front() == '[') continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos)
      throw UsageError(path.string() + ":" + std::to_string(number) + ": expected key = value");
    std::string_view value = trim(s.substr(eq + 1));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
      value = value.substr(1, value.size() - 2);
    } else if (const auto hash = value.find(" #"); hash != std::string_view::npos) {
      value = trim(value.substr(0, hash));
    }
    // TOML arrays: events = ["a", "b"]
    std::string v(value);
    if (v.size() >= 2 && v.front() == '[' && v.back() == ']') {
      v = v.substr(1, v.size() - 2);
      std::erase(v, '"');
      std::erase(v, '\'');
    }
    out.emplace_back(std::string(trim(s.substr(0, eq))), v);
  }
  return out;
}

}  // namespace rumorts
