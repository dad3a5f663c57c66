#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "rumorts/ensemble.hpp"

namespace rumorts {

/// Everything one leave-one-event-out run depends on.
struct PipelineConfig {
  std::int64_t interval_seconds = 3600;
  Eigen::Index svd_rank = 0;  // 0: min(32, seq_len - 1, n_train - 1)
  ImplId impl = ImplId::I1;
  double learning_rate = 1e-5;
  int batch_size = 32;
  int epochs = 300;
  std::uint64_t seed = 0;
  bool fit_on_all = false;
  bool bootstrap = false;
  int jobs = 1;
  std::filesystem::path save_models;  // empty: do not write bundles

  void validate() const;
  nlohmann::json to_json() const;
};

/// Full experiment configuration, serialised into every report.
struct RunConfig {
  std::string root;
  std::optional<std::vector<std::string>> events;
  std::string out = "out";
  PipelineConfig pipeline;

  /// Applies one `key = value` setting; keys mirror the CLI flags without
  /// the leading dashes (`interval-min`, `lr`, `fit-on-all`, ...).
  void set(std::string_view key, std::string_view value);
  void validate() const;
  nlohmann::json to_json() const;
};

/// Parses a TOML-style file of `key = value` lines (`#` comments, optional
/// quotes around values).
std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path);

std::vector<std::string> split_list(std::string_view text);

}  // namespace rumorts
