#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rumorts/ingest.hpp"

namespace rumorts {

/// Bucket width T in seconds.
struct IntervalConfig {
  std::int64_t interval_seconds = 3600;

  static IntervalConfig from_minutes(std::int64_t minutes) { return {minutes * 60}; }
  void validate() const;
};

/// Canonical bucket widths: 2, 5, 10, 30 and 60 minutes.
inline constexpr std::int64_t kCanonicalIntervals[] = {120, 300, 600, 1800, 3600};

/// Row-per-conversation feature matrix plus the metadata needed to split
/// by event. Before preprocessing the entries are reaction counts.
struct TimeSeriesDataset {
  Eigen::MatrixXd matrix;  // n_samples x seq_len
  std::vector<int> labels;
  std::vector<std::string> events;
  std::vector<std::string> ids;
  std::int64_t interval_seconds = 0;
  std::uint64_t source_hash = 0;

  Eigen::Index size() const { return matrix.rows(); }
  Eigen::Index seq_len() const { return matrix.cols(); }

  /// Rows at `rows`, in that order.
  TimeSeriesDataset select(std::span<const Eigen::Index> rows) const;
  /// Same metadata, replacement feature matrix (row count must match).
  TimeSeriesDataset with_matrix(Eigen::MatrixXd features) const;
  void check_consistent() const;
};

namespace timeseries {

/// N(c): number of T-wide buckets needed to reach the last reaction.
std::int64_t conversation_length(const Conversation& conv, IntervalConfig cfg);

/// Reactions x with a < x <= b for bucket k (1-based), a = source + (k-1)T.
std::int64_t interval_count(const Conversation& conv, IntervalConfig cfg, std::int64_t k);

/// V(c), length N(c).
std::vector<std::int64_t> vectorize(const Conversation& conv, IntervalConfig cfg);

/// Stacks V(c) for every conversation, right-padded to the longest one.
TimeSeriesDataset build_matrix(std::span<const Conversation> convs, IntervalConfig cfg);

/// Fraction of exactly-zero entries.
double sparsity(const TimeSeriesDataset& dataset);

/// CSV: optional `# ` comment lines, then `id,event,label,v1..vN`.
void write_csv(const TimeSeriesDataset& dataset, const std::filesystem::path& path,
               const std::vector<std::string>& comments = {});
TimeSeriesDataset read_csv(const std::filesystem::path& path);

struct CacheKey {
  std::uint64_t source_hash = 0;
  std::int64_t interval_seconds = 0;
  bool operator==(const CacheKey&) const = default;
};

void save_cache(const TimeSeriesDataset& dataset, const std::filesystem::path& path);
TimeSeriesDataset load_cache(const std::filesystem::path& path);
/// Header of a cache file, or nullopt if it is missing or not a cache.
std::optional<CacheKey> peek_cache_key(const std::filesystem::path& path);

}  // namespace timeseries
}  // namespace rumorts
