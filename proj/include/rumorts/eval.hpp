#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "rumorts/config.hpp"
#include "rumorts/ingest.hpp"
#include "rumorts/preprocess.hpp"
#include "rumorts/timeseries.hpp"

namespace rumorts {

/// One-vs-rest counts for classes 0 and 1.
struct ConfusionCounts {
  std::array<std::int64_t, 2> tp{0, 0};
  std::array<std::int64_t, 2> fp{0, 0};
  std::array<std::int64_t, 2> fn{0, 0};
  std::array<std::int64_t, 2> tn{0, 0};
  std::array<bool, 2> present{false, false};  // class occurs in labels or predictions

  bool operator==(const ConfusionCounts&) const = default;
};

struct Scores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct FoldResult {
  std::string event;
  bool ok = false;
  std::string error;
  ConfusionCounts counts;
  Scores micro;
  Scores macro;
  std::int64_t n_train = 0;
  std::int64_t n_train_kept = 0;  // after conflicting-duplicate removal
  std::int64_t n_test = 0;
  Eigen::Index svd_rank = 0;
  ClassWeights weights;
};

struct EvalReport {
  std::vector<FoldResult> folds;
  Scores mean_micro;
  Scores mean_macro;
  std::size_t folds_used = 0;
  std::int64_t seq_len = 0;
  nlohmann::json config;

  nlohmann::json to_json() const;
  /// `event,microP,microR,microF1,macroP,macroR,macroF1`, one row per fold
  /// plus a `mean` row, preceded by `# ` lines carrying the config.
  std::string to_csv() const;
};

namespace eval {

ConfusionCounts confusion(std::span<const int> labels, std::span<const int> predictions);

/// Unweighted means of per-class precision and recall over the classes
/// present, combined as 2PR / (P + R). Zero denominators give 0.
Scores macro_scores(const ConfusionCounts& counts);

/// Precision and recall from TP, FP, FN summed over the present classes.
Scores micro_scores(const ConfusionCounts& counts);

/// Holds out each event in turn, fitting preprocessing on the remaining
/// events and training a fresh ensemble per fold.
EvalReport leave_one_event_out(const TimeSeriesDataset& dataset, const PipelineConfig& config);
EvalReport leave_one_event_out(const RawDataset& raw, const PipelineConfig& config);

/// Fold result for one held-out event (exposed for leakage tests).
FoldResult run_fold(const TimeSeriesDataset& dataset, const std::string& held_out, const PipelineConfig& config,
                    PreprocessModel* fitted = nullptr);

struct SynthSpec {
  int events = 3;
  int per_event = 120;
  double rumor_fraction = 0.5;
  // 1: every rumour reaction follows the early burst; 0: rumours look like
  // non-rumours (uniform over the horizon).
  double separation = 1.0;
  int min_reactions = 8;
  int max_reactions = 24;
  double burst_mean_seconds = 60.0;
  double horizon_seconds = 6.0 * 3600.0;
  std::int64_t start_time = 1420070400;  // 2015-01-01T00:00:00Z
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
};

RawDataset generate_synthetic_corpus(const SynthSpec& spec);

}  // namespace eval
}  // namespace rumorts
