#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "rumorts/models.hpp"

namespace rumorts {

enum class ImplId { I1, I2, I3 };

const char* to_string(ImplId id);
/// Accepts "i1", "I1", "I-1" and friends.
ImplId parse_impl(std::string_view text);

inline constexpr std::size_t kEnsembleSize = 6;

struct EnsembleSpec {
  ImplId id = ImplId::I1;
  std::array<LearnerSpec, kEnsembleSize> members;
};

struct EnsembleTrainOptions {
  // Each member sees a bootstrap resample of the training rows instead of
  // the full set.
  bool bootstrap = false;
  // Upper bound on members trained concurrently.
  int jobs = 1;
};

struct TrainedEnsemble {
  EnsembleSpec spec;
  TrainConfig config;
  std::vector<TrainedLearner> members;
};

namespace ensemble {

EnsembleSpec ensemble_spec(ImplId id);

/// 1 iff the number of 1-votes is at least floor(n/2) + 1.
int majority_vote(std::span<const int> votes);

/// Trains every member on the same rows; member i is seeded with
/// cfg.seed + i.
TrainedEnsemble train_ensemble(const EnsembleSpec& spec, const Eigen::MatrixXd& features,
                               std::span<const int> labels, const TrainConfig& cfg,
                               const EnsembleTrainOptions& options = {});

/// Member votes, one row per sample and one column per member.
std::vector<std::array<int, kEnsembleSize>> member_votes(const TrainedEnsemble& ens, const Eigen::MatrixXd& samples);

std::vector<int> predict_ensemble(const TrainedEnsemble& ens, const Eigen::MatrixXd& samples);

/// Directory with member_<i>.ckpt files and manifest.json.
void save_bundle(const TrainedEnsemble& ens, const std::filesystem::path& dir, const nlohmann::json& extra = {});
TrainedEnsemble load_bundle(const std::filesystem::path& dir);

}  // namespace ensemble
}  // namespace rumorts
