#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "rumorts/nn.hpp"
#include "rumorts/preprocess.hpp"

namespace rumorts {

struct RecurrentLayerSpec {
  nn::CellKind cell = nn::CellKind::Simple;
  int units = 0;  // 0: floor((seq_len + 2) / 2), resolved at build time
};

/// Architecture of one named base learner.
struct LearnerSpec {
  std::string name;
  std::vector<RecurrentLayerSpec> layers;
  bool bidirectional = false;
  double dropout_rate = 0.0;  // applied after every recurrent layer
  nn::Activation hidden_activation = nn::Activation::Tanh;
  bool flatten_before_output = false;

  nlohmann::json to_json() const;
};

struct TrainConfig {
  double learning_rate = 1e-5;
  int batch_size = 32;
  int epochs = 300;
  std::uint64_t seed = 0;
  ClassWeights class_weights;

  void validate() const;
};

struct TrainedLearner {
  LearnerSpec spec;
  Eigen::Index seq_len = 0;
  std::uint64_t seed = 0;
  nn::Network network;
  std::vector<double> loss_history;  // mean weighted loss per epoch
  int epochs_run = 0;

  double final_loss() const { return loss_history.empty() ? 0.0 : loss_history.back(); }
  /// Serialised parameters, used for checkpoints and bit-identity checks.
  std::string checkpoint() const;
};

struct Prediction {
  int label = 0;
  std::array<double, 2> probabilities{0.5, 0.5};
};

namespace models {

/// Every learner name accepted by learner_spec().
const std::vector<std::string>& learner_names();

/// Configuration of a named learner (RNN_1, GRU_2, BiLSTM_1, LG_1, ...).
LearnerSpec learner_spec(std::string_view name);

/// Hidden units of the single-layer learners: floor((seq_len + 2) / 2).
Eigen::Index shallow_units(Eigen::Index seq_len);

/// Untrained network for inputs of `seq_len` one-feature time steps.
nn::Network build_learner(const LearnerSpec& spec, Eigen::Index seq_len, Rng& rng);

/// Mini-batch Adam training with class-weighted loss. The rng drives
/// per-epoch shuffling and dropout masks.
TrainedLearner train(const LearnerSpec& spec, nn::Network network, const Eigen::MatrixXd& features,
                     std::span<const int> labels, const TrainConfig& cfg, Rng& rng);

/// Builds from Rng(cfg.seed) and trains with the same stream.
TrainedLearner fit(const LearnerSpec& spec, const Eigen::MatrixXd& features, std::span<const int> labels,
                   const TrainConfig& cfg);

/// Argmax of the softmax output; exact ties go to class 0.
Prediction predict(const TrainedLearner& learner, const Eigen::RowVectorXd& sample);
std::vector<Prediction> predict_batch(const TrainedLearner& learner, const Eigen::MatrixXd& samples);

}  // namespace models
}  // namespace rumorts
