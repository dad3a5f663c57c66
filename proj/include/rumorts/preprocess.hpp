#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>

#include <Eigen/Dense>

#include "json.hpp"
#include "rumorts/timeseries.hpp"

namespace rumorts {

/// Top-k right singular vectors of an uncentred matrix.
struct SvdModel {
  Eigen::MatrixXd components;      // k x n_features, orthonormal rows
  Eigen::VectorXd singular_values;  // k, non-increasing

  Eigen::Index rank() const { return components.rows(); }
  Eigen::Index n_features() const { return components.cols(); }
};

struct SvdOptions {
  int oversampling = 8;
  int power_iterations = 2;
  // Extra subspace iterations run after the fixed ones until the captured
  // energy (sum of squared singular values) stops changing by more than
  // `energy_tolerance` relative. Zero disables refinement.
  int max_refinement_iterations = 200;
  double energy_tolerance = 1e-15;
  std::uint64_t seed = 0;
};

struct ScalerModel {
  Eigen::VectorXd min;
  Eigen::VectorXd max;
};

/// Per-class loss multipliers, index = class label.
struct ClassWeights {
  std::array<double, 2> weight{1.0, 1.0};

  double operator[](int label) const { return weight[static_cast<std::size_t>(label)]; }
};

/// Fitted SVD + scaler + weights, reusable on held-out rows.
struct PreprocessModel {
  SvdModel svd;
  ScalerModel scaler;
  ClassWeights weights;

  Eigen::MatrixXd transform(const Eigen::MatrixXd& counts) const;
  nlohmann::json sidecar() const;
  void save(const std::filesystem::path& blob, const std::filesystem::path& sidecar_json) const;
  static PreprocessModel load(const std::filesystem::path& blob);
};

namespace preprocess {

/// Default rank: min(32, seq_len - 1, n_train - 1), at least 1.
Eigen::Index default_svd_rank(Eigen::Index seq_len, Eigen::Index n_train);

/// Randomised range finder truncated SVD. Requires 1 <= k <= min(n, d) - 1.
SvdModel svd_fit(const Eigen::MatrixXd& matrix, Eigen::Index k, const SvdOptions& options = {});
Eigen::MatrixXd svd_transform(const SvdModel& model, const Eigen::MatrixXd& matrix);

ScalerModel minmax_fit(const Eigen::MatrixXd& matrix);
/// (x - min) / (max - min); constant columns map to 0. No clipping.
Eigen::MatrixXd minmax_transform(const ScalerModel& model, const Eigen::MatrixXd& matrix);

/// Drops every group of identical feature rows that carries both labels.
TimeSeriesDataset remove_conflicting_duplicates(const TimeSeriesDataset& dataset);

/// n_samples / (n_classes * count(c)). Both classes must be present.
ClassWeights class_weights(std::span<const int> labels);

}  // namespace preprocess
}  // namespace rumorts
