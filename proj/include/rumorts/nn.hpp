#pragma once

// Small sequence-model engine: simple/LSTM/GRU recurrent layers (optionally
// bidirectional), dense, flatten and dropout layers, weighted softmax
// cross-entropy, Adam, and a finite-difference gradient checker.
//
// Activations are column-major batches: one (features x batch) matrix per
// time step. A non-sequence value is a Sequence of length 1.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "rumorts/random.hpp"

namespace rumorts::nn {

using Matrix = Eigen::MatrixXd;
using Sequence = std::vector<Matrix>;

struct Param {
  std::string name;
  Matrix value;
  Matrix grad;

  Param() = default;
  Param(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}
};

enum class CellKind { Simple, Lstm, Gru };
enum class Activation { Tanh, Sigmoid };

const char* to_string(CellKind kind);
const char* to_string(Activation act);

int gate_count(CellKind kind);

/// Weights of one recurrent cell. Gate blocks are stacked row-wise:
/// LSTM [input, forget, candidate, output], GRU [update, reset, candidate].
struct CellParams {
  CellKind kind = CellKind::Simple;
  Activation activation = Activation::Tanh;  // simple cells only
  Eigen::Index input_size = 0;
  Eigen::Index hidden_size = 0;
  Param W;  // (gates*hidden) x input
  Param U;  // (gates*hidden) x hidden
  Param b;  // (gates*hidden) x 1

  void check_shapes() const;
};

/// i.i.d. Uniform(lo, hi) entries.
Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, Rng& rng, double lo = -0.5, double hi = 0.5);

/// W and U from Uniform(-0.5, 0.5), zero bias.
CellParams make_cell(CellKind kind, Eigen::Index input_size, Eigen::Index hidden_size, Rng& rng,
                     Activation activation = Activation::Tanh);

Matrix simple_rnn_step(const CellParams& p, const Matrix& h_prev, const Matrix& x);

struct LstmState {
  Matrix h;
  Matrix c;
};
LstmState lstm_step(const CellParams& p, const Matrix& h_prev, const Matrix& c_prev, const Matrix& x);

/// h = (1 - z) * h_prev + z * candidate.
Matrix gru_step(const CellParams& p, const Matrix& h_prev, const Matrix& x);

/// Runs a cell from a zero state; returns every state or only the last.
Sequence sequence_run(const CellParams& p, const Sequence& input, bool return_sequences);

/// Per-step concatenation [forward_t; backward_t].
Sequence bidirectional_run(const CellParams& forward, const CellParams& backward, const Sequence& input);

class Layer {
 public:
  virtual ~Layer() = default;

  /// Training-path forward; keeps whatever backward() needs.
  virtual Sequence forward(const Sequence& input, bool training, Rng& rng) = 0;
  /// Accumulates parameter gradients and returns d(loss)/d(input).
  virtual Sequence backward(const Sequence& grad_output) = 0;
  /// Stateless evaluation-mode forward.
  virtual Sequence infer(const Sequence& input) const = 0;

  virtual std::vector<Param*> params() { return {}; }
  virtual std::vector<const Param*> params() const { return {}; }
  virtual nlohmann::json describe() const = 0;
};

class Recurrent final : public Layer {
 public:
  Recurrent(CellParams cell, bool return_sequences, bool reverse = false);

  Sequence forward(const Sequence& input, bool training, Rng& rng) override;
  Sequence backward(const Sequence& grad_output) override;
  Sequence infer(const Sequence& input) const override;
  std::vector<Param*> params() override;
  std::vector<const Param*> params() const override;
  nlohmann::json describe() const override;

  const CellParams& cell() const { return cell_; }
  CellParams& cell() { return cell_; }

 private:
  CellParams cell_;
  bool return_sequences_;
  bool reverse_;
  // Indexed by processing step s (input position s, or T-1-s when reversed).
  Sequence x_;
  Sequence h_;      // h_[0] zero, h_[s+1] after step s
  Sequence c_;      // LSTM cell state, same indexing
  Sequence gates_;  // post-activation gate values per step
};

class Bidirectional final : public Layer {
 public:
  Bidirectional(CellParams forward, CellParams backward, bool return_sequences);

  Sequence forward(const Sequence& input, bool training, Rng& rng) override;
  Sequence backward(const Sequence& grad_output) override;
  Sequence infer(const Sequence& input) const override;
  std::vector<Param*> params() override;
  std::vector<const Param*> params() const override;
  nlohmann::json describe() const override;

 private:
  Recurrent forward_;
  Recurrent backward_;
  Eigen::Index hidden_;
};

class Dense final : public Layer {
 public:
  Dense(Eigen::Index input_size, Eigen::Index output_size, Rng& rng);

  Sequence forward(const Sequence& input, bool training, Rng& rng) override;
  Sequence backward(const Sequence& grad_output) override;
  Sequence infer(const Sequence& input) const override;
  std::vector<Param*> params() override { return {&W_, &b_}; }
  std::vector<const Param*> params() const override { return {&W_, &b_}; }
  nlohmann::json describe() const override;

  Param& weight() { return W_; }
  Param& bias() { return b_; }

 private:
  Param W_;
  Param b_;
  Matrix x_;
};

class Flatten final : public Layer {
 public:
  Sequence forward(const Sequence& input, bool training, Rng& rng) override;
  Sequence backward(const Sequence& grad_output) override;
  Sequence infer(const Sequence& input) const override;
  nlohmann::json describe() const override { return {{"type", "flatten"}}; }

 private:
  Eigen::Index steps_ = 0;
  Eigen::Index width_ = 0;
};

/// Inverted dropout: survivors are scaled by 1 / (1 - rate) in training.
class Dropout final : public Layer {
 public:
  explicit Dropout(double rate);

  Sequence forward(const Sequence& input, bool training, Rng& rng) override;
  Sequence backward(const Sequence& grad_output) override;
  Sequence infer(const Sequence& input) const override { return input; }
  nlohmann::json describe() const override { return {{"type", "dropout"}, {"rate", rate_}}; }

 private:
  double rate_;
  Sequence masks_;
};

/// Single-matrix dropout; the returned mask already includes the scale.
Matrix dropout_forward(const Matrix& input, double rate, bool training, Rng& rng, Matrix* mask = nullptr);

/// Column-wise softmax.
Matrix softmax(const Matrix& logits);

struct LossResult {
  double loss = 0.0;  // mean over the batch of w_y * -log p_y
  Matrix grad;        // d(loss)/d(logits)
};

LossResult softmax_cross_entropy(const Matrix& logits, std::span<const int> labels,
                                 std::span<const double> sample_weights);

class Network {
 public:
  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

  Matrix forward(const Sequence& input, bool training, Rng& rng);
  void backward(const Matrix& grad_logits);
  Matrix infer(const Sequence& input) const;

  std::vector<Param*> params();
  std::vector<const Param*> params() const;
  void zero_grad();
  std::size_t parameter_count() const;

  const std::vector<std::unique_ptr<Layer>>& layers() const { return layers_; }
  nlohmann::json manifest() const;

  /// Versioned binary checkpoint: magic, manifest JSON, then every parameter.
  void save(std::ostream& out) const;
  /// Loads into an already-built network with the same topology.
  void load(std::istream& in);

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment accumulators and step counter for a fixed parameter list.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// Bias-corrected update; throws TrainingError on a non-finite gradient.
  void step(std::span<Param* const> params);

  std::int64_t steps() const { return step_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::int64_t step_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

/// Turns an (n_samples x length) feature block into `length` steps of 1 x n.
Sequence rows_to_sequence(const Matrix& rows);

struct GradCheckOptions {
  double epsilon = 1e-5;
  // Relative error is |a - n| / max(|a|, |n|, denominator_floor).
  double denominator_floor = 1e-6;
  // When set, dropout layers run in training mode with masks drawn from a
  // fresh Rng(seed) on every evaluation, so they are identical each time.
  bool training_mode = false;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::string worst_param;
};

/// Compares backprop gradients against central differences of the loss.
GradCheckResult gradient_check(Network& net, const Sequence& input, std::span<const int> labels,
                               std::span<const double> sample_weights, const GradCheckOptions& options = {});

}  // namespace rumorts::nn
