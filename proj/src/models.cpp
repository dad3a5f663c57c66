#include "rumorts/models.hpp"

#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "rumorts/error.hpp"

namespace rumorts {

using nn::Activation;
using nn::CellKind;

nlohmann::json LearnerSpec::to_json() const {
  nlohmann::json layer_list = nlohmann::json::array();
  for (const auto& l : layers)
    layer_list.push_back({{"cell", nn::to_string(l.cell)}, {"units", l.units == 0 ? nlohmann::json("auto") : nlohmann::json(l.units)}});
  return {{"name", name},
          {"layers", layer_list},
          {"bidirectional", bidirectional},
          {"dropout", dropout_rate},
          {"hidden_activation", nn::to_string(hidden_activation)},
          {"flatten", flatten_before_output}};
}

void TrainConfig::validate() const {
  if (!std::isfinite(learning_rate) || learning_rate < 0.0)
    throw UsageError("learning rate must be a finite non-negative number");
  if (batch_size < 1) throw UsageError("batch size must be at least 1");
  if (epochs < 0) throw UsageError("epochs must be non-negative");
  for (const double w : class_weights.weight) {
    if (!(w > 0.0) || !std::isfinite(w)) throw UsageError("class weights must be positive");
  }
}

std::string TrainedLearner::checkpoint() const {
  std::ostringstream out(std::ios::binary);
  network.save(out);
  return out.str();
}

namespace models {
namespace {

const std::map<std::string, LearnerSpec, std::less<>>& registry() {
  static const auto specs = [] {
    std::map<std::string, LearnerSpec, std::less<>> m;
    auto add = [&](LearnerSpec s) { m.emplace(s.name, std::move(s)); };
    const std::vector<int> widening = {16, 32, 64};
    const std::vector<int> narrowing = {64, 32};
    for (const auto& [prefix, cell] :
         {std::pair<std::string, CellKind>{"RNN", CellKind::Simple}, {"GRU", CellKind::Gru}, {"LSTM", CellKind::Lstm}}) {
      LearnerSpec shallow{prefix + "_1", {{cell, 0}}, false, 0.0, Activation::Tanh, false};
      if (cell == CellKind::Simple) shallow.hidden_activation = Activation::Sigmoid;
      add(shallow);

      LearnerSpec deep2{prefix + "_2", {}, false, 0.25, Activation::Tanh, false};
      for (int u : widening) deep2.layers.push_back({cell, u});
      add(deep2);

      LearnerSpec deep3{prefix + "_3", {}, false, 0.25, Activation::Tanh, false};
      for (int u : narrowing) deep3.layers.push_back({cell, u});
      add(deep3);
    }
    add({"BiGRU_1", {{CellKind::Gru, 0}}, true, 0.0, Activation::Tanh, true});
    add({"BiLSTM_1", {{CellKind::Lstm, 0}}, true, 0.0, Activation::Tanh, true});
    add({"LG_1", {{CellKind::Lstm, 0}, {CellKind::Gru, 0}}, false, 0.0, Activation::Tanh, false});
    return m;
  }();
  return specs;
}

}  // namespace

const std::vector<std::string>& learner_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, spec] : registry()) out.push_back(name);
    return out;
  }();
  return names;
}

LearnerSpec learner_spec(std::string_view name) {
  const auto it = registry().find(name);
  if (it == registry().end()) throw UsageError("unknown learner '" + std::string(name) + "'");
  return it->second;
}

Eigen::Index shallow_units(Eigen::Index seq_len) { return (seq_len + 2) / 2; }

nn::Network build_learner(const LearnerSpec& spec, Eigen::Index seq_len, Rng& rng) {
  if (seq_len < 1) throw UsageError("sequence length must be at least 1");
  if (spec.layers.empty()) throw UsageError("learner '" + spec.name + "' has no recurrent layers");

  nn::Network net;
  Eigen::Index width = 1;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& layer = spec.layers[i];
    const Eigen::Index units = layer.units > 0 ? layer.units : shallow_units(seq_len);
    const bool last = i + 1 == spec.layers.size();
    const bool return_sequences = !last || spec.flatten_before_output;
    if (spec.bidirectional) {
      auto fwd = nn::make_cell(layer.cell, width, units, rng, spec.hidden_activation);
      auto bwd = nn::make_cell(layer.cell, width, units, rng, spec.hidden_activation);
      net.add(std::make_unique<nn::Bidirectional>(std::move(fwd), std::move(bwd), return_sequences));
      width = 2 * units;
    } else {
      net.add(std::make_unique<nn::Recurrent>(nn::make_cell(layer.cell, width, units, rng, spec.hidden_activation),
                                              return_sequences));
      width = units;
    }
    if (spec.dropout_rate > 0.0) net.add(std::make_unique<nn::Dropout>(spec.dropout_rate));
  }
  if (spec.flatten_before_output) {
    net.add(std::make_unique<nn::Flatten>());
    width *= seq_len;
  }
  net.add(std::make_unique<nn::Dense>(width, 2, rng));
  return net;
}

TrainedLearner train(const LearnerSpec& spec, nn::Network network, const Eigen::MatrixXd& features,
                     std::span<const int> labels, const TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(features.rows());
  if (n == 0) throw DataError("cannot train on an empty dataset");
  if (labels.size() != n) throw ShapeError("feature rows and labels differ in length");
  bool seen[2] = {false, false};
  for (const int y : labels) {
    if (y != 0 && y != 1) throw DataError("labels must be 0 or 1");
    seen[y] = true;
  }
  if (!seen[0] || !seen[1]) throw DataError("training data must contain both classes");

  TrainedLearner out;
  out.spec = spec;
  out.seq_len = features.cols();
  out.seed = cfg.seed;

  nn::Adam adam({.learning_rate = cfg.learning_rate});
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  std::vector<int> yb;
  std::vector<double> wb;
  Eigen::MatrixXd xb;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t size = std::min(batch, n - start);
      xb.resize(static_cast<Eigen::Index>(size), features.cols());
      yb.resize(size);
      wb.resize(size);
      for (std::size_t k = 0; k < size; ++k) {
        const auto row = order[start + k];
        xb.row(static_cast<Eigen::Index>(k)) = features.row(row);
        yb[k] = labels[static_cast<std::size_t>(row)];
        wb[k] = cfg.class_weights[yb[k]];
      }
      network.zero_grad();
      const auto logits = network.forward(nn::rows_to_sequence(xb), true, rng);
      const auto loss = nn::softmax_cross_entropy(logits, yb, wb);
      if (!std::isfinite(loss.loss))
        throw TrainingError(spec.name + ": non-finite loss at epoch " + std::to_string(epoch));
      network.backward(loss.grad);
      const auto params = network.params();
      try {
        adam.step(params);
      } catch (const TrainingError& e) {
        throw TrainingError(spec.name + ": " + e.what() + " at epoch " + std::to_string(epoch));
      }
      epoch_loss += loss.loss * static_cast<double>(size);
    }
    out.loss_history.push_back(epoch_loss / static_cast<double>(n));
    out.epochs_run = epoch;
  }
  out.network = std::move(network);
  return out;
}

TrainedLearner fit(const LearnerSpec& spec, const Eigen::MatrixXd& features, std::span<const int> labels,
                   const TrainConfig& cfg) {
  Rng rng(cfg.seed);
  auto net = build_learner(spec, features.cols(), rng);
  return train(spec, std::move(net), features, labels, cfg, rng);
}

std::vector<Prediction> predict_batch(const TrainedLearner& learner, const Eigen::MatrixXd& samples) {
  if (samples.cols() != learner.seq_len)
    throw ShapeError("sample length " + std::to_string(samples.cols()) + " differs from trained length " +
                     std::to_string(learner.seq_len));
  std::vector<Prediction> out;
  if (samples.rows() == 0) return out;
  const Eigen::MatrixXd probs = nn::softmax(learner.network.infer(nn::rows_to_sequence(samples)));
  out.reserve(static_cast<std::size_t>(samples.rows()));
  for (Eigen::Index j = 0; j < probs.cols(); ++j) {
    Prediction p;
    p.probabilities = {probs(0, j), probs(1, j)};
    p.label = probs(1, j) > probs(0, j) ? 1 : 0;
    out.push_back(p);
  }
  return out;
}

Prediction predict(const TrainedLearner& learner, const Eigen::RowVectorXd& sample) {
  return predict_batch(learner, Eigen::MatrixXd(sample)).front();
}

}  // namespace models
}  // namespace rumorts
