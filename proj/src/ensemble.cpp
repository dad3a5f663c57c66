#include "rumorts/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <exception>
#include <fstream>
#include <optional>
#include <thread>

#include "rumorts/error.hpp"

namespace fs = std::filesystem;

namespace rumorts {

const char* to_string(ImplId id) {
  switch (id) {
    case ImplId::I1: return "I1";
    case ImplId::I2: return "I2";
    case ImplId::I3: return "I3";
  }
  return "?";
}

ImplId parse_impl(std::string_view text) {
  std::string key;
  for (const char c : text) {
    if (c != '-' && c != '_') key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (key == "i1") return ImplId::I1;
  if (key == "i2") return ImplId::I2;
  if (key == "i3") return ImplId::I3;
  throw UsageError("unknown ensemble implementation '" + std::string(text) + "' (expected i1, i2 or i3)");
}

namespace ensemble {

EnsembleSpec ensemble_spec(ImplId id) {
  static const std::array<std::array<const char*, kEnsembleSize>, 3> kMembers = {{
      {"BiGRU_1", "BiLSTM_1", "GRU_1", "LSTM_1", "LG_1", "RNN_1"},
      {"RNN_1", "RNN_2", "RNN_3", "GRU_1", "GRU_2", "GRU_3"},
      {"RNN_1", "RNN_2", "RNN_3", "LSTM_1", "LSTM_2", "LSTM_3"},
  }};
  EnsembleSpec spec;
  spec.id = id;
  const auto& names = kMembers[static_cast<std::size_t>(id)];
  for (std::size_t i = 0; i < kEnsembleSize; ++i) spec.members[i] = models::learner_spec(names[i]);
  return spec;
}

int majority_vote(std::span<const int> votes) {
  if (votes.empty()) throw UsageError("majority vote over zero predictions");
  std::size_t ones = 0;
  for (const int v : votes) {
    if (v != 0 && v != 1) throw UsageError("votes must be 0 or 1");
    ones += static_cast<std::size_t>(v);
  }
  return ones >= votes.size() / 2 + 1 ? 1 : 0;
}

TrainedEnsemble train_ensemble(const EnsembleSpec& spec, const Eigen::MatrixXd& features, std::span<const int> labels,
                               const TrainConfig& cfg, const EnsembleTrainOptions& options) {
  cfg.validate();
  TrainedEnsemble out;
  out.spec = spec;
  out.config = cfg;

  std::vector<std::optional<TrainedLearner>> trained(kEnsembleSize);
  std::vector<std::exception_ptr> failures(kEnsembleSize);

  auto train_member = [&](std::size_t i) {
    const LearnerSpec& member = spec.members[i];
    TrainConfig member_cfg = cfg;
    member_cfg.seed = cfg.seed + i;
    try {
      if (!options.bootstrap) {
        trained[i] = models::fit(member, features, labels, member_cfg);
        return;
      }
      Rng sampler(member_cfg.seed ^ 0xb0075ULL);
      const auto n = static_cast<std::uint64_t>(features.rows());
      Eigen::MatrixXd x(features.rows(), features.cols());
      std::vector<int> y(labels.size());
      for (std::uint64_t r = 0; r < n; ++r) {
        const auto pick = static_cast<Eigen::Index>(sampler.below(n));
        x.row(static_cast<Eigen::Index>(r)) = features.row(pick);
        y[r] = labels[static_cast<std::size_t>(pick)];
      }
      trained[i] = models::fit(member, x, y, member_cfg);
    } catch (const TrainingError& e) {
      failures[i] = std::make_exception_ptr(TrainingError(member.name + ": " + e.what()));
    } catch (const DataError& e) {
      failures[i] = std::make_exception_ptr(DataError(member.name + ": " + e.what()));
    } catch (const UsageError& e) {
      failures[i] = std::make_exception_ptr(UsageError(member.name + ": " + e.what()));
    } catch (...) {
      failures[i] = std::current_exception();
    }
  };

  const auto workers = static_cast<std::size_t>(std::clamp(options.jobs, 1, static_cast<int>(kEnsembleSize)));
  if (workers == 1) {
    for (std::size_t i = 0; i < kEnsembleSize; ++i) train_member(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < kEnsembleSize; i = next++) train_member(i);
      });
    }
  }

  for (std::size_t i = 0; i < kEnsembleSize; ++i) {
    if (failures[i]) std::rethrow_exception(failures[i]);
    out.members.push_back(std::move(*trained[i]));
  }
  return out;
}

std::vector<std::array<int, kEnsembleSize>> member_votes(const TrainedEnsemble& ens, const Eigen::MatrixXd& samples) {
  if (ens.members.size() != kEnsembleSize) throw UsageError("ensemble must have six trained members");
  std::vector<std::array<int, kEnsembleSize>> votes(static_cast<std::size_t>(samples.rows()));
  for (std::size_t m = 0; m < kEnsembleSize; ++m) {
    const auto preds = models::predict_batch(ens.members[m], samples);
    for (std::size_t r = 0; r < preds.size(); ++r) votes[r][m] = preds[r].label;
  }
  return votes;
}

std::vector<int> predict_ensemble(const TrainedEnsemble& ens, const Eigen::MatrixXd& samples) {
  std::vector<int> out;
  for (const auto& row : member_votes(ens, samples)) out.push_back(majority_vote(row));
  return out;
}

void save_bundle(const TrainedEnsemble& ens, const fs::path& dir, const nlohmann::json& extra) {
  fs::create_directories(dir);
  nlohmann::json members = nlohmann::json::array();
  for (std::size_t i = 0; i < ens.members.size(); ++i) {
    const auto& m = ens.members[i];
    const std::string file = "member_" + std::to_string(i) + ".ckpt";
    std::ofstream out(dir / file, std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / file).string());
    m.network.save(out);
    members.push_back({{"file", file},
                       {"spec", m.spec.to_json()},
                       {"seed", m.seed},
                       {"seq_len", m.seq_len},
                       {"epochs_run", m.epochs_run},
                       {"final_loss", m.final_loss()},
                       {"network", m.network.manifest()}});
  }
  nlohmann::json manifest = {
      {"format", "rumorts-ensemble"},
      {"version", 1},
      {"impl", to_string(ens.spec.id)},
      {"config",
       {{"learning_rate", ens.config.learning_rate},
        {"batch_size", ens.config.batch_size},
        {"epochs", ens.config.epochs},
        {"seed", ens.config.seed},
        {"class_weights", {ens.config.class_weights.weight[0], ens.config.class_weights.weight[1]}}}},
      {"dropout_placement", "after every recurrent layer"},
      {"lg_order", "lstm->gru"},
      {"members", members}};
  if (!extra.is_null()) manifest["extra"] = extra;
  std::ofstream out(dir / "manifest.json");
  if (!out) throw DataError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

TrainedEnsemble load_bundle(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw DataError("cannot open " + (dir / "manifest.json").string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed ensemble manifest: ") + e.what());
  }
  TrainedEnsemble ens;
  ens.spec = ensemble_spec(parse_impl(manifest.at("impl").get<std::string>()));
  const auto& cfg = manifest.at("config");
  ens.config.learning_rate = cfg.at("learning_rate").get<double>();
  ens.config.batch_size = cfg.at("batch_size").get<int>();
  ens.config.epochs = cfg.at("epochs").get<int>();
  ens.config.seed = cfg.at("seed").get<std::uint64_t>();
  ens.config.class_weights.weight = {cfg.at("class_weights")[0].get<double>(), cfg.at("class_weights")[1].get<double>()};
  const auto& members = manifest.at("members");
  if (members.size() != kEnsembleSize) throw DataError("ensemble manifest must list six members");
  for (std::size_t i = 0; i < kEnsembleSize; ++i) {
    const auto& entry = members[i];
    TrainedLearner m;
    m.spec = ens.spec.members[i];
    m.seed = entry.at("seed").get<std::uint64_t>();
    m.seq_len = entry.at("seq_len").get<Eigen::Index>();
    m.epochs_run = entry.at("epochs_run").get<int>();
    Rng scratch(0);
    m.network = models::build_learner(m.spec, m.seq_len, scratch);
    std::ifstream ckpt(dir / entry.at("file").get<std::string>(), std::ios::binary);
    if (!ckpt) throw DataError("missing checkpoint " + entry.at("file").get<std::string>());
    m.network.load(ckpt);
    ens.members.push_back(std::move(m));
  }
  return ens;
}

}  // namespace ensemble
}  // namespace rumorts
