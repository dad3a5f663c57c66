#include "rumorts/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "rumorts/error.hpp"

namespace rumorts {
namespace {

double ratio(std::int64_t num, std::int64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double harmonic(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

nlohmann::json scores_json(const Scores& s) {
  return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

Scores mean_of(const std::vector<FoldResult>& folds, Scores FoldResult::*field) {
  Scores m;
  std::size_t n = 0;
  for (const auto& f : folds) {
    if (!f.ok) continue;
    m.precision += (f.*field).precision;
    m.recall += (f.*field).recall;
    m.f1 += (f.*field).f1;
    ++n;
  }
  if (n > 0) {
    m.precision /= static_cast<double>(n);
    m.recall /= static_cast<double>(n);
    m.f1 /= static_cast<double>(n);
  }
  return m;
}

}  // namespace

nlohmann::json EvalReport::to_json() const {
  nlohmann::json folds_json = nlohmann::json::array();
  for (const auto& f : folds) {
    nlohmann::json j = {{"event", f.event}, {"ok", f.ok}};
    if (!f.ok) {
      j["error"] = f.error;
    } else {
      j["micro"] = scores_json(f.micro);
      j["macro"] = scores_json(f.macro);
      j["confusion"] = {{"tp", f.counts.tp}, {"fp", f.counts.fp}, {"fn", f.counts.fn}, {"tn", f.counts.tn}};
      j["n_train"] = f.n_train;
      j["n_train_kept"] = f.n_train_kept;
      j["n_test"] = f.n_test;
      j["svd_rank"] = f.svd_rank;
      j["class_weights"] = f.weights.weight;
    }
    folds_json.push_back(std::move(j));
  }
  return {{"config", config},
          {"seq_len", seq_len},
          {"folds", folds_json},
          {"folds_used", folds_used},
          {"mean", {{"micro", scores_json(mean_micro)}, {"macro", scores_json(mean_macro)}}}};
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out << "# config " << config.dump() << "\n";
  out << "# seq_len " << seq_len << "\n";
  for (const auto& f : folds)
    if (!f.ok) out << "# failed " << f.event << ": " << f.error << "\n";
  out << "event,microP,microR,microF1,macroP,macroR,macroF1\n";
  auto row = [&](const std::string& name, const Scores& mi, const Scores& ma) {
    out << name << ',' << fmt(mi.precision) << ',' << fmt(mi.recall) << ',' << fmt(mi.f1) << ',' << fmt(ma.precision)
        << ',' << fmt(ma.recall) << ',' << fmt(ma.f1) << "\n";
  };
  for (const auto& f : folds)
    if (f.ok) row(f.event, f.micro, f.macro);
  row("mean", mean_micro, mean_macro);
  return out.str();
}

namespace eval {

ConfusionCounts confusion(std::span<const int> labels, std::span<const int> predictions) {
  if (labels.size() != predictions.size())
    throw ShapeError("confusion: " + std::to_string(labels.size()) + " labels vs " +
                     std::to_string(predictions.size()) + " predictions");
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    const int p = predictions[i];
    if ((y != 0 && y != 1) || (p != 0 && p != 1)) throw DataError("confusion: labels must be 0 or 1");
    c.present[static_cast<std::size_t>(y)] = true;
    c.present[static_cast<std::size_t>(p)] = true;
    for (int k = 0; k < 2; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      if (y == k && p == k) ++c.tp[ks];
      else if (y != k && p == k) ++c.fp[ks];
      else if (y == k && p != k) ++c.fn[ks];
      else ++c.tn[ks];
    }
  }
  return c;
}

Scores macro_scores(const ConfusionCounts& c) {
  Scores s;
  int n = 0;
  for (std::size_t k = 0; k < 2; ++k) {
    if (!c.present[k]) continue;
    s.precision += ratio(c.tp[k], c.tp[k] + c.fp[k]);
    s.recall += ratio(c.tp[k], c.tp[k] + c.fn[k]);
    ++n;
  }
  if (n == 0) return s;
  s.precision /= n;
  s.recall /= n;
  s.f1 = harmonic(s.precision, s.recall);
  return s;
}

Scores micro_scores(const ConfusionCounts& c) {
  std::int64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t k = 0; k < 2; ++k) {
    if (!c.present[k]) continue;
    tp += c.tp[k];
    fp += c.fp[k];
    fn += c.fn[k];
  }
  Scores s;
  s.precision = ratio(tp, tp + fp);
  s.recall = ratio(tp, tp + fn);
  s.f1 = harmonic(s.precision, s.recall);
  return s;
}

FoldResult run_fold(const TimeSeriesDataset& dataset, const std::string& held_out, const PipelineConfig& config,
                    PreprocessModel* fitted) {
  config.validate();
  dataset.check_consistent();

  std::vector<Eigen::Index> train_rows, test_rows;
  for (Eigen::Index i = 0; i < dataset.size(); ++i)
    (dataset.events[static_cast<std::size_t>(i)] == held_out ? test_rows : train_rows).push_back(i);
  if (test_rows.empty()) throw UsageError("event '" + held_out + "' has no conversations");
  if (train_rows.empty()) throw DataError("no training conversations outside '" + held_out + "'");

  const TimeSeriesDataset train = dataset.select(train_rows);
  const TimeSeriesDataset test = dataset.select(test_rows);

  FoldResult r;
  r.event = held_out;
  r.n_train = train.size();
  r.n_test = test.size();

  const Eigen::MatrixXd& fit_matrix = config.fit_on_all ? dataset.matrix : train.matrix;
  const Eigen::Index k =
      config.svd_rank > 0 ? config.svd_rank : preprocess::default_svd_rank(dataset.seq_len(), fit_matrix.rows());
  SvdOptions svd_options;
  svd_options.seed = config.seed;

  PreprocessModel model;
  model.svd = preprocess::svd_fit(fit_matrix, k, svd_options);
  model.scaler = preprocess::minmax_fit(preprocess::svd_transform(model.svd, fit_matrix));
  r.svd_rank = k;

  const TimeSeriesDataset kept = preprocess::remove_conflicting_duplicates(train.with_matrix(model.transform(train.matrix)));
  const Eigen::MatrixXd test_x = model.transform(test.matrix);
  r.n_train_kept = kept.size();
  model.weights = preprocess::class_weights(kept.labels);
  r.weights = model.weights;

  TrainConfig tc;
  tc.learning_rate = config.learning_rate;
  tc.batch_size = config.batch_size;
  tc.epochs = config.epochs;
  tc.seed = config.seed;
  tc.class_weights = model.weights;
  EnsembleTrainOptions options;
  options.bootstrap = config.bootstrap;
  options.jobs = config.jobs;

  const TrainedEnsemble ens = ensemble::train_ensemble(ensemble::ensemble_spec(config.impl), kept.matrix, kept.labels,
                                                       tc, options);
  const std::vector<int> predictions = ensemble::predict_ensemble(ens, test_x);

  r.counts = confusion(test.labels, predictions);
  r.micro = micro_scores(r.counts);
  r.macro = macro_scores(r.counts);
  r.ok = true;

  if (!config.save_models.empty()) {
    const auto dir = config.save_models / ("fold_" + held_out);
    ensemble::save_bundle(ens, dir, {{"held_out", held_out}, {"config", config.to_json()}});
    model.save(dir / "preprocess.bin", dir / "preprocess.json");
  }
  if (fitted) *fitted = std::move(model);
  return r;
}

EvalReport leave_one_event_out(const TimeSeriesDataset& dataset, const PipelineConfig& config) {
  config.validate();
  dataset.check_consistent();
  const std::set<std::string> distinct(dataset.events.begin(), dataset.events.end());
  const std::vector<std::string> events(distinct.begin(), distinct.end());
  if (events.size() < 2) throw DataError("leave-one-event-out needs at least two events");

  std::vector<FoldResult> folds(events.size());
  std::vector<std::exception_ptr> failures(events.size());

  // Folds run concurrently when jobs allow it; each ensemble then trains serially.
  const auto workers = static_cast<std::size_t>(std::clamp<std::size_t>(static_cast<std::size_t>(config.jobs), 1, events.size()));
  PipelineConfig fold_config = config;
  if (workers > 1) fold_config.jobs = 1;

  auto run = [&](std::size_t i) {
    try {
      folds[i] = run_fold(dataset, events[i], fold_config);
    } catch (const Error& e) {
      folds[i].event = events[i];
      folds[i].ok = false;
      folds[i].error = e.what();
      failures[i] = std::current_exception();
    }
  };
  if (workers == 1) {
    for (std::size_t i = 0; i < events.size(); ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < events.size(); i = next++) run(i);
      });
  }

  EvalReport report;
  report.folds = std::move(folds);
  report.seq_len = dataset.seq_len();
  report.config = config.to_json();
  report.folds_used = static_cast<std::size_t>(std::count_if(report.folds.begin(), report.folds.end(),
                                                             [](const FoldResult& f) { return f.ok; }));
  if (report.folds_used == 0) std::rethrow_exception(failures.front());
  report.mean_micro = mean_of(report.folds, &FoldResult::micro);
  report.mean_macro = mean_of(report.folds, &FoldResult::macro);
  return report;
}

EvalReport leave_one_event_out(const RawDataset& raw, const PipelineConfig& config) {
  config.validate();
  const IntervalConfig interval{config.interval_seconds};
  return leave_one_event_out(timeseries::build_matrix(raw.conversations, interval), config);
}

}  // namespace eval
}  // namespace rumorts
