// Command-line front end over the C API.
#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rumorts/rumorts.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Failure {
  rts_status status;
  std::string message;
};

void check(rts_status s, const std::string& context = {}) {
  if (s != RTS_OK) throw Failure{s, (context.empty() ? "" : context + ": ") + rts_last_error()};
}

struct DatasetDel { void operator()(rts_dataset* p) const { rts_dataset_free(p); } };
struct VectorsDel { void operator()(rts_vectors* p) const { rts_vectors_free(p); } };
struct ConfigDel { void operator()(rts_config* p) const { rts_config_free(p); } };
struct ReportDel { void operator()(rts_report* p) const { rts_report_free(p); } };
using Dataset = std::unique_ptr<rts_dataset, DatasetDel>;
using Vectors = std::unique_ptr<rts_vectors, VectorsDel>;
using Config = std::unique_ptr<rts_config, ConfigDel>;
using Report = std::unique_ptr<rts_report, ReportDel>;

std::string take(char* s) {
  std::string out(s ? s : "");
  rts_string_free(s);
  return out;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Failure{RTS_ERR_DATA, "cannot write " + path.string()};
  out << text;
}

std::string minutes_label(std::int64_t seconds) {
  return seconds % 60 == 0 ? std::to_string(seconds / 60) : std::to_string(seconds) + "s";
}

// Options shared by every subcommand that reads a configuration. Values are
// kept as strings and forwarded to rts_config_set only when given, so the
// precedence is flags > config file > defaults.
struct Settings {
  std::string config_file;
  std::vector<std::pair<std::string, std::string>> values;
  std::vector<std::pair<std::string, CLI::Option*>> options;
  std::vector<std::pair<std::string, bool*>> flags;
  std::vector<std::unique_ptr<std::string>> storage;
  std::vector<std::unique_ptr<bool>> flag_storage;

  void add(CLI::App* app, const std::string& key, const std::string& help) {
    storage.push_back(std::make_unique<std::string>());
    options.emplace_back(key, app->add_option("--" + key, *storage.back(), help));
  }
  void add_flag(CLI::App* app, const std::string& key, const std::string& help) {
    flag_storage.push_back(std::make_unique<bool>(false));
    flags.emplace_back(key, flag_storage.back().get());
    app->add_flag("--" + key, *flag_storage.back(), help);
  }

  Config build() const {
    rts_config* raw = nullptr;
    check(rts_config_create(&raw));
    Config cfg(raw);
    if (!config_file.empty()) check(rts_config_load_file(cfg.get(), config_file.c_str()), config_file);
    for (std::size_t i = 0; i < options.size(); ++i)
      if (options[i].second->count() > 0)
        check(rts_config_set(cfg.get(), options[i].first.c_str(), storage[i]->c_str()), "--" + options[i].first);
    for (const auto& [key, flag] : flags)
      if (*flag) check(rts_config_set(cfg.get(), key.c_str(), "true"), "--" + key);
    return cfg;
  }
};

json config_json(const rts_config* cfg) {
  char* s = nullptr;
  check(rts_config_json(cfg, &s));
  return json::parse(take(s));
}

std::string resolve_root(const json& cfg) {
  std::string root = cfg.value("root", "");
  if (root.empty()) {
    if (const char* env = std::getenv("RUMOR_TS_DATA")) root = env;
  }
  if (root.empty()) throw Failure{RTS_ERR_USAGE, "no data root: pass --root, set root in the config file, or set RUMOR_TS_DATA"};
  return root;
}

Dataset load(const json& cfg) {
  const std::string root = resolve_root(cfg);
  std::string events;
  if (cfg.contains("events") && cfg["events"].is_array()) {
    for (const auto& e : cfg["events"]) events += (events.empty() ? "" : ",") + e.get<std::string>();
  }
  rts_dataset* raw = nullptr;
  check(rts_dataset_load(root.c_str(), events.empty() ? nullptr : events.c_str(), &raw), root);
  Dataset ds(raw);
  char* summary = nullptr;
  check(rts_dataset_summary_json(ds.get(), &summary));
  const json s = json::parse(take(summary));
  if (!s["errors"].empty() || !s["warnings"].empty() || s.value("dropped_reactions", 0) > 0)
    std::cerr << "load: " << s["errors"].size() << " conversations dropped, " << s["warnings"].size()
              << " warnings, " << s.value("dropped_reactions", 0) << " reactions before their source dropped\n";
  return ds;
}

Vectors vectorize(const rts_dataset* ds, std::int64_t interval_seconds) {
  rts_vectors* raw = nullptr;
  check(rts_vectors_build(ds, interval_seconds, &raw), "T=" + minutes_label(interval_seconds) + " min");
  return Vectors(raw);
}

std::vector<std::int64_t> parse_minutes(const std::vector<std::string>& list) {
  std::vector<std::int64_t> out;
  for (const auto& item : list) {
    std::size_t used = 0;
    long long m = 0;
    try {
      m = std::stoll(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || m <= 0) throw Failure{RTS_ERR_USAGE, "invalid --interval-min value '" + item + "'"};
    out.push_back(m);
  }
  return out;
}

// inspect

int cmd_inspect(const Settings& settings, bool as_json) {
  const Config cfg = settings.build();
  const Dataset ds = load(config_json(cfg.get()));
  char* text = nullptr;
  if (as_json) {
    check(rts_dataset_summary_json(ds.get(), &text));
  } else {
    check(rts_dataset_inspect(ds.get(), &text));
  }
  std::cout << take(text) << (as_json ? "\n" : "");
  return 0;
}

// vectorize

int cmd_vectorize(const Settings& settings, const std::vector<std::string>& minutes_list) {
  const Config cfg = settings.build();
  const json c = config_json(cfg.get());
  const Dataset ds = load(c);
  const fs::path out = c.value("out", "out");
  fs::create_directories(out);
  const auto minutes = minutes_list.empty() ? std::vector<std::int64_t>{2, 5, 10, 30, 60} : parse_minutes(minutes_list);

  for (const auto m : minutes) {
    const std::int64_t seconds = m * 60;
    const fs::path bin = out / ("vectors_T" + std::to_string(m) + ".bin");
    const fs::path csv = out / ("vectors_T" + std::to_string(m) + ".csv");
    int matches = 0;
    check(rts_vectors_cache_matches(bin.c_str(), ds.get(), seconds, &matches));
    Vectors v;
    bool cached = false;
    if (matches && fs::exists(csv)) {
      rts_vectors* raw = nullptr;
      check(rts_vectors_load_cache(bin.c_str(), &raw), bin.string());
      v.reset(raw);
      cached = true;
    } else {
      v = vectorize(ds.get(), seconds);
      json meta = c;
      meta["interval_seconds"] = seconds;
      meta["interval_minutes"] = m;
      check(rts_vectors_save_cache(v.get(), bin.c_str()), bin.string());
      check(rts_vectors_write_csv(v.get(), csv.c_str(), ("config " + meta.dump()).c_str()), csv.string());
    }
    std::size_t n = 0, len = 0;
    double sparsity = 0.0;
    check(rts_vectors_info(v.get(), &n, &len, &sparsity));
    std::printf("T=%lld min  n=%zu  seq_len=%zu  sparsity=%.6f%s\n", static_cast<long long>(m), n, len, sparsity,
                cached ? "  (cached)" : "");
    std::fflush(stdout);
  }
  return 0;
}

// evaluate

Vectors vectors_for(const json& c, const std::string& cache) {
  const std::int64_t seconds = c.at("interval_seconds").get<std::int64_t>();
  if (!cache.empty()) {
    rts_vectors* raw = nullptr;
    check(rts_vectors_load_cache(cache.c_str(), &raw), cache);
    return Vectors(raw);
  }
  const Dataset ds = load(c);
  return vectorize(ds.get(), seconds);
}

int cmd_evaluate(const Settings& settings, const std::string& cache) {
  const Config cfg = settings.build();
  const json c = config_json(cfg.get());
  const Vectors v = vectors_for(c, cache);

  rts_report* raw = nullptr;
  check(rts_evaluate(v.get(), cfg.get(), &raw), "evaluate");
  const Report report(raw);

  char* csv = nullptr;
  char* js = nullptr;
  check(rts_report_csv(report.get(), &csv));
  check(rts_report_json(report.get(), &js));
  const std::string csv_text = take(csv);
  const std::string stem =
      "report_" + c.at("impl").get<std::string>() + "_T" + minutes_label(c.at("interval_seconds").get<std::int64_t>());
  const fs::path out = c.value("out", "out");
  write_file(out / (stem + ".csv"), csv_text);
  write_file(out / (stem + ".json"), take(js) + "\n");

  double micro = 0, macro = 0;
  std::size_t used = 0;
  check(rts_report_means(report.get(), &micro, &macro, &used));
  std::cout << csv_text;
  std::printf("mean micro-F1 %.6f  mean macro-F1 %.6f  folds used %zu\n", micro, macro, used);
  std::printf("wrote %s\n", (out / (stem + ".csv")).c_str());
  return 0;
}

// sweep

struct SweepCell {
  std::int64_t minutes = 0;
  std::string axis_value;
  std::string impl;
  bool ok = false;
  double micro = 0, macro = 0;
  std::string error;
};

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

int cmd_sweep(const Settings& settings, std::vector<std::string> axes, const std::vector<std::string>& minutes_list,
              std::vector<std::string> impls, std::vector<std::string> lrs, std::vector<std::string> batches,
              bool reproduce) {
  const Config base = settings.build();
  json c = config_json(base.get());
  if (reproduce) {
    axes = {"lr", "batch"};
    lrs = {"5e-6", "1e-5", "1.5e-5"};
    batches = {"16", "32", "64"};
    impls = {"I1", "I2", "I3"};
    check(rts_config_set(base.get(), "epochs", "300"));
    c = config_json(base.get());
  }
  const auto minutes = minutes_list.empty() ? std::vector<std::int64_t>{2, 5, 10, 30, 60} : parse_minutes(minutes_list);
  const int jobs = c.value("jobs", 1);
  const fs::path out = c.value("out", "out");

  for (const auto& axis : axes)
    if (axis != "lr" && axis != "batch") throw Failure{RTS_ERR_USAGE, "sweep axis must be lr or batch, got '" + axis + "'"};

  const Dataset ds = load(c);
  std::vector<Vectors> vectors;
  for (const auto m : minutes) vectors.push_back(vectorize(ds.get(), m * 60));

  for (const auto& axis : axes) {
    const std::vector<std::string>& values = axis == "lr" ? lrs : batches;

    std::vector<SweepCell> cells;
    for (const auto m : minutes)
      for (const auto& value : values)
        for (const auto& impl : impls) {
          SweepCell cell;
          cell.minutes = m;
          cell.axis_value = value;
          cell.impl = impl;
          cells.push_back(std::move(cell));
        }

    std::mutex console;
    std::atomic<std::size_t> next{0};
    auto run_cell = [&](std::size_t i) {
      auto& cell = cells[i];
      try {
        const Config cfg = settings.build();
        if (reproduce) check(rts_config_set(cfg.get(), "epochs", "300"));
        check(rts_config_set(cfg.get(), "interval-min", std::to_string(cell.minutes).c_str()));
        check(rts_config_set(cfg.get(), axis.c_str(), cell.axis_value.c_str()), "--" + axis);
        check(rts_config_set(cfg.get(), "impl", cell.impl.c_str()));
        check(rts_config_set(cfg.get(), "jobs", "1"));
        std::size_t vi = 0;
        while (minutes[vi] != cell.minutes) ++vi;
        rts_report* raw = nullptr;
        check(rts_evaluate(vectors[vi].get(), cfg.get(), &raw));
        const Report report(raw);
        std::size_t used = 0;
        check(rts_report_means(report.get(), &cell.micro, &cell.macro, &used));
        char* csv = nullptr;
        check(rts_report_csv(report.get(), &csv));
        write_file(out / "sweep" / ("T" + std::to_string(cell.minutes) + "_" + axis + cell.axis_value + "_" + cell.impl + ".csv"),
                   take(csv));
        cell.ok = true;
      } catch (const Failure& f) {
        cell.error = f.message;
      }
      std::lock_guard lock(console);
      if (cell.ok)
        std::printf("T=%lld %s=%s %s micro-F1 %.6f macro-F1 %.6f\n", static_cast<long long>(cell.minutes),
                    axis.c_str(), cell.axis_value.c_str(), cell.impl.c_str(), cell.micro, cell.macro);
      else
        std::printf("T=%lld %s=%s %s FAILED: %s\n", static_cast<long long>(cell.minutes), axis.c_str(),
                    cell.axis_value.c_str(), cell.impl.c_str(), cell.error.c_str());
      std::fflush(stdout);
    };
    const auto workers = static_cast<std::size_t>(std::max(1, std::min<int>(jobs, static_cast<int>(cells.size()))));
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
          for (std::size_t i = next++; i < cells.size(); i = next++) run_cell(i);
        });
    }

    for (const bool micro : {true, false}) {
      std::ostringstream table;
      table << "# config " << c.dump() << "\n";
      table << "# metric mean " << (micro ? "micro" : "macro") << "-F1, rows T x " << axis << "\n";
      table << "T_min," << axis;
      for (const auto& impl : impls) table << ',' << impl;
      table << "\n";
      for (std::size_t i = 0; i < cells.size(); i += impls.size()) {
        table << cells[i].minutes << ',' << cells[i].axis_value;
        for (std::size_t j = 0; j < impls.size(); ++j) {
          const auto& cell = cells[i + j];
          table << ',' << (cell.ok ? fmt6(micro ? cell.micro : cell.macro) : "FAILED");
        }
        table << "\n";
      }
      write_file(out / ("sweep_" + axis + (micro ? "_micro.csv" : "_macro.csv")), table.str());
    }
  }
  std::printf("wrote sweep tables to %s\n", out.c_str());
  return 0;
}

// synth

int cmd_synth(const json& spec, const std::string& out) {
  rts_dataset* raw = nullptr;
  check(rts_dataset_synthesize(spec.dump().c_str(), &raw), "synth");
  const Dataset ds(raw);
  check(rts_dataset_write(ds.get(), out.c_str()), out);
  std::size_t n = 0, events = 0;
  check(rts_dataset_stats(ds.get(), &n, &events, nullptr));
  std::printf("wrote %zu conversations in %zu events to %s\n", n, events, out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rumour detection from reaction time series"};
  app.require_subcommand(1);

  auto add_common = [](CLI::App* sub, Settings& s) {
    sub->add_option("--config", s.config_file, "TOML-style key = value file");
    s.add(sub, "root", "dataset root (fallback: RUMOR_TS_DATA)");
    s.add(sub, "events", "comma-separated event filter");
    s.add(sub, "out", "output directory");
  };
  auto add_pipeline = [](CLI::App* sub, Settings& s, bool single_interval) {
    if (single_interval) s.add(sub, "interval-min", "bucket width in minutes (2, 5, 10, 30, 60)");
    s.add(sub, "svd-rank", "SVD rank, 0 for the default");
    s.add(sub, "impl", "ensemble: i1, i2 or i3");
    s.add(sub, "lr", "learning rate");
    s.add(sub, "batch", "batch size");
    s.add(sub, "epochs", "training epochs");
    s.add(sub, "seed", "random seed");
    s.add(sub, "jobs", "parallel workers");
    s.add(sub, "save-models", "directory for per-fold model bundles");
    s.add_flag(sub, "fit-on-all", "fit SVD and scaler on all events, including the held-out one");
    s.add_flag(sub, "bootstrap", "train members on bootstrap resamples");
  };

  Settings inspect_s, vectorize_s, evaluate_s, sweep_s;

  auto* inspect = app.add_subcommand("inspect", "per-event rumour/non-rumour counts");
  add_common(inspect, inspect_s);
  bool inspect_json = false;
  inspect->add_flag("--json", inspect_json, "print the load summary as JSON");

  auto* vec = app.add_subcommand("vectorize", "build reaction-count vectors and caches");
  add_common(vec, vectorize_s);
  std::vector<std::string> vec_minutes;
  vec->add_option("--interval-min", vec_minutes, "bucket widths in minutes (default 2,5,10,30,60)")->delimiter(',');

  auto* evaluate = app.add_subcommand("evaluate", "leave-one-event-out evaluation");
  add_common(evaluate, evaluate_s);
  add_pipeline(evaluate, evaluate_s, true);
  std::string cache;
  evaluate->add_option("--vectors", cache, "use a vector cache instead of reading --root");

  auto* sweep = app.add_subcommand("sweep", "grid of evaluations over T and one hyperparameter");
  add_common(sweep, sweep_s);
  add_pipeline(sweep, sweep_s, false);
  std::vector<std::string> axes{"lr"}, sweep_minutes, impls{"I1", "I2", "I3"}, lrs{"5e-6", "1e-5", "1.5e-5"},
      batches{"16", "32", "64"};
  bool reproduce = false;
  sweep->add_option("--axis", axes, "lr and/or batch")->delimiter(',');
  sweep->add_option("--interval-min", sweep_minutes, "bucket widths in minutes (default 2,5,10,30,60)")->delimiter(',');
  sweep->add_option("--impls", impls, "ensembles to compare")->delimiter(',');
  sweep->add_option("--lrs", lrs, "learning rates for the lr axis")->delimiter(',');
  sweep->add_option("--batches", batches, "batch sizes for the batch axis")->delimiter(',');
  sweep->add_flag("--reproduce", reproduce, "full grids over both axes with 300 epochs");

  auto* synth = app.add_subcommand("synth", "write a synthetic corpus in the dataset layout");
  std::string synth_out;
  int synth_events = 3, per_event = 120, min_r = 8, max_r = 24;
  double fraction = 0.5, separation = 1.0, burst = 60.0, horizon = 21600.0;
  std::uint64_t synth_seed = 0;
  synth->add_option("--out", synth_out, "output root")->required();
  synth->add_option("--n-events", synth_events, "number of events");
  synth->add_option("--per-event", per_event, "conversations per event");
  synth->add_option("--rumor-fraction", fraction, "share of rumours per event");
  synth->add_option("--separation", separation, "probability a rumour reaction is in the early burst");
  synth->add_option("--min-reactions", min_r, "fewest reactions per conversation");
  synth->add_option("--max-reactions", max_r, "most reactions per conversation");
  synth->add_option("--burst-mean", burst, "mean burst delay in seconds");
  synth->add_option("--horizon", horizon, "reaction horizon in seconds");
  synth->add_option("--seed", synth_seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*inspect) return cmd_inspect(inspect_s, inspect_json);
    if (*vec) return cmd_vectorize(vectorize_s, vec_minutes);
    if (*evaluate) return cmd_evaluate(evaluate_s, cache);
    if (*sweep) return cmd_sweep(sweep_s, axes, sweep_minutes, impls, lrs, batches, reproduce);
    if (*synth)
      return cmd_synth({{"events", synth_events},
                        {"per_event", per_event},
                        {"rumor_fraction", fraction},
                        {"separation", separation},
                        {"min_reactions", min_r},
                        {"max_reactions", max_r},
                        {"burst_mean_seconds", burst},
                        {"horizon_seconds", horizon},
                        {"seed", synth_seed}},
                       synth_out);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return static_cast<int>(f.status);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(RTS_ERR_INTERNAL);
  }
  return 1;
}
