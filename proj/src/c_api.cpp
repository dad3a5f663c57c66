#include "rumorts/rumorts.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <sstream>
#include <string>

#include "rumorts/config.hpp"
#include "rumorts/error.hpp"
#include "rumorts/eval.hpp"

using namespace rumorts;

struct rts_dataset {
  RawDataset data;
  LoadSummary summary;
};
struct rts_vectors {
  TimeSeriesDataset data;
};
struct rts_config {
  RunConfig data;
};
struct rts_report {
  EvalReport data;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
rts_status guard(F&& f) {
  try {
    f();
    g_last_error.clear();
    return RTS_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return static_cast<rts_status>(e.kind());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return RTS_ERR_USAGE;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return RTS_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return RTS_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return RTS_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) throw UsageError(std::string(what) + " must not be NULL");
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

eval::SynthSpec synth_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw UsageError("synthetic spec must be a JSON object");
  eval::SynthSpec s;
  for (const auto& [key, value] : j.items()) {
    if (key == "events") s.events = value.get<int>();
    else if (key == "per_event") s.per_event = value.get<int>();
    else if (key == "rumor_fraction") s.rumor_fraction = value.get<double>();
    else if (key == "separation") s.separation = value.get<double>();
    else if (key == "min_reactions") s.min_reactions = value.get<int>();
    else if (key == "max_reactions") s.max_reactions = value.get<int>();
    else if (key == "burst_mean_seconds") s.burst_mean_seconds = value.get<double>();
    else if (key == "horizon_seconds") s.horizon_seconds = value.get<double>();
    else if (key == "start_time") s.start_time = value.get<std::int64_t>();
    else if (key == "seed") s.seed = value.get<std::uint64_t>();
    else throw UsageError("unknown synthetic spec field '" + key + "'");
  }
  return s;
}

}  // namespace

extern "C" {

const char* rts_version(void) { return "1.0.0"; }
const char* rts_last_error(void) { return g_last_error.c_str(); }
void rts_string_free(char* s) { std::free(s); }

rts_status rts_dataset_load(const char* root, const char* events_csv, rts_dataset** out) {
  return guard([&] {
    need(root, "root");
    need(out, "out");
    std::optional<std::vector<std::string>> filter;
    if (events_csv) filter = split_list(events_csv);
    auto result = ingest::load_dataset(root, filter);
    *out = new rts_dataset{std::move(result.dataset), std::move(result.summary)};
  });
}

rts_status rts_dataset_synthesize(const char* spec_json, rts_dataset** out) {
  return guard([&] {
    need(out, "out");
    const eval::SynthSpec spec = spec_json ? synth_from_json(nlohmann::json::parse(spec_json)) : eval::SynthSpec{};
    auto ds = std::make_unique<rts_dataset>();
    ds->data = eval::generate_synthetic_corpus(spec);
    ds->summary.loaded = ingest::count_by_event(ds->data);
    *out = ds.release();
  });
}

rts_status rts_dataset_write(const rts_dataset* ds, const char* root) {
  return guard([&] {
    need(ds, "dataset");
    need(root, "root");
    ingest::write_dataset(ds->data, root);
  });
}

rts_status rts_dataset_summary_json(const rts_dataset* ds, char** out) {
  return guard([&] {
    need(ds, "dataset");
    need(out, "out");
    *out = dup(ds->summary.to_json().dump(2));
  });
}

rts_status rts_dataset_inspect(const rts_dataset* ds, char** out) {
  return guard([&] {
    need(ds, "dataset");
    need(out, "out");
    *out = dup(ingest::format_inspect_table(ds->data));
  });
}

rts_status rts_dataset_stats(const rts_dataset* ds, size_t* n_conversations, size_t* n_events, uint64_t* hash) {
  return guard([&] {
    need(ds, "dataset");
    if (n_conversations) *n_conversations = ds->data.conversations.size();
    if (n_events) *n_events = ds->data.events.size();
    if (hash) *hash = ingest::dataset_hash(ds->data);
  });
}

void rts_dataset_free(rts_dataset* ds) { delete ds; }

rts_status rts_vectors_build(const rts_dataset* ds, int64_t interval_seconds, rts_vectors** out) {
  return guard([&] {
    need(ds, "dataset");
    need(out, "out");
    auto v = std::make_unique<rts_vectors>();
    v->data = timeseries::build_matrix(ds->data.conversations, IntervalConfig{interval_seconds});
    v->data.source_hash = ingest::dataset_hash(ds->data);
    *out = v.release();
  });
}

rts_status rts_vectors_load_cache(const char* path, rts_vectors** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new rts_vectors{timeseries::load_cache(path)};
  });
}

rts_status rts_vectors_save_cache(const rts_vectors* v, const char* path) {
  return guard([&] {
    need(v, "vectors");
    need(path, "path");
    timeseries::save_cache(v->data, path);
  });
}

rts_status rts_vectors_write_csv(const rts_vectors* v, const char* path, const char* comment) {
  return guard([&] {
    need(v, "vectors");
    need(path, "path");
    std::vector<std::string> lines;
    if (comment) {
      std::istringstream in(comment);
      for (std::string line; std::getline(in, line);) lines.push_back(line);
    }
    timeseries::write_csv(v->data, path, lines);
  });
}

rts_status rts_vectors_info(const rts_vectors* v, size_t* n_samples, size_t* seq_len, double* sparsity) {
  return guard([&] {
    need(v, "vectors");
    if (n_samples) *n_samples = static_cast<size_t>(v->data.size());
    if (seq_len) *seq_len = static_cast<size_t>(v->data.seq_len());
    if (sparsity) *sparsity = timeseries::sparsity(v->data);
  });
}

rts_status rts_vectors_cache_matches(const char* path, const rts_dataset* ds, int64_t interval_seconds,
                                     int* matches) {
  return guard([&] {
    need(path, "path");
    need(ds, "dataset");
    need(matches, "matches");
    const auto key = timeseries::peek_cache_key(path);
    *matches = key && *key == timeseries::CacheKey{ingest::dataset_hash(ds->data), interval_seconds} ? 1 : 0;
  });
}

void rts_vectors_free(rts_vectors* v) { delete v; }

rts_status rts_config_create(rts_config** out) {
  return guard([&] {
    need(out, "out");
    *out = new rts_config{};
  });
}

rts_status rts_config_set(rts_config* cfg, const char* key, const char* value) {
  return guard([&] {
    need(cfg, "config");
    need(key, "key");
    need(value, "value");
    RunConfig next = cfg->data;
    next.set(key, value);
    cfg->data = std::move(next);
  });
}

rts_status rts_config_load_file(rts_config* cfg, const char* path) {
  return guard([&] {
    need(cfg, "config");
    need(path, "path");
    RunConfig next = cfg->data;
    for (const auto& [key, value] : read_config_file(path)) next.set(key, value);
    cfg->data = std::move(next);
  });
}

rts_status rts_config_json(const rts_config* cfg, char** out) {
  return guard([&] {
    need(cfg, "config");
    need(out, "out");
    nlohmann::json j = cfg->data.to_json();
    j["out"] = cfg->data.out;
    j["save_models"] = cfg->data.pipeline.save_models.string();
    j["jobs"] = cfg->data.pipeline.jobs;
    *out = dup(j.dump());
  });
}

void rts_config_free(rts_config* cfg) { delete cfg; }

rts_status rts_evaluate(const rts_vectors* v, const rts_config* cfg, rts_report** out) {
  return guard([&] {
    need(v, "vectors");
    need(cfg, "config");
    need(out, "out");
    PipelineConfig pipeline = cfg->data.pipeline;
    if (pipeline.interval_seconds != v->data.interval_seconds)
      throw UsageError("vectors were built with interval " + std::to_string(v->data.interval_seconds) +
                       " s but the configuration asks for " + std::to_string(pipeline.interval_seconds) + " s");
    auto report = std::make_unique<rts_report>(rts_report{eval::leave_one_event_out(v->data, pipeline)});
    report->data.config = cfg->data.to_json();
    *out = report.release();
  });
}

rts_status rts_report_json(const rts_report* r, char** out) {
  return guard([&] {
    need(r, "report");
    need(out, "out");
    *out = dup(r->data.to_json().dump(2));
  });
}

rts_status rts_report_csv(const rts_report* r, char** out) {
  return guard([&] {
    need(r, "report");
    need(out, "out");
    *out = dup(r->data.to_csv());
  });
}

rts_status rts_report_means(const rts_report* r, double* micro_f1, double* macro_f1, size_t* folds_used) {
  return guard([&] {
    need(r, "report");
    if (micro_f1) *micro_f1 = r->data.mean_micro.f1;
    if (macro_f1) *macro_f1 = r->data.mean_macro.f1;
    if (folds_used) *folds_used = r->data.folds_used;
  });
}

void rts_report_free(rts_report* r) { delete r; }

rts_status rts_parse_timestamp(const char* text, int64_t* out) {
  return guard([&] {
    need(text, "text");
    need(out, "out");
    *out = ingest::parse_timestamp(text);
  });
}

int rts_majority_vote(const int* votes, size_t n) {
  if (!votes || n == 0) return -1;
  for (size_t i = 0; i < n; ++i)
    if (votes[i] != 0 && votes[i] != 1) return -1;
  return ensemble::majority_vote(std::span<const int>(votes, n));
}

rts_status rts_class_weights(const int* labels, size_t n, double out[2]) {
  return guard([&] {
    need(labels, "labels");
    need(out, "out");
    const auto w = preprocess::class_weights(std::span<const int>(labels, n));
    out[0] = w.weight[0];
    out[1] = w.weight[1];
  });
}

}  // extern "C"
