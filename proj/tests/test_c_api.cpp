#include <cstring>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "doctest.h"
#include "rumorts/rumorts.h"

namespace {

std::string take(char* s) {
  std::string out(s);
  rts_string_free(s);
  return out;
}

std::filesystem::path temp_dir(const char* tag) {
  auto p = std::filesystem::temp_directory_path() / (std::string("rumorts_capi_") + tag + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("status codes and last error") {
  int64_t t = 0;
  CHECK(rts_parse_timestamp("Wed Jan 07 11:06:08 +0000 2015", &t) == RTS_OK);
  CHECK(t == 1420628768);
  CHECK(rts_parse_timestamp("garbage", &t) == RTS_ERR_DATA);
  CHECK(std::strlen(rts_last_error()) > 0);
  CHECK(rts_parse_timestamp(nullptr, &t) == RTS_ERR_USAGE);

  const int votes[] = {1, 1, 1, 1, 0, 0};
  CHECK(rts_majority_vote(votes, 6) == 1);
  CHECK(rts_majority_vote(votes + 1, 5) == 1);
  CHECK(rts_majority_vote(votes + 2, 4) == 0);
  CHECK(rts_majority_vote(nullptr, 3) == -1);
  CHECK(rts_majority_vote(votes, 0) == -1);

  const int labels[] = {1, 0, 0, 0};
  double w[2];
  CHECK(rts_class_weights(labels, 4, w) == RTS_OK);
  CHECK(w[0] == doctest::Approx(4.0 / 6.0));
  CHECK(w[1] == doctest::Approx(2.0));
  CHECK(rts_class_weights(labels + 1, 3, w) == RTS_ERR_USAGE);
}

TEST_CASE("configuration") {
  rts_config* cfg = nullptr;
  REQUIRE(rts_config_create(&cfg) == RTS_OK);
  CHECK(rts_config_set(cfg, "lr", "1e-3") == RTS_OK);
  CHECK(rts_config_set(cfg, "lr", "-1") == RTS_ERR_USAGE);
  CHECK(rts_config_set(cfg, "nope", "1") == RTS_ERR_USAGE);
  const auto json = take([&] {
    char* s = nullptr;
    rts_config_json(cfg, &s);
    return s;
  }());
  // A rejected value leaves the previous setting in place.
  CHECK(json.find("\"learning_rate\":0.001") != std::string::npos);
  CHECK(rts_config_load_file(cfg, "/nonexistent.toml") == RTS_ERR_USAGE);
  rts_config_free(cfg);
}

TEST_CASE("dataset to report through the C interface") {
  rts_dataset* ds = nullptr;
  REQUIRE(rts_dataset_synthesize(R"({"events": 3, "per_event": 16, "seed": 2})", &ds) == RTS_OK);
  size_t n = 0, events = 0;
  uint64_t hash = 0;
  CHECK(rts_dataset_stats(ds, &n, &events, &hash) == RTS_OK);
  CHECK(n == 48);
  CHECK(events == 3);
  CHECK(rts_dataset_synthesize(R"({"colour": 1})", &ds) == RTS_ERR_USAGE);
  CHECK(rts_dataset_synthesize("{not json", &ds) == RTS_ERR_USAGE);

  const auto root = temp_dir("root");
  CHECK(rts_dataset_write(ds, root.c_str()) == RTS_OK);
  rts_dataset* loaded = nullptr;
  REQUIRE(rts_dataset_load(root.c_str(), nullptr, &loaded) == RTS_OK);
  uint64_t loaded_hash = 0;
  rts_dataset_stats(loaded, nullptr, nullptr, &loaded_hash);
  CHECK(loaded_hash == hash);
  char* table = nullptr;
  REQUIRE(rts_dataset_inspect(loaded, &table) == RTS_OK);
  CHECK(take(table).find("synth-event-03") != std::string::npos);
  rts_dataset* none = nullptr;
  CHECK(rts_dataset_load(root.c_str(), "", &none) == RTS_ERR_USAGE);
  CHECK(rts_dataset_load((root / "missing").c_str(), nullptr, &none) == RTS_ERR_DATA);

  rts_vectors* v = nullptr;
  REQUIRE(rts_vectors_build(loaded, 300, &v) == RTS_OK);
  size_t rows = 0, len = 0;
  double sparsity = 0;
  CHECK(rts_vectors_info(v, &rows, &len, &sparsity) == RTS_OK);
  CHECK(rows == 48);
  CHECK(len > 1);
  CHECK(sparsity > 0.0);
  const auto cache = root / "v.bin";
  CHECK(rts_vectors_save_cache(v, cache.c_str()) == RTS_OK);
  int matches = 0;
  CHECK(rts_vectors_cache_matches(cache.c_str(), loaded, 300, &matches) == RTS_OK);
  CHECK(matches == 1);
  CHECK(rts_vectors_cache_matches(cache.c_str(), loaded, 600, &matches) == RTS_OK);
  CHECK(matches == 0);
  CHECK(rts_vectors_write_csv(v, (root / "v.csv").c_str(), "config {}") == RTS_OK);

  rts_config* cfg = nullptr;
  rts_config_create(&cfg);
  rts_config_set(cfg, "interval-min", "5");
  rts_config_set(cfg, "epochs", "2");
  rts_config_set(cfg, "svd-rank", "4");
  rts_config_set(cfg, "lr", "1e-2");
  rts_report* report = nullptr;
  REQUIRE(rts_evaluate(v, cfg, &report) == RTS_OK);
  double micro = -1, macro = -1;
  size_t used = 0;
  CHECK(rts_report_means(report, &micro, &macro, &used) == RTS_OK);
  CHECK(used == 3);
  CHECK(micro >= 0.0);
  CHECK(micro <= 1.0);
  char* csv = nullptr;
  REQUIRE(rts_report_csv(report, &csv) == RTS_OK);
  CHECK(take(csv).find("\nmean,") != std::string::npos);
  char* js = nullptr;
  REQUIRE(rts_report_json(report, &js) == RTS_OK);
  CHECK(take(js).find("\"folds_used\": 3") != std::string::npos);

  rts_config_set(cfg, "interval-min", "10");
  rts_report* mismatch = nullptr;
  CHECK(rts_evaluate(v, cfg, &mismatch) == RTS_ERR_USAGE);

  rts_report_free(report);
  rts_config_free(cfg);
  rts_vectors_free(v);
  rts_dataset_free(loaded);
  rts_dataset_free(ds);
  std::filesystem::remove_all(root);
}
