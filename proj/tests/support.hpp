#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

#include "rumorts/ingest.hpp"
#include "rumorts/random.hpp"

namespace test_support {

// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("rumorts_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& file, const std::string& text) {
  std::filesystem::create_directories(file.parent_path());
  std::ofstream(file) << text;
}

inline void write_post(const std::filesystem::path& file, const std::string& created_at) {
  write_text(file, R"({"id_str": "1", "created_at": ")" + created_at + R"("})");
}

// Random conversation with reactions up to `max_delay` seconds after the source.
inline rumorts::Conversation random_conversation(rumorts::Rng& rng, int index, std::int64_t max_delay = 20000,
                                                 int max_reactions = 40) {
  rumorts::Conversation c;
  c.id = "c" + std::to_string(index);
  c.event = "e" + std::to_string(index % 3);
  c.label = static_cast<int>(rng.below(2));
  c.source_time = 1400000000 + static_cast<std::int64_t>(rng.below(1000000));
  const auto n = rng.below(static_cast<std::uint64_t>(max_reactions) + 1);
  for (std::uint64_t i = 0; i < n; ++i)
    c.reaction_times.push_back(c.source_time + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(max_delay) + 1)));
  return c;
}

}  // namespace test_support
