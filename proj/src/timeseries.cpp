#include "rumorts/timeseries.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "rumorts/error.hpp"

namespace fs = std::filesystem;

namespace rumorts {

void IntervalConfig::validate() const {
  if (interval_seconds <= 0)
    throw UsageError("interval must be positive, got " + std::to_string(interval_seconds) + " s");
}

void TimeSeriesDataset::check_consistent() const {
  const auto n = static_cast<std::size_t>(matrix.rows());
  if (labels.size() != n || events.size() != n || ids.size() != n)
    throw ShapeError("time-series dataset columns have inconsistent lengths");
}

TimeSeriesDataset TimeSeriesDataset::select(std::span<const Eigen::Index> rows) const {
  TimeSeriesDataset out;
  out.matrix.resize(static_cast<Eigen::Index>(rows.size()), matrix.cols());
  out.interval_seconds = interval_seconds;
  out.source_hash = source_hash;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = rows[i];
    out.matrix.row(static_cast<Eigen::Index>(i)) = matrix.row(r);
    out.labels.push_back(labels[static_cast<std::size_t>(r)]);
    out.events.push_back(events[static_cast<std::size_t>(r)]);
    out.ids.push_back(ids[static_cast<std::size_t>(r)]);
  }
  return out;
}

TimeSeriesDataset TimeSeriesDataset::with_matrix(Eigen::MatrixXd features) const {
  if (features.rows() != matrix.rows())
    throw ShapeError("replacement matrix has " + std::to_string(features.rows()) + " rows, expected " +
                     std::to_string(matrix.rows()));
  TimeSeriesDataset out = *this;
  out.matrix = std::move(features);
  return out;
}

namespace timeseries {
namespace {

constexpr char kCacheMagic[8] = {'R', 'T', 'S', 'V', 'E', 'C', '0', '1'};

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw DataError("truncated cache file");
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const auto n = get<std::uint64_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw DataError("truncated cache file");
  return s;
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::int64_t conversation_length(const Conversation& conv, IntervalConfig cfg) {
  if (conv.reaction_times.empty()) return 0;
  const std::int64_t span =
      *std::max_element(conv.reaction_times.begin(), conv.reaction_times.end()) - conv.source_time;
  if (span <= 0) return 0;
  return (span + cfg.interval_seconds - 1) / cfg.interval_seconds;
}

std::int64_t interval_count(const Conversation& conv, IntervalConfig cfg, std::int64_t k) {
  const std::int64_t n = conversation_length(conv, cfg);
  if (k < 1 || k > n)
    throw UsageError("interval index " + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  const std::int64_t a = conv.source_time + (k - 1) * cfg.interval_seconds;
  const std::int64_t b = a + cfg.interval_seconds;
  return std::count_if(conv.reaction_times.begin(), conv.reaction_times.end(),
                       [&](std::int64_t x) { return x > a && x <= b; });
}

std::vector<std::int64_t> vectorize(const Conversation& conv, IntervalConfig cfg) {
  std::vector<std::int64_t> counts(static_cast<std::size_t>(conversation_length(conv, cfg)), 0);
  for (const auto x : conv.reaction_times) {
    const std::int64_t offset = x - conv.source_time;
    if (offset <= 0) continue;
    // Bucket k holds offsets in ((k-1)T, kT].
    const std::int64_t k = (offset + cfg.interval_seconds - 1) / cfg.interval_seconds;
    counts[static_cast<std::size_t>(k - 1)] += 1;
  }
  return counts;
}

TimeSeriesDataset build_matrix(std::span<const Conversation> convs, IntervalConfig cfg) {
  cfg.validate();
  if (convs.empty()) throw DataError("cannot build a time-series matrix from zero conversations");

  std::vector<std::vector<std::int64_t>> rows;
  rows.reserve(convs.size());
  std::size_t seq_len = 0;
  for (const auto& conv : convs) {
    rows.push_back(vectorize(conv, cfg));
    seq_len = std::max(seq_len, rows.back().size());
  }
  if (seq_len == 0) throw DataError("degenerate dataset: every conversation has zero length");

  TimeSeriesDataset out;
  out.interval_seconds = cfg.interval_seconds;
  out.matrix = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(convs.size()), static_cast<Eigen::Index>(seq_len));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      out.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = static_cast<double>(rows[i][j]);
    out.labels.push_back(convs[i].label);
    out.events.push_back(convs[i].event);
    out.ids.push_back(convs[i].id);
  }
  return out;
}

double sparsity(const TimeSeriesDataset& dataset) {
  if (dataset.matrix.size() == 0) return 0.0;
  const auto zeros = (dataset.matrix.array() == 0.0).count();
  return static_cast<double>(zeros) / static_cast<double>(dataset.matrix.size());
}

void write_csv(const TimeSeriesDataset& dataset, const fs::path& path, const std::vector<std::string>& comments) {
  dataset.check_consistent();
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& c : comments) out << "# " << c << '\n';
  out << "id,event,label";
  for (Eigen::Index j = 0; j < dataset.seq_len(); ++j) out << ",v" << j + 1;
  out << '\n';
  char buf[64];
  for (Eigen::Index i = 0; i < dataset.size(); ++i) {
    const auto r = static_cast<std::size_t>(i);
    out << dataset.ids[r] << ',' << dataset.events[r] << ',' << dataset.labels[r];
    for (Eigen::Index j = 0; j < dataset.seq_len(); ++j) {
      const auto res = std::to_chars(buf, buf + sizeof buf, dataset.matrix(i, j));
      out << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    out << '\n';
  }
}

TimeSeriesDataset read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (line.starts_with("#")) continue;
    header = split_commas(line);
    break;
  }
  if (header.size() < 4 || header[0] != "id" || header[1] != "event" || header[2] != "label")
    throw DataError("unexpected CSV header in " + path.string());
  const std::size_t width = header.size() - 3;

  std::vector<std::vector<double>> values;
  TimeSeriesDataset out;
  while (std::getline(in, line)) {
    if (line.empty() || line.starts_with("#")) continue;
    const auto fields = split_commas(line);
    if (fields.size() != header.size())
      throw DataError("row " + std::to_string(values.size() + 1) + " has " + std::to_string(fields.size()) +
                      " fields, expected " + std::to_string(header.size()));
    out.ids.push_back(fields[0]);
    out.events.push_back(fields[1]);
    out.labels.push_back(std::stoi(fields[2]));
    std::vector<double> row(width);
    for (std::size_t j = 0; j < width; ++j) {
      const auto& f = fields[j + 3];
      const auto res = std::from_chars(f.data(), f.data() + f.size(), row[j]);
      if (res.ec != std::errc()) throw DataError("bad numeric field '" + f + "' in " + path.string());
    }
    values.push_back(std::move(row));
  }
  out.matrix.resize(static_cast<Eigen::Index>(values.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < values.size(); ++i)
    for (std::size_t j = 0; j < width; ++j)
      out.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i][j];
  return out;
}

void save_cache(const TimeSeriesDataset& dataset, const fs::path& path) {
  dataset.check_consistent();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(kCacheMagic, sizeof kCacheMagic);
  put<std::uint64_t>(out, dataset.source_hash);
  put<std::int64_t>(out, dataset.interval_seconds);
  put<std::int64_t>(out, dataset.size());
  put<std::int64_t>(out, dataset.seq_len());
  for (Eigen::Index i = 0; i < dataset.size(); ++i) {
    const auto r = static_cast<std::size_t>(i);
    put_string(out, dataset.ids[r]);
    put_string(out, dataset.events[r]);
    put<std::int32_t>(out, dataset.labels[r]);
  }
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = dataset.matrix;
  out.write(reinterpret_cast<const char*>(rows.data()), static_cast<std::streamsize>(rows.size() * sizeof(double)));
}

std::optional<CacheKey> peek_cache_key(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[sizeof kCacheMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCacheMagic, sizeof magic) != 0) return std::nullopt;
  CacheKey key;
  in.read(reinterpret_cast<char*>(&key.source_hash), sizeof key.source_hash);
  in.read(reinterpret_cast<char*>(&key.interval_seconds), sizeof key.interval_seconds);
  if (!in) return std::nullopt;
  return key;
}

TimeSeriesDataset load_cache(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  char magic[sizeof kCacheMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCacheMagic, sizeof magic) != 0)
    throw DataError(path.string() + " is not a time-series cache");
  TimeSeriesDataset out;
  out.source_hash = get<std::uint64_t>(in);
  out.interval_seconds = get<std::int64_t>(in);
  const auto n = get<std::int64_t>(in);
  const auto width = get<std::int64_t>(in);
  if (n < 0 || width < 0) throw DataError("corrupt cache header in " + path.string());
  for (std::int64_t i = 0; i < n; ++i) {
    out.ids.push_back(get_string(in));
    out.events.push_back(get_string(in));
    out.labels.push_back(get<std::int32_t>(in));
  }
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows(n, width);
  in.read(reinterpret_cast<char*>(rows.data()), static_cast<std::streamsize>(rows.size() * sizeof(double)));
  if (!in) throw DataError("truncated cache file " + path.string());
  out.matrix = rows;
  return out;
}

}  // namespace timeseries
}  // namespace rumorts
