#include "rumorts/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "rumorts/error.hpp"
#include "rumorts/random.hpp"

namespace fs = std::filesystem;

namespace rumorts {
namespace {

constexpr char kModelMagic[8] = {'R', 'T', 'S', 'P', 'R', 'E', '0', '1'};

Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& m) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  return qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), m.cols());
}

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  const std::int64_t rows = m.rows();
  const std::int64_t cols = m.cols();
  out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
  out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
}

Eigen::MatrixXd read_matrix(std::istream& in) {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  in.read(reinterpret_cast<char*>(&rows), sizeof rows);
  in.read(reinterpret_cast<char*>(&cols), sizeof cols);
  if (!in || rows < 0 || cols < 0) throw DataError("corrupt preprocess model");
  Eigen::MatrixXd m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!in) throw DataError("truncated preprocess model");
  return m;
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

Eigen::MatrixXd PreprocessModel::transform(const Eigen::MatrixXd& counts) const {
  return preprocess::minmax_transform(scaler, preprocess::svd_transform(svd, counts));
}

nlohmann::json PreprocessModel::sidecar() const {
  return {{"format", "rumorts-preprocess"},
          {"version", 1},
          {"k", svd.rank()},
          {"n_features", svd.n_features()},
          {"singular_values", to_vector(svd.singular_values)},
          {"scaler_min", to_vector(scaler.min)},
          {"scaler_max", to_vector(scaler.max)},
          {"class_weights", {weights.weight[0], weights.weight[1]}}};
}

void PreprocessModel::save(const fs::path& blob, const fs::path& sidecar_json) const {
  std::ofstream out(blob, std::ios::binary);
  if (!out) throw DataError("cannot write " + blob.string());
  out.write(kModelMagic, sizeof kModelMagic);
  write_matrix(out, svd.components);
  write_matrix(out, svd.singular_values);
  write_matrix(out, scaler.min);
  write_matrix(out, scaler.max);
  out.write(reinterpret_cast<const char*>(weights.weight.data()), sizeof(double) * 2);
  std::ofstream side(sidecar_json);
  if (!side) throw DataError("cannot write " + sidecar_json.string());
  side << sidecar().dump(2) << '\n';
}

PreprocessModel PreprocessModel::load(const fs::path& blob) {
  std::ifstream in(blob, std::ios::binary);
  if (!in) throw DataError("cannot open " + blob.string());
  char magic[sizeof kModelMagic];
  in.read(magic, sizeof magic);
  if (!in || !std::equal(magic, magic + sizeof magic, kModelMagic))
    throw DataError(blob.string() + " is not a preprocess model");
  PreprocessModel m;
  m.svd.components = read_matrix(in);
  m.svd.singular_values = read_matrix(in);
  m.scaler.min = read_matrix(in);
  m.scaler.max = read_matrix(in);
  in.read(reinterpret_cast<char*>(m.weights.weight.data()), sizeof(double) * 2);
  if (!in) throw DataError("truncated preprocess model");
  return m;
}

namespace preprocess {

Eigen::Index default_svd_rank(Eigen::Index seq_len, Eigen::Index n_train) {
  return std::max<Eigen::Index>(1, std::min<Eigen::Index>({32, seq_len - 1, n_train - 1}));
}

SvdModel svd_fit(const Eigen::MatrixXd& matrix, Eigen::Index k, const SvdOptions& options) {
  const Eigen::Index n = matrix.rows();
  const Eigen::Index d = matrix.cols();
  if (k < 1 || k > std::min(n, d) - 1)
    throw UsageError("SVD rank " + std::to_string(k) + " outside [1, " + std::to_string(std::min(n, d) - 1) +
                     "] for a " + std::to_string(n) + "x" + std::to_string(d) + " matrix");
  if (!matrix.allFinite()) throw DataError("SVD input contains non-finite values");

  const Eigen::Index sketch = std::min(k + options.oversampling, std::min(n, d));
  Rng rng(options.seed);
  Eigen::MatrixXd omega(d, sketch);
  for (Eigen::Index j = 0; j < sketch; ++j)
    for (Eigen::Index i = 0; i < d; ++i) omega(i, j) = rng.normal();

  Eigen::MatrixXd q = orthonormal_basis(matrix * omega);
  auto power_step = [&] {
    const Eigen::MatrixXd z = orthonormal_basis(matrix.transpose() * q);
    q = orthonormal_basis(matrix * z);
  };
  auto project = [&](Eigen::MatrixXd& right, Eigen::VectorXd& sigma) {
    const Eigen::MatrixXd small = q.transpose() * matrix;  // sketch x d
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(small, Eigen::ComputeThinV);
    right = svd.matrixV().leftCols(k);
    sigma = svd.singularValues().head(k);
  };

  for (int i = 0; i < options.power_iterations; ++i) power_step();

  Eigen::MatrixXd right;
  Eigen::VectorXd sigma;
  project(right, sigma);
  double energy = sigma.squaredNorm();
  for (int i = 0; i < options.max_refinement_iterations; ++i) {
    power_step();
    project(right, sigma);
    const double next = sigma.squaredNorm();
    const bool converged = std::abs(next - energy) <= options.energy_tolerance * std::max(next, 1e-300);
    energy = next;
    if (converged) break;
  }

  // Sign convention: the largest-magnitude entry of each component is positive.
  for (Eigen::Index c = 0; c < k; ++c) {
    Eigen::Index arg = 0;
    right.col(c).cwiseAbs().maxCoeff(&arg);
    if (right(arg, c) < 0) right.col(c) *= -1.0;
  }

  SvdModel model;
  model.components = right.transpose();
  model.singular_values = sigma;
  return model;
}

Eigen::MatrixXd svd_transform(const SvdModel& model, const Eigen::MatrixXd& matrix) {
  if (matrix.cols() != model.n_features())
    throw ShapeError("SVD transform expects " + std::to_string(model.n_features()) + " columns, got " +
                     std::to_string(matrix.cols()));
  return matrix * model.components.transpose();
}

ScalerModel minmax_fit(const Eigen::MatrixXd& matrix) {
  if (matrix.rows() == 0) throw DataError("cannot fit a scaler on zero rows");
  return {matrix.colwise().minCoeff().transpose(), matrix.colwise().maxCoeff().transpose()};
}

Eigen::MatrixXd minmax_transform(const ScalerModel& model, const Eigen::MatrixXd& matrix) {
  if (matrix.cols() != model.min.size())
    throw ShapeError("scaler expects " + std::to_string(model.min.size()) + " columns, got " +
                     std::to_string(matrix.cols()));
  Eigen::MatrixXd out(matrix.rows(), matrix.cols());
  for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
    const double range = model.max(j) - model.min(j);
    if (range > 0.0)
      out.col(j) = (matrix.col(j).array() - model.min(j)) / range;
    else
      out.col(j).setZero();
  }
  return out;
}

TimeSeriesDataset remove_conflicting_duplicates(const TimeSeriesDataset& dataset) {
  dataset.check_consistent();
  std::map<std::vector<double>, std::set<int>> labels_by_row;
  std::vector<std::vector<double>> keys;
  keys.reserve(static_cast<std::size_t>(dataset.size()));
  for (Eigen::Index i = 0; i < dataset.size(); ++i) {
    std::vector<double> key(static_cast<std::size_t>(dataset.seq_len()));
    for (Eigen::Index j = 0; j < dataset.seq_len(); ++j) key[static_cast<std::size_t>(j)] = dataset.matrix(i, j);
    labels_by_row[key].insert(dataset.labels[static_cast<std::size_t>(i)]);
    keys.push_back(std::move(key));
  }
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < dataset.size(); ++i) {
    if (labels_by_row[keys[static_cast<std::size_t>(i)]].size() == 1) keep.push_back(i);
  }
  return dataset.select(keep);
}

ClassWeights class_weights(std::span<const int> labels) {
  std::array<std::int64_t, 2> counts{0, 0};
  for (const int y : labels) {
    if (y != 0 && y != 1) throw UsageError("class label must be 0 or 1, got " + std::to_string(y));
    ++counts[static_cast<std::size_t>(y)];
  }
  if (counts[0] == 0 || counts[1] == 0)
    throw UsageError("class weights need both classes present (counts " + std::to_string(counts[0]) + ", " +
                     std::to_string(counts[1]) + ")");
  const auto n = static_cast<double>(labels.size());
  ClassWeights w;
  for (std::size_t c = 0; c < 2; ++c) w.weight[c] = n / (2.0 * static_cast<double>(counts[c]));
  return w;
}

}  // namespace preprocess
}  // namespace rumorts
