#include "rumorts/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

#include "rumorts/error.hpp"

namespace rumorts::nn {
namespace {

constexpr char kCheckpointMagic[8] = {'R', 'T', 'S', 'N', 'N', '0', '0', '1'};

using Array = Eigen::ArrayXXd;

Array sigmoid(const Array& a) { return (1.0 + (-a).exp()).inverse(); }

Matrix preactivation(const CellParams& p, const Matrix& x, const Matrix& h) {
  return ((p.W.value * x + p.U.value * h).colwise() + p.b.value.col(0));
}

void check_step_shapes(const CellParams& p, const Matrix& h_prev, const Matrix& x) {
  if (x.rows() != p.input_size || h_prev.rows() != p.hidden_size || h_prev.cols() != x.cols())
    throw ShapeError("cell step: input " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) + ", state " +
                     std::to_string(h_prev.rows()) + "x" + std::to_string(h_prev.cols()) + " do not match a " +
                     std::to_string(p.input_size) + "->" + std::to_string(p.hidden_size) + " cell");
}

// One forward step. `gates` receives the post-activation gate stack (or the
// new state for simple cells); `c` is read as c_prev and overwritten for LSTM.
Matrix step_impl(const CellParams& p, const Matrix& h_prev, Matrix* c, const Matrix& x, Matrix* gates) {
  const Eigen::Index H = p.hidden_size;
  switch (p.kind) {
    case CellKind::Simple: {
      const Array a = preactivation(p, x, h_prev).array();
      Matrix h = p.activation == Activation::Tanh ? Matrix(a.tanh()) : Matrix(sigmoid(a));
      if (gates) *gates = h;
      return h;
    }
    case CellKind::Lstm: {
      const Array a = preactivation(p, x, h_prev).array();
      const Array i = sigmoid(a.topRows(H));
      const Array f = sigmoid(a.middleRows(H, H));
      const Array g = a.middleRows(2 * H, H).tanh();
      const Array o = sigmoid(a.bottomRows(H));
      const Array c_new = f * c->array() + i * g;
      Matrix h = (o * c_new.tanh()).matrix();
      if (gates) {
        gates->resize(4 * H, x.cols());
        *gates << i.matrix(), f.matrix(), g.matrix(), o.matrix();
      }
      *c = c_new.matrix();
      return h;
    }
    case CellKind::Gru: {
      const Matrix ax = (p.W.value * x).colwise() + p.b.value.col(0);
      const Array azr = (ax.topRows(2 * H) + p.U.value.topRows(2 * H) * h_prev).array();
      const Array z = sigmoid(azr.topRows(H));
      const Array r = sigmoid(azr.bottomRows(H));
      const Matrix reset_state = (r * h_prev.array()).matrix();
      const Array cand = (ax.bottomRows(H) + p.U.value.bottomRows(H) * reset_state).array().tanh();
      Matrix h = ((1.0 - z) * h_prev.array() + z * cand).matrix();
      if (gates) {
        gates->resize(3 * H, x.cols());
        *gates << z.matrix(), r.matrix(), cand.matrix();
      }
      return h;
    }
  }
  throw UsageError("unknown cell kind");
}

void write_string(std::ostream& out, const std::string& s) {
  const std::uint64_t n = s.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(s.data(), static_cast<std::streamsize>(n));
}

std::string read_string(std::istream& in) {
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in || n > (1ULL << 32)) throw DataError("corrupt checkpoint");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw DataError("truncated checkpoint");
  return s;
}

Sequence reversed(const Sequence& s) { return Sequence(s.rbegin(), s.rend()); }

}  // namespace

const char* to_string(CellKind kind) {
  switch (kind) {
    case CellKind::Simple: return "simple";
    case CellKind::Lstm: return "lstm";
    case CellKind::Gru: return "gru";
  }
  return "?";
}

const char* to_string(Activation act) { return act == Activation::Tanh ? "tanh" : "sigmoid"; }

int gate_count(CellKind kind) {
  switch (kind) {
    case CellKind::Simple: return 1;
    case CellKind::Lstm: return 4;
    case CellKind::Gru: return 3;
  }
  return 0;
}

void CellParams::check_shapes() const {
  const Eigen::Index rows = gate_count(kind) * hidden_size;
  if (W.value.rows() != rows || W.value.cols() != input_size || U.value.rows() != rows ||
      U.value.cols() != hidden_size || b.value.rows() != rows || b.value.cols() != 1)
    throw ShapeError(std::string(to_string(kind)) + " cell parameters have inconsistent shapes");
}

Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, Rng& rng, double lo, double hi) {
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(lo, hi);
  return m;
}

CellParams make_cell(CellKind kind, Eigen::Index input_size, Eigen::Index hidden_size, Rng& rng,
                     Activation activation) {
  if (input_size < 1 || hidden_size < 1) throw UsageError("cell sizes must be positive");
  const Eigen::Index rows = gate_count(kind) * hidden_size;
  CellParams p;
  p.kind = kind;
  p.activation = activation;
  p.input_size = input_size;
  p.hidden_size = hidden_size;
  p.W = Param("W", uniform_init(rows, input_size, rng));
  p.U = Param("U", uniform_init(rows, hidden_size, rng));
  p.b = Param("b", Matrix::Zero(rows, 1));
  return p;
}

Matrix simple_rnn_step(const CellParams& p, const Matrix& h_prev, const Matrix& x) {
  if (p.kind != CellKind::Simple) throw UsageError("simple_rnn_step needs a simple cell");
  check_step_shapes(p, h_prev, x);
  return step_impl(p, h_prev, nullptr, x, nullptr);
}

LstmState lstm_step(const CellParams& p, const Matrix& h_prev, const Matrix& c_prev, const Matrix& x) {
  if (p.kind != CellKind::Lstm) throw UsageError("lstm_step needs an LSTM cell");
  check_step_shapes(p, h_prev, x);
  if (c_prev.rows() != h_prev.rows() || c_prev.cols() != h_prev.cols())
    throw ShapeError("lstm_step: cell state shape differs from hidden state");
  Matrix c = c_prev;
  Matrix h = step_impl(p, h_prev, &c, x, nullptr);
  return {std::move(h), std::move(c)};
}

Matrix gru_step(const CellParams& p, const Matrix& h_prev, const Matrix& x) {
  if (p.kind != CellKind::Gru) throw UsageError("gru_step needs a GRU cell");
  check_step_shapes(p, h_prev, x);
  return step_impl(p, h_prev, nullptr, x, nullptr);
}

Sequence sequence_run(const CellParams& p, const Sequence& input, bool return_sequences) {
  if (input.empty()) throw ShapeError("cannot run a cell over an empty sequence");
  const Eigen::Index batch = input.front().cols();
  Matrix h = Matrix::Zero(p.hidden_size, batch);
  Matrix c = Matrix::Zero(p.hidden_size, batch);
  Sequence states;
  states.reserve(return_sequences ? input.size() : 1);
  for (const auto& x : input) {
    switch (p.kind) {
      case CellKind::Simple: h = simple_rnn_step(p, h, x); break;
      case CellKind::Lstm: {
        auto s = lstm_step(p, h, c, x);
        h = std::move(s.h);
        c = std::move(s.c);
        break;
      }
      case CellKind::Gru: h = gru_step(p, h, x); break;
    }
    if (return_sequences) states.push_back(h);
  }
  if (!return_sequences) states.push_back(std::move(h));
  return states;
}

Sequence bidirectional_run(const CellParams& forward, const CellParams& backward, const Sequence& input) {
  if (forward.hidden_size != backward.hidden_size)
    throw ShapeError("bidirectional directions must share a hidden size");
  const Sequence fwd = sequence_run(forward, input, true);
  const Sequence bwd = reversed(sequence_run(backward, reversed(input), true));
  Sequence out(input.size());
  for (std::size_t t = 0; t < input.size(); ++t) {
    out[t].resize(2 * forward.hidden_size, fwd[t].cols());
    out[t] << fwd[t], bwd[t];
  }
  return out;
}

// ---------------------------------------------------------------------------

Recurrent::Recurrent(CellParams cell, bool return_sequences, bool reverse)
    : cell_(std::move(cell)), return_sequences_(return_sequences), reverse_(reverse) {
  cell_.check_shapes();
}

Sequence Recurrent::forward(const Sequence& input, bool, Rng&) {
  if (input.empty()) throw ShapeError("recurrent layer received an empty sequence");
  const std::size_t steps = input.size();
  const Eigen::Index batch = input.front().cols();
  const Eigen::Index H = cell_.hidden_size;
  x_.resize(steps);
  gates_.resize(steps);
  h_.assign(steps + 1, Matrix());
  h_[0] = Matrix::Zero(H, batch);
  const bool lstm = cell_.kind == CellKind::Lstm;
  c_.assign(lstm ? steps + 1 : 0, Matrix());
  Matrix c = Matrix::Zero(H, batch);
  if (lstm) c_[0] = c;

  Sequence out(return_sequences_ ? steps : 1);
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t pos = reverse_ ? steps - 1 - s : s;
    x_[s] = input[pos];
    check_step_shapes(cell_, h_[s], x_[s]);
    h_[s + 1] = step_impl(cell_, h_[s], &c, x_[s], &gates_[s]);
    if (lstm) c_[s + 1] = c;
    if (return_sequences_) out[pos] = h_[s + 1];
  }
  if (!return_sequences_) out[0] = h_[steps];
  return out;
}

Sequence Recurrent::backward(const Sequence& grad_output) {
  const std::size_t steps = x_.size();
  if (steps == 0) throw UsageError("recurrent backward called before forward");
  if (grad_output.size() != (return_sequences_ ? steps : 1))
    throw ShapeError("recurrent backward: gradient sequence length mismatch");
  const Eigen::Index H = cell_.hidden_size;
  const Eigen::Index batch = x_.front().cols();
  Matrix dh_next = Matrix::Zero(H, batch);
  Matrix dc_next = Matrix::Zero(H, batch);
  Sequence dx(steps);
  Matrix& gW = cell_.W.grad;
  Matrix& gU = cell_.U.grad;
  Matrix& gb = cell_.b.grad;
  const Matrix& W = cell_.W.value;
  const Matrix& U = cell_.U.value;

  for (std::size_t s = steps; s-- > 0;) {
    const std::size_t pos = reverse_ ? steps - 1 - s : s;
    Matrix dh = dh_next;
    if (return_sequences_)
      dh += grad_output[pos];
    else if (s == steps - 1)
      dh += grad_output[0];
    const Matrix& h_prev = h_[s];
    const Matrix& x = x_[s];
    Matrix da;

    switch (cell_.kind) {
      case CellKind::Simple: {
        const Array h = h_[s + 1].array();
        const Array deriv = cell_.activation == Activation::Tanh ? Array(1.0 - h.square()) : Array(h * (1.0 - h));
        da = (dh.array() * deriv).matrix();
        gU.noalias() += da * h_prev.transpose();
        dh_next = U.transpose() * da;
        break;
      }
      case CellKind::Lstm: {
        const Matrix& g4 = gates_[s];
        const Array i = g4.topRows(H).array();
        const Array f = g4.middleRows(H, H).array();
        const Array g = g4.middleRows(2 * H, H).array();
        const Array o = g4.bottomRows(H).array();
        const Array tc = c_[s + 1].array().tanh();
        const Array dh_a = dh.array();
        const Array dc = dc_next.array() + dh_a * o * (1.0 - tc.square());
        da.resize(4 * H, batch);
        da << (dc * g * i * (1.0 - i)).matrix(), (dc * c_[s].array() * f * (1.0 - f)).matrix(),
            (dc * i * (1.0 - g.square())).matrix(), (dh_a * tc * o * (1.0 - o)).matrix();
        dc_next = (dc * f).matrix();
        gU.noalias() += da * h_prev.transpose();
        dh_next = U.transpose() * da;
        break;
      }
      case CellKind::Gru: {
        const Matrix& g3 = gates_[s];
        const Array z = g3.topRows(H).array();
        const Array r = g3.middleRows(H, H).array();
        const Array cand = g3.bottomRows(H).array();
        const Array dh_a = dh.array();
        const Array hp = h_prev.array();
        const Matrix da_cand = (dh_a * z * (1.0 - cand.square())).matrix();
        const Array d_reset_state = (U.bottomRows(H).transpose() * da_cand).array();
        const Array dz = dh_a * (cand - hp);
        const Array dr = d_reset_state * hp;
        da.resize(3 * H, batch);
        da << (dz * z * (1.0 - z)).matrix(), (dr * r * (1.0 - r)).matrix(), da_cand;
        gU.topRows(2 * H).noalias() += da.topRows(2 * H) * h_prev.transpose();
        gU.bottomRows(H).noalias() += da_cand * (r * hp).matrix().transpose();
        dh_next = (dh_a * (1.0 - z) + d_reset_state * r).matrix();
        dh_next.noalias() += U.topRows(2 * H).transpose() * da.topRows(2 * H);
        break;
      }
    }
    gW.noalias() += da * x.transpose();
    gb += da.rowwise().sum();
    dx[pos] = W.transpose() * da;
  }
  return dx;
}

Sequence Recurrent::infer(const Sequence& input) const {
  if (!reverse_) return sequence_run(cell_, input, return_sequences_);
  Sequence out = sequence_run(cell_, reversed(input), return_sequences_);
  return return_sequences_ ? reversed(out) : out;
}

std::vector<Param*> Recurrent::params() { return {&cell_.W, &cell_.U, &cell_.b}; }
std::vector<const Param*> Recurrent::params() const { return {&cell_.W, &cell_.U, &cell_.b}; }

nlohmann::json Recurrent::describe() const {
  nlohmann::json j = {{"type", "recurrent"},
                      {"cell", to_string(cell_.kind)},
                      {"input", cell_.input_size},
                      {"units", cell_.hidden_size},
                      {"return_sequences", return_sequences_},
                      {"reverse", reverse_}};
  if (cell_.kind == CellKind::Simple) j["activation"] = to_string(cell_.activation);
  return j;
}

// ---------------------------------------------------------------------------

Bidirectional::Bidirectional(CellParams forward, CellParams backward, bool return_sequences)
    : forward_(std::move(forward), return_sequences, false),
      backward_(std::move(backward), return_sequences, true),
      hidden_(forward_.cell().hidden_size) {
  if (backward_.cell().hidden_size != hidden_)
    throw ShapeError("bidirectional directions must share a hidden size");
}

Sequence Bidirectional::forward(const Sequence& input, bool training, Rng& rng) {
  const Sequence f = forward_.forward(input, training, rng);
  const Sequence b = backward_.forward(input, training, rng);
  Sequence out(f.size());
  for (std::size_t t = 0; t < f.size(); ++t) {
    out[t].resize(2 * hidden_, f[t].cols());
    out[t] << f[t], b[t];
  }
  return out;
}

Sequence Bidirectional::backward(const Sequence& grad_output) {
  Sequence gf(grad_output.size());
  Sequence gb(grad_output.size());
  for (std::size_t t = 0; t < grad_output.size(); ++t) {
    gf[t] = grad_output[t].topRows(hidden_);
    gb[t] = grad_output[t].bottomRows(hidden_);
  }
  Sequence dx = forward_.backward(gf);
  const Sequence dxb = backward_.backward(gb);
  for (std::size_t t = 0; t < dx.size(); ++t) dx[t] += dxb[t];
  return dx;
}

Sequence Bidirectional::infer(const Sequence& input) const {
  const Sequence f = forward_.infer(input);
  const Sequence b = backward_.infer(input);
  Sequence out(f.size());
  for (std::size_t t = 0; t < f.size(); ++t) {
    out[t].resize(2 * hidden_, f[t].cols());
    out[t] << f[t], b[t];
  }
  return out;
}

std::vector<Param*> Bidirectional::params() {
  auto p = forward_.params();
  for (auto* q : backward_.params()) p.push_back(q);
  return p;
}

std::vector<const Param*> Bidirectional::params() const {
  auto p = std::as_const(forward_).params();
  for (const auto* q : std::as_const(backward_).params()) p.push_back(q);
  return p;
}

nlohmann::json Bidirectional::describe() const {
  return {{"type", "bidirectional"}, {"forward", forward_.describe()}, {"backward", backward_.describe()}};
}

// ---------------------------------------------------------------------------

Dense::Dense(Eigen::Index input_size, Eigen::Index output_size, Rng& rng) {
  if (input_size < 1 || output_size < 1) throw UsageError("dense sizes must be positive");
  // Glorot-uniform output kernel.
  const double limit = std::sqrt(6.0 / static_cast<double>(input_size + output_size));
  W_ = Param("W", uniform_init(output_size, input_size, rng, -limit, limit));
  b_ = Param("b", Matrix::Zero(output_size, 1));
}

Sequence Dense::forward(const Sequence& input, bool, Rng&) {
  Sequence out = infer(input);
  x_ = input.front();
  return out;
}

Sequence Dense::backward(const Sequence& grad_output) {
  if (grad_output.size() != 1) throw ShapeError("dense backward expects one gradient matrix");
  const Matrix& g = grad_output.front();
  W_.grad.noalias() += g * x_.transpose();
  b_.grad += g.rowwise().sum();
  return {W_.value.transpose() * g};
}

Sequence Dense::infer(const Sequence& input) const {
  if (input.size() != 1)
    throw ShapeError("dense layer expects a single matrix, got a sequence of " + std::to_string(input.size()));
  if (input.front().rows() != W_.value.cols())
    throw ShapeError("dense layer expects " + std::to_string(W_.value.cols()) + " features, got " +
                     std::to_string(input.front().rows()));
  return {(W_.value * input.front()).colwise() + b_.value.col(0)};
}

nlohmann::json Dense::describe() const {
  return {{"type", "dense"}, {"input", W_.value.cols()}, {"units", W_.value.rows()}};
}

// ---------------------------------------------------------------------------

Sequence Flatten::forward(const Sequence& input, bool, Rng&) {
  if (input.empty()) throw ShapeError("flatten received an empty sequence");
  steps_ = static_cast<Eigen::Index>(input.size());
  width_ = input.front().rows();
  return infer(input);
}

Sequence Flatten::backward(const Sequence& grad_output) {
  const Matrix& g = grad_output.front();
  Sequence dx(static_cast<std::size_t>(steps_));
  for (Eigen::Index t = 0; t < steps_; ++t) dx[static_cast<std::size_t>(t)] = g.middleRows(t * width_, width_);
  return dx;
}

Sequence Flatten::infer(const Sequence& input) const {
  if (input.empty()) throw ShapeError("flatten received an empty sequence");
  const Eigen::Index width = input.front().rows();
  Matrix out(width * static_cast<Eigen::Index>(input.size()), input.front().cols());
  for (std::size_t t = 0; t < input.size(); ++t) out.middleRows(static_cast<Eigen::Index>(t) * width, width) = input[t];
  return {out};
}

// ---------------------------------------------------------------------------

Matrix dropout_forward(const Matrix& input, double rate, bool training, Rng& rng, Matrix* mask) {
  if (!(rate >= 0.0 && rate < 1.0)) throw UsageError("dropout rate must lie in [0, 1)");
  if (!training || rate == 0.0) {
    if (mask) *mask = Matrix::Ones(input.rows(), input.cols());
    return input;
  }
  const double scale = 1.0 / (1.0 - rate);
  Matrix m(input.rows(), input.cols());
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = rng.uniform01() < rate ? 0.0 : scale;
  Matrix out = input.cwiseProduct(m);
  if (mask) *mask = std::move(m);
  return out;
}

Dropout::Dropout(double rate) : rate_(rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw UsageError("dropout rate must lie in [0, 1)");
}

Sequence Dropout::forward(const Sequence& input, bool training, Rng& rng) {
  masks_.resize(input.size());
  Sequence out(input.size());
  for (std::size_t t = 0; t < input.size(); ++t) out[t] = dropout_forward(input[t], rate_, training, rng, &masks_[t]);
  return out;
}

Sequence Dropout::backward(const Sequence& grad_output) {
  Sequence dx(grad_output.size());
  for (std::size_t t = 0; t < grad_output.size(); ++t) dx[t] = grad_output[t].cwiseProduct(masks_[t]);
  return dx;
}

// ---------------------------------------------------------------------------

Matrix softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const auto col = logits.col(j).array();
    const Eigen::ArrayXd e = (col - col.maxCoeff()).exp();
    out.col(j) = (e / e.sum()).matrix();
  }
  return out;
}

LossResult softmax_cross_entropy(const Matrix& logits, std::span<const int> labels,
                                 std::span<const double> sample_weights) {
  const auto batch = static_cast<std::size_t>(logits.cols());
  if (labels.size() != batch || sample_weights.size() != batch)
    throw ShapeError("loss: " + std::to_string(batch) + " logit columns but " + std::to_string(labels.size()) +
                     " labels and " + std::to_string(sample_weights.size()) + " weights");
  LossResult result;
  result.grad.resize(logits.rows(), logits.cols());
  const double inv_batch = 1.0 / static_cast<double>(batch);
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const auto y = labels[static_cast<std::size_t>(j)];
    if (y < 0 || y >= logits.rows()) throw UsageError("label " + std::to_string(y) + " out of range");
    const double w = sample_weights[static_cast<std::size_t>(j)];
    const auto col = logits.col(j).array();
    const double m = col.maxCoeff();
    const Eigen::ArrayXd e = (col - m).exp();
    const double sum = e.sum();
    const double log_p = col(y) - m - std::log(sum);
    result.loss += -w * log_p;
    Eigen::VectorXd g = (e / sum).matrix();
    g(y) -= 1.0;
    result.grad.col(j) = w * inv_batch * g;
  }
  result.loss *= inv_batch;
  return result;
}

// ---------------------------------------------------------------------------

Matrix Network::forward(const Sequence& input, bool training, Rng& rng) {
  Sequence s = input;
  for (auto& layer : layers_) s = layer->forward(s, training, rng);
  if (s.size() != 1) throw ShapeError("network output is a sequence; add a flatten or final-state layer");
  return s.front();
}

void Network::backward(const Matrix& grad_logits) {
  Sequence g{grad_logits};
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
}

Matrix Network::infer(const Sequence& input) const {
  Sequence s = input;
  for (const auto& layer : layers_) s = layer->infer(s);
  if (s.size() != 1) throw ShapeError("network output is a sequence; add a flatten or final-state layer");
  return s.front();
}

std::vector<Param*> Network::params() {
  std::vector<Param*> out;
  for (auto& layer : layers_)
    for (auto* p : layer->params()) out.push_back(p);
  return out;
}

std::vector<const Param*> Network::params() const {
  std::vector<const Param*> out;
  for (const auto& layer : layers_)
    for (const auto* p : std::as_const(*layer).params()) out.push_back(p);
  return out;
}

void Network::zero_grad() {
  for (auto* p : params()) p->grad.setZero();
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : params()) n += static_cast<std::size_t>(p->value.size());
  return n;
}

nlohmann::json Network::manifest() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : layers_) layers.push_back(layer->describe());
  return {{"layers", layers}, {"parameters", parameter_count()}};
}

void Network::save(std::ostream& out) const {
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  write_string(out, manifest().dump());
  const auto ps = params();
  const std::uint64_t count = ps.size();
  out.write(reinterpret_cast<const char*>(&count), sizeof count);
  for (const auto* p : ps) {
    write_string(out, p->name);
    const std::int64_t shape[2] = {p->value.rows(), p->value.cols()};
    out.write(reinterpret_cast<const char*>(shape), sizeof shape);
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  }
}

void Network::load(std::istream& in) {
  char magic[sizeof kCheckpointMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) throw DataError("not a network checkpoint");
  const auto stored = nlohmann::json::parse(read_string(in));
  if (stored.at("layers") != manifest().at("layers"))
    throw ShapeError("checkpoint topology does not match the network");
  std::uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof count);
  auto ps = params();
  if (!in || count != ps.size()) throw ShapeError("checkpoint parameter count mismatch");
  for (auto* p : ps) {
    read_string(in);
    std::int64_t shape[2] = {0, 0};
    in.read(reinterpret_cast<char*>(shape), sizeof shape);
    if (!in || shape[0] != p->value.rows() || shape[1] != p->value.cols())
      throw ShapeError("checkpoint shape mismatch for parameter " + p->name);
    in.read(reinterpret_cast<char*>(p->value.data()), static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    if (!in) throw DataError("truncated checkpoint");
  }
}

// ---------------------------------------------------------------------------

void Adam::step(std::span<Param* const> params) {
  for (const auto* p : params) {
    if (!p->grad.allFinite()) throw TrainingError("non-finite gradient in parameter " + p->name);
  }
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (m_.size() != params.size()) throw ShapeError("Adam parameter list changed between steps");

  ++step_;
  const double t = static_cast<double>(step_);
  const double bc1 = 1.0 - std::pow(config_.beta1, t);
  const double bc2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& g = params[k]->grad;
    m_[k] = config_.beta1 * m_[k] + (1.0 - config_.beta1) * g;
    v_[k] = config_.beta2 * v_[k] + (1.0 - config_.beta2) * g.cwiseAbs2();
    params[k]->value.array() -=
        config_.learning_rate * (m_[k].array() / bc1) / ((v_[k].array() / bc2).sqrt() + config_.epsilon);
  }
}

Sequence rows_to_sequence(const Matrix& rows) {
  Sequence seq(static_cast<std::size_t>(rows.cols()));
  for (Eigen::Index t = 0; t < rows.cols(); ++t) seq[static_cast<std::size_t>(t)] = rows.col(t).transpose();
  return seq;
}

GradCheckResult gradient_check(Network& net, const Sequence& input, std::span<const int> labels,
                               std::span<const double> sample_weights, const GradCheckOptions& options) {
  auto loss_at = [&] {
    Rng rng(options.seed);
    return softmax_cross_entropy(net.forward(input, options.training_mode, rng), labels, sample_weights).loss;
  };

  net.zero_grad();
  {
    Rng rng(options.seed);
    const Matrix logits = net.forward(input, options.training_mode, rng);
    net.backward(softmax_cross_entropy(logits, labels, sample_weights).grad);
  }

  GradCheckResult result;
  for (auto* p : net.params()) {
    const Matrix analytic = p->grad;
    for (Eigen::Index k = 0; k < p->value.size(); ++k) {
      double& v = p->value.data()[k];
      const double orig = v;
      v = orig + options.epsilon;
      const double plus = loss_at();
      v = orig - options.epsilon;
      const double minus = loss_at();
      v = orig;
      const double numeric = (plus - minus) / (2.0 * options.epsilon);
      const double a = analytic.data()[k];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_param = p->name;
      }
      ++result.checked;
    }
  }
  return result;
}

}  // namespace rumorts::nn
