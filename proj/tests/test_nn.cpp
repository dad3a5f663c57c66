#include <cmath>
#include <sstream>

#include "doctest.h"
#include "rumorts/error.hpp"
#include "rumorts/nn.hpp"

using namespace rumorts;
using namespace rumorts::nn;

namespace {

double sig(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Pre-activation of gate block `g`, unit `j`, batch column `col`, with the
// recurrent input optionally replaced by `h_override`.
double pre(const CellParams& p, int g, Eigen::Index j, const Matrix& x, const Matrix& h, Eigen::Index col) {
  const Eigen::Index row = g * p.hidden_size + j;
  double s = p.b.value(row, 0);
  for (Eigen::Index k = 0; k < p.input_size; ++k) s += p.W.value(row, k) * x(k, col);
  for (Eigen::Index k = 0; k < p.hidden_size; ++k) s += p.U.value(row, k) * h(k, col);
  return s;
}

Matrix random(Eigen::Index r, Eigen::Index c, Rng& rng) { return uniform_init(r, c, rng, -1.0, 1.0); }

CellParams cell_with_bias(CellKind kind, Eigen::Index in, Eigen::Index hidden, Rng& rng,
                          Activation act = Activation::Tanh) {
  auto p = make_cell(kind, in, hidden, rng, act);
  p.b.value = random(p.b.value.rows(), 1, rng);
  return p;
}

}  // namespace

TEST_CASE("initialisation ranges and shapes") {
  Rng rng(1);
  const auto p = make_cell(CellKind::Lstm, 3, 5, rng);
  CHECK(p.W.value.rows() == 20);
  CHECK(p.W.value.cols() == 3);
  CHECK(p.U.value.rows() == 20);
  CHECK(p.U.value.cols() == 5);
  CHECK(p.b.value.isZero());
  CHECK(p.W.value.maxCoeff() < 0.5);
  CHECK(p.W.value.minCoeff() > -0.5);
  CHECK(gate_count(CellKind::Simple) == 1);
  CHECK(gate_count(CellKind::Gru) == 3);
}

TEST_CASE("simple step matches the scalar formula") {
  Rng rng(2);
  for (auto act : {Activation::Tanh, Activation::Sigmoid}) {
    const auto p = cell_with_bias(CellKind::Simple, 3, 4, rng, act);
    const Matrix x = random(3, 2, rng), h = random(4, 2, rng);
    const Matrix out = simple_rnn_step(p, h, x);
    for (Eigen::Index c = 0; c < 2; ++c)
      for (Eigen::Index j = 0; j < 4; ++j) {
        const double z = pre(p, 0, j, x, h, c);
        CHECK(out(j, c) == doctest::Approx(act == Activation::Tanh ? std::tanh(z) : sig(z)).epsilon(1e-14));
      }
  }
}

TEST_CASE("LSTM step matches the scalar formula") {
  Rng rng(3);
  const auto p = cell_with_bias(CellKind::Lstm, 2, 3, rng);
  const Matrix x = random(2, 2, rng), h = random(3, 2, rng), c = random(3, 2, rng);
  const auto s = lstm_step(p, h, c, x);
  for (Eigen::Index col = 0; col < 2; ++col)
    for (Eigen::Index j = 0; j < 3; ++j) {
      const double i = sig(pre(p, 0, j, x, h, col));
      const double f = sig(pre(p, 1, j, x, h, col));
      const double g = std::tanh(pre(p, 2, j, x, h, col));
      const double o = sig(pre(p, 3, j, x, h, col));
      const double cn = f * c(j, col) + i * g;
      CHECK(s.c(j, col) == doctest::Approx(cn).epsilon(1e-14));
      CHECK(s.h(j, col) == doctest::Approx(o * std::tanh(cn)).epsilon(1e-14));
    }
}

TEST_CASE("GRU step matches the scalar formula") {
  Rng rng(4);
  const auto p = cell_with_bias(CellKind::Gru, 2, 3, rng);
  const Matrix x = random(2, 2, rng), h = random(3, 2, rng);
  const Matrix out = gru_step(p, h, x);
  for (Eigen::Index col = 0; col < 2; ++col) {
    Matrix rh(3, 2);
    rh.setZero();
    for (Eigen::Index j = 0; j < 3; ++j) rh(j, col) = sig(pre(p, 1, j, x, h, col)) * h(j, col);
    for (Eigen::Index j = 0; j < 3; ++j) {
      const double z = sig(pre(p, 0, j, x, h, col));
      const double cand = std::tanh(pre(p, 2, j, x, rh, col));
      CHECK(out(j, col) == doctest::Approx((1 - z) * h(j, col) + z * cand).epsilon(1e-14));
    }
  }
}

TEST_CASE("step functions reject mismatched shapes") {
  Rng rng(5);
  const auto p = make_cell(CellKind::Simple, 3, 4, rng);
  CHECK_THROWS_AS(simple_rnn_step(p, Matrix::Zero(4, 1), Matrix::Zero(2, 1)), ShapeError);
  CHECK_THROWS_AS(simple_rnn_step(p, Matrix::Zero(3, 1), Matrix::Zero(3, 1)), ShapeError);
  CHECK_THROWS_AS(gru_step(p, Matrix::Zero(4, 1), Matrix::Zero(3, 1)), UsageError);
}

TEST_CASE("sequence and bidirectional runs") {
  Rng rng(6);
  const auto f = cell_with_bias(CellKind::Gru, 1, 2, rng);
  const auto b = cell_with_bias(CellKind::Gru, 1, 2, rng);
  Sequence in;
  for (int t = 0; t < 5; ++t) in.push_back(random(1, 3, rng));

  const auto all = sequence_run(f, in, true);
  const auto last = sequence_run(f, in, false);
  REQUIRE(all.size() == 5);
  REQUIRE(last.size() == 1);
  CHECK(all.back() == last.front());
  Matrix h = Matrix::Zero(2, 3);
  for (const auto& x : in) h = gru_step(f, h, x);
  CHECK(h == last.front());

  const auto bi = bidirectional_run(f, b, in);
  Sequence rev(in.rbegin(), in.rend());
  const auto back = sequence_run(b, rev, true);
  REQUIRE(bi.size() == 5);
  for (std::size_t t = 0; t < 5; ++t) {
    CHECK(bi[t].topRows(2) == all[t]);
    CHECK(bi[t].bottomRows(2) == back[4 - t]);
  }

  Recurrent layer(f, true);
  const auto out = layer.infer(in);
  for (std::size_t t = 0; t < 5; ++t) CHECK(out[t] == all[t]);
}

TEST_CASE("flatten is time-major and dropout scales survivors") {
  Flatten flat;
  Sequence in = {Matrix::Constant(2, 1, 1.0), Matrix::Constant(2, 1, 2.0), Matrix::Constant(2, 1, 3.0)};
  const auto out = flat.infer(in);
  REQUIRE(out.size() == 1);
  Matrix expected(6, 1);
  expected << 1, 1, 2, 2, 3, 3;
  CHECK(out[0] == expected);

  Rng rng(7);
  const Matrix ones = Matrix::Ones(200, 50);
  Matrix mask;
  const Matrix dropped = dropout_forward(ones, 0.25, true, rng, &mask);
  CHECK(dropped == mask);
  std::int64_t zeros = 0;
  for (Eigen::Index k = 0; k < dropped.size(); ++k) {
    const double v = dropped.data()[k];
    CHECK((v == 0.0 || v == doctest::Approx(1.0 / 0.75)));
    zeros += v == 0.0;
  }
  CHECK(static_cast<double>(zeros) / 10000.0 == doctest::Approx(0.25).epsilon(0.1));
  CHECK(dropout_forward(ones, 0.25, false, rng) == ones);
  CHECK_THROWS_AS(dropout_forward(ones, 1.0, true, rng), UsageError);
}

TEST_CASE("softmax cross-entropy value and gradient") {
  Matrix logits(2, 3);
  logits << 0.5, -1.0, 2.0,
            1.5, 0.0, -0.5;
  const std::vector<int> y = {1, 0, 0};
  const std::vector<double> w = {2.0, 0.5, 1.0};
  const auto r = softmax_cross_entropy(logits, y, w);
  double expected = 0.0;
  for (int c = 0; c < 3; ++c) {
    const double a = logits(0, c), b = logits(1, c);
    const double m = std::max(a, b);
    const double lse = m + std::log(std::exp(a - m) + std::exp(b - m));
    expected += w[static_cast<std::size_t>(c)] * (lse - logits(y[static_cast<std::size_t>(c)], c));
    for (int k = 0; k < 2; ++k) {
      const double p = std::exp(logits(k, c) - lse);
      CHECK(r.grad(k, c) == doctest::Approx(w[static_cast<std::size_t>(c)] * (p - (k == y[static_cast<std::size_t>(c)])) / 3.0));
    }
  }
  CHECK(r.loss == doctest::Approx(expected / 3.0));
  const Matrix p = softmax(logits);
  CHECK(p.colwise().sum().isOnes(1e-15));
  // Large logits stay finite.
  Matrix big(2, 1);
  big << 1000, -1000;
  CHECK(softmax(big).allFinite());
}

TEST_CASE("Adam applies the bias-corrected update") {
  Param p("w", Matrix::Constant(1, 2, 1.0));
  Adam adam({0.1, 0.9, 0.999, 1e-8});
  std::vector<Param*> ps = {&p};
  double m = 0, v = 0, value = 1.0;
  const double g[] = {0.5, -2.0, 0.25};
  for (int t = 1; t <= 3; ++t) {
    p.grad = Matrix::Constant(1, 2, g[t - 1]);
    adam.step(ps);
    m = 0.9 * m + 0.1 * g[t - 1];
    v = 0.999 * v + 0.001 * g[t - 1] * g[t - 1];
    value -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    CHECK(p.value(0, 0) == doctest::Approx(value).epsilon(1e-14));
  }
  CHECK(adam.steps() == 3);
  p.grad(0, 1) = std::nan("");
  CHECK_THROWS_AS(adam.step(ps), TrainingError);
}

TEST_CASE("gradient check on small networks") {
  Rng rng(8);
  Sequence in;
  for (int t = 0; t < 4; ++t) in.push_back(random(1, 3, rng));
  const std::vector<int> y = {0, 1, 1};
  const std::vector<double> w = {0.7, 1.3, 1.3};
  for (auto kind : {CellKind::Simple, CellKind::Lstm, CellKind::Gru}) {
    Network net;
    net.add(std::make_unique<Recurrent>(cell_with_bias(kind, 1, 3, rng), true));
    net.add(std::make_unique<Bidirectional>(cell_with_bias(kind, 3, 2, rng), cell_with_bias(kind, 3, 2, rng), true));
    net.add(std::make_unique<Dropout>(0.25));
    net.add(std::make_unique<Flatten>());
    net.add(std::make_unique<Dense>(16, 2, rng));
    GradCheckOptions o;
    o.training_mode = true;
    o.seed = 3;
    const auto r = gradient_check(net, in, y, w, o);
    CHECK(r.checked == net.parameter_count());
    CHECK(r.max_relative_error < 1e-5);
  }
}

TEST_CASE("network checkpoints round-trip") {
  Rng rng(9);
  Network a;
  a.add(std::make_unique<Recurrent>(make_cell(CellKind::Lstm, 1, 3, rng), false));
  a.add(std::make_unique<Dense>(3, 2, rng));
  std::stringstream buf;
  a.save(buf);

  Rng other(10);
  Network b;
  b.add(std::make_unique<Recurrent>(make_cell(CellKind::Lstm, 1, 3, other), false));
  b.add(std::make_unique<Dense>(3, 2, other));
  b.load(buf);
  Sequence in = {random(1, 2, rng), random(1, 2, rng)};
  CHECK(a.infer(in) == b.infer(in));
  CHECK(a.manifest() == b.manifest());

  Network c;
  c.add(std::make_unique<Recurrent>(make_cell(CellKind::Gru, 1, 3, other), false));
  c.add(std::make_unique<Dense>(3, 2, other));
  std::stringstream again;
  a.save(again);
  CHECK_THROWS_AS(c.load(again), DataError);
}

TEST_CASE("rows_to_sequence") {
  Matrix rows(2, 3);
  rows << 1, 2, 3,
          4, 5, 6;
  const auto seq = rows_to_sequence(rows);
  REQUIRE(seq.size() == 3);
  CHECK(seq[1].rows() == 1);
  CHECK(seq[1](0, 0) == 2);
  CHECK(seq[1](0, 1) == 5);
}
