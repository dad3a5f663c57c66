// Acceptance checks. Prints one PASS/FAIL line per criterion.
//   acceptance            run every criterion
//   acceptance --only N   run criterion N
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "jacobi_oracle.hpp"
#include "rumorts/ensemble.hpp"
#include "rumorts/error.hpp"
#include "rumorts/eval.hpp"
#include "rumorts/nn.hpp"
#include "rumorts/timeseries.hpp"

using namespace rumorts;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v, const char* f = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// 1 ------------------------------------------------------------------------

// Drops each reaction into its bucket one at a time: bucket k (1-based)
// holds delays d with (k-1)T < d <= kT; the vector is as long as the bucket
// of the latest reaction.
std::vector<std::int64_t> bucket_oracle(const Conversation& c, std::int64_t T) {
  std::vector<std::int64_t> v;
  for (const auto t : c.reaction_times) {
    const std::int64_t d = t - c.source_time;
    if (d <= 0) continue;
    std::int64_t k = 1;
    while (k * T < d) ++k;
    if (static_cast<std::int64_t>(v.size()) < k) v.resize(static_cast<std::size_t>(k), 0);
    ++v[static_cast<std::size_t>(k - 1)];
  }
  return v;
}

Outcome vectorization_oracle() {
  std::mt19937_64 gen(20240611);
  std::vector<Conversation> convs;
  for (int i = 0; i < 1000; ++i) {
    Conversation c;
    c.id = std::to_string(i);
    c.event = "e";
    c.source_time = 1400000000 + static_cast<std::int64_t>(gen() % 10'000'000);
    const auto n = gen() % 120;
    // Mix of short bursts, long tails, exact bucket edges and zero delays.
    for (std::uint64_t r = 0; r < n; ++r) {
      std::int64_t d;
      switch (gen() % 4) {
        case 0: d = static_cast<std::int64_t>(gen() % 600); break;
        case 1: d = static_cast<std::int64_t>(gen() % 200000); break;
        case 2: d = static_cast<std::int64_t>((gen() % 50) * 120); break;
        default: d = static_cast<std::int64_t>((gen() % 20) * 3600); break;
      }
      c.reaction_times.push_back(c.source_time + d);
    }
    convs.push_back(std::move(c));
  }
  const auto t0 = Clock::now();
  std::size_t mismatches = 0, compared = 0;
  for (const auto T : kCanonicalIntervals) {
    for (const auto& c : convs) {
      ++compared;
      if (timeseries::vectorize(c, IntervalConfig{T}) != bucket_oracle(c, T)) ++mismatches;
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 5.0,
          std::to_string(compared) + " vectors, " + std::to_string(mismatches) + " mismatches, " + num(secs, "%.2f") +
              " s (limit 5 s)"};
}

// 2 ------------------------------------------------------------------------

// Weighted mean cross-entropy written directly from the logits.
double oracle_loss(const nn::Matrix& logits, const std::vector<int>& y, const std::vector<double>& w) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const double a = logits(0, j), b = logits(1, j);
    const double m = std::max(a, b);
    const double lse = m + std::log(std::exp(a - m) + std::exp(b - m));
    total += w[static_cast<std::size_t>(j)] * (lse - logits(y[static_cast<std::size_t>(j)], j));
  }
  return total / static_cast<double>(logits.cols());
}

struct GradReport {
  double max_rel = 0.0;
  std::size_t checked = 0;
};

// Analytic gradients from backprop against central differences of the loss.
// Dropout masks are fixed by reseeding before every forward pass.
GradReport check_network(nn::Network& net, const nn::Sequence& input, const std::vector<int>& y,
                         const std::vector<double>& w) {
  constexpr double kEps = 1e-5;
  constexpr double kFloor = 1e-7;
  constexpr std::uint64_t kMaskSeed = 99;
  auto loss = [&] {
    Rng rng(kMaskSeed);
    return oracle_loss(net.forward(input, true, rng), y, w);
  };
  net.zero_grad();
  {
    Rng rng(kMaskSeed);
    const auto logits = net.forward(input, true, rng);
    net.backward(nn::softmax_cross_entropy(logits, y, w).grad);
  }
  GradReport r;
  for (auto* p : net.params()) {
    const nn::Matrix analytic = p->grad;
    for (Eigen::Index k = 0; k < p->value.size(); ++k) {
      double& v = p->value.data()[k];
      const double keep = v;
      v = keep + kEps;
      const double up = loss();
      v = keep - kEps;
      const double down = loss();
      v = keep;
      const double numeric = (up - down) / (2 * kEps);
      const double a = analytic.data()[k];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), kFloor});
      r.max_rel = std::max(r.max_rel, rel);
      ++r.checked;
    }
  }
  return r;
}

Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  Rng data_rng(4);
  const Eigen::Index seq_len = 6;
  const Eigen::Index batch = 3;
  nn::Sequence input;
  for (Eigen::Index t = 0; t < seq_len; ++t) input.push_back(nn::uniform_init(1, batch, data_rng, 0.0, 1.0));
  const std::vector<int> y = {1, 0, 1};
  const std::vector<double> w = {1.43, 0.77, 1.43};

  double worst = 0.0;
  std::string worst_name;
  std::size_t checked = 0, networks = 0;
  auto record = [&](const std::string& name, const GradReport& r) {
    ++networks;
    checked += r.checked;
    if (r.max_rel >= worst) {
      worst = r.max_rel;
      worst_name = name;
    }
  };

  // Non-zero biases so no gate sits at a symmetric point.
  auto randomise_biases = [](nn::Network& net, Rng& rng) {
    for (auto* p : net.params())
      if (p->value.cols() == 1) p->value = nn::uniform_init(p->value.rows(), 1, rng, -0.5, 0.5);
  };

  // Each cell kind on its own, forward, reversed and bidirectional.
  for (auto kind : {nn::CellKind::Simple, nn::CellKind::Lstm, nn::CellKind::Gru}) {
    for (auto act : {nn::Activation::Tanh, nn::Activation::Sigmoid}) {
      if (kind != nn::CellKind::Simple && act == nn::Activation::Sigmoid) continue;
      for (int variant = 0; variant < 3; ++variant) {
        Rng rng(10 + variant);
        nn::Network net;
        if (variant < 2) {
          net.add(std::make_unique<nn::Recurrent>(nn::make_cell(kind, 1, 4, rng, act), false, variant == 1));
          net.add(std::make_unique<nn::Dense>(4, 2, rng));
        } else {
          net.add(std::make_unique<nn::Bidirectional>(nn::make_cell(kind, 1, 3, rng, act),
                                                      nn::make_cell(kind, 1, 3, rng, act), true));
          net.add(std::make_unique<nn::Flatten>());
          net.add(std::make_unique<nn::Dense>(6 * seq_len, 2, rng));
        }
        randomise_biases(net, rng);
        record(std::string(nn::to_string(kind)) + "/" + nn::to_string(act) + "/" + std::to_string(variant),
               check_network(net, input, y, w));
      }
    }
  }

  // Every learner topology with hidden sizes capped at 4.
  for (const auto& name : models::learner_names()) {
    auto spec = models::learner_spec(name);
    int shrink = 2;
    for (auto& layer : spec.layers) layer.units = layer.units == 0 ? 0 : std::min(4, shrink++);
    Rng rng(31);
    auto net = models::build_learner(spec, seq_len, rng);
    randomise_biases(net, rng);
    record(name, check_network(net, input, y, w));
  }

  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 60.0,
          std::to_string(networks) + " networks, " + std::to_string(checked) + " parameters, max relative error " +
              num(worst) + " (" + worst_name + "), " + num(secs, "%.2f") + " s"};
}

// 3 ------------------------------------------------------------------------

struct BruteScores {
  double micro_p, micro_r, micro_f1, macro_p, macro_r, macro_f1, accuracy;
};

BruteScores brute_force(const std::vector<int>& y, const std::vector<int>& p) {
  auto div = [](double a, double b) { return b == 0 ? 0.0 : a / b; };
  auto harm = [](double a, double b) { return a + b == 0 ? 0.0 : 2 * a * b / (a + b); };
  std::vector<int> classes;
  for (int c = 0; c < 2; ++c) {
    bool seen = false;
    for (std::size_t i = 0; i < y.size(); ++i) seen = seen || y[i] == c || p[i] == c;
    if (seen) classes.push_back(c);
  }
  double TP = 0, FP = 0, FN = 0, ps = 0, rs = 0, correct = 0;
  for (const int c : classes) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (p[i] == c && y[i] == c) tp += 1;
      if (p[i] == c && y[i] != c) fp += 1;
      if (p[i] != c && y[i] == c) fn += 1;
    }
    TP += tp;
    FP += fp;
    FN += fn;
    ps += div(tp, tp + fp);
    rs += div(tp, tp + fn);
  }
  for (std::size_t i = 0; i < y.size(); ++i) correct += y[i] == p[i];
  const double n = static_cast<double>(classes.size());
  BruteScores s{};
  s.micro_p = div(TP, TP + FP);
  s.micro_r = div(TP, TP + FN);
  s.micro_f1 = harm(s.micro_p, s.micro_r);
  s.macro_p = div(ps, n);
  s.macro_r = div(rs, n);
  s.macro_f1 = harm(s.macro_p, s.macro_r);
  s.accuracy = div(correct, static_cast<double>(y.size()));
  return s;
}

Outcome metric_fidelity() {
  const auto t0 = Clock::now();
  std::mt19937_64 gen(77);
  double worst = 0.0, worst_acc = 0.0;
  for (int inst = 0; inst < 1000; ++inst) {
    const std::size_t n = 1 + gen() % 60;
    // Skewed draws so single-class and all-correct instances occur too.
    const double p1 = (gen() % 5) / 4.0;
    const double flip = (gen() % 4) / 6.0;
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<int> y(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = u(gen) < p1;
      p[i] = u(gen) < flip ? 1 - y[i] : y[i];
    }
    const auto counts = eval::confusion(y, p);
    const auto mi = eval::micro_scores(counts);
    const auto ma = eval::macro_scores(counts);
    const auto o = brute_force(y, p);
    for (const double d : {mi.precision - o.micro_p, mi.recall - o.micro_r, mi.f1 - o.micro_f1,
                           ma.precision - o.macro_p, ma.recall - o.macro_r, ma.f1 - o.macro_f1})
      worst = std::max(worst, std::abs(d));
    worst_acc = std::max(worst_acc, std::abs(mi.f1 - o.accuracy));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-12 && worst_acc <= 1e-12 && secs < 5.0,
          "1000 instances, max |diff| " + num(worst) + ", max |microF1 - accuracy| " + num(worst_acc) + ", " +
              num(secs, "%.3f") + " s"};
}

// 4 ------------------------------------------------------------------------

Outcome voting_truth_table() {
  const auto t0 = Clock::now();
  int ones = 0, wrong = 0;
  for (unsigned mask = 0; mask < 64; ++mask) {
    std::array<int, 6> v{};
    int sum = 0;
    for (int i = 0; i < 6; ++i) {
      v[static_cast<std::size_t>(i)] = (mask >> i) & 1;
      sum += v[static_cast<std::size_t>(i)];
    }
    const int out = ensemble::majority_vote(v);
    ones += out;
    wrong += out != (sum >= 4 ? 1 : 0);
  }
  const double secs = seconds_since(t0);
  return {ones == 22 && wrong == 0 && secs < 1.0,
          std::to_string(ones) + " of 64 patterns vote 1, " + std::to_string(wrong) + " disagree with sum >= 4"};
}

// 5 ------------------------------------------------------------------------

Outcome class_weight_identity() {
  const auto t0 = Clock::now();
  std::vector<int> labels(2159, 1);
  labels.insert(labels.end(), 4019, 0);
  const auto w = preprocess::class_weights(labels);
  const double total = w[0] * 4019 + w[1] * 2159;
  const bool ok = std::abs(w[0] - 0.76860) <= 1e-5 && std::abs(w[1] - 1.43075) <= 1e-5 && total == 6178.0;
  return {ok && seconds_since(t0) < 1.0,
          "w0 " + num(w[0], "%.7f") + ", w1 " + num(w[1], "%.7f") + ", sum w*count " + num(total, "%.10g")};
}

// 6 ------------------------------------------------------------------------

Outcome svd_quality() {
  const auto t0 = Clock::now();
  double worst_rel = 0.0, worst_orth = 0.0;
  for (std::uint64_t trial = 0; trial < 5; ++trial) {
    std::mt19937_64 gen(1000 + trial);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd x(200, 50);
    for (Eigen::Index i = 0; i < 200; ++i)
      for (Eigen::Index j = 0; j < 50; ++j) x(i, j) = normal(gen);
    if (trial >= 3) x = x.cwiseAbs();  // count-like, non-negative

    SvdOptions options;
    options.seed = trial;
    const auto model = preprocess::svd_fit(x, 10, options);
    const Eigen::MatrixXd recon = x * model.components.transpose() * model.components;
    const double err = (x - recon).norm();
    const double best = test_support::tail_error(test_support::jacobi_svd(x), 10);
    worst_rel = std::max(worst_rel, std::abs(err - best) / best);
    const Eigen::MatrixXd gram = model.components * model.components.transpose();
    worst_orth = std::max(worst_orth, (gram - Eigen::MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff());
  }
  const double secs = seconds_since(t0);
  return {worst_rel <= 1e-6 && worst_orth <= 1e-8 && secs < 10.0,
          "5 matrices 200x50, k=10: max relative reconstruction gap " + num(worst_rel) + ", max orthonormality error " +
              num(worst_orth) + ", " + num(secs, "%.2f") + " s"};
}

// 7 and 8 --------------------------------------------------------------------

PipelineConfig desk_config() {
  PipelineConfig c;
  c.interval_seconds = 120;
  c.svd_rank = 16;
  c.epochs = 50;
  c.learning_rate = 1e-3;
  c.impl = ImplId::I1;
  c.seed = 0;
  return c;
}

RawDataset desk_corpus() {
  eval::SynthSpec spec;  // 3 events x 120, full burst separation
  return eval::generate_synthetic_corpus(spec);
}

// Threshold rule on one feature: at least two reactions in the first
// 2-minute bucket means rumour.
double threshold_accuracy(const RawDataset& raw) {
  int correct = 0;
  for (const auto& c : raw.conversations) {
    int early = 0;
    for (const auto t : c.reaction_times) early += t - c.source_time > 0 && t - c.source_time <= 120;
    correct += (early >= 2 ? 1 : 0) == c.label;
  }
  return static_cast<double>(correct) / static_cast<double>(raw.conversations.size());
}

std::string last_csv;

Outcome desk_scale_learning() {
  const auto raw = desk_corpus();
  const double oracle = threshold_accuracy(raw);
  const auto t0 = Clock::now();
  const auto report = eval::leave_one_event_out(raw, desk_config());
  const double secs = seconds_since(t0);
  last_csv = report.to_csv();
  std::string folds;
  for (const auto& f : report.folds) folds += " " + f.event + "=" + num(f.micro.f1, "%.3f");
  return {oracle >= 0.95 && report.mean_micro.f1 >= 0.90 && report.folds_used == 3 && secs < 300.0,
          "threshold oracle accuracy " + num(oracle, "%.4f") + ", mean micro-F1 " + num(report.mean_micro.f1, "%.4f") +
              " (folds" + folds + "), " + num(secs, "%.1f") + " s (limit 300 s)"};
}

Outcome determinism() {
  const auto t0 = Clock::now();
  if (last_csv.empty()) last_csv = eval::leave_one_event_out(desk_corpus(), desk_config()).to_csv();
  const std::string again = eval::leave_one_event_out(desk_corpus(), desk_config()).to_csv();
  const double secs = seconds_since(t0);
  return {again == last_csv && secs < 600.0,
          std::string(again == last_csv ? "identical" : "different") + " report CSVs (" +
              std::to_string(again.size()) + " bytes), " + num(secs, "%.1f") + " s"};
}

// 9 ------------------------------------------------------------------------

Outcome reproduction_recipe() {
  std::ifstream readme(std::string(RUMORTS_SOURCE_DIR) + "/README.md");
  std::stringstream text;
  text << readme.rdbuf();
  const bool documented = text.str().find("sweep --reproduce") != std::string::npos;
  std::string detail = documented ? "README documents `sweep --reproduce`" : "README lacks the reproduction recipe";

  const char* root = std::getenv("RUMOR_TS_DATA");
  if (!root || !std::filesystem::is_directory(root)) {
    return {documented, detail + "; full corpus not available, totals sub-check skipped"};
  }
  try {
    const auto loaded = ingest::load_dataset(root);
    std::int64_t r = 0, n = 0;
    for (const auto& [event, counts] : loaded.summary.loaded) {
      r += counts.rumours;
      n += counts.non_rumours;
    }
    const bool totals = r == 2159 && n == 4019;
    return {documented && totals, detail + "; corpus totals " + std::to_string(r) + " / " + std::to_string(n) +
                                      " / " + std::to_string(r + n) + " (expected 2159 / 4019 / 6178)"};
  } catch (const Error& e) {
    return {false, detail + "; loading " + std::string(root) + " failed: " + e.what()};
  }
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[++i]);
  }
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"vectorization matches per-reaction bucketing", vectorization_oracle},
      {"analytic gradients match central differences", gradient_correctness},
      {"metrics match a brute-force confusion oracle", metric_fidelity},
      {"majority vote truth table", voting_truth_table},
      {"class weights on the seven-event totals", class_weight_identity},
      {"truncated SVD reconstruction and orthonormality", svd_quality},
      {"end-to-end synthetic run reaches micro-F1 >= 0.90", desk_scale_learning},
      {"identical report CSV across two runs", determinism},
      {"reproduction recipe documented", reproduction_recipe},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (only != 0 && only != id) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[%s] %d. %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
