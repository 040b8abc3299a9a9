// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "../support.hpp"

using namespace armac3;
using armac3::testing::max_gradient_error;
using armac3::testing::random_graph;
using armac3::testing::random_matrix;
using armac3::testing::random_stochastic;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

SbmSample fixture() { return gen_sbm(SbmOptions{}); }

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("armac3_accept_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const fs::path& dir, const std::string& args) {
  const std::string cmd = "cd '" + dir.string() + "' && '" ARMAC3_CLI "' " + args + " > cli.out 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

bool in_unit(double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; }

// "a±b" with both parts parseable.
bool is_pm(const std::string& cell) {
  const auto at = cell.find("±");
  if (at == std::string::npos) return false;
  char* end = nullptr;
  const std::string a = cell.substr(0, at), b = cell.substr(at + std::string("±").size());
  std::strtod(a.c_str(), &end);
  if (a.empty() || *end) return false;
  std::strtod(b.c_str(), &end);
  return !b.empty() && !*end;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  for (std::string c; std::getline(ss, c, ',');) out.push_back(c);
  return out;
}

// Header, `rows` per-run lines with metrics in [0,1] (auc may be nan), and a
// closing mean±std line carrying at least the four classification metrics.
Verdict check_report(std::istream& is, std::size_t rows) {
  std::vector<std::string> body;
  for (std::string l; std::getline(is, l);) {
    if (!l.empty() && l[0] != '#') body.push_back(l);
  }
  if (body.size() != rows + 2) return {false, "expected " + std::to_string(rows + 2) + " lines, got " + std::to_string(body.size())};
  if (body[0] != kReportHeader) return {false, "bad header: " + body[0]};
  for (std::size_t r = 0; r < rows; ++r) {
    const auto cells = split(body[r + 1]);
    if (cells.size() != 6 || cells[0] != std::to_string(r)) return {false, "bad row: " + body[r + 1]};
    for (std::size_t m = 1; m < 6; ++m) {
      const double v = std::strtod(cells[m].c_str(), nullptr);
      if (m == 5 && cells[m] == "nan") continue;
      if (!in_unit(v)) return {false, "metric out of range: " + body[r + 1]};
    }
  }
  const auto last = split(body.back());
  if (last.size() != 6 || last[0] != "mean±std") return {false, "bad summary: " + body.back()};
  for (std::size_t m = 1; m < 5; ++m) {
    if (!is_pm(last[m])) return {false, "bad summary cell: " + last[m]};
  }
  if (last[5] != "nan" && !is_pm(last[5])) return {false, "bad auc cell: " + last[5]};
  return {true, body.back()};
}

long double cos_sim(const Matrix& a, Index i, const Matrix& b, Index j) {
  long double dot = 0, na = 0, nb = 0;
  for (Index k = 0; k < a.cols(); ++k) {
    dot += static_cast<long double>(a(i, k)) * b(j, k);
    na += static_cast<long double>(a(i, k)) * a(i, k);
    nb += static_cast<long double>(b(j, k)) * b(j, k);
  }
  return dot / std::sqrt(na * nb);
}

long double cross_view_oracle(const Matrix& a, const Matrix& b, long double tau) {
  long double total = 0;
  for (Index i = 0; i < a.rows(); ++i) {
    const long double pos = std::exp(cos_sim(a, i, b, i) / tau);
    long double den = pos;
    for (Index j = 0; j < a.rows(); ++j) {
      if (j != i) den += std::exp(cos_sim(a, i, a, j) / tau);
    }
    total -= std::log(pos / den);
  }
  return total / static_cast<long double>(a.rows());
}

long double cross_net_oracle(const Matrix& a, const Matrix& z, long double tau) {
  long double total = 0;
  for (Index i = 0; i < a.rows(); ++i) {
    long double den = 0;
    for (Index j = 0; j < a.rows(); ++j) den += std::exp(cos_sim(a, i, z, j) / tau);
    total -= std::log(std::exp(cos_sim(a, i, z, i) / tau) / den);
  }
  return total / static_cast<long double>(a.rows());
}

long double dense_modularity_oracle(const SubjectGraph& g, const Matrix& s, double divisor) {
  const Matrix a = g.dense_adjacency();
  const Eigen::VectorXd d = a.rowwise().sum();
  Matrix b(a.rows(), a.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) b(i, j) = a(i, j) - d(i) * d(j) / divisor;
  }
  long double tr = 0;
  for (Index i = 0; i < b.rows(); ++i) {
    for (Index j = 0; j < b.cols(); ++j) {
      long double dot = 0;
      for (Index k = 0; k < s.cols(); ++k) dot += static_cast<long double>(s(i, k)) * s(j, k);
      tr += b(i, j) * dot;
    }
  }
  return tr;
}

// ---------------------------------------------------------------------------

Verdict gradient_suite() {
  const auto t0 = Clock::now();
  Rng rng(2024);
  const Activation acts[] = {Activation::relu, Activation::elu, Activation::selu, Activation::silu};
  double worst = 0.0;
  int instances = 0;
  for (int t = 0; t < 24; ++t) {
    const Index n = 3 + static_cast<Index>(rng() % 8);
    const Index hidden = 2 + static_cast<Index>(rng() % 7);
    const Index k = 2 + static_cast<Index>(rng() % 3);
    const Index d = 2 + static_cast<Index>(rng() % 4);
    SubjectGraph g = random_graph(n, 0.5, rng);
    EncoderConfig c;
    c.in_dim = d;
    c.hidden_dim = hidden;
    c.k_clusters = k;
    c.activation = acts[t % 4];
    c.self_loops = (t / 4) % 2 == 1;
    c.num_layers = 1 + (t / 8) % 2;
    c.num_stacks = 1 + t % 2;
    c.predictor_hidden = t % 3 == 0 ? 4 : 0;
    c.dropout = 0.2;
    Model m = Model::initialize(c, rng);
    std::vector<Tensor> params;
    for (const auto& p : m.named_parameters()) params.push_back(p.tensor);
    GraphView view{g, Tensor(random_matrix(n, d, rng))};
    const Matrix w = random_matrix(n, k, rng);
    for (bool training : {true, false}) {
      auto f = [&] {
        Rng drop(7);
        Tensor h = encoder_forward(view, m.encoder, training, training ? &drop : nullptr);
        return sum(assign_clusters(h, m.predictor) * Tensor(w));
      };
      worst = std::max(worst, max_gradient_error(f, params));
    }

    Tensor logits(random_matrix(n, k, rng), true);
    Tensor h1(random_matrix(n, hidden, rng), true), h2(random_matrix(n, hidden, rng), true);
    Tensor z1(random_matrix(n, hidden, rng)), z2(random_matrix(n, hidden, rng));
    std::vector<int> y(static_cast<std::size_t>(n));
    NodeMask mask(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      y[static_cast<std::size_t>(i)] = static_cast<int>(rng() % static_cast<std::uint64_t>(k));
      mask[static_cast<std::size_t>(i)] = i % 2 == 0;
    }
    auto s = [&] { return rowwise_softmax(logits); };
    const std::vector<std::function<Tensor()>> losses{
        [&] { return modularity_loss(s(), g); },
        [&] { return modularity_loss(s(), g, ModularityConvention::doubled); },
        [&] { return collapse_loss(s()); },
        [&] { return struct_loss(s(), g, StructMode::modularity).total; },
        [&] { return mincut_loss(s(), g).total; },
        [&] { return supervised_ce(s(), y, mask); },
    };
    for (const auto& f : losses) worst = std::max(worst, max_gradient_error(f, {logits}));
    worst = std::max(worst, max_gradient_error([&] { return cross_view_loss(h1, h2, 0.7); }, {h1, h2}));
    worst = std::max(worst, max_gradient_error([&] { return cross_network_loss(h1, z2); }, {h1}));
    worst = std::max(worst, max_gradient_error([&] { return merit_loss(h1, h2, z1, z2, 0.4).l_con; }, {h1, h2}));
    ++instances;
  }
  const double secs = seconds_since(t0);
  return {instances >= 20 && worst < 1e-4 && secs < 30.0,
          fmt("%.0f instances, max rel err %.2e, %.1f s", instances, worst, secs)};
}

Verdict modularity_oracle() {
  const auto t0 = Clock::now();
  Rng rng(11);
  std::uniform_int_distribution<Index> nd(2, 50), kd(2, 5);
  std::uniform_real_distribution<double> pd(0.05, 0.6);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = nd(rng), k = kd(rng);
    SubjectGraph g = random_graph(n, pd(rng), rng);
    Matrix s = random_stochastic(n, k, rng);
    for (auto conv : {ModularityConvention::newman, ModularityConvention::doubled}) {
      const double fast = modularity_quadratic(g, Tensor(s), conv).item();
      const long double dense = dense_modularity_oracle(g, s, null_model_divisor(conv, g.total_weight()));
      worst = std::max(worst, static_cast<double>(std::abs(fast - dense)));
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 5.0, fmt("50 graphs, max abs err %.2e, %.2f s", worst, secs)};
}

Verdict closed_forms() {
  const SubjectGraph g(6, {{0, 1, 1}, {0, 2, 1}, {1, 2, 1}, {3, 4, 1}, {3, 5, 1}, {4, 5, 1}});
  Matrix hard = Matrix::Zero(6, 2);
  hard.block(0, 0, 3, 1).setOnes();
  hard.block(3, 1, 3, 1).setOnes();
  double worst = std::abs(modularity_loss(Tensor(hard), g).item() + 0.5);
  worst = std::max(worst, std::abs(collapse_loss(Tensor(hard)).item()));
  for (Index k : {2, 3, 4, 5}) {
    Matrix collapsed = Matrix::Zero(12, k);
    collapsed.col(0).setOnes();
    worst = std::max(worst, std::abs(collapse_loss(Tensor(collapsed)).item() - (std::sqrt(double(k)) - 1.0)));
    Matrix balanced = Matrix::Zero(12, k);
    for (Index i = 0; i < 12; ++i) balanced(i, i % k) = 1.0;
    if (12 % k == 0) worst = std::max(worst, std::abs(collapse_loss(Tensor(balanced)).item()));
  }
  Matrix h(2, 3);
  h << 0.3, -1.2, 2.0, 0.3, -1.2, 2.0;
  worst = std::max(worst, std::abs(cross_view_loss(Tensor(h), Tensor(h)).item() - std::log(2.0)));
  return {worst <= 1e-12, fmt("max deviation %.2e", worst)};
}

Verdict contrastive_oracle() {
  Rng rng(5);
  double worst = 0.0;
  bool symmetric = true;
  for (int t = 0; t < 50; ++t) {
    const Index n = 2 + static_cast<Index>(rng() % 7), d = 1 + static_cast<Index>(rng() % 6);
    Matrix h1 = random_matrix(n, d, rng), h2 = random_matrix(n, d, rng);
    Matrix z1 = random_matrix(n, d, rng), z2 = random_matrix(n, d, rng);
    const double beta = std::uniform_real_distribution<double>(0, 1)(rng);
    const double tau = t % 3 == 0 ? 0.5 : 1.0;
    const MeritLoss m = merit_loss(Tensor(h1), Tensor(h2), Tensor(z1), Tensor(z2), beta, tau);
    const long double l1 = beta * cross_view_oracle(h1, h2, tau) + (1 - beta) * cross_net_oracle(h1, z2, tau);
    const long double l2 = beta * cross_view_oracle(h2, h1, tau) + (1 - beta) * cross_net_oracle(h2, z1, tau);
    worst = std::max(worst, static_cast<double>(std::abs(m.l_con.item() - (l1 + l2) / 2)));
    const MeritLoss swapped = merit_loss(Tensor(h2), Tensor(h1), Tensor(z2), Tensor(z1), beta, tau);
    symmetric = symmetric && swapped.l_con.item() == m.l_con.item();
  }
  return {worst < 1e-10 && symmetric,
          fmt("50 instances, max abs err %.2e, swap symmetry ", worst) + (symmetric ? "exact" : "BROKEN")};
}

Verdict unsupervised_recovery() {
  const FeatureMatrix fm = fixture().features;
  Settings s;
  s.run.seed = 7;
  s.n_runs = 1;
  const auto t0 = Clock::now();
  const ExperimentResult ex = run_experiment(fm, s);
  const double secs = seconds_since(t0);
  const double acc = ex.reports.front().accuracy;
  return {acc >= 0.95 && secs < 60.0, fmt("accuracy %.4f after %.0f epochs, %.1f s", acc, s.run.epochs, secs)};
}

Verdict semi_supervised_protocol() {
  const FeatureMatrix fm = fixture().features;
  Settings s;
  s.run.seed = 7;
  s.run.mode = TrainMode::semi;
  const auto a = make_splits(*fm.labels, s.run.labeled_fraction, s.n_folds, s.run.seed);
  const auto b = make_splits(*fm.labels, s.run.labeled_fraction, s.n_folds, s.run.seed);
  const bool deterministic = a == b && a.size() == 20;
  const auto t0 = Clock::now();
  const ExperimentResult ex = run_experiment(fm, s);
  const double secs = seconds_since(t0);
  const MeanStd acc = ex.stats->accuracy;
  return {deterministic && ex.reports.size() == 20 && acc.mean >= 0.90,
          fmt("20 folds, accuracy %.3f±%.3f, %.0f s", acc.mean, acc.std, secs) +
              (deterministic ? ", masks reproducible" : ", masks NOT reproducible")};
}

Verdict wilcoxon_exactness() {
  std::vector<double> a, b;
  for (int i = 0; i < 10; ++i) {
    a.push_back(0.80 + 0.01 * i);
    b.push_back(0.70 + 0.003 * i);
  }
  const WilcoxonResult w = wilcoxon_signed_rank(a, b, Alternative::greater);
  char shown[16];
  std::snprintf(shown, sizeof shown, "%.4f", w.p_value);
  const bool p_ok = w.exact && w.p_value == 1.0 / 1024.0 && std::string(shown) == "0.0010";

  Rng rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    std::vector<double> x(25), y(25, 0.0);
    for (int i = 0; i < 25; ++i) x[static_cast<std::size_t>(i)] = (u(rng) < 0.3 + 0.4 * (t % 5) / 4.0 ? 1 : -1) * (i + 1 + u(rng) * 0.5);
    for (Alternative alt : {Alternative::greater, Alternative::two_sided}) {
      const double ex = wilcoxon_signed_rank(x, y, alt).p_value;
      const double nm = wilcoxon_signed_rank(x, y, alt, true).p_value;
      worst = std::max(worst, std::abs(ex - nm));
    }
  }
  return {p_ok && worst < 0.01, std::string("n=10 p=") + shown + fmt(" (%.6f), n=25 max |exact-normal| %.4f", w.p_value, worst)};
}

double convex(double m, double t, double w) {
  volatile double a = m * t;
  volatile double b = (1.0 - m) * w;
  return a + b;
}

Verdict scheduler_optimizer() {
  bool ok = true;
  const double lr0 = 1e-4;
  for (int it : {0, 199, 200, 399, 400, 599, 600}) {
    ok = ok && step_lr(lr0, 0.5, 200, it) == lr0 * std::ldexp(1.0, -(it / 200));
  }
  // The same schedule as seen through a training run.
  SbmOptions o;
  o.n = 20;
  const FeatureMatrix fm = gen_sbm(o).features;
  const SubjectGraph g = build_graph(fm.values, 0.5);
  RunConfig c;
  c.hidden_dim = 8;
  c.epochs = 401;
  const TrainResult r = train_unsupervised(g, fm.values, c);
  ok = ok && r.history[199].lr == 1e-4 && r.history[200].lr == 5e-5 && r.history[399].lr == 5e-5 &&
       r.history[400].lr == 2.5e-5;

  Rng rng(9);
  EncoderConfig ec = c.encoder_config(fm.d(), 2);
  Model online = Model::initialize(ec, rng);
  EmaTeacher teacher(online.encoder, 0.99);
  std::vector<Matrix> before;
  for (const auto& p : teacher.params().named_parameters()) before.push_back(p.tensor.value());
  for (auto& p : online.encoder.named_parameters()) p.tensor.mutable_value() = random_matrix(p.tensor.rows(), p.tensor.cols(), rng);
  teacher.update(online.encoder);
  bool ema_ok = true;
  const auto tau = teacher.params().named_parameters();
  const auto omega = online.encoder.named_parameters();
  for (std::size_t k = 0; k < tau.size(); ++k) {
    for (Index i = 0; i < tau[k].tensor.value().size(); ++i) {
      ema_ok = ema_ok && tau[k].tensor.value().data()[i] ==
                             convex(0.99, before[k].data()[i], omega[k].tensor.value().data()[i]);
    }
  }

  Tensor x(random_matrix(3, 4, rng), true);
  const Matrix x0 = x.value();
  AdamW opt({{"x", x}}, {0.9, 0.999, 1e-8, 1e-4});
  opt.zero_grad();
  opt.step(1e-4);
  bool decay_ok = true;
  for (Index i = 0; i < x0.size(); ++i) decay_ok = decay_ok && x.value().data()[i] == x0.data()[i] * (1.0 - 1e-4 * 1e-4);

  return {ok && ema_ok && decay_ok, std::string("lr halving ") + (ok ? "exact" : "WRONG") + ", EMA " +
                                        (ema_ok ? "bit-exact" : "MISMATCH") + ", decay-only step " +
                                        (decay_ok ? "exact" : "MISMATCH")};
}

Verdict cli_determinism() {
  const fs::path dir = scratch("determinism");
  if (run_cli(dir, "gen-sbm") != 0) return {false, "gen-sbm failed"};
  const std::string base =
      "train --features sbm_features.csv --labels sbm_labels.txt --seed 7 --runs 2 --checkpoint-every 500";
  const auto t0 = Clock::now();
  for (const char* tag : {"a", "b"}) {
    const std::string t(tag);
    if (run_cli(dir, base + " --checkpoint " + t + ".ckpt --log-out " + t + ".log --report-out " + t + ".csv") != 0) {
      return {false, "train failed: " + slurp(dir / "cli.out")};
    }
  }
  const double secs = seconds_since(t0);
  bool same = true;
  std::string which;
  for (const char* f : {".ckpt", ".ckpt.iter500", ".log", ".csv"}) {
    const std::string a = slurp(dir / (std::string("a") + f)), b = slurp(dir / (std::string("b") + f));
    if (a.empty() || a != b) {
      same = false;
      which += std::string(" ") + f;
    }
  }
  fs::remove_all(dir);
  return {same, same ? fmt("checkpoint, intermediate checkpoint, log and report identical (2 x %.0f s)", secs / 2)
                     : "differs:" + which};
}

Verdict checkpoint_round_trip() {
  const FeatureMatrix fm = fixture().features;
  Settings s;
  s.run.seed = 7;
  s.run.epochs = 300;
  s.n_runs = 1;
  const ExperimentResult ex = run_experiment(fm, s);
  const TrainResult& tr = ex.runs.front().result;
  const fs::path dir = scratch("roundtrip");
  save_checkpoint(dir / "m.ckpt", make_checkpoint(s, tr.model, tr.teacher));
  RestoredModel rm = restore_checkpoint(load_checkpoint(dir / "m.ckpt"));
  const Reevaluation ev = reevaluate(rm, fm);
  fs::remove_all(dir);
  const double dh = (ev.embeddings - tr.embeddings).cwiseAbs().maxCoeff();
  const double ds = (ev.assignments - tr.assignments).cwiseAbs().maxCoeff();
  const bool exact = dh == 0.0 && ds == 0.0;
  const bool same_report = ev.report && ev.report->accuracy == ex.reports.front().accuracy;
  return {dh <= 1e-12 && ds <= 1e-12 && same_report,
          fmt("max |dH| %.1e, max |dS| %.1e", dh, ds) + (exact ? " (bit-exact)" : "")};
}

Verdict alpha_sweep() {
  const FeatureMatrix fm = fixture().features;
  std::vector<std::size_t> edges;
  std::string detail = "edges";
  for (double alpha : {0.2, 0.5, 0.8}) {
    Settings s;
    s.run.alpha = alpha;
    s.run.seed = 7;
    s.run.epochs = 300;
    s.n_runs = 3;
    const ExperimentResult ex = run_experiment(fm, s);
    edges.push_back(ex.graph.num_edges());
    detail += " " + std::to_string(ex.graph.num_edges());
    std::stringstream report;
    write_report_csv(report, ex.reports, *ex.stats, config_echo(s));
    const Verdict v = check_report(report, 3);
    if (!v.pass) return {false, fmt("alpha %.1f: ", alpha) + v.detail};
  }
  const bool monotone = edges[0] >= edges[1] && edges[1] >= edges[2];
  return {monotone, detail + " for alpha 0.2/0.5/0.8, three well-formed reports"};
}

Verdict end_to_end_format() {
  const fs::path dir = scratch("e2e");
  SbmOptions o;
  o.n = 45;
  o.k = 3;
  o.feature_dim = 6;
  o.seed = 11;
  FeatureMatrix fm = gen_sbm(o).features;
  for (Index i = 0; i < fm.n(); ++i) fm.subject_ids.push_back(fmt("sub-%03.0f", double(i)));
  {
    std::ofstream f(dir / "cohort.csv");
    write_features_csv(f, fm);
    std::ofstream l(dir / "cohort_labels.txt");
    write_labels(l, *fm.labels);
  }
  const std::string common = "train --features cohort.csv --labels cohort_labels.txt --epochs 200 --hidden-dim 32";
  std::string detail;
  struct Mode {
    const char* name;
    std::string args;
    std::size_t rows;
  };
  for (const Mode& m : {Mode{"unsup", " --mode unsup --k-clusters 3 --runs 4 --report-out u.csv", 4},
                        Mode{"semi", " --mode semi --labeled-fraction 0.2 --folds 4 --report-out s.csv", 4}}) {
    if (run_cli(dir, common + m.args) != 0) return {false, std::string(m.name) + " failed: " + slurp(dir / "cli.out")};
    std::ifstream in(dir / (m.name[0] == 'u' ? "u.csv" : "s.csv"));
    const Verdict v = check_report(in, m.rows);
    if (!v.pass) return {false, std::string(m.name) + ": " + v.detail};
    detail += std::string(detail.empty() ? "" : "; ") + m.name + " " + v.detail.substr(v.detail.find(',') + 1);
  }
  fs::remove_all(dir);
  return {true, "3-class CSV, " + detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, Verdict (*)()>> criteria{
      {"gradient suite", gradient_suite},
      {"modularity oracle", modularity_oracle},
      {"closed-form loss values", closed_forms},
      {"contrastive brute-force equivalence", contrastive_oracle},
      {"unsupervised recovery", unsupervised_recovery},
      {"semi-supervised protocol", semi_supervised_protocol},
      {"wilcoxon exactness", wilcoxon_exactness},
      {"scheduler/optimizer exactness", scheduler_optimizer},
      {"determinism", cli_determinism},
      {"checkpoint round-trip", checkpoint_round_trip},
      {"ablation monotonicity", alpha_sweep},
      {"end-to-end format", end_to_end_format},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::cout << (v.pass ? "PASS  " : "FAIL  ") << name << ": " << v.detail << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
