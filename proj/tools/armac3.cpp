// armac3: command-line driver (gen-sbm, features, train, eval).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "armac3/armac3.hpp"

namespace fs = std::filesystem;
using namespace armac3;

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot write " + path);
  return os;
}

void finish(std::ofstream& os, const std::string& path) {
  os.flush();
  if (!os) throw FormatError("write failed for " + path);
}

std::string dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

// Every config key doubles as a --dash-case option; values given on the
// command line win over the config file.
struct ConfigOptions {
  std::string config_path;
  std::map<std::string, std::string> overrides;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config_path, "config file (key = value lines)");
    for (const auto& k : config_keys()) {
      std::string flags = dashed(k.name);
      if (k.name == "n_runs") flags += ",--runs";
      if (k.name == "n_folds") flags += ",--folds";
      app->add_option(flags, overrides[k.name], k.help);
    }
  }

  Settings resolve(CLI::App* app) const {
    Settings s;
    if (!config_path.empty()) s = load_config_file(config_path);
    for (const auto& k : config_keys()) {
      if (app->count(dashed(k.name)) > 0) set_config_value(s, k.name, overrides.at(k.name));
    }
    s.run.validate();
    return s;
  }
};

std::string summary_line(const RunStatistics& st) {
  auto one = [](const char* name, const MeanStd& m) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s %.3f±%.3f", name, m.mean, m.std);
    return std::string(buf);
  };
  std::string out = one("accuracy", st.accuracy) + "  " + one("precision", st.precision) + "  " +
                    one("recall", st.recall) + "  " + one("f1", st.f1);
  if (st.auc) out += "  " + one("auc", *st.auc);
  return out + "  (n=" + std::to_string(st.count) + ")";
}

// Subject dump files in name order; a single file is a one-subject dump.
FeatureMatrix features_from_dump(const std::string& dump, std::size_t bins) {
  std::vector<fs::path> files;
  if (fs::is_directory(dump)) {
    for (const auto& e : fs::directory_iterator(dump)) {
      if (e.is_regular_file()) files.push_back(e.path());
    }
  } else if (fs::is_regular_file(dump)) {
    files.push_back(dump);
  } else {
    throw DataError("ROI dump not found: " + dump);
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("ROI dump directory is empty: " + dump);
  return roi_histogram_features(read_roi_dump(files), bins);
}

// features wins over roi_dump when both are set.
FeatureMatrix load_inputs(const Settings& s) {
  if (!s.features.empty()) {
    std::optional<fs::path> labels;
    if (!s.labels.empty()) labels = s.labels;
    return load_features(s.features, labels);
  }
  if (s.roi_dump.empty()) throw ConfigError("features (or roi_dump) path is required");
  if (s.bins < 1) throw ConfigError("bins must be >= 1");
  FeatureMatrix fm = features_from_dump(s.roi_dump, static_cast<std::size_t>(s.bins));
  if (!s.labels.empty()) {
    std::ifstream in(s.labels);
    if (!in) throw DataError("cannot open labels file " + s.labels);
    attach_labels(fm, in, s.labels);
  }
  return fm;
}

void write_assignments(std::ostream& os, const std::vector<int>& clusters, const std::string& echo) {
  std::istringstream es(echo);
  for (std::string line; std::getline(es, line);) os << "# " << line << '\n';
  os << "node,cluster\n";
  for (std::size_t i = 0; i < clusters.size(); ++i) os << i << ',' << clusters[i] << '\n';
}

// ---------------------------------------------------------------------------

struct GenSbmArgs {
  SbmOptions opt;
  std::string features_out = "sbm_features.csv";
  std::string labels_out = "sbm_labels.txt";
  std::string graph_out;
};

int cmd_gen_sbm(const GenSbmArgs& a) {
  const SbmSample sample = gen_sbm(a.opt);
  {
    auto os = open_out(a.features_out);
    write_features_csv(os, sample.features);
    finish(os, a.features_out);
  }
  {
    auto os = open_out(a.labels_out);
    write_labels(os, *sample.features.labels);
    finish(os, a.labels_out);
  }
  if (!a.graph_out.empty()) {
    auto os = open_out(a.graph_out);
    write_edge_list(os, sample.planted);
    finish(os, a.graph_out);
  }
  std::cout << "n=" << sample.features.n() << " K=" << a.opt.k << " d=" << sample.features.d() << '\n';
  return 0;
}

struct FeaturesArgs {
  std::string roi_dump;
  std::size_t bins = 20;
  std::string out = "features.csv";
};

int cmd_features(const FeaturesArgs& a) {
  if (a.bins < 1) throw ConfigError("bins must be >= 1");
  const FeatureMatrix fm = features_from_dump(a.roi_dump, a.bins);
  auto os = open_out(a.out);
  write_features_csv(os, fm);
  finish(os, a.out);
  std::cout << "subjects=" << fm.n() << " columns=" << fm.d() << '\n';
  return 0;
}

int cmd_train(const Settings& given) {
  Settings s = given;
  if (s.checkpoint.empty()) s.checkpoint = "armac3.ckpt";
  if (s.log_out.empty()) s.log_out = "armac3_log.csv";
  if (s.report_out.empty()) s.report_out = "armac3_report.csv";
  if (s.run.mode == TrainMode::semi && s.labels.empty()) {
    throw ConfigError("semi-supervised mode requires a labels path");
  }
  const FeatureMatrix fm = load_inputs(s);
  const std::string echo = config_echo(s);

  IterationHook hook;
  if (s.run.checkpoint_every > 0) {
    hook = [&s](const TrainState& st) {
      if (st.iteration % s.run.checkpoint_every != 0 || st.iteration == s.run.epochs) return;
      save_checkpoint(s.checkpoint + ".iter" + std::to_string(st.iteration),
                      make_checkpoint(s, st.model, st.teacher));
    };
  }
  ExperimentResult ex = run_experiment(fm, s, hook);

  if (!s.graph_out.empty()) {
    auto os = open_out(s.graph_out);
    write_edge_list(os, ex.graph);
    finish(os, s.graph_out);
  }
  const RunOutcome& first = ex.runs.front();
  save_checkpoint(s.checkpoint, make_checkpoint(s, first.result.model, first.result.teacher));
  {
    auto os = open_out(s.log_out);
    write_log_csv(os, first.result.history, echo);
    finish(os, s.log_out);
  }
  {
    auto os = open_out(s.report_out);
    if (ex.stats) {
      write_report_csv(os, ex.reports, *ex.stats, echo);
    } else {
      write_assignments(os, first.predictions, echo);
    }
    finish(os, s.report_out);
  }
  std::cout << "graph: " << ex.graph.num_nodes() << " nodes, " << ex.graph.num_edges() << " edges (alpha="
            << s.run.alpha << ")\n";
  if (ex.stats) std::cout << summary_line(*ex.stats) << '\n';
  std::cout << "wrote " << s.checkpoint << ", " << s.log_out << ", " << s.report_out << '\n';
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string features;
  std::string labels;
  std::string report_out;
  std::vector<std::string> compare;
  std::string alternative = "greater";
};

std::vector<std::vector<double>> read_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open report " + path);
  return read_report_columns(in, path);
}

int cmd_compare(const EvalArgs& a) {
  if (a.compare.size() != 2) throw ConfigError("--compare takes exactly two report files");
  const Alternative alt = parse_alternative(a.alternative);
  const auto ra = read_report(a.compare[0]);
  const auto rb = read_report(a.compare[1]);
  std::cout << "metric,p_value,w_plus,n,method\n";
  for (std::size_t m = 0; m < std::size(kReportMetrics); ++m) {
    const auto& x = ra[m];
    const auto& y = rb[m];
    if (x.size() != y.size()) throw DataError("reports have different run counts");
    const bool has_nan = std::any_of(x.begin(), x.end(), [](double v) { return std::isnan(v); }) ||
                         std::any_of(y.begin(), y.end(), [](double v) { return std::isnan(v); });
    std::cout << kReportMetrics[m] << ',';
    if (has_nan) {
      std::cout << "nan,nan,0,unavailable\n";
      continue;
    }
    try {
      const WilcoxonResult w = wilcoxon_signed_rank(x, y, alt);
      char buf[128];
      std::snprintf(buf, sizeof buf, "%.4f,%g,%zu,%s", w.p_value, w.w_plus, w.n, w.exact ? "exact" : "normal");
      std::cout << buf << '\n';
    } catch (const Error& e) {
      std::cout << "nan,nan,0,degenerate\n";
    }
  }
  return 0;
}

int cmd_eval(const EvalArgs& a) {
  if (!a.compare.empty()) return cmd_compare(a);
  if (a.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  RestoredModel rm = restore_checkpoint(load_checkpoint(a.checkpoint));
  Settings& s = rm.settings;
  if (!a.features.empty()) s.features = a.features;
  if (!a.labels.empty()) s.labels = a.labels;
  const FeatureMatrix fm = load_inputs(s);
  const Reevaluation ev = reevaluate(rm, fm);
  const std::string echo = config_echo(s);

  std::ofstream file;
  std::ostream* os = &std::cout;
  if (!a.report_out.empty()) {
    file = open_out(a.report_out);
    os = &file;
  }
  if (ev.report) {
    write_report_csv(*os, {*ev.report}, aggregate_runs({*ev.report}, s.std_convention), echo);
  } else {
    write_assignments(*os, ev.predictions, echo);
  }
  if (!a.report_out.empty()) finish(file, a.report_out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ARMA-C3 population-graph clustering and classification"};
  app.require_subcommand(1);

  GenSbmArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-sbm", "write a synthetic planted-partition dataset");
  gen_cmd->add_option("--n", gen.opt.n, "subjects")->capture_default_str();
  gen_cmd->add_option("--k", gen.opt.k, "blocks / classes")->capture_default_str();
  gen_cmd->add_option("--p-in", gen.opt.p_in, "within-block edge probability")->capture_default_str();
  gen_cmd->add_option("--p-out", gen.opt.p_out, "between-block edge probability")->capture_default_str();
  gen_cmd->add_option("--dim", gen.opt.feature_dim, "feature dimension")->capture_default_str();
  gen_cmd->add_option("--sigma", gen.opt.noise_sigma, "feature noise std")->capture_default_str();
  gen_cmd->add_option("--seed", gen.opt.seed, "rng seed")->capture_default_str();
  gen_cmd->add_option("--features-out", gen.features_out, "feature CSV path")->capture_default_str();
  gen_cmd->add_option("--labels-out", gen.labels_out, "labels path")->capture_default_str();
  gen_cmd->add_option("--graph-out", gen.graph_out, "planted edge list path");

  FeaturesArgs feat;
  auto* feat_cmd = app.add_subcommand("features", "ROI voxel dump -> histogram feature CSV");
  feat_cmd->add_option("--roi-dump", feat.roi_dump, "directory with one dump file per subject")->required();
  feat_cmd->add_option("--bins", feat.bins, "histogram bins per ROI")->capture_default_str();
  feat_cmd->add_option("-o,--out", feat.out, "output CSV")->capture_default_str();

  ConfigOptions train_opts;
  auto* train_cmd = app.add_subcommand("train", "train and evaluate over runs (unsup) or folds (semi)");
  train_opts.attach(train_cmd);

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "re-evaluate a checkpoint, or compare two reports");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "checkpoint file");
  eval_cmd->add_option("--features", ev.features, "feature CSV (defaults to the checkpoint's)");
  eval_cmd->add_option("--labels", ev.labels, "labels file (defaults to the checkpoint's)");
  eval_cmd->add_option("--report-out", ev.report_out, "report path (stdout if omitted)");
  eval_cmd->add_option("--compare", ev.compare, "two report CSVs: Wilcoxon signed-rank per metric")
      ->expected(2);
  eval_cmd->add_option("--alternative", ev.alternative, "greater | two-sided")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ErrorKind::config);
  }

  try {
    if (*gen_cmd) return cmd_gen_sbm(gen);
    if (*feat_cmd) return cmd_features(feat);
    if (*train_cmd) return cmd_train(train_opts.resolve(train_cmd));
    if (*eval_cmd) return cmd_eval(ev);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
