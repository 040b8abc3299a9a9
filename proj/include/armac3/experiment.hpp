#pragma once

// Repeated-run protocol: unsupervised runs over seeds, semi-supervised runs
// over stratified folds, plus checkpoint assembly and re-evaluation.

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "armac3/checkpoint.hpp"
#include "armac3/config.hpp"
#include "armac3/datasets.hpp"
#include "armac3/graph.hpp"
#include "armac3/metrics.hpp"
#include "armac3/trainer.hpp"

namespace armac3 {

struct RunOutcome {
  TrainResult result;
  std::vector<int> predictions;    // class ids (aligned in unsup mode)
  std::vector<double> scores;      // positive-class score, empty if unavailable
  NodeMask eval_mask;              // empty = all nodes
  std::optional<EvalReport> report;
};

struct ExperimentResult {
  SubjectGraph graph;
  std::vector<RunOutcome> runs;  // runs[0] is the one checkpointed and logged
  std::vector<EvalReport> reports;
  std::optional<RunStatistics> stats;
};

// Metrics for one unsupervised run: clusters are aligned to classes first,
// and the positive-class score is the probability of whichever cluster maps
// to it.
inline EvalReport score_clustering(const Matrix& s, const std::vector<int>& truth, int positive_class,
                                   std::vector<int>& aligned, std::vector<double>& scores) {
  const auto clusters = argmax_rows(s);
  const Alignment a = align_labels(clusters, truth, static_cast<int>(s.cols()));
  aligned = a.apply(clusters);
  EvalReport r = classification_metrics(aligned, truth, positive_class);
  r.alignment = a.mapping;
  scores.clear();
  for (std::size_t c = 0; c < a.mapping.size(); ++c) {
    if (a.mapping[c] != positive_class) continue;
    scores.resize(static_cast<std::size_t>(s.rows()));
    for (Index i = 0; i < s.rows(); ++i) scores[static_cast<std::size_t>(i)] = s(i, static_cast<Index>(c));
  }
  bool both = false;
  if (!scores.empty()) {
    const bool any_pos = std::any_of(truth.begin(), truth.end(), [&](int y) { return y == positive_class; });
    const bool any_neg = std::any_of(truth.begin(), truth.end(), [&](int y) { return y != positive_class; });
    both = any_pos && any_neg;
  }
  if (both) r.auc = roc_auc(scores, truth, positive_class);
  return r;
}

inline EvalReport score_classification(const std::vector<int>& pred, const std::vector<double>& scores,
                                       const std::vector<int>& truth, int positive_class, const NodeMask& mask) {
  EvalReport r = classification_metrics(pred, truth, positive_class, mask);
  bool pos = false, neg = false;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    (truth[i] == positive_class ? pos : neg) = true;
  }
  if (pos && neg) r.auc = roc_auc(scores, truth, positive_class, mask);
  return r;
}

// Nodes outside the labeled mask; all nodes when every node is labeled.
inline NodeMask test_mask(const NodeMask& labeled) {
  NodeMask out(labeled.size());
  bool any = false;
  for (std::size_t i = 0; i < labeled.size(); ++i) {
    out[i] = !labeled[i];
    any = any || out[i];
  }
  return any ? out : NodeMask{};
}

inline int resolve_class_count(const FeatureMatrix& fm) {
  if (!fm.labels) return 0;
  return class_count(*fm.labels);
}

// Unsupervised mode: n_runs trainings with seeds seed, seed+1, ...
// Semi-supervised mode: one training per stratified fold, seed+fold.
inline ExperimentResult run_experiment(const FeatureMatrix& fm, const Settings& s,
                                       const IterationHook& first_run_hook = {}) {
  fm.validate();
  s.run.validate();
  const RunConfig& base = s.run;
  ExperimentResult ex{build_graph(fm.values, base.alpha), {}, {}, {}};

  if (base.mode == TrainMode::unsup) {
    if (s.n_runs < 1) throw ConfigError("n_runs must be >= 1");
    for (Index r = 0; r < s.n_runs; ++r) {
      RunConfig cfg = base;
      cfg.seed = base.seed + static_cast<std::uint64_t>(r);
      RunOutcome out;
      out.result = train_unsupervised(ex.graph, fm.values, cfg, r == 0 ? first_run_hook : IterationHook{});
      if (fm.labels) {
        out.report = score_clustering(out.result.assignments, *fm.labels, s.positive_class, out.predictions,
                                      out.scores);
        ex.reports.push_back(*out.report);
      } else {
        out.predictions = argmax_rows(out.result.assignments);
      }
      ex.runs.push_back(std::move(out));
    }
  } else {
    if (!fm.labels) throw ConfigError("semi-supervised mode requires labels");
    const auto& labels = *fm.labels;
    const auto folds = make_splits(labels, base.labeled_fraction, s.n_folds, base.seed);
    for (std::size_t f = 0; f < folds.size(); ++f) {
      RunConfig cfg = base;
      cfg.seed = base.seed + static_cast<std::uint64_t>(f);
      auto semi = train_semisupervised(ex.graph, fm.values, labels, folds[f], cfg, s.positive_class,
                                       f == 0 ? first_run_hook : IterationHook{});
      RunOutcome out;
      out.result = std::move(semi.train);
      out.predictions = std::move(semi.predictions);
      out.scores = std::move(semi.scores);
      out.eval_mask = test_mask(folds[f]);
      out.report = score_classification(out.predictions, out.scores, labels, s.positive_class, out.eval_mask);
      ex.reports.push_back(*out.report);
      ex.runs.push_back(std::move(out));
    }
  }
  if (!ex.reports.empty()) ex.stats = aggregate_runs(ex.reports, s.std_convention);
  return ex;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline Checkpoint make_checkpoint(const Settings& s, const Model& model, const EmaTeacher& teacher) {
  Checkpoint ck;
  ck.version = kCheckpointVersion;
  ck.config_text = config_echo(s);
  const auto& ec = model.encoder.config();
  Matrix dims(1, 2);
  dims << static_cast<double>(ec.in_dim), static_cast<double>(ec.k_clusters);
  ck.tensors.push_back(CheckpointTensor::from_matrix("meta.dims", dims));
  model.encoder.export_to("online.", ck.tensors);
  model.predictor.export_to(ck.tensors);
  teacher.params().export_to("teacher.", ck.tensors);
  return ck;
}

struct RestoredModel {
  Settings settings;
  Model model;
  EmaTeacher teacher;
};

inline RestoredModel restore_checkpoint(const Checkpoint& ck) {
  RestoredModel r;
  apply_config_text(r.settings, ck.config_text, "checkpoint config");
  const Matrix dims = ck.find("meta.dims").to_matrix();
  if (dims.size() != 2) throw FormatError("checkpoint meta.dims must hold two values");
  const EncoderConfig ec = r.settings.run.encoder_config(static_cast<Index>(dims(0)), static_cast<Index>(dims(1)));
  r.model.encoder = EncoderParams::import_from(ck, "online.", ec, false);
  r.model.predictor = PredictorParams::import_from(ck, ec);
  r.teacher = EmaTeacher(EncoderParams::import_from(ck, "teacher.", ec, false), r.settings.run.ema_momentum);
  return r;
}

// Re-evaluates the checkpointed run (run 0 / fold 0) on the given data.
struct Reevaluation {
  Matrix embeddings, assignments;
  std::vector<int> predictions;
  std::vector<double> scores;
  std::optional<EvalReport> report;
};

inline Reevaluation reevaluate(RestoredModel& rm, const FeatureMatrix& fm) {
  fm.validate();
  const Settings& s = rm.settings;
  const SubjectGraph g = build_graph(fm.values, s.run.alpha);
  Reevaluation out;
  auto [h, a] = evaluate_model(g, fm.values, rm.model);
  out.embeddings = std::move(h);
  out.assignments = std::move(a);
  if (s.run.mode == TrainMode::unsup) {
    if (fm.labels) {
      out.report = score_clustering(out.assignments, *fm.labels, s.positive_class, out.predictions, out.scores);
    } else {
      out.predictions = argmax_rows(out.assignments);
    }
    return out;
  }
  if (!fm.labels) throw ConfigError("semi-supervised evaluation requires labels");
  const auto folds = make_splits(*fm.labels, s.run.labeled_fraction, 1, s.run.seed);
  out.predictions = argmax_rows(out.assignments);
  out.scores.resize(static_cast<std::size_t>(out.assignments.rows()));
  for (Index i = 0; i < out.assignments.rows(); ++i) {
    out.scores[static_cast<std::size_t>(i)] = out.assignments(i, s.positive_class);
  }
  out.report = score_classification(out.predictions, out.scores, *fm.labels, s.positive_class, test_mask(folds[0]));
  return out;
}

}  // namespace armac3
