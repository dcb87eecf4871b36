#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "refscan/baselines.hpp"
#include "refscan/codefeat.hpp"
#include "refscan/corpus.hpp"
#include "refscan/ensemble.hpp"
#include "refscan/error.hpp"
#include "refscan/evaluation.hpp"
#include "refscan/labeling.hpp"
#include "refscan/model.hpp"
#include "refscan/parallel.hpp"
#include "refscan/pipeline.hpp"
#include "refscan/procfeat.hpp"
#include "refscan/random.hpp"
#include "refscan/sampling.hpp"
#include "refscan/search.hpp"
#include "refscan/textfeat.hpp"

namespace refscan {

// ---------------------------------------------------------------------------
// Featurization
// ---------------------------------------------------------------------------

struct FeaturizeOptions {
  MineOptions mine;
  std::size_t n_max = 6;
  std::size_t jobs = 1;
};

/// Author histories in (timestamp, sha) order within each project. Entry i
/// holds the combined labels of the author's strictly earlier commits.
inline std::vector<AuthorHistory> author_histories(
    const std::vector<CommitRecord>& commits, const std::unordered_map<std::string, LabelRecord>& labels) {
  std::vector<std::size_t> order(commits.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = commits[a];
    const auto& y = commits[b];
    return std::tie(x.project_id, x.timestamp, x.sha) < std::tie(y.project_id, y.timestamp, y.sha);
  });
  std::map<std::pair<std::string, std::string>, std::vector<bool>> running;
  std::vector<AuthorHistory> out(commits.size());
  for (auto i : order) {
    const auto& c = commits[i];
    auto& seen = running[{c.project_id, c.author_id}];
    out[i] = AuthorHistory{c.author_id, seen};
    seen.push_back(labels.at(c.sha).combined);
  }
  return out;
}

/// Textual, process and code features for every commit, in input order.
inline RawDataset build_raw_dataset(const std::vector<CommitRecord>& commits,
                                    const std::unordered_map<std::string, LabelRecord>& labels,
                                    const RepoManifest& manifest, const FeaturizeOptions& opts = {}) {
  for (const auto& c : commits) {
    if (!labels.contains(c.sha)) throw Error(ErrorCode::kParseError, "no label record for commit " + c.sha);
    if (!manifest.find(c.project_id)) {
      throw Error(ErrorCode::kParseError, "project '" + c.project_id + "' is not in the manifest");
    }
  }
  const auto histories = author_histories(commits, labels);

  std::map<std::string, std::vector<std::size_t>> by_project;
  for (std::size_t i = 0; i < commits.size(); ++i) by_project[commits[i].project_id].push_back(i);
  std::vector<const std::vector<std::size_t>*> groups;
  std::vector<std::string> group_projects;
  for (const auto& [project, idx] : by_project) {
    group_projects.push_back(project);
    groups.push_back(&idx);
  }

  std::vector<CodeFeatureDelta> code(commits.size());
  parallel_for(groups.size(), opts.jobs, [&](std::size_t g) {
    const auto* repo = manifest.find(group_projects[g]);
    BlobReader reader(repo->path, opts.mine.git_binary);
    for (auto i : *groups[g]) code[i] = commit_code_delta(reader, commits[i], opts.mine);
  });

  RawDataset data;
  data.rows.resize(commits.size());
  parallel_for(commits.size(), opts.jobs, [&](std::size_t i) {
    const auto& c = commits[i];
    const auto& label = labels.at(c.sha);
    auto row = make_raw_row(c.sha, c.project_id, label.combined, text_features(c.message, opts.n_max),
                            process_features(c, histories[i]), code[i]);
    row.rule_label = label.rule_label;
    data.rows[i] = std::move(row);
  });
  return data;
}

// ---------------------------------------------------------------------------
// Training pipeline: fit schema -> transform -> undersample -> search -> train
// ---------------------------------------------------------------------------

struct TrainConfig {
  ModelKind kind = ModelKind::kGbdt;
  std::optional<SamplerConfig> sampler = SamplerConfig{};
  std::size_t search_budget = 25;  // 0 trains `gbdt` as given
  SearchSpace space;
  GbdtParams gbdt;
  BaselineParams baseline;
  FitOptions fit;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

inline Json to_json(const TrainConfig& c) {
  return Json{{"model", model_kind_name(c.kind)},
              {"sampler", c.sampler ? std::string(sampler_name(c.sampler->variant)) : std::string("none")},
              {"search_budget", c.search_budget},
              {"seed", c.seed}};
}

struct TrainedPipeline {
  FeatureSchema schema;
  std::unique_ptr<Classifier> model;
  std::optional<SearchResult> search;
  std::size_t training_rows = 0;
  std::size_t sampled_rows = 0;
};

/// Trains on an already transformed matrix (undersampling, search, model).
inline TrainedPipeline train_on_matrix(const FeatureMatrix& matrix, const TrainConfig& cfg) {
  TrainedPipeline out;
  out.training_rows = matrix.rows.size();
  require_both_classes(matrix);
  FeatureMatrix sampled;
  if (cfg.sampler) {
    sampled = matrix.subset(nearmiss(matrix, *cfg.sampler, cfg.jobs));
  } else {
    sampled = matrix;
  }
  out.sampled_rows = sampled.rows.size();
  if (cfg.kind == ModelKind::kGbdt) {
    GbdtParams params = cfg.gbdt;
    params.seed = cfg.seed;
    if (cfg.search_budget > 0) {
      out.search = random_search(sampled, cfg.space, cfg.search_budget, cfg.seed, cfg.jobs);
      params = out.search->best;
    }
    out.model = std::make_unique<GbdtModel>(train_gbdt(sampled, params));
  } else {
    BaselineParams params = cfg.baseline;
    params.seed = cfg.seed;
    out.model = train_baseline(cfg.kind, sampled, params);
  }
  return out;
}

inline TrainedPipeline fit_pipeline(const RawDataset& training, const TrainConfig& cfg) {
  FeatureSchema schema = fit_schema(training, cfg.fit);
  const FeatureMatrix matrix = transform(training, schema);
  TrainedPipeline out = train_on_matrix(matrix, cfg);
  out.model->schema_hash = schema_hash(schema);
  out.schema = std::move(schema);
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation settings
// ---------------------------------------------------------------------------

struct EvaluationRun {
  SplitPlan plan;
  std::vector<EvalReport> folds;
  std::vector<PredictionRecord> predictions;  // test rows of every fold, fold order
  EvalSummary summary;
};

/// Runs the training pipeline independently per fold; the schema is fitted
/// on the fold's training rows only.
inline EvaluationRun run_evaluation(const RawDataset& data, const SplitPlan& plan, const TrainConfig& cfg,
                                    double threshold = 0.5) {
  std::vector<std::string> projects;
  projects.reserve(data.rows.size());
  for (const auto& r : data.rows) projects.push_back(r.project_id);
  const auto folds = make_splits(projects, plan);

  EvaluationRun run;
  run.plan = plan;
  Rng seeds(cfg.seed);
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto& fold = folds[f];
    TrainConfig fold_cfg = cfg;
    fold_cfg.seed = seeds.next();
    EvalReport report;
    const RawDataset train = data.subset(fold.train);
    const RawDataset test = data.subset(fold.test);
    if (test.rows.empty()) {
      report.degenerate = true;
      report.note = "empty test set";
    } else {
      try {
        const auto trained = fit_pipeline(train, fold_cfg);
        const auto matrix = transform(test, trained.schema);
        const auto scores = trained.model->predict_all(matrix);
        const auto labels = matrix.labels();
        report = evaluate(scores, labels, threshold);
        for (std::size_t i = 0; i < scores.size(); ++i) {
          run.predictions.push_back(PredictionRecord{matrix.rows[i].sha, matrix.rows[i].project_id, scores[i],
                                                     scores[i] >= threshold, labels[i]});
        }
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kSingleClassInput && e.code() != ErrorCode::kEmptyTraining) throw;
        report.degenerate = true;
        report.note = e.what();
      }
    }
    report.setting = std::string(split_strategy_name(plan.strategy));
    report.fold = fold.name;
    report.threshold = threshold;
    run.folds.push_back(std::move(report));
  }
  run.summary = summarize(run.folds);
  return run;
}

inline Json evaluation_report_json(const EvaluationRun& run) {
  Json folds = Json::array();
  for (const auto& f : run.folds) folds.push_back(to_json(f));
  return Json{{"setting", split_strategy_name(run.plan.strategy)},
              {"seed", run.plan.seed},
              {"test_ratio", run.plan.test_ratio},
              {"folds", std::move(folds)},
              {"summary", to_json(run.summary)}};
}

}  // namespace refscan
