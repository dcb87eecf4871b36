#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "refscan/baselines.hpp"
#include "refscan/corpus.hpp"
#include "refscan/ensemble.hpp"
#include "refscan/error.hpp"
#include "refscan/evaluation.hpp"
#include "refscan/explain.hpp"
#include "refscan/io.hpp"
#include "refscan/labeling.hpp"
#include "refscan/parallel.hpp"
#include "refscan/pipeline.hpp"
#include "refscan/sampling.hpp"
#include "refscan/workflow.hpp"

namespace refscan::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

struct Options {
  std::uint64_t seed = 0;
  std::size_t jobs = 0;

  // mine
  fs::path manifest;
  // label
  fs::path commits;
  fs::path rules;
  fs::path keywords;
  // featurize
  fs::path labels;
  fs::path raw;
  fs::path raw_out;
  fs::path schema_out;
  fs::path apply_schema;
  // train / predict / explain
  fs::path dataset;
  fs::path schema;
  fs::path model;
  fs::path model_out;
  std::string model_kind = "gbdt";
  std::string sampler = "nearmiss3";
  std::size_t nearmiss_k = 3;
  std::size_t nearmiss_m = 3;
  std::size_t search_budget = 25;
  // evaluate
  std::string setting = "mixed";
  double test_ratio = 0.2;
  double threshold = 0.5;
  fs::path predictions_out;
  // explain
  std::size_t lime_samples = 1000;
  std::size_t top_k = 20;
  double epsilon = 1e-4;
  std::size_t explain_limit = 0;
  // ensemble
  fs::path predictions;
  std::string scheme = "majority";

  fs::path out;
};

inline std::optional<SamplerConfig> sampler_config(const Options& o) {
  SamplerConfig c;
  c.k = o.nearmiss_k;
  c.m = o.nearmiss_m;
  if (o.sampler == "none") return std::nullopt;
  if (o.sampler == "nearmiss1") c.variant = NearMissVariant::kNm1;
  else if (o.sampler == "nearmiss2") c.variant = NearMissVariant::kNm2;
  else if (o.sampler == "nearmiss3") c.variant = NearMissVariant::kNm3;
  else throw Error(ErrorCode::kUsage, "unknown sampler '" + o.sampler + "'");
  return c;
}

inline TrainConfig train_config(const Options& o) {
  TrainConfig c;
  c.kind = parse_model_kind(o.model_kind);
  c.sampler = sampler_config(o);
  c.search_budget = o.search_budget;
  c.seed = o.seed;
  c.jobs = resolve_jobs(o.jobs);
  return c;
}

inline std::string config_hash(const Json& config) { return hex64(fnv1a64(config.dump())); }

inline Json with_provenance(const char* command, const Json& config, Json body) {
  Json doc;
  doc["provenance"] = provenance(command, config_hash(config));
  for (auto& [k, v] : body.items()) doc[k] = std::move(v);
  return doc;
}

inline FeatureSchema load_schema(const fs::path& path) {
  try {
    return schema_from_json(read_json_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
}

inline std::unique_ptr<Classifier> load_model(const fs::path& path, const FeatureSchema& schema) {
  auto model = classifier_from_json(read_json_file(path));
  if (model->width() != schema.width() || model->schema_hash != schema_hash(schema)) {
    throw Error(ErrorCode::kSchemaMismatch, path.string() + " was trained with a different schema");
  }
  return model;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

inline void cmd_mine(const Options& o, std::ostream& out) {
  const auto manifest = load_manifest(o.manifest);
  std::vector<std::vector<CommitRecord>> per_repo(manifest.entries.size());
  const MineOptions opts;
  parallel_for(manifest.entries.size(), resolve_jobs(o.jobs),
               [&](std::size_t i) { per_repo[i] = mine_commits(manifest.entries[i], opts); });
  std::vector<CommitRecord> all;
  for (auto& v : per_repo) all.insert(all.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
  write_file_atomic(o.out, commits_to_jsonl(all));
  out << "mined " << all.size() << " commits from " << manifest.entries.size() << " repositories\n";
}

inline void cmd_label(const Options& o, std::ostream& out, std::ostream& err) {
  const auto commits = read_commits_jsonl(o.commits);
  const RuleLabels rules = o.rules.empty() ? RuleLabels{} : ingest_rule_labels(o.rules);
  const KeywordSet keywords = o.keywords.empty() ? KeywordSet::defaults() : KeywordSet::from_file(o.keywords);
  const auto result = label_commits(commits, rules, keywords);
  if (result.unknown_rule_shas > 0) {
    err << "warning: " << result.unknown_rule_shas << " rule verdicts refer to commits not in the corpus\n";
  }
  std::vector<Json> rows;
  std::size_t positives = 0;
  for (const auto& r : result.records) {
    rows.push_back(to_json(r));
    positives += r.combined ? 1 : 0;
  }
  write_file_atomic(o.out, to_jsonl(rows));
  out << "labeled " << rows.size() << " commits, " << positives << " refactoring\n";
}

inline void cmd_featurize(const Options& o, std::ostream& out) {
  RawDataset raw;
  if (!o.raw.empty()) {
    raw = read_raw_dataset(o.raw);
  } else {
    if (o.commits.empty() || o.labels.empty() || o.manifest.empty()) {
      throw Error(ErrorCode::kUsage, "featurize needs --raw or all of --commits, --labels, --manifest");
    }
    const auto commits = read_commits_jsonl(o.commits);
    const auto labels = read_labels_jsonl(o.labels);
    const auto manifest = load_manifest(o.manifest);
    FeaturizeOptions fo;
    fo.jobs = resolve_jobs(o.jobs);
    raw = build_raw_dataset(commits, labels, manifest, fo);
  }
  if (!o.raw_out.empty()) write_file_atomic(o.raw_out, raw_dataset_to_jsonl(raw));

  if (!o.schema_out.empty() && !o.apply_schema.empty()) {
    throw Error(ErrorCode::kUsage, "--schema-out and --apply-schema are exclusive");
  }
  std::optional<FeatureSchema> schema;
  if (!o.apply_schema.empty()) {
    schema = load_schema(o.apply_schema);
  } else if (!o.schema_out.empty()) {
    schema = fit_schema(raw);
    write_json_atomic(o.schema_out, with_provenance("featurize", Json::object(), to_json(*schema)));
  }
  if (!o.out.empty()) {
    if (!schema) throw Error(ErrorCode::kUsage, "--out needs --schema-out or --apply-schema");
    write_file_atomic(o.out, feature_matrix_to_jsonl(transform(raw, *schema)));
  }
  out << "featurized " << raw.rows.size() << " commits";
  if (schema) out << ", width " << schema->width();
  out << "\n";
}

inline void cmd_train(const Options& o, std::ostream& out) {
  const auto schema = load_schema(o.schema);
  const auto matrix = read_feature_matrix(o.dataset, schema);
  if (matrix.rows.empty()) throw Error(ErrorCode::kEmptyTraining, o.dataset.string() + " has no rows");
  const auto cfg = train_config(o);
  auto trained = train_on_matrix(matrix, cfg);
  trained.model->schema_hash = schema_hash(schema);
  Json body = trained.model->to_json();
  if (trained.search) body["search"] = to_json(*trained.search);
  write_json_atomic(o.model_out, with_provenance("train", to_json(cfg), std::move(body)));
  out << "trained " << trained.model->kind() << " on " << trained.sampled_rows << " of " << trained.training_rows
      << " rows\n";
}

inline void cmd_evaluate(const Options& o, std::ostream& out) {
  const auto raw = read_raw_dataset(o.raw);
  SplitPlan plan;
  plan.strategy = parse_split_strategy(o.setting);
  plan.test_ratio = o.test_ratio;
  plan.seed = o.seed;
  const auto cfg = train_config(o);
  const auto run = run_evaluation(raw, plan, cfg, o.threshold);
  Json config = to_json(cfg);
  config["setting"] = o.setting;
  config["test_ratio"] = o.test_ratio;
  config["threshold"] = o.threshold;
  write_json_atomic(o.out, with_provenance("evaluate", config, evaluation_report_json(run)));
  if (!o.predictions_out.empty()) {
    std::vector<Json> rows;
    for (const auto& p : run.predictions) rows.push_back(to_json(p));
    write_file_atomic(o.predictions_out, to_jsonl(rows));
  }
  out << run.folds.size() << " folds, median auc " << run.summary.median_auc << ", median recall "
      << run.summary.median_recall << "\n";
}

inline void cmd_predict(const Options& o, std::ostream& out) {
  const auto schema = load_schema(o.schema);
  const auto model = load_model(o.model, schema);
  const auto matrix = read_feature_matrix(o.dataset, schema);
  const auto scores = model->predict_all(matrix);
  std::vector<Json> rows;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& r = matrix.rows[i];
    rows.push_back(to_json(PredictionRecord{r.sha, r.project_id, scores[i], scores[i] >= o.threshold, r.label}));
  }
  write_file_atomic(o.out, to_jsonl(rows));
  out << "scored " << rows.size() << " commits\n";
}

inline void cmd_explain(const Options& o, std::ostream& out) {
  const auto schema = load_schema(o.schema);
  const auto model = load_model(o.model, schema);
  auto matrix = read_feature_matrix(o.dataset, schema);
  if (o.explain_limit > 0 && matrix.rows.size() > o.explain_limit) matrix.rows.resize(o.explain_limit);
  if (matrix.rows.empty()) throw Error(ErrorCode::kEmptyInput, o.dataset.string() + " has no rows");
  LimeConfig lc;
  lc.n_samples = o.lime_samples;
  lc.top_k = o.top_k;
  lc.seed = o.seed;
  const auto explanations = explain_rows(*model, matrix, schema, lc, resolve_jobs(o.jobs));
  std::vector<std::pair<std::string, std::size_t>> splits;
  if (const auto* gbdt = dynamic_cast<const GbdtModel*>(model.get())) splits = split_importance(*gbdt, schema);
  const auto aggregate = aggregate_explanations(explanations, splits, o.epsilon);

  Json body;
  body["version"] = 1;
  body["sign_convention"] = "positive=refactoring";
  Json imp = Json::array();
  for (const auto& [name, count] : splits) imp.push_back(Json{{"feature", name}, {"split_count", count}});
  body["split_importance"] = std::move(imp);
  Json inst = Json::array();
  for (const auto& e : explanations) inst.push_back(to_json(e));
  body["instances"] = std::move(inst);
  Json agg = Json::array();
  for (const auto& a : aggregate) agg.push_back(to_json(a));
  body["aggregate"] = std::move(agg);
  const Json config{{"seed", o.seed}, {"samples", o.lime_samples}, {"top_k", o.top_k}, {"epsilon", o.epsilon}};
  write_json_atomic(o.out, with_provenance("explain", config, std::move(body)));
  out << "explained " << explanations.size() << " commits\n";
}

inline void cmd_ensemble(const Options& o, std::ostream& out, std::ostream& err) {
  const auto predictions = read_predictions_jsonl(o.predictions);
  const auto rules = ingest_rule_labels(o.rules);
  const auto result = combine_verdicts(predictions, rules, parse_vote_scheme(o.scheme));
  if (result.missing_rule_verdicts > 0) {
    err << "warning: " << result.missing_rule_verdicts << " commits have no rule verdict; counted as false\n";
  }
  std::vector<Json> rows;
  std::size_t positives = 0;
  for (const auto& v : result.verdicts) {
    rows.push_back(to_json(v));
    positives += v.final_vote ? 1 : 0;
  }
  write_file_atomic(o.out, to_jsonl(rows));
  out << positives << " of " << rows.size() << " commits flagged\n";
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  Options o;
  CLI::App app{"Detect refactoring commits from commit messages, process and code metrics.", "refscan"};
  app.set_config("--config", "", "TOML/INI file with option defaults");
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--seed", o.seed, "Seed for every stochastic step");
  app.add_option("--jobs", o.jobs, "Worker cap (default: REFSCAN_JOBS or hardware threads)");
  app.set_version_flag("--version", std::string(kToolVersion));

  auto* mine = app.add_subcommand("mine", "Extract commit records from the repositories in a manifest");
  mine->add_option("--manifest", o.manifest, "Repository manifest (TOML)")->required();
  mine->add_option("--out", o.out, "Commits JSONL")->required();

  auto* label = app.add_subcommand("label", "Label commits by keywords and rule verdicts");
  label->add_option("--commits", o.commits, "Commits JSONL")->required();
  label->add_option("--rules", o.rules, "Rule detector verdicts (JSON)");
  label->add_option("--keywords", o.keywords, "Keyword list, one per line");
  label->add_option("--out", o.out, "Labels JSONL")->required();

  auto* featurize = app.add_subcommand("featurize", "Compute features; fit or apply a schema");
  featurize->add_option("--commits", o.commits, "Commits JSONL");
  featurize->add_option("--labels", o.labels, "Labels JSONL");
  featurize->add_option("--manifest", o.manifest, "Repository manifest (TOML)");
  featurize->add_option("--raw", o.raw, "Read raw features instead of computing them");
  featurize->add_option("--raw-out", o.raw_out, "Write raw features");
  featurize->add_option("--schema-out", o.schema_out, "Fit a schema and write it");
  featurize->add_option("--apply-schema", o.apply_schema, "Transform with an existing schema");
  featurize->add_option("--out", o.out, "Transformed dataset JSONL");

  auto add_training = [&](CLI::App* sub) {
    sub->add_option("--model", o.model_kind, "gbdt|decision_tree|random_forest|complement_naive_bayes|knn");
    sub->add_option("--sampler", o.sampler, "nearmiss1|nearmiss2|nearmiss3|none");
    sub->add_option("--nearmiss-k", o.nearmiss_k, "Positives consulted per negative (nearmiss1)");
    sub->add_option("--nearmiss-m", o.nearmiss_m, "Negatives kept per positive (nearmiss3)");
    sub->add_option("--search-budget", o.search_budget, "Random-search configurations (0 = defaults)");
  };

  auto* train = app.add_subcommand("train", "Train a classifier on a transformed dataset");
  train->add_option("--dataset", o.dataset, "Transformed dataset JSONL")->required();
  train->add_option("--schema", o.schema, "Schema JSON")->required();
  train->add_option("--model-out", o.model_out, "Model JSON")->required();
  add_training(train);

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Train and evaluate per fold of an evaluation setting");
  evaluate_cmd->add_option("--raw", o.raw, "Raw features JSONL")->required();
  evaluate_cmd->add_option("--setting", o.setting, "mixed|within|cross");
  evaluate_cmd->add_option("--test-ratio", o.test_ratio, "Held-out fraction (mixed, within)");
  evaluate_cmd->add_option("--threshold", o.threshold, "Decision threshold");
  evaluate_cmd->add_option("--out", o.out, "Report JSON")->required();
  evaluate_cmd->add_option("--predictions-out", o.predictions_out, "Per-commit test predictions JSONL");
  add_training(evaluate_cmd);

  auto* predict = app.add_subcommand("predict", "Score a transformed dataset");
  predict->add_option("--model", o.model, "Model JSON")->required();
  predict->add_option("--schema", o.schema, "Schema JSON")->required();
  predict->add_option("--dataset", o.dataset, "Transformed dataset JSONL")->required();
  predict->add_option("--threshold", o.threshold, "Decision threshold");
  predict->add_option("--out", o.out, "Predictions JSONL")->required();

  auto* explain = app.add_subcommand("explain", "Split importance and local explanations");
  explain->add_option("--model", o.model, "Model JSON")->required();
  explain->add_option("--schema", o.schema, "Schema JSON")->required();
  explain->add_option("--dataset", o.dataset, "Transformed dataset JSONL")->required();
  explain->add_option("--samples", o.lime_samples, "Perturbations per instance");
  explain->add_option("--top-k", o.top_k, "Weights reported per instance");
  explain->add_option("--epsilon", o.epsilon, "Neutral band for aggregate directions");
  explain->add_option("--limit", o.explain_limit, "Explain only the first N rows");
  explain->add_option("--out", o.out, "Explanations JSON")->required();

  auto* ensemble = app.add_subcommand("ensemble", "Combine model predictions with rule verdicts");
  ensemble->add_option("--predictions", o.predictions, "Predictions JSONL")->required();
  ensemble->add_option("--rules", o.rules, "Rule detector verdicts (JSON)")->required();
  ensemble->add_option("--scheme", o.scheme, "unanimous|majority");
  ensemble->add_option("--out", o.out, "Verdicts JSONL")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (mine->parsed()) cmd_mine(o, out);
    else if (label->parsed()) cmd_label(o, out, err);
    else if (featurize->parsed()) cmd_featurize(o, out);
    else if (train->parsed()) cmd_train(o, out);
    else if (evaluate_cmd->parsed()) cmd_evaluate(o, out);
    else if (predict->parsed()) cmd_predict(o, out);
    else if (explain->parsed()) cmd_explain(o, out);
    else if (ensemble->parsed()) cmd_ensemble(o, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::kUsage ? kExitUsage : kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace refscan::cli
