#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "refscan/error.hpp"
#include "refscan/io.hpp"
#include "refscan/labeling.hpp"

namespace refscan {

enum class VoteScheme { kUnanimous, kMajority };

inline std::string_view vote_scheme_name(VoteScheme s) {
  return s == VoteScheme::kUnanimous ? "unanimous" : "majority";
}

inline VoteScheme parse_vote_scheme(std::string_view name) {
  if (name == "unanimous") return VoteScheme::kUnanimous;
  if (name == "majority") return VoteScheme::kMajority;
  throw Error(ErrorCode::kUsage, "unknown voting scheme '" + std::string(name) + "'");
}

/// With two voters, majority means at least one vote.
inline bool ensemble_vote(bool model_vote, bool rule_vote, VoteScheme scheme) {
  return scheme == VoteScheme::kUnanimous ? (model_vote && rule_vote) : (model_vote || rule_vote);
}

struct EnsembleVerdict {
  std::string sha;
  bool model_vote = false;
  bool rule_vote = false;
  VoteScheme scheme = VoteScheme::kMajority;
  bool final_vote = false;
};

struct PredictionRecord {
  std::string sha;
  std::string project_id;
  double score = 0.0;
  bool predicted = false;
  int label = -1;  // -1 when unknown
};

struct EnsembleResult {
  std::vector<EnsembleVerdict> verdicts;
  std::size_t missing_rule_verdicts = 0;
};

/// A sha without a rule verdict votes false and is counted.
inline EnsembleResult combine_verdicts(const std::vector<PredictionRecord>& predictions, const RuleLabels& rules,
                                       VoteScheme scheme) {
  EnsembleResult out;
  out.verdicts.reserve(predictions.size());
  for (const auto& p : predictions) {
    EnsembleVerdict v;
    v.sha = p.sha;
    v.model_vote = p.predicted;
    const auto it = rules.find(p.sha);
    if (it == rules.end()) {
      ++out.missing_rule_verdicts;
    } else {
      v.rule_vote = it->second;
    }
    v.scheme = scheme;
    v.final_vote = ensemble_vote(v.model_vote, v.rule_vote, scheme);
    out.verdicts.push_back(std::move(v));
  }
  return out;
}

inline Json to_json(const EnsembleVerdict& v) {
  return Json{{"sha", v.sha},
              {"model", v.model_vote},
              {"rule", v.rule_vote},
              {"scheme", vote_scheme_name(v.scheme)},
              {"final", v.final_vote}};
}

inline Json to_json(const PredictionRecord& p) {
  Json j{{"sha", p.sha}, {"project", p.project_id}, {"score", p.score}, {"predicted", p.predicted}};
  if (p.label >= 0) j["label"] = p.label;
  return j;
}

inline std::vector<PredictionRecord> read_predictions_jsonl(const std::filesystem::path& path) {
  std::vector<PredictionRecord> out;
  for_each_jsonl(path, [&](const Json& j, std::size_t) {
    PredictionRecord p;
    p.sha = j.at("sha").get<std::string>();
    p.score = j.at("score").get<double>();
    p.project_id = j.value("project", "");
    p.predicted = j.at("predicted").get<bool>();
    p.label = j.value("label", -1);
    out.push_back(std::move(p));
  });
  return out;
}

}  // namespace refscan
