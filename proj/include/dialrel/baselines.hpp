#pragma once

// Closed-form relevance metrics computed over stored artifacts.

#include <span>
#include <string>
#include <vector>

#include "dialrel/corpus.hpp"
#include "dialrel/featurestore.hpp"

namespace dialrel {

struct ScoredExample {
  std::string example_id;
  std::string metric;
  double score = 0.0;
  bool operator==(const ScoredExample&) const = default;
};

struct ScoreSet {
  std::vector<ScoredExample> scores;
  std::vector<std::string> missing;
};

void write_scores(const std::vector<ScoredExample>& scores, const std::filesystem::path& path);
std::vector<ScoredExample> read_scores(const std::filesystem::path& path);

// u.v / (|u| |v|). Throws std::invalid_argument on a dim mismatch or a
// zero-norm vector.
double cosine(std::span<const float> u, std::span<const float> v);
double cosine(std::span<const double> u, std::span<const double> v);

enum class CosineVariant { COS_FT, COS_MAX, COS_NSP };
std::string_view metric_name(CosineVariant v);
FeatureKind feature_kind(CosineVariant v);

// Cosine between each example's context vector (context_key) and response
// vector (response_key).
ScoreSet cosine_metric(const Corpus& corpus, const FeatureStore& store, CosineVariant variant,
                       bool strict = false);

struct NormProbInput {
  std::string example_id;
  double logprob_sum = 0.0;
  std::uint32_t token_count = 1;
};

struct NormProbBatchStats {
  double c5th = 0.0;
  bool degenerate = false;  // every per-token mean equal
};

// Percentile by linear interpolation between closest ranks with inclusive
// endpoints: position q * (n - 1) in the sorted sample.
double percentile_linear(std::vector<double> values, double q);

struct NormProbResult {
  std::vector<ScoredExample> scores;
  NormProbBatchStats stats;
};

// score = -(max(c5th, L) - c5th) / c5th with L = logprob_sum / token_count and
// c5th the batch 5th percentile of L.
NormProbResult norm_prob(std::span<const NormProbInput> batch);

// One NORM-PROB batch per (dataset, split) of the corpus.
ScoreSet norm_prob_metric(const Corpus& corpus, const FeatureStore& store, bool strict = false);

enum class FollowupAggregate { sum, mean };

// Negated aggregate of follow-up log-probabilities; all follow-ups are
// utterances signalling irrelevance.
double fed_score(std::span<const FollowupLogProb> followups,
                 FollowupAggregate aggregate = FollowupAggregate::sum);

// FED scoring over FOLLOWUP_LOGPROBS records. `utterance_ids` selects the
// follow-ups to use (empty selects all of them).
ScoreSet fed_metric(const Corpus& corpus, const FeatureStore& store, const std::string& metric,
                    const std::vector<std::string>& utterance_ids = {},
                    FollowupAggregate aggregate = FollowupAggregate::sum, bool strict = false);

}  // namespace dialrel
