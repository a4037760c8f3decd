#include "dialrel/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "dialrel/errors.hpp"

namespace dialrel {

using nlohmann::json;

namespace {

template <typename T>
double cosine_impl(std::span<const T> u, std::span<const T> v) {
  if (u.size() != v.size()) {
    throw std::invalid_argument("cosine of vectors with dims " + std::to_string(u.size()) + " and " +
                                std::to_string(v.size()));
  }
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double a = u[i], b = v[i];
    dot += a * b;
    uu += a * a;
    vv += b * b;
  }
  if (uu == 0.0 || vv == 0.0) throw std::invalid_argument("cosine of a zero-norm vector is undefined");
  return std::clamp(dot / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

void report_missing(const std::vector<std::string>& missing, const std::string& what) {
  std::string msg = std::to_string(missing.size()) + " examples lack " + what + ":";
  for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " " + missing[i];
  throw DataError(msg);
}

}  // namespace

void write_scores(const std::vector<ScoredExample>& scores, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& s : scores) {
    out << json{{"example_id", s.example_id}, {"metric", s.metric}, {"score", s.score}}.dump() << '\n';
  }
}

std::vector<ScoredExample> read_scores(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open scores " + path.string());
  std::vector<ScoredExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      ScoredExample s{j.at("example_id").get<std::string>(), j.at("metric").get<std::string>(),
                      j.at("score").get<double>()};
      if (!std::isfinite(s.score)) throw DataError("non-finite score");
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

double cosine(std::span<const float> u, std::span<const float> v) { return cosine_impl(u, v); }
double cosine(std::span<const double> u, std::span<const double> v) { return cosine_impl(u, v); }

std::string_view metric_name(CosineVariant v) {
  switch (v) {
    case CosineVariant::COS_FT: return "COS-FT";
    case CosineVariant::COS_MAX: return "COS-MAX-BERT";
    case CosineVariant::COS_NSP: return "COS-NSP-BERT";
  }
  return "?";
}

FeatureKind feature_kind(CosineVariant v) {
  switch (v) {
    case CosineVariant::COS_FT: return FeatureKind::AVGSTATIC;
    case CosineVariant::COS_MAX: return FeatureKind::MAXPOOL;
    case CosineVariant::COS_NSP: return FeatureKind::SOLO_NSP;
  }
  return FeatureKind::SOLO_NSP;
}

ScoreSet cosine_metric(const Corpus& corpus, const FeatureStore& store, CosineVariant variant, bool strict) {
  const FeatureKind kind = feature_kind(variant);
  const std::string metric(metric_name(variant));
  ScoreSet out;
  for (const auto& ex : corpus.examples) {
    const auto* ctx = store.find(context_key(ex.context_id), kind);
    const auto* resp = store.find(response_key(ex.id), kind);
    if (!ctx || !resp) {
      out.missing.push_back(ex.id);
      continue;
    }
    out.scores.push_back({ex.id, metric, cosine(std::span<const float>(ctx->values), resp->values)});
  }
  if (strict && !out.missing.empty()) report_missing(out.missing, std::string(to_string(kind)) + " features");
  return out;
}

double percentile_linear(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty sample");
  if (q < 0.0 || q > 1.0) throw std::invalid_argument("percentile fraction outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0) return values[lo];
  return values[lo] + frac * (values[hi] - values[lo]);
}

NormProbResult norm_prob(std::span<const NormProbInput> batch) {
  if (batch.empty()) throw std::invalid_argument("NORM-PROB batch is empty");
  std::vector<double> per_token;
  per_token.reserve(batch.size());
  for (const auto& b : batch) {
    if (b.token_count < 1) throw std::invalid_argument("token_count must be >= 1 for " + b.example_id);
    if (!(b.logprob_sum <= 0.0)) {
      throw std::invalid_argument("log-probability sum must be <= 0 for " + b.example_id);
    }
    per_token.push_back(b.logprob_sum / static_cast<double>(b.token_count));
  }

  NormProbResult result;
  result.stats.c5th = percentile_linear(per_token, 0.05);
  const auto [mn, mx] = std::minmax_element(per_token.begin(), per_token.end());
  result.stats.degenerate = *mn == *mx;
  const double c = result.stats.c5th;
  if (c == 0.0 && !result.stats.degenerate) {
    throw std::domain_error("NORM-PROB 5th percentile is 0; normalization undefined");
  }

  result.scores.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    // (max(c, L) - c) / -c keeps clipped members at +0.
    const double score = c == 0.0 ? 0.0 : (std::max(c, per_token[i]) - c) / -c;
    result.scores.push_back({batch[i].example_id, "NORM-PROB", score});
  }
  return result;
}

ScoreSet norm_prob_metric(const Corpus& corpus, const FeatureStore& store, bool strict) {
  const auto joined = join(corpus, store, FeatureKind::COND_LOGPROB, strict);
  std::map<std::pair<Dataset, Split>, std::vector<NormProbInput>> batches;
  for (const auto& [ex, rec] : joined.pairs) {
    batches[{ex->dataset, ex->split}].push_back({ex->id, rec->logprob_sum, rec->token_count});
  }
  std::map<std::string, double> by_id;
  for (const auto& [key, batch] : batches) {
    for (const auto& s : norm_prob(batch).scores) by_id[s.example_id] = s.score;
  }
  ScoreSet out;
  out.missing = joined.missing;
  for (const auto& [ex, rec] : joined.pairs) out.scores.push_back({ex->id, "NORM-PROB", by_id.at(ex->id)});
  return out;
}

double fed_score(std::span<const FollowupLogProb> followups, FollowupAggregate aggregate) {
  if (followups.empty()) throw std::invalid_argument("FED score needs at least one follow-up");
  double sum = 0.0;
  for (const auto& f : followups) {
    if (!(f.logprob_sum <= 0.0)) {
      throw std::invalid_argument("follow-up log-probability must be <= 0 (" + f.utterance_id + ")");
    }
    sum += f.logprob_sum;
  }
  if (aggregate == FollowupAggregate::mean) sum /= static_cast<double>(followups.size());
  return -sum;
}

ScoreSet fed_metric(const Corpus& corpus, const FeatureStore& store, const std::string& metric,
                    const std::vector<std::string>& utterance_ids, FollowupAggregate aggregate, bool strict) {
  const auto joined = join(corpus, store, FeatureKind::FOLLOWUP_LOGPROBS, strict);
  const std::set<std::string> wanted(utterance_ids.begin(), utterance_ids.end());
  ScoreSet out;
  out.missing = joined.missing;
  for (const auto& [ex, rec] : joined.pairs) {
    std::vector<FollowupLogProb> chosen;
    for (const auto& f : rec->followups) {
      if (wanted.empty() || wanted.count(f.utterance_id)) chosen.push_back(f);
    }
    if (chosen.size() < wanted.size()) {
      throw DataError("example " + ex->id + " lacks some requested follow-up utterances");
    }
    out.scores.push_back({ex->id, metric, fed_score(chosen, aggregate)});
  }
  return out;
}

}  // namespace dialrel
