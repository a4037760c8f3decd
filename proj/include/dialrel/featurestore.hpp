#pragma once

// Exchange format for model-derived artifacts.
//
// A store holds FeatureRecords keyed by (key, kind). Vector kinds all share
// the store dimension D, declared in the header; scalar kinds have dim 0.
//
// Record keys:
//   PAIR_NSP, COND_LOGPROB, FOLLOWUP_LOGPROBS   <example id>
//   PAIR_NSP_NEG (fixed text)                   <context id>::neg:<text>
//   PAIR_NSP_NEG (shuffled response)            <context id>::shuf
//   SOLO_NSP, MAXPOOL, AVGSTATIC                <context id>::ctx and
//                                               <example id>::resp
//
// JSON-lines layout: the first line is a header
//   {"format": "dialrel-features", "version": 1, "dim": D}
// followed by one record per line
//   {"example_id", "kind", "dim", "values" | "logprob_sum"+"token_count" |
//    "followups": [{"utterance_id", "logprob_sum"}], "extractor_tag"}.
//
// DRFV1 binary layout (little-endian):
//   magic "DRFV1", u32 version, u32 dim, u64 count, then per record
//   u16 id length, id bytes, u8 kind, u16 tag length, tag bytes, payload:
//     vector kinds       dim x f32
//     COND_LOGPROB       f64 logprob_sum, u32 token_count
//     FOLLOWUP_LOGPROBS  u16 n, n x (u16 length, utterance id bytes, f64)

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dialrel/corpus.hpp"

namespace dialrel {

enum class FeatureKind : std::uint8_t {
  PAIR_NSP = 0,
  PAIR_NSP_NEG = 1,
  SOLO_NSP = 2,
  MAXPOOL = 3,
  AVGSTATIC = 4,
  COND_LOGPROB = 5,
  FOLLOWUP_LOGPROBS = 6,
};

std::string_view to_string(FeatureKind k);
FeatureKind parse_feature_kind(std::string_view name);
bool is_vector_kind(FeatureKind k);

std::string negative_key(std::string_view context_id, std::string_view negative_text);
std::string shuffled_key(std::string_view context_id);
std::string context_key(std::string_view context_id);
std::string response_key(std::string_view example_id);

struct FollowupLogProb {
  std::string utterance_id;
  double logprob_sum = 0.0;
  bool operator==(const FollowupLogProb&) const = default;
};

struct FeatureRecord {
  std::string example_id;
  FeatureKind kind = FeatureKind::PAIR_NSP;
  std::uint32_t dim = 0;
  std::vector<float> values;
  double logprob_sum = 0.0;
  std::uint32_t token_count = 0;
  std::vector<FollowupLogProb> followups;
  std::string extractor_tag;

  bool operator==(const FeatureRecord&) const = default;
};

// Throws DataError if the record breaks its kind's contract against store dim.
void validate(const FeatureRecord& rec, std::uint32_t store_dim);

class FeatureStore {
 public:
  explicit FeatureStore(std::uint32_t dim = 0) : dim_(dim) {}

  std::uint32_t dim() const { return dim_; }
  const std::vector<FeatureRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

  // Validates and appends; duplicate (key, kind) is a DataError naming the key.
  void add(FeatureRecord rec);
  const FeatureRecord* find(std::string_view key, FeatureKind kind) const;

 private:
  std::uint32_t dim_;
  std::vector<FeatureRecord> records_;
  std::map<std::pair<std::string, FeatureKind>, std::size_t> index_;
};

// Format is chosen by content: files starting with "DRFV1" are binary.
FeatureStore read_store(const std::filesystem::path& path);
void write_store(const FeatureStore& store, const std::filesystem::path& path);
void write_store_binary(const FeatureStore& store, const std::filesystem::path& path);

struct ExtractionRequest {
  std::string example_id;  // record key the extractor must write back
  FeatureKind kind = FeatureKind::PAIR_NSP;
  std::vector<std::string> context_turns;  // empty for solo requests on a response
  std::string response_text;
  std::optional<std::string> negative_text;
  std::vector<std::string> followup_utterances;
  bool operator==(const ExtractionRequest&) const = default;
};

struct ManifestOptions {
  std::vector<FeatureKind> kinds;
  std::vector<std::string> negative_texts;
  std::vector<std::string> followups;
  std::vector<NegativeAssignment> shuffled;
};

// One request per required (record key, kind):
//   PAIR_NSP       every valid/test example, and each train context's gold
//                  response (the training positive)
//   PAIR_NSP_NEG   once per (train context, negative text), plus one per
//                  shuffled assignment
//   solo kinds     one per context and one per response
//   COND_LOGPROB, FOLLOWUP_LOGPROBS  one per example
std::vector<ExtractionRequest> emit_manifest(const Corpus& corpus, const ManifestOptions& options);

void write_manifest(const std::vector<ExtractionRequest>& manifest, const std::filesystem::path& path);
std::vector<ExtractionRequest> read_manifest(const std::filesystem::path& path);

struct JoinResult {
  std::vector<std::pair<const EvalExample*, const FeatureRecord*>> pairs;
  std::vector<std::string> missing;
};

// Pairs each corpus example with its record of `kind` (keyed by example id,
// or by response_key for solo kinds), in corpus order. In strict mode any
// missing record is a DataError listing the ids.
JoinResult join(const Corpus& corpus, const FeatureStore& store, FeatureKind kind, bool strict = false);

struct NspHead {
  std::uint32_t dim = 0;
  // Row 0 scores "is next", row 1 "not next".
  std::array<std::vector<float>, 2> weights;
  std::array<float, 2> bias{0.0f, 0.0f};
};

NspHead read_nsp_head(const std::filesystem::path& path);
void write_nsp_head(const NspHead& head, const std::filesystem::path& path);

}  // namespace dialrel
