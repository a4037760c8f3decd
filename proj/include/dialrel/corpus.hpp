#pragma once

// Normalized relevance-annotated dialogue corpora.
//
// Every dataset is converted into one JSON-lines schema (one EvalExample per
// line) that all downstream stages consume:
//
//   {"id", "dataset", "split", "context_id",
//    "context": {"turns": [{"speaker", "text"}]},
//    "response": {"text", "source", "ratings", "mean_rating"}}
//
// "context_id" is optional on input; when absent, consecutive records with an
// identical turn list are treated as one context.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dialrel {

enum class Dataset { HUMOD, USR_TC, P_DD, FED_REL, FED_COR };
enum class Split { train, valid, test };
enum class ResponseSource { human, random_human, model, unknown };

std::string_view to_string(Dataset d);
std::string_view to_string(Split s);
std::string_view to_string(ResponseSource s);
Dataset parse_dataset(std::string_view name);
Split parse_split(std::string_view name);
ResponseSource parse_source(std::string_view name);

// Documented shape of each dataset.
struct DatasetProfile {
  double likert_min;
  double likert_max;
  std::size_t min_turns;
  std::size_t max_turns;
  std::size_t expected_contexts;
};
const DatasetProfile& profile(Dataset d);

struct Turn {
  int speaker = 0;
  std::string text;
  bool operator==(const Turn&) const = default;
};

struct DialogueContext {
  std::vector<Turn> turns;

  // Turn texts joined by `separator`, in order.
  std::string joined(std::string_view separator = "\n") const;
  bool operator==(const DialogueContext&) const = default;
};

struct CandidateResponse {
  std::string text;
  ResponseSource source = ResponseSource::unknown;
  std::vector<double> ratings;
  double mean_rating = 0.0;
};

struct EvalExample {
  std::string id;
  Dataset dataset = Dataset::HUMOD;
  Split split = Split::test;
  std::string context_id;
  DialogueContext context;
  CandidateResponse response;
};

struct Corpus {
  Dataset dataset = Dataset::HUMOD;
  std::vector<EvalExample> examples;
  std::string provenance;

  // Context ids in order of first appearance.
  std::vector<std::string> context_order() const;
};

// Unweighted arithmetic mean. Throws std::invalid_argument on empty input.
double mean_rating(const std::vector<double>& ratings);

using AdapterConfig = std::map<std::string, std::string>;

// Reads `key = value` lines; '#' and ';' start comments, [sections] are ignored.
AdapterConfig read_adapter_config(const std::filesystem::path& path);

// Converts a raw dataset file to the normalized schema. The adapter config
// describes the raw layout:
//
//   format            jsonl | csv | tsv
//   context_field     field holding the context: an array of strings (jsonl)
//                     or a string split on `turn_separator`
//   turn_separator    default " __eou__ "
//   response_fields   comma list; one EvalExample per listed field per record
//   ratings_fields    comma list parallel to response_fields; each value is a
//                     number, an array of numbers (jsonl) or a string split on
//                     `rating_separator` (default ",")
//   sources           comma list parallel to response_fields, or
//   source_field      field holding the source label (single-response layouts)
//   context_id_field  optional; default is "<dataset>-c<record index>"
//   id_field          optional, single-response layouts only
//   first_speaker     0 or 1, default 0
//   likert_min/max    override the dataset's documented range
//   split             optional fixed split (e.g. an external training file)
//
// Errors (DataError): no records, malformed record (with its index), rating
// outside the Likert range.
Corpus ingest(Dataset kind, const std::filesystem::path& raw_path, const AdapterConfig& config);

// Assigns splits by context position in record order:
//   HUMOD   first 3,750 contexts train, next 500 valid, last 500 test
//   USR-TC  first half valid, second half test
//   P-DD, FED  everything test
// A context count different from the documented size is noted in the
// provenance; HUMOD is then split with the same 3750:500:500 proportions.
Corpus make_splits(Corpus corpus);

// The gold response of each context: the first `human` response, else the
// first response seen.
std::map<std::string, const EvalExample*> gold_responses(const Corpus& corpus);

struct NegativeAssignment {
  std::string context_id;
  std::string negative_text;
  std::string source_context_id;
};

// One shuffled human response per training context. The pool is the gold
// responses of the `window` contexts following the training range in record
// order (wrapping to the start when `allow_wrap`), permuted with a seeded
// Fisher-Yates shuffle. A context that receives its own gold response swaps
// with the next index.
std::vector<NegativeAssignment> shuffle_negatives(const Corpus& corpus, std::size_t window,
                                                  std::uint64_t seed, bool allow_wrap = true);

// JSON-lines I/O for the normalized schema.
void write_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus read_corpus(const std::filesystem::path& path);

}  // namespace dialrel
