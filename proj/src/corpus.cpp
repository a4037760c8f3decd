#include "dialrel/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "dialrel/errors.hpp"
#include "dialrel/rng.hpp"

namespace dialrel {

using nlohmann::json;

namespace {

constexpr std::size_t kHumodTrain = 3750;
constexpr std::size_t kHumodValid = 500;
constexpr std::size_t kHumodTest = 500;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_on(std::string_view s, std::string_view sep) {
  std::vector<std::string> out;
  if (sep.empty()) {
    out.emplace_back(s);
    return out;
  }
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      break;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + sep.size();
  }
  return out;
}

std::vector<std::string> comma_list(const AdapterConfig& cfg, const std::string& key) {
  std::vector<std::string> out;
  if (auto it = cfg.find(key); it != cfg.end()) {
    for (auto& part : split_on(it->second, ",")) {
      auto t = trim(part);
      if (!t.empty()) out.push_back(std::move(t));
    }
  }
  return out;
}

std::string cfg_or(const AdapterConfig& cfg, const std::string& key, std::string fallback) {
  auto it = cfg.find(key);
  return it == cfg.end() ? fallback : it->second;
}

// RFC 4180 style reader: quoted fields, doubled quotes, embedded newlines.
class DelimitedReader {
 public:
  DelimitedReader(std::istream& in, char delim) : in_(in), delim_(delim) {}

  bool next(std::vector<std::string>& fields) {
    fields.clear();
    std::string field;
    bool in_quotes = false;
    bool any = false;
    char c;
    while (in_.get(c)) {
      any = true;
      if (in_quotes) {
        if (c == '"') {
          if (in_.peek() == '"') {
            in_.get(c);
            field.push_back('"');
          } else {
            in_quotes = false;
          }
        } else {
          field.push_back(c);
        }
      } else if (c == '"') {
        in_quotes = true;
      } else if (c == delim_) {
        fields.push_back(std::move(field));
        field.clear();
      } else if (c == '\n') {
        fields.push_back(std::move(field));
        return true;
      } else if (c != '\r') {
        field.push_back(c);
      }
    }
    if (in_quotes) throw DataError("unterminated quoted field");
    if (!any) return false;
    fields.push_back(std::move(field));
    return true;
  }

 private:
  std::istream& in_;
  char delim_;
};

// A raw record viewed as named fields, regardless of the file format.
struct RawRecord {
  const json* object = nullptr;
  const std::map<std::string, std::string>* columns = nullptr;

  bool has(const std::string& key) const {
    if (object) return object->contains(key);
    return columns->count(key) > 0;
  }
  const json* json_value(const std::string& key) const {
    if (!object) return nullptr;
    auto it = object->find(key);
    return it == object->end() ? nullptr : &*it;
  }
  std::string text(const std::string& key) const {
    if (object) {
      const auto& v = object->at(key);
      if (v.is_string()) return v.get<std::string>();
      return v.dump();
    }
    return columns->at(key);
  }
};

double parse_number(const std::string& s) {
  const auto t = trim(s);
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw DataError("not a number: '" + t + "'");
  }
  if (used != t.size() || !std::isfinite(v)) throw DataError("not a number: '" + t + "'");
  return v;
}

std::vector<double> read_ratings(const RawRecord& rec, const std::string& field,
                                 const std::string& separator) {
  std::vector<double> out;
  if (const json* v = rec.json_value(field)) {
    if (v->is_number()) {
      out.push_back(v->get<double>());
      return out;
    }
    if (v->is_array()) {
      for (const auto& x : *v) {
        if (!x.is_number()) throw DataError("rating array holds a non-number");
        out.push_back(x.get<double>());
      }
      return out;
    }
  }
  for (const auto& part : split_on(rec.text(field), separator)) {
    if (!trim(part).empty()) out.push_back(parse_number(part));
  }
  return out;
}

std::vector<Turn> read_turns(const RawRecord& rec, const std::string& field,
                             const std::string& separator, int first_speaker) {
  std::vector<std::string> texts;
  if (const json* v = rec.json_value(field); v && v->is_array()) {
    for (const auto& t : *v) {
      if (!t.is_string()) throw DataError("context array holds a non-string turn");
      texts.push_back(t.get<std::string>());
    }
  } else {
    texts = split_on(rec.text(field), separator);
  }
  std::vector<Turn> turns;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    auto t = trim(texts[i]);
    if (t.empty()) throw DataError("empty turn " + std::to_string(i) + " in context");
    turns.push_back({static_cast<int>((first_speaker + i) % 2), std::move(t)});
  }
  if (turns.empty()) throw DataError("context has no turns");
  return turns;
}

json to_json(const EvalExample& ex) {
  json turns = json::array();
  for (const auto& t : ex.context.turns) turns.push_back({{"speaker", t.speaker}, {"text", t.text}});
  return json{{"id", ex.id},
              {"dataset", to_string(ex.dataset)},
              {"split", to_string(ex.split)},
              {"context_id", ex.context_id},
              {"context", {{"turns", turns}}},
              {"response",
               {{"text", ex.response.text},
                {"source", to_string(ex.response.source)},
                {"ratings", ex.response.ratings},
                {"mean_rating", ex.response.mean_rating}}}};
}

EvalExample example_from_json(const json& j) {
  EvalExample ex;
  ex.id = j.at("id").get<std::string>();
  ex.dataset = parse_dataset(j.at("dataset").get<std::string>());
  ex.split = parse_split(j.at("split").get<std::string>());
  if (j.contains("context_id")) ex.context_id = j.at("context_id").get<std::string>();
  for (const auto& t : j.at("context").at("turns")) {
    Turn turn{t.at("speaker").get<int>(), t.at("text").get<std::string>()};
    if (trim(turn.text).empty()) throw DataError("empty turn text");
    ex.context.turns.push_back(std::move(turn));
  }
  if (ex.context.turns.empty()) throw DataError("context has no turns");
  const auto& r = j.at("response");
  ex.response.text = r.at("text").get<std::string>();
  ex.response.source = parse_source(r.value("source", std::string("unknown")));
  ex.response.ratings = r.value("ratings", std::vector<double>{});
  ex.response.mean_rating = r.contains("mean_rating") ? r.at("mean_rating").get<double>()
                                                      : mean_rating(ex.response.ratings);
  return ex;
}

void append_note(std::string& provenance, const std::string& note) {
  if (!provenance.empty()) provenance += "; ";
  provenance += note;
}

}  // namespace

std::string_view to_string(Dataset d) {
  switch (d) {
    case Dataset::HUMOD: return "HUMOD";
    case Dataset::USR_TC: return "USR_TC";
    case Dataset::P_DD: return "P_DD";
    case Dataset::FED_REL: return "FED_REL";
    case Dataset::FED_COR: return "FED_COR";
  }
  return "?";
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "?";
}

std::string_view to_string(ResponseSource s) {
  switch (s) {
    case ResponseSource::human: return "human";
    case ResponseSource::random_human: return "random_human";
    case ResponseSource::model: return "model";
    case ResponseSource::unknown: return "unknown";
  }
  return "?";
}

Dataset parse_dataset(std::string_view name) {
  std::string n(name);
  std::replace(n.begin(), n.end(), '-', '_');
  std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return std::toupper(c); });
  if (n == "HUMOD") return Dataset::HUMOD;
  if (n == "USR_TC") return Dataset::USR_TC;
  if (n == "P_DD") return Dataset::P_DD;
  if (n == "FED_REL") return Dataset::FED_REL;
  if (n == "FED_COR") return Dataset::FED_COR;
  throw std::invalid_argument("unknown dataset kind: " + std::string(name));
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "valid") return Split::valid;
  if (name == "test") return Split::test;
  throw std::invalid_argument("unknown split: " + std::string(name));
}

ResponseSource parse_source(std::string_view name) {
  if (name == "human") return ResponseSource::human;
  if (name == "random_human") return ResponseSource::random_human;
  if (name == "model") return ResponseSource::model;
  if (name == "unknown" || name.empty()) return ResponseSource::unknown;
  throw std::invalid_argument("unknown response source: " + std::string(name));
}

const DatasetProfile& profile(Dataset d) {
  static const DatasetProfile humod{1, 5, 2, 7, 4750};
  static const DatasetProfile usr{1, 3, 1, 19, 60};
  static const DatasetProfile pdd{1, 5, 1, 1, 200};
  static const DatasetProfile fed{1, 3, 3, 33, 375};
  switch (d) {
    case Dataset::HUMOD: return humod;
    case Dataset::USR_TC: return usr;
    case Dataset::P_DD: return pdd;
    case Dataset::FED_REL:
    case Dataset::FED_COR: return fed;
  }
  return humod;
}

std::string DialogueContext::joined(std::string_view separator) const {
  std::string out;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    if (i) out += separator;
    out += turns[i].text;
  }
  return out;
}

std::vector<std::string> Corpus::context_order() const {
  std::vector<std::string> order;
  std::set<std::string> seen;
  for (const auto& ex : examples) {
    if (seen.insert(ex.context_id).second) order.push_back(ex.context_id);
  }
  return order;
}

double mean_rating(const std::vector<double>& ratings) {
  if (ratings.empty()) throw std::invalid_argument("mean of empty rating list");
  // Sorted summation makes the mean independent of annotator order.
  std::vector<double> sorted = ratings;
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double r : sorted) sum += r;
  return sum / static_cast<double>(sorted.size());
}

AdapterConfig read_adapter_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open adapter config " + path.string());
  AdapterConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';' || t[0] == '[') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    }
    cfg[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return cfg;
}

Corpus ingest(Dataset kind, const std::filesystem::path& raw_path, const AdapterConfig& config) {
  if (!std::filesystem::exists(raw_path)) throw DataError("no such file: " + raw_path.string());
  std::ifstream in(raw_path, std::ios::binary);
  if (!in) throw DataError("cannot open " + raw_path.string());

  const std::string format = cfg_or(config, "format", "jsonl");
  const std::string context_field = cfg_or(config, "context_field", "context");
  const std::string turn_sep = cfg_or(config, "turn_separator", " __eou__ ");
  const std::string rating_sep = cfg_or(config, "rating_separator", ",");
  auto response_fields = comma_list(config, "response_fields");
  auto ratings_fields = comma_list(config, "ratings_fields");
  auto sources = comma_list(config, "sources");
  const std::string source_field = cfg_or(config, "source_field", "");
  const std::string context_id_field = cfg_or(config, "context_id_field", "");
  const std::string id_field = cfg_or(config, "id_field", "");
  const int first_speaker = std::stoi(cfg_or(config, "first_speaker", "0"));
  const auto& prof = profile(kind);
  const double lo = config.count("likert_min") ? parse_number(config.at("likert_min")) : prof.likert_min;
  const double hi = config.count("likert_max") ? parse_number(config.at("likert_max")) : prof.likert_max;
  std::optional<Split> fixed_split;
  if (auto it = config.find("split"); it != config.end()) fixed_split = parse_split(it->second);

  if (response_fields.empty()) response_fields = {"response"};
  if (ratings_fields.empty()) ratings_fields = {"ratings"};
  if (ratings_fields.size() != response_fields.size()) {
    throw std::invalid_argument("ratings_fields must parallel response_fields");
  }
  if (!sources.empty() && sources.size() != response_fields.size()) {
    throw std::invalid_argument("sources must parallel response_fields");
  }

  Corpus corpus;
  corpus.dataset = kind;
  corpus.provenance = "ingested " + raw_path.filename().string() + " as " + std::string(to_string(kind));

  std::set<std::string> ids;
  std::size_t record_index = 0;
  std::size_t turn_warnings = 0;

  auto handle = [&](const RawRecord& rec) {
    const std::string where = "record " + std::to_string(record_index);
    try {
      const auto turns = read_turns(rec, context_field, turn_sep, first_speaker);
      if (turns.size() < prof.min_turns || turns.size() > prof.max_turns) ++turn_warnings;
      const std::string cid = context_id_field.empty()
                                  ? std::string(to_string(kind)) + "-c" + std::to_string(record_index)
                                  : rec.text(context_id_field);
      for (std::size_t r = 0; r < response_fields.size(); ++r) {
        EvalExample ex;
        ex.dataset = kind;
        ex.split = fixed_split.value_or(Split::test);
        ex.context_id = cid;
        ex.context.turns = turns;
        ex.response.text = trim(rec.text(response_fields[r]));
        if (ex.response.text.empty()) throw DataError("empty response '" + response_fields[r] + "'");
        if (!sources.empty()) {
          ex.response.source = parse_source(sources[r]);
        } else if (!source_field.empty() && rec.has(source_field)) {
          ex.response.source = parse_source(rec.text(source_field));
        }
        ex.response.ratings = read_ratings(rec, ratings_fields[r], rating_sep);
        if (ex.response.ratings.empty()) throw DataError("no ratings in '" + ratings_fields[r] + "'");
        for (double v : ex.response.ratings) {
          if (v < lo || v > hi) {
            std::ostringstream msg;
            msg << "rating " << v << " outside Likert range [" << lo << ", " << hi << "]";
            throw DataError(msg.str());
          }
        }
        ex.response.mean_rating = mean_rating(ex.response.ratings);
        if (!id_field.empty() && response_fields.size() == 1) {
          ex.id = rec.text(id_field);
        } else {
          ex.id = cid + "-r" + std::to_string(r);
        }
        if (!ids.insert(ex.id).second) throw DataError("duplicate example id " + ex.id);
        corpus.examples.push_back(std::move(ex));
      }
    } catch (const DataError& e) {
      throw DataError(raw_path.string() + ": " + where + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw DataError(raw_path.string() + ": " + where + ": " + e.what());
    } catch (const std::out_of_range&) {
      throw DataError(raw_path.string() + ": " + where + ": missing field");
    }
    ++record_index;
  };

  if (format == "jsonl") {
    std::string line;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      json obj;
      try {
        obj = json::parse(line);
      } catch (const json::parse_error& e) {
        throw DataError(raw_path.string() + ": record " + std::to_string(record_index) +
                        ": malformed JSON: " + e.what());
      }
      if (!obj.is_object()) {
        throw DataError(raw_path.string() + ": record " + std::to_string(record_index) +
                        ": not a JSON object");
      }
      handle(RawRecord{&obj, nullptr});
    }
  } else if (format == "csv" || format == "tsv") {
    DelimitedReader reader(in, format == "csv" ? ',' : '\t');
    std::vector<std::string> header, fields;
    if (reader.next(header)) {
      while (reader.next(fields)) {
        if (fields.size() == 1 && trim(fields[0]).empty()) continue;
        if (fields.size() != header.size()) {
          throw DataError(raw_path.string() + ": record " + std::to_string(record_index) + ": " +
                          std::to_string(fields.size()) + " fields, header has " +
                          std::to_string(header.size()));
        }
        std::map<std::string, std::string> cols;
        for (std::size_t i = 0; i < header.size(); ++i) cols[trim(header[i])] = fields[i];
        handle(RawRecord{nullptr, &cols});
      }
    }
  } else {
    throw std::invalid_argument("unknown raw format: " + format);
  }

  if (corpus.examples.empty()) throw DataError("no records in " + raw_path.string());
  if (turn_warnings) {
    append_note(corpus.provenance, std::to_string(turn_warnings) +
                                       " contexts outside the documented turn range");
  }
  return corpus;
}

Corpus make_splits(Corpus corpus) {
  const auto order = corpus.context_order();
  const std::size_t n = order.size();
  const auto& prof = profile(corpus.dataset);
  if (n != prof.expected_contexts) {
    append_note(corpus.provenance, "warning: " + std::to_string(n) + " contexts, expected " +
                                       std::to_string(prof.expected_contexts));
  }

  std::map<std::string, Split> assign;
  switch (corpus.dataset) {
    case Dataset::HUMOD: {
      std::size_t train = kHumodTrain, valid = kHumodValid;
      if (n != kHumodTrain + kHumodValid + kHumodTest) {
        const double total = kHumodTrain + kHumodValid + kHumodTest;
        train = static_cast<std::size_t>(std::floor(n * (kHumodTrain / total)));
        valid = static_cast<std::size_t>(std::floor(n * (kHumodValid / total)));
      }
      for (std::size_t i = 0; i < n; ++i) {
        assign[order[i]] = i < train ? Split::train : (i < train + valid ? Split::valid : Split::test);
      }
      break;
    }
    case Dataset::USR_TC:
      for (std::size_t i = 0; i < n; ++i) assign[order[i]] = i < n / 2 ? Split::valid : Split::test;
      break;
    case Dataset::P_DD:
    case Dataset::FED_REL:
    case Dataset::FED_COR:
      for (const auto& id : order) assign[id] = Split::test;
      break;
  }
  for (auto& ex : corpus.examples) ex.split = assign.at(ex.context_id);
  return corpus;
}

std::map<std::string, const EvalExample*> gold_responses(const Corpus& corpus) {
  std::map<std::string, const EvalExample*> gold;
  for (const auto& ex : corpus.examples) {
    auto [it, inserted] = gold.try_emplace(ex.context_id, &ex);
    if (!inserted && it->second->response.source != ResponseSource::human &&
        ex.response.source == ResponseSource::human) {
      it->second = &ex;
    }
  }
  return gold;
}

std::vector<NegativeAssignment> shuffle_negatives(const Corpus& corpus, std::size_t window,
                                                  std::uint64_t seed, bool allow_wrap) {
  const auto order = corpus.context_order();
  const auto gold = gold_responses(corpus);

  std::set<std::string> train_ids;
  for (const auto& ex : corpus.examples) {
    if (ex.split == Split::train) train_ids.insert(ex.context_id);
  }
  std::vector<std::string> train_contexts;
  std::size_t last_train = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (train_ids.count(order[i])) {
      train_contexts.push_back(order[i]);
      last_train = i;
    }
  }
  if (train_contexts.empty()) throw DataError("corpus has no training contexts");
  if (window == 0) throw std::invalid_argument("negative pool window must be positive");

  const std::size_t start = last_train + 1;
  const std::size_t available = order.size() - std::min(start, order.size());
  if (window > available && !allow_wrap) {
    throw DataError("negative pool window " + std::to_string(window) + " exceeds the " +
                    std::to_string(available) + " contexts after the training range");
  }
  if (window > order.size()) {
    throw DataError("negative pool window " + std::to_string(window) + " exceeds corpus size " +
                    std::to_string(order.size()));
  }

  std::vector<std::string> pool;  // source context ids
  pool.reserve(window);
  for (std::size_t k = 0; k < window; ++k) pool.push_back(order[(start + k) % order.size()]);

  Engine engine(derive_seed(seed, "corpus.shuffle_negatives"));
  fisher_yates(std::span<std::string>(pool), engine);

  const std::size_t n = train_contexts.size();
  std::vector<std::size_t> slot(n);
  for (std::size_t i = 0; i < n; ++i) slot[i] = i % pool.size();

  // Self-pairing fix-up: swap with the next index.
  for (std::size_t i = 0; i < n; ++i) {
    if (pool[slot[i]] != train_contexts[i]) continue;
    bool fixed = false;
    for (std::size_t step = 1; step < n && !fixed; ++step) {
      const std::size_t j = (i + step) % n;
      if (pool[slot[j]] != train_contexts[i] && pool[slot[i]] != train_contexts[j]) {
        std::swap(slot[i], slot[j]);
        fixed = true;
      }
    }
    if (!fixed) {
      throw DataError("cannot avoid pairing context " + train_contexts[i] +
                      " with its own response (pool too small)");
    }
  }

  std::vector<NegativeAssignment> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& src = pool[slot[i]];
    out.push_back({train_contexts[i], gold.at(src)->response.text, src});
  }
  return out;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << json{{"corpus", {{"dataset", to_string(corpus.dataset)}, {"provenance", corpus.provenance}}}}.dump()
      << '\n';
  for (const auto& ex : corpus.examples) out << to_json(ex).dump() << '\n';
}

Corpus read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus " + path.string());
  Corpus corpus;
  bool have_dataset = false;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  DialogueContext prev_context;
  std::string prev_cid;
  std::size_t derived = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      const auto j = json::parse(line);
      if (j.contains("corpus")) {
        corpus.dataset = parse_dataset(j["corpus"].at("dataset").get<std::string>());
        corpus.provenance = j["corpus"].value("provenance", std::string());
        have_dataset = true;
        continue;
      }
      auto ex = example_from_json(j);
      if (ex.context_id.empty()) {
        // Consecutive records with the same turns share a derived context id.
        if (prev_cid.empty() || !(ex.context == prev_context)) {
          prev_cid = "ctx" + std::to_string(derived++);
          prev_context = ex.context;
        }
        ex.context_id = prev_cid;
      }
      if (!ids.insert(ex.id).second) throw DataError("duplicate example id " + ex.id);
      if (!have_dataset) {
        corpus.dataset = ex.dataset;
        have_dataset = true;
      }
      corpus.examples.push_back(std::move(ex));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return corpus;
}

}  // namespace dialrel
