#include "dialrel/featurestore.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dialrel/errors.hpp"

namespace dialrel {

using nlohmann::json;

namespace {

constexpr char kMagic[5] = {'D', 'R', 'F', 'V', '1'};
constexpr std::uint32_t kBinaryVersion = 1;
constexpr int kJsonVersion = 1;

std::string describe(const FeatureRecord& rec) {
  return "(" + rec.example_id + ", " + std::string(to_string(rec.kind)) + ")";
}

class ByteWriter {
 public:
  explicit ByteWriter(std::ostream& out) : out_(out) {}

  template <typename U>
  void uint(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.put(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  void str16(const std::string& s) {
    if (s.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw DataError("string too long for DRFV1: " + s.substr(0, 40) + "...");
    }
    uint(static_cast<std::uint16_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void raw(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }

 private:
  std::ostream& out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::istream& in) : in_(in) {}

  template <typename U>
  U uint() {
    unsigned char buf[sizeof(U)];
    read(reinterpret_cast<char*>(buf), sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(uint<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
  std::string str16() {
    std::string s(uint<std::uint16_t>(), '\0');
    read(s.data(), s.size());
    return s;
  }
  void read(char* p, std::size_t n) {
    if (!in_.read(p, static_cast<std::streamsize>(n))) throw DataError("truncated DRFV1 file");
  }

 private:
  std::istream& in_;
};

json record_to_json(const FeatureRecord& rec) {
  json j{{"example_id", rec.example_id}, {"kind", to_string(rec.kind)}, {"dim", rec.dim}};
  switch (rec.kind) {
    case FeatureKind::COND_LOGPROB:
      j["logprob_sum"] = rec.logprob_sum;
      j["token_count"] = rec.token_count;
      break;
    case FeatureKind::FOLLOWUP_LOGPROBS: {
      json fs = json::array();
      for (const auto& f : rec.followups) {
        fs.push_back({{"utterance_id", f.utterance_id}, {"logprob_sum", f.logprob_sum}});
      }
      j["followups"] = std::move(fs);
      break;
    }
    default: {
      // float -> double is exact, and the double's shortest decimal form
      // parses back to the same double, hence the same float.
      json vs = json::array();
      for (float v : rec.values) vs.push_back(static_cast<double>(v));
      j["values"] = std::move(vs);
    }
  }
  j["extractor_tag"] = rec.extractor_tag;
  return j;
}

double finite_number(const json& v, const char* what) {
  if (!v.is_number()) throw DataError(std::string(what) + " is not a finite number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw DataError(std::string(what) + " is not finite");
  return d;
}

FeatureRecord record_from_json(const json& j) {
  FeatureRecord rec;
  rec.example_id = j.at("example_id").get<std::string>();
  rec.kind = parse_feature_kind(j.at("kind").get<std::string>());
  rec.dim = j.value("dim", 0u);
  rec.extractor_tag = j.value("extractor_tag", std::string());
  switch (rec.kind) {
    case FeatureKind::COND_LOGPROB:
      rec.logprob_sum = finite_number(j.at("logprob_sum"), "logprob_sum");
      rec.token_count = j.at("token_count").get<std::uint32_t>();
      break;
    case FeatureKind::FOLLOWUP_LOGPROBS:
      for (const auto& f : j.at("followups")) {
        rec.followups.push_back({f.at("utterance_id").get<std::string>(),
                                 finite_number(f.at("logprob_sum"), "followup logprob_sum")});
      }
      break;
    default:
      for (const auto& v : j.at("values")) {
        const double d = finite_number(v, "feature value");
        const float f = static_cast<float>(d);
        if (!std::isfinite(f)) throw DataError("feature value overflows 32-bit float");
        rec.values.push_back(f);
      }
  }
  return rec;
}

}  // namespace

std::string_view to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::PAIR_NSP: return "PAIR_NSP";
    case FeatureKind::PAIR_NSP_NEG: return "PAIR_NSP_NEG";
    case FeatureKind::SOLO_NSP: return "SOLO_NSP";
    case FeatureKind::MAXPOOL: return "MAXPOOL";
    case FeatureKind::AVGSTATIC: return "AVGSTATIC";
    case FeatureKind::COND_LOGPROB: return "COND_LOGPROB";
    case FeatureKind::FOLLOWUP_LOGPROBS: return "FOLLOWUP_LOGPROBS";
  }
  return "?";
}

FeatureKind parse_feature_kind(std::string_view name) {
  for (int i = 0; i <= 6; ++i) {
    const auto k = static_cast<FeatureKind>(i);
    if (to_string(k) == name) return k;
  }
  throw DataError("unknown feature kind: " + std::string(name));
}

bool is_vector_kind(FeatureKind k) {
  return k != FeatureKind::COND_LOGPROB && k != FeatureKind::FOLLOWUP_LOGPROBS;
}

std::string negative_key(std::string_view context_id, std::string_view negative_text) {
  return std::string(context_id) + "::neg:" + std::string(negative_text);
}
std::string shuffled_key(std::string_view context_id) { return std::string(context_id) + "::shuf"; }
std::string context_key(std::string_view context_id) { return std::string(context_id) + "::ctx"; }
std::string response_key(std::string_view example_id) { return std::string(example_id) + "::resp"; }

void validate(const FeatureRecord& rec, std::uint32_t store_dim) {
  if (rec.example_id.empty()) throw DataError("record with empty example_id");
  if (is_vector_kind(rec.kind)) {
    if (rec.dim != store_dim) {
      throw DataError("record " + describe(rec) + " has dim " + std::to_string(rec.dim) +
                      ", store dim is " + std::to_string(store_dim));
    }
    if (rec.values.size() != rec.dim) {
      throw DataError("record " + describe(rec) + " has " + std::to_string(rec.values.size()) +
                      " values for dim " + std::to_string(rec.dim));
    }
    for (float v : rec.values) {
      if (!std::isfinite(v)) throw DataError("record " + describe(rec) + " has a non-finite value");
    }
  } else if (rec.kind == FeatureKind::COND_LOGPROB) {
    if (rec.token_count < 1) throw DataError("record " + describe(rec) + " has token_count 0");
    if (!std::isfinite(rec.logprob_sum)) {
      throw DataError("record " + describe(rec) + " has a non-finite logprob_sum");
    }
  } else {
    for (const auto& f : rec.followups) {
      if (!std::isfinite(f.logprob_sum)) {
        throw DataError("record " + describe(rec) + " has a non-finite follow-up log-prob");
      }
    }
  }
}

void FeatureStore::add(FeatureRecord rec) {
  validate(rec, dim_);
  auto key = std::make_pair(rec.example_id, rec.kind);
  if (index_.count(key)) throw DataError("duplicate feature key " + describe(rec));
  index_.emplace(std::move(key), records_.size());
  records_.push_back(std::move(rec));
}

const FeatureRecord* FeatureStore::find(std::string_view key, FeatureKind kind) const {
  auto it = index_.find(std::make_pair(std::string(key), kind));
  return it == index_.end() ? nullptr : &records_[it->second];
}

void write_store(const FeatureStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << json{{"format", "dialrel-features"}, {"version", kJsonVersion}, {"dim", store.dim()}}.dump()
      << '\n';
  for (const auto& rec : store.records()) out << record_to_json(rec).dump() << '\n';
}

void write_store_binary(const FeatureStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  ByteWriter w(out);
  w.raw(kMagic, sizeof(kMagic));
  w.uint(kBinaryVersion);
  w.uint(store.dim());
  w.uint(static_cast<std::uint64_t>(store.size()));
  for (const auto& rec : store.records()) {
    w.str16(rec.example_id);
    w.uint(static_cast<std::uint8_t>(rec.kind));
    w.str16(rec.extractor_tag);
    switch (rec.kind) {
      case FeatureKind::COND_LOGPROB:
        w.f64(rec.logprob_sum);
        w.uint(rec.token_count);
        break;
      case FeatureKind::FOLLOWUP_LOGPROBS:
        w.uint(static_cast<std::uint16_t>(rec.followups.size()));
        for (const auto& f : rec.followups) {
          w.str16(f.utterance_id);
          w.f64(f.logprob_sum);
        }
        break;
      default:
        for (float v : rec.values) w.f32(v);
    }
  }
}

namespace {

FeatureStore read_binary(std::istream& in, const std::filesystem::path& path) {
  ByteReader r(in);
  char magic[5];
  r.read(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw DataError("bad DRFV1 magic");
  const auto version = r.uint<std::uint32_t>();
  if (version != kBinaryVersion) {
    throw DataError(path.string() + ": unsupported DRFV1 version " + std::to_string(version));
  }
  const auto dim = r.uint<std::uint32_t>();
  const auto count = r.uint<std::uint64_t>();
  FeatureStore store(dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    FeatureRecord rec;
    rec.example_id = r.str16();
    const auto kind = r.uint<std::uint8_t>();
    if (kind > 6) throw DataError(path.string() + ": record " + std::to_string(i) + ": bad kind");
    rec.kind = static_cast<FeatureKind>(kind);
    rec.extractor_tag = r.str16();
    switch (rec.kind) {
      case FeatureKind::COND_LOGPROB:
        rec.logprob_sum = r.f64();
        rec.token_count = r.uint<std::uint32_t>();
        break;
      case FeatureKind::FOLLOWUP_LOGPROBS: {
        const auto n = r.uint<std::uint16_t>();
        for (std::uint16_t k = 0; k < n; ++k) {
          auto id = r.str16();
          rec.followups.push_back({std::move(id), r.f64()});
        }
        break;
      }
      default:
        rec.dim = dim;
        rec.values.resize(dim);
        for (auto& v : rec.values) v = r.f32();
    }
    store.add(std::move(rec));
  }
  return store;
}

}  // namespace

FeatureStore read_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open feature store " + path.string());
  char head[5] = {};
  in.read(head, sizeof(head));
  const bool binary = in.gcount() == 5 && std::memcmp(head, kMagic, sizeof(kMagic)) == 0;
  in.clear();
  in.seekg(0);
  if (binary) return read_binary(in, path);

  std::string line;
  std::size_t lineno = 0;
  std::optional<FeatureStore> store;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      if (!store) {
        if (j.value("format", std::string()) != "dialrel-features") {
          throw DataError("missing store header");
        }
        if (j.value("version", 0) != kJsonVersion) throw DataError("unsupported store version");
        store.emplace(j.at("dim").get<std::uint32_t>());
        continue;
      }
      store->add(record_from_json(j));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!store) throw DataError(path.string() + ": empty feature store");
  return std::move(*store);
}

std::vector<ExtractionRequest> emit_manifest(const Corpus& corpus, const ManifestOptions& options) {
  if (options.kinds.empty()) throw std::invalid_argument("manifest needs at least one feature kind");
  const std::set<FeatureKind> kinds(options.kinds.begin(), options.kinds.end());
  if (kinds.count(FeatureKind::FOLLOWUP_LOGPROBS) && options.followups.empty()) {
    throw std::invalid_argument("FOLLOWUP_LOGPROBS requested with no follow-up utterances");
  }
  if (kinds.count(FeatureKind::PAIR_NSP_NEG) && options.negative_texts.empty() &&
      options.shuffled.empty()) {
    throw std::invalid_argument("PAIR_NSP_NEG requested with no negative texts");
  }

  auto turns_of = [](const EvalExample& ex) {
    std::vector<std::string> turns;
    for (const auto& t : ex.context.turns) turns.push_back(t.text);
    return turns;
  };

  const auto gold = gold_responses(corpus);
  std::map<std::string, const EvalExample*> first_of_context;
  for (const auto& ex : corpus.examples) first_of_context.try_emplace(ex.context_id, &ex);

  std::vector<ExtractionRequest> out;
  for (FeatureKind kind : kinds) {
    switch (kind) {
      case FeatureKind::PAIR_NSP:
        for (const auto& ex : corpus.examples) {
          if (ex.split == Split::train && gold.at(ex.context_id) != &ex) continue;
          out.push_back({ex.id, kind, turns_of(ex), ex.response.text, std::nullopt, {}});
        }
        break;
      case FeatureKind::PAIR_NSP_NEG: {
        std::set<std::string> done;
        for (const auto& cid : corpus.context_order()) {
          const auto* ex = first_of_context.at(cid);
          if (ex->split != Split::train) continue;
          for (const auto& text : options.negative_texts) {
            out.push_back({negative_key(cid, text), kind, turns_of(*ex), {}, text, {}});
          }
        }
        for (const auto& a : options.shuffled) {
          auto it = first_of_context.find(a.context_id);
          if (it == first_of_context.end()) {
            throw DataError("shuffled negative for unknown context " + a.context_id);
          }
          out.push_back({shuffled_key(a.context_id), kind, turns_of(*it->second), {}, a.negative_text, {}});
        }
        break;
      }
      case FeatureKind::SOLO_NSP:
      case FeatureKind::MAXPOOL:
      case FeatureKind::AVGSTATIC:
        for (const auto& cid : corpus.context_order()) {
          out.push_back({context_key(cid), kind, turns_of(*first_of_context.at(cid)), {}, std::nullopt, {}});
        }
        for (const auto& ex : corpus.examples) {
          out.push_back({response_key(ex.id), kind, {}, ex.response.text, std::nullopt, {}});
        }
        break;
      case FeatureKind::COND_LOGPROB:
        for (const auto& ex : corpus.examples) {
          out.push_back({ex.id, kind, turns_of(ex), ex.response.text, std::nullopt, {}});
        }
        break;
      case FeatureKind::FOLLOWUP_LOGPROBS:
        for (const auto& ex : corpus.examples) {
          out.push_back({ex.id, kind, turns_of(ex), ex.response.text, std::nullopt, options.followups});
        }
        break;
    }
  }
  return out;
}

void write_manifest(const std::vector<ExtractionRequest>& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& req : manifest) {
    json j{{"example_id", req.example_id},
           {"kind", to_string(req.kind)},
           {"context_turns", req.context_turns},
           {"response_text", req.response_text}};
    if (req.negative_text) j["negative_text"] = *req.negative_text;
    if (!req.followup_utterances.empty()) j["followup_utterances"] = req.followup_utterances;
    out << j.dump() << '\n';
  }
}

std::vector<ExtractionRequest> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open manifest " + path.string());
  std::vector<ExtractionRequest> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      ExtractionRequest req;
      req.example_id = j.at("example_id").get<std::string>();
      req.kind = parse_feature_kind(j.at("kind").get<std::string>());
      req.context_turns = j.value("context_turns", std::vector<std::string>{});
      req.response_text = j.value("response_text", std::string());
      if (j.contains("negative_text")) req.negative_text = j["negative_text"].get<std::string>();
      req.followup_utterances = j.value("followup_utterances", std::vector<std::string>{});
      out.push_back(std::move(req));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

JoinResult join(const Corpus& corpus, const FeatureStore& store, FeatureKind kind, bool strict) {
  const bool solo = kind == FeatureKind::SOLO_NSP || kind == FeatureKind::MAXPOOL ||
                    kind == FeatureKind::AVGSTATIC;
  JoinResult result;
  for (const auto& ex : corpus.examples) {
    const auto* rec = store.find(solo ? response_key(ex.id) : ex.id, kind);
    if (rec) {
      result.pairs.emplace_back(&ex, rec);
    } else {
      result.missing.push_back(ex.id);
    }
  }
  if (strict && !result.missing.empty()) {
    std::ostringstream msg;
    msg << result.missing.size() << " examples lack " << to_string(kind) << " features:";
    for (std::size_t i = 0; i < result.missing.size() && i < 20; ++i) msg << ' ' << result.missing[i];
    if (result.missing.size() > 20) msg << " ...";
    throw DataError(msg.str());
  }
  return result;
}

NspHead read_nsp_head(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open NSP head " + path.string());
  NspHead head;
  try {
    const auto j = json::parse(in);
    head.dim = j.at("D").get<std::uint32_t>();
    const auto& w = j.at("weights");
    const auto& b = j.at("bias");
    if (w.size() != 2 || b.size() != 2) throw DataError("NSP head must have 2 rows and 2 biases");
    for (int r = 0; r < 2; ++r) {
      for (const auto& v : w[r]) head.weights[r].push_back(static_cast<float>(finite_number(v, "head weight")));
      if (head.weights[r].size() != head.dim) {
        throw DataError("NSP head row " + std::to_string(r) + " has " +
                        std::to_string(head.weights[r].size()) + " weights for D=" +
                        std::to_string(head.dim));
      }
      head.bias[r] = static_cast<float>(finite_number(b[r], "head bias"));
    }
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return head;
}

void write_nsp_head(const NspHead& head, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  json w = json::array();
  for (const auto& row : head.weights) {
    json r = json::array();
    for (float v : row) r.push_back(static_cast<double>(v));
    w.push_back(std::move(r));
  }
  out << json{{"D", head.dim},
              {"weights", std::move(w)},
              {"bias", {static_cast<double>(head.bias[0]), static_cast<double>(head.bias[1])}}}
             .dump()
      << '\n';
}

}  // namespace dialrel
