#include "dialrel/nspprobe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "dialrel/errors.hpp"

namespace dialrel {

using nlohmann::json;

std::string_view to_string(NspLabel l) { return l == NspLabel::is_next ? "is_next" : "not_next"; }

NspLabel parse_nsp_label(std::string_view s) {
  if (s == "is_next" || s == "0") return NspLabel::is_next;
  if (s == "not_next" || s == "1") return NspLabel::not_next;
  throw DataError("unknown NSP label: " + std::string(s));
}

FeatureMask top_k_mask(const RelevanceModel& model, std::size_t k) {
  const std::size_t d = model.dim();
  if (k < 1 || k > d) {
    throw std::invalid_argument("mask size k=" + std::to_string(k) + " outside [1, " + std::to_string(d) + "]");
  }
  std::vector<std::size_t> idx(d);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(model.weights[a]) > std::abs(model.weights[b]);
  });
  FeatureMask mask(d, false);
  for (std::size_t i = 0; i < k; ++i) mask[idx[i]] = true;
  return mask;
}

NspLabel nsp_predict(const NspHead& head, std::span<const float> feature, const std::optional<FeatureMask>& mask) {
  if (feature.size() != head.dim) {
    throw std::invalid_argument("feature dim " + std::to_string(feature.size()) + " != head dim " +
                                std::to_string(head.dim));
  }
  if (mask && mask->size() != head.dim) throw std::invalid_argument("mask dim != head dim");
  double logit[2] = {head.bias[0], head.bias[1]};
  for (std::size_t i = 0; i < head.dim; ++i) {
    const double x = (!mask || (*mask)[i]) ? static_cast<double>(feature[i]) : 0.0;
    logit[0] += static_cast<double>(head.weights[0][i]) * x;
    logit[1] += static_cast<double>(head.weights[1][i]) * x;
  }
  return logit[0] >= logit[1] ? NspLabel::is_next : NspLabel::not_next;
}

double nsp_accuracy(const NspHead& head, std::span<const LabeledFeature> pairs, const std::optional<FeatureMask>& mask) {
  if (pairs.empty()) throw std::invalid_argument("NSP accuracy of an empty set");
  std::size_t correct = 0;
  for (const auto& p : pairs) {
    if (nsp_predict(head, p.feature, mask) == p.gold) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

std::vector<LabelRecord> read_labels(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open labels " + path.string());
  std::vector<LabelRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      const auto& l = j.at("label");
      const std::string label = l.is_number_integer() ? std::to_string(l.get<int>()) : l.get<std::string>();
      out.push_back({j.at("example_id").get<std::string>(), parse_nsp_label(label)});
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_labels(const std::vector<LabelRecord>& labels, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& l : labels) out << json{{"example_id", l.example_id}, {"label", to_string(l.label)}}.dump() << '\n';
}

std::vector<LabeledFeature> labeled_features(const FeatureStore& store, const std::vector<LabelRecord>& labels) {
  std::vector<LabeledFeature> out;
  out.reserve(labels.size());
  for (const auto& l : labels) {
    const auto* rec = store.find(l.example_id, FeatureKind::SOLO_NSP);
    if (!rec) throw DataError("no SOLO_NSP feature for labeled pair " + l.example_id);
    out.push_back({rec->values, l.label});
  }
  return out;
}

}  // namespace dialrel
