#pragma once

// Masking probe: keep only the k feature dimensions the relevance head weighs
// most and measure next-sentence-prediction accuracy of the frozen NSP head.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dialrel/featurestore.hpp"
#include "dialrel/idkcore.hpp"

namespace dialrel {

enum class NspLabel { is_next, not_next };

std::string_view to_string(NspLabel l);
NspLabel parse_nsp_label(std::string_view s);

using FeatureMask = std::vector<bool>;

// True on the k dims with the largest |w_i|; equal magnitudes prefer the
// lower index.
FeatureMask top_k_mask(const RelevanceModel& model, std::size_t k);

// Argmax of head . (mask ? feature : 0) + bias; a tie predicts is_next.
NspLabel nsp_predict(const NspHead& head, std::span<const float> feature,
                     const std::optional<FeatureMask>& mask = std::nullopt);

struct LabeledFeature {
  std::span<const float> feature;
  NspLabel gold = NspLabel::is_next;
};

double nsp_accuracy(const NspHead& head, std::span<const LabeledFeature> pairs,
                    const std::optional<FeatureMask>& mask = std::nullopt);

struct LabelRecord {
  std::string example_id;
  NspLabel label = NspLabel::is_next;
};

// Sidecar JSON-lines {example_id, label}; label is "is_next"/"not_next" or
// 0/1 (0 = is_next).
std::vector<LabelRecord> read_labels(const std::filesystem::path& path);
void write_labels(const std::vector<LabelRecord>& labels, const std::filesystem::path& path);

// Joins SOLO_NSP records with their labels. Every label must have a feature.
std::vector<LabeledFeature> labeled_features(const FeatureStore& store, const std::vector<LabelRecord>& labels);

}  // namespace dialrel
