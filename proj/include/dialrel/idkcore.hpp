#pragma once

// The IDK relevance head: logistic regression over frozen pair features,
// trained against a negative response (by default the fixed text
// "i don't know.") with an optional weight penalty.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dialrel/baselines.hpp"
#include "dialrel/corpus.hpp"
#include "dialrel/featurestore.hpp"

namespace dialrel {

enum class LossKind { bce_sigmoid, bce_softmax2, triplet_mod };
enum class Regularizer { none, l1, l2 };
enum class NegativeScheme { fixed_text, shuffled };

// Argument order inside the triplet margin term. `published` uses
// max(y_pos - y_neg + m, 0); `swapped` uses max(y_neg - y_pos + m, 0), which
// is flat once positives outrank negatives.
enum class TripletOrientation { published, swapped };

std::string_view to_string(LossKind k);
std::string_view to_string(Regularizer r);
std::string_view to_string(TripletOrientation o);
LossKind parse_loss(std::string_view s);
Regularizer parse_regularizer(std::string_view s);
TripletOrientation parse_triplet_orientation(std::string_view s);

inline constexpr std::string_view kDefaultNegative = "i don't know.";

struct TrainConfig {
  FeatureKind feature_kind = FeatureKind::PAIR_NSP;
  LossKind loss = LossKind::bce_sigmoid;
  Regularizer regularizer = Regularizer::l1;
  double lambda = 1.0;
  NegativeScheme negatives = NegativeScheme::fixed_text;
  std::vector<std::string> negative_texts{std::string(kDefaultNegative)};
  int epochs = 2;
  std::size_t batch_size = 6;
  double learning_rate = 0.001;
  std::uint64_t seed = 0;
  double margin = 0.4;
  TripletOrientation triplet_orientation = TripletOrientation::published;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  // Throws std::invalid_argument on a broken invariant.
  void validate() const;
  // Canonical one-line description of every field.
  std::string fingerprint() const;
};

struct RelevanceModel {
  std::vector<double> weights;
  double bias = 0.0;
  TrainConfig config;

  std::size_t dim() const { return weights.size(); }
};

void write_model(const RelevanceModel& model, const std::filesystem::path& path);
RelevanceModel read_model(const std::filesystem::path& path);

struct TrainingPair {
  std::string context_id;
  std::vector<float> positive;
  std::vector<float> negative;
};

double sigmoid(double z);

// y = sigmoid(w.x + b).
double forward(const RelevanceModel& model, std::span<const float> x);
double forward(const RelevanceModel& model, std::span<const double> x);

// Clamp applied to probabilities before taking logs.
inline constexpr double kProbClamp = 1e-7;

// -ln(y_pos) - ln(1 - y_neg), with y clamped to [1e-7, 1 - 1e-7]. `clamped`
// is set when either input had to be clamped.
double loss_bce(double y_pos, double y_neg, bool* clamped = nullptr);

// -log(1 + m - f_t), f_t = max(y_pos - y_neg + m, 0) (published orientation).
double loss_triplet_mod(double y_pos, double y_neg, double margin,
                        TripletOrientation orientation = TripletOrientation::published);

// l1: lambda * sum |w_i|; l2: lambda * sum w_i^2; none: 0. Bias is never passed in.
double penalty(std::span<const double> weights, Regularizer kind, double lambda);

// Trainable objective: mean pair loss over a batch plus the weight penalty.
//
// Parameter layout: bce_sigmoid and triplet_mod use [w (D), b]; bce_softmax2
// uses two logit rows [w_rel (D), w_irr (D), b_rel, b_irr] whose difference is
// the exported logistic model. The penalty covers every weight, never a bias.
struct Objective {
  LossKind loss = LossKind::bce_sigmoid;
  Regularizer regularizer = Regularizer::none;
  double lambda = 0.0;
  double margin = 0.4;
  TripletOrientation orientation = TripletOrientation::published;
  std::size_t dim = 0;

  static Objective from(const TrainConfig& config, std::size_t dim);
  std::size_t parameter_count() const;

  // Returns the objective; accumulates its gradient into `grad` when
  // non-empty (grad is overwritten, not added to).
  double evaluate(std::span<const double> params, std::span<const TrainingPair* const> batch,
                  std::span<double> grad) const;

  RelevanceModel to_model(std::span<const double> params, const TrainConfig& config) const;
};

struct TrainStats {
  std::size_t steps = 0;
  double final_batch_loss = 0.0;
};

// Adam over seeded-shuffled mini-batches for exactly config.epochs passes.
// Bitwise deterministic in (pairs, config).
RelevanceModel train(std::span<const TrainingPair> pairs, const TrainConfig& config,
                     TrainStats* stats = nullptr);

// Training pairs for every train-split context: the gold response's PAIR_NSP
// record against the context's PAIR_NSP_NEG record for each fixed negative
// text (or its shuffled negative).
std::vector<TrainingPair> make_training_pairs(const Corpus& corpus, const FeatureStore& store,
                                              const TrainConfig& config);

// score = forward(model, PAIR_NSP feature) per example.
ScoreSet score(const RelevanceModel& model, const Corpus& corpus, const FeatureStore& store,
               bool strict = false);

// Min-max affine map onto [lo, hi]. Throws std::invalid_argument on constant input.
std::vector<double> rescale(std::span<const double> scores, double lo, double hi);

struct WeightHistogram {
  double log10_min = 0.0;
  double log10_max = 0.0;
  std::vector<std::size_t> counts;  // equal-width bins over log10 |w|
  std::size_t zero_count = 0;
};

WeightHistogram weight_histogram(const RelevanceModel& model, std::size_t bins);

}  // namespace dialrel
