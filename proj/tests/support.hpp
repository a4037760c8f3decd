#pragma once

// Shared fixtures for the test binaries: brute-force oracles and synthetic
// corpora/feature stores with a known sparse relevance direction.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dialrel/corpus.hpp"
#include "dialrel/featurestore.hpp"
#include "dialrel/idkcore.hpp"

namespace testsupport {

// Rank of x[i] = #{x_j < x_i} + (#{x_j == x_i} + 1) / 2, computed pairwise.
std::vector<double> oracle_ranks(const std::vector<double>& x);

// Two-pass sample correlation in long double.
long double oracle_pearson(const std::vector<double>& x, const std::vector<double>& y);

// Random vector of length n in which ceil(tie_fraction * n) entries share
// values with at least one other entry.
std::vector<double> tied_vector(std::size_t n, double tie_fraction, std::uint64_t seed);

struct SparseProblem {
  std::vector<dialrel::TrainingPair> train;
  std::vector<dialrel::TrainingPair> heldout;
  std::vector<std::size_t> support;  // the informative dims
};

// Pairs that share a context vector on every dim and differ only on the k
// dims of a random sign separator: positive = c + s * a/2, negative =
// c - s * a/2, with a jittered per pair.
SparseProblem make_sparse_problem(std::size_t n_train, std::size_t n_heldout, std::size_t dim, std::size_t k,
                                  std::uint64_t seed);

// Ranking accuracy y_pos > y_neg over pairs.
double ranking_accuracy(const dialrel::RelevanceModel& model, const std::vector<dialrel::TrainingPair>& pairs);

struct SyntheticSet {
  dialrel::Corpus corpus;
  dialrel::FeatureStore store;
};

// Two responses per context (human gold first, then a random distractor).
// PAIR_NSP features carry a relevance signal on 7 dims scaled by `signal`;
// ratings follow relevance. Train contexts also get PAIR_NSP_NEG records for
// "i don't know." and a shuffled negative.
SyntheticSet make_synthetic_set(dialrel::Dataset dataset, std::size_t n_train_ctx, std::size_t n_test_ctx,
                                std::uint32_t dim, double signal, std::uint64_t seed);

// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& name);

}  // namespace testsupport

namespace testsupport {

// Largest relative error ||analytic - numeric|| / max(||analytic||, ||numeric||)
// between Objective::evaluate's gradient and central differences, over
// `instances` random (params, batch) draws kept away from kinks.
double max_gradient_error(dialrel::LossKind loss, dialrel::Regularizer reg, std::size_t instances,
                          std::uint64_t seed);

}  // namespace testsupport
