#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dialrel/baselines.hpp"
#include "dialrel/corpus.hpp"
#include "dialrel/idkcore.hpp"
#include "dialrel/statlab.hpp"

namespace dialrel {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

// Entry point of the relcli tool; args exclude the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Correlates scores with mean human ratings over the corpus examples of
// `split` (all splits when empty) that have a score.
CorrelationReport evaluate_scores(const Corpus& corpus, const std::vector<ScoredExample>& scores,
                                  const std::string& metric, std::optional<Split> split,
                                  std::size_t n_perm, std::uint64_t seed);

struct NamedData {
  std::string name;
  std::filesystem::path corpus;
  std::filesystem::path features;
};

struct AblationSpec {
  std::string grid = "table4";  // table4: bce only; full: bce and triplet
  std::vector<NamedData> train_sets;
  std::vector<NamedData> eval_sets;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::optional<Split> eval_split = Split::test;
  std::size_t n_perm = kDefaultPermutations;
  TrainConfig base;  // loss, regularizer and negatives are overridden per cell
};

struct AblationCell {
  std::string name;
  std::string train_set;
  Regularizer regularizer = Regularizer::l1;
  NegativeScheme negatives = NegativeScheme::fixed_text;
  LossKind loss = LossKind::bce_sigmoid;
};

std::vector<AblationCell> expand_grid(const AblationSpec& spec);

struct AblationResult {
  std::vector<AblationCell> cells;
  std::vector<CorrelationReport> aggregated;  // one per (cell, eval set)
  std::size_t models_trained = 0;
};

// Trains every cell for every seed, scores every eval set and writes
//   out/models/<cell>_seed<s>.json
//   out/runs/<cell>_seed<s>__<eval>.json
//   out/reports/<cell>__<eval>.json
//   out/table.md, out/table.csv, out/run.json
AblationResult run_ablation(const AblationSpec& spec, const std::filesystem::path& out_dir);

}  // namespace dialrel
