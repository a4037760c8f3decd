#pragma once

// Correlation, significance and cross-run aggregation for metric evaluation.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace dialrel {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr double kSignificanceLevel = 0.01;
inline constexpr std::size_t kMinPermutations = 1000;
inline constexpr std::size_t kDefaultPermutations = 10000;

// Sample Pearson correlation. Needs n >= 3 and nonzero variance in both.
double pearson(std::span<const double> x, std::span<const double> y);

// Ranks 1..n; tied values share the mean of their rank range.
std::vector<double> average_ranks(std::span<const double> x);

// Pearson correlation of the average ranks.
double spearman(std::span<const double> x, std::span<const double> y);

enum class Statistic { spearman, pearson };

// Two-sided permutation p-value (1 + #{|r_perm| >= |r_obs|}) / (n_perm + 1).
// Permutation t is drawn from a stream seeded by derive_seed(seed, tag, t),
// so the result does not depend on evaluation order.
double perm_pvalue(std::span<const double> x, std::span<const double> y, Statistic stat,
                   std::size_t n_perm, std::uint64_t seed);

struct CorrelationReport {
  int schema_version = kReportSchemaVersion;
  std::string metric;
  std::string dataset;
  std::string split;
  std::size_t n = 0;
  double spearman = 0.0;
  double pearson = 0.0;
  double p_spearman = 1.0;
  double p_pearson = 1.0;
  std::size_t runs = 1;
  double spearman_std = 0.0;
  double pearson_std = 0.0;
  std::vector<double> run_p_spearman;
  std::vector<double> run_p_pearson;
  std::string marker_spearman;
  std::string marker_pearson;
};

// '*' when every run is significant, "‡" when only some are, "" otherwise.
std::string significance_marker(std::span<const double> run_pvalues, double level = kSignificanceLevel);

// One run: correlations and permutation p-values of scores against ratings.
CorrelationReport correlate(const std::string& metric, const std::string& dataset, const std::string& split,
                            std::span<const double> scores, std::span<const double> ratings,
                            std::size_t n_perm, std::uint64_t seed);

// Mean and population std over single-run reports sharing one
// (metric, dataset, split) key. The aggregate p is the largest run p.
CorrelationReport aggregate_runs(std::span<const CorrelationReport> reports);

struct SensitivityReport {
  std::string metric;
  std::string best_dataset;
  std::string worst_dataset;
  double best = 0.0;
  double worst = 0.0;
  double ratio = 0.0;  // +inf when worst is 0
};

SensitivityReport sensitivity_ratio(const std::string& metric, const std::map<std::string, double>& per_dataset);

void write_report(const CorrelationReport& report, const std::filesystem::path& path);
CorrelationReport read_report(const std::filesystem::path& path);
std::string report_to_json(const CorrelationReport& report);
CorrelationReport report_from_json(const std::string& text);

}  // namespace dialrel
