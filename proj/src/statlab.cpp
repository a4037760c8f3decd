#include "dialrel/statlab.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "dialrel/errors.hpp"
#include "dialrel/rng.hpp"

namespace dialrel {

using nlohmann::json;

namespace {

void check_pair(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("correlation inputs differ in length");
  if (x.size() < 3) throw std::invalid_argument("correlation needs at least 3 points");
}

// Centers `v` in place and returns its sum of squares.
double center(std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double& a : v) {
    a -= mean;
    ss += a * a;
  }
  return ss;
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double pop_std(std::span<const double> v) {
  const double m = mean_of(v);
  double ss = 0.0;
  for (double a : v) ss += (a - m) * (a - m);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

}  // namespace

double pearson(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  std::vector<double> xc(x.begin(), x.end()), yc(y.begin(), y.end());
  const double sxx = center(xc), syy = center(yc);
  if (sxx == 0.0 || syy == 0.0) throw std::domain_error("correlation undefined for zero variance");
  double sxy = 0.0;
  for (std::size_t i = 0; i < xc.size(); ++i) sxy += xc[i] * yc[i];
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    // Positions i..j (0-based) hold ranks i+1..j+1.
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  const auto rx = average_ranks(x), ry = average_ranks(y);
  return pearson(rx, ry);
}

double perm_pvalue(std::span<const double> x, std::span<const double> y, Statistic stat,
                   std::size_t n_perm, std::uint64_t seed) {
  if (n_perm < kMinPermutations) {
    throw std::invalid_argument("permutation test needs at least " + std::to_string(kMinPermutations) +
                                " permutations, got " + std::to_string(n_perm));
  }
  check_pair(x, y);
  std::vector<double> a, b;
  if (stat == Statistic::spearman) {
    a = average_ranks(x);
    b = average_ranks(y);
  } else {
    a.assign(x.begin(), x.end());
    b.assign(y.begin(), y.end());
  }
  // Always permute the lexicographically larger vector so that swapping the
  // arguments reproduces the same p-value.
  if (std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end())) std::swap(a, b);

  const double saa = center(a), sbb = center(b);
  if (saa == 0.0 || sbb == 0.0) throw std::domain_error("correlation undefined for zero variance");
  const double norm = std::sqrt(saa * sbb);

  const std::size_t n = a.size();
  std::vector<std::size_t> perm(n);
  auto stat_for = [&](const std::vector<std::size_t>& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[p[i]];
    return std::abs(s / norm);
  };

  std::iota(perm.begin(), perm.end(), std::size_t{0});
  const double observed = stat_for(perm);
  // Tolerance absorbs summation-order rounding between equal statistics.
  const double threshold = observed - 1e-12 * std::max(1.0, observed);

  std::size_t extreme = 0;
  for (std::size_t t = 0; t < n_perm; ++t) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    SplitMix64 stream(derive_seed(seed, "statlab.perm_pvalue", t));
    fisher_yates(std::span<std::size_t>(perm), stream);
    if (stat_for(perm) >= threshold) ++extreme;
  }
  return static_cast<double>(1 + extreme) / static_cast<double>(n_perm + 1);
}

std::string significance_marker(std::span<const double> run_pvalues, double level) {
  if (run_pvalues.empty()) return "";
  const auto sig = std::count_if(run_pvalues.begin(), run_pvalues.end(), [&](double p) { return p < level; });
  if (sig == static_cast<std::ptrdiff_t>(run_pvalues.size())) return "*";
  if (sig > 0) return "‡";
  return "";
}

CorrelationReport correlate(const std::string& metric, const std::string& dataset, const std::string& split,
                            std::span<const double> scores, std::span<const double> ratings,
                            std::size_t n_perm, std::uint64_t seed) {
  CorrelationReport r;
  r.metric = metric;
  r.dataset = dataset;
  r.split = split;
  r.n = scores.size();
  r.spearman = spearman(scores, ratings);
  r.pearson = pearson(scores, ratings);
  r.p_spearman = perm_pvalue(scores, ratings, Statistic::spearman, n_perm, derive_seed(seed, "spearman"));
  r.p_pearson = perm_pvalue(scores, ratings, Statistic::pearson, n_perm, derive_seed(seed, "pearson"));
  r.runs = 1;
  r.run_p_spearman = {r.p_spearman};
  r.run_p_pearson = {r.p_pearson};
  r.marker_spearman = significance_marker(r.run_p_spearman);
  r.marker_pearson = significance_marker(r.run_p_pearson);
  return r;
}

CorrelationReport aggregate_runs(std::span<const CorrelationReport> reports) {
  if (reports.empty()) throw std::invalid_argument("no reports to aggregate");
  const auto& first = reports.front();
  std::vector<double> s, p;
  CorrelationReport out;
  out.metric = first.metric;
  out.dataset = first.dataset;
  out.split = first.split;
  out.n = first.n;
  for (const auto& r : reports) {
    if (r.metric != first.metric || r.dataset != first.dataset || r.split != first.split) {
      throw std::invalid_argument("cannot aggregate mixed keys: (" + first.metric + ", " + first.dataset +
                                  ", " + first.split + ") vs (" + r.metric + ", " + r.dataset + ", " +
                                  r.split + ")");
    }
    if (r.schema_version != kReportSchemaVersion) throw std::invalid_argument("mixed report schema versions");
    if (r.runs != 1) throw std::invalid_argument("aggregate_runs expects single-run reports");
    s.push_back(r.spearman);
    p.push_back(r.pearson);
    out.run_p_spearman.push_back(r.p_spearman);
    out.run_p_pearson.push_back(r.p_pearson);
  }
  out.runs = reports.size();
  out.spearman = mean_of(s);
  out.pearson = mean_of(p);
  out.spearman_std = pop_std(s);
  out.pearson_std = pop_std(p);
  out.p_spearman = *std::max_element(out.run_p_spearman.begin(), out.run_p_spearman.end());
  out.p_pearson = *std::max_element(out.run_p_pearson.begin(), out.run_p_pearson.end());
  out.marker_spearman = significance_marker(out.run_p_spearman);
  out.marker_pearson = significance_marker(out.run_p_pearson);
  return out;
}

SensitivityReport sensitivity_ratio(const std::string& metric, const std::map<std::string, double>& per_dataset) {
  if (per_dataset.size() < 2) throw std::invalid_argument("sensitivity ratio needs at least 2 datasets");
  SensitivityReport r;
  r.metric = metric;
  auto best = per_dataset.begin(), worst = per_dataset.begin();
  for (auto it = per_dataset.begin(); it != per_dataset.end(); ++it) {
    if (it->second > best->second) best = it;
    if (it->second < worst->second) worst = it;
  }
  r.best_dataset = best->first;
  r.worst_dataset = worst->first;
  r.best = best->second;
  r.worst = worst->second;
  r.ratio = r.worst == 0.0 ? std::numeric_limits<double>::infinity() : r.best / r.worst;
  return r;
}

std::string report_to_json(const CorrelationReport& r) {
  return json{{"schema_version", r.schema_version},
              {"metric", r.metric},
              {"dataset", r.dataset},
              {"split", r.split},
              {"n", r.n},
              {"spearman", r.spearman},
              {"pearson", r.pearson},
              {"p_spearman", r.p_spearman},
              {"p_pearson", r.p_pearson},
              {"runs", r.runs},
              {"spearman_std", r.spearman_std},
              {"pearson_std", r.pearson_std},
              {"run_p_spearman", r.run_p_spearman},
              {"run_p_pearson", r.run_p_pearson},
              {"marker_spearman", r.marker_spearman},
              {"marker_pearson", r.marker_pearson}}
      .dump();
}

CorrelationReport report_from_json(const std::string& text) {
  try {
    const auto j = json::parse(text);
    CorrelationReport r;
    r.schema_version = j.at("schema_version").get<int>();
    r.metric = j.at("metric").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.split = j.at("split").get<std::string>();
    r.n = j.at("n").get<std::size_t>();
    r.spearman = j.at("spearman").get<double>();
    r.pearson = j.at("pearson").get<double>();
    r.p_spearman = j.at("p_spearman").get<double>();
    r.p_pearson = j.at("p_pearson").get<double>();
    r.runs = j.at("runs").get<std::size_t>();
    r.spearman_std = j.value("spearman_std", 0.0);
    r.pearson_std = j.value("pearson_std", 0.0);
    r.run_p_spearman = j.value("run_p_spearman", std::vector<double>{r.p_spearman});
    r.run_p_pearson = j.value("run_p_pearson", std::vector<double>{r.p_pearson});
    r.marker_spearman = j.value("marker_spearman", significance_marker(r.run_p_spearman));
    r.marker_pearson = j.value("marker_pearson", significance_marker(r.run_p_pearson));
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed correlation report: ") + e.what());
  }
}

void write_report(const CorrelationReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << report_to_json(report) << '\n';
}

CorrelationReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open report " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return report_from_json(buf.str());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace dialrel
