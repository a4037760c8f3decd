#include <gtest/gtest.h>

#include "dialrel/report.hpp"
#include "dialrel/statlab.hpp"

using namespace dialrel;

namespace {

CorrelationReport make(const std::string& metric, const std::string& dataset, double s, double p, double pv,
                       std::size_t runs = 1, double std = 0.0) {
  CorrelationReport r;
  r.metric = metric;
  r.dataset = dataset;
  r.split = "test";
  r.n = 100;
  r.spearman = s;
  r.pearson = p;
  r.p_spearman = r.p_pearson = pv;
  r.runs = runs;
  r.spearman_std = r.pearson_std = std;
  r.run_p_spearman.assign(runs, pv);
  r.run_p_pearson.assign(runs, pv);
  r.marker_spearman = r.marker_pearson = significance_marker(r.run_p_spearman);
  return r;
}

}  // namespace

TEST(Markdown, OneMetricOneDataset) {
  const std::vector<CorrelationReport> reps{make("IDK", "HUMOD", 0.58, 0.57, 0.0001)};
  const auto md = render_report(reps, ReportFormat::markdown);
  EXPECT_NE(md.find("| Metric | HUMOD S | HUMOD P |"), std::string::npos) << md;
  EXPECT_NE(md.find("| IDK | *0.58 | *0.57 |"), std::string::npos) << md;
}

TEST(Markdown, AggregatedCellShowsStd) {
  const std::vector<CorrelationReport> reps{make("IDK", "HUMOD", 0.58, 0.58, 0.0001, 3, 0.0)};
  const auto md = render_report(reps, ReportFormat::markdown);
  EXPECT_NE(md.find("*0.58 (0.00)"), std::string::npos) << md;
}

TEST(Markdown, MetricsAsRowsDatasetsAsColumns) {
  const std::vector<CorrelationReport> reps{make("A", "HUMOD", 0.1, 0.2, 0.5), make("A", "P_DD", 0.3, 0.4, 0.5),
                                            make("B", "HUMOD", 0.5, 0.6, 0.5)};
  const auto md = render_report(reps, ReportFormat::markdown);
  EXPECT_NE(md.find("| Metric | HUMOD S | HUMOD P | P_DD S | P_DD P |"), std::string::npos) << md;
  EXPECT_NE(md.find("| A | 0.10 | 0.20 | 0.30 | 0.40 |"), std::string::npos) << md;
  EXPECT_NE(md.find("| B | 0.50 | 0.60 |  |  |"), std::string::npos) << md;
}

TEST(Csv, RoundTripIsLossless) {
  auto a = make("IDK", "HUMOD", 0.123456789012345, -0.98765432109876, 0.0049, 3, 0.0123456789);
  a.run_p_spearman = {0.001, 0.02, 0.0049};
  a.marker_spearman = significance_marker(a.run_p_spearman);
  const std::vector<CorrelationReport> reps{a, make("COS-FT", "P_DD", -0.02, 0.1, 0.7)};
  const auto back = parse_report_csv(render_report(reps, ReportFormat::csv));
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].metric, reps[i].metric);
    EXPECT_EQ(back[i].dataset, reps[i].dataset);
    EXPECT_EQ(back[i].spearman, reps[i].spearman);
    EXPECT_EQ(back[i].pearson, reps[i].pearson);
    EXPECT_EQ(back[i].spearman_std, reps[i].spearman_std);
    EXPECT_EQ(back[i].p_spearman, reps[i].p_spearman);
    EXPECT_EQ(back[i].marker_spearman, reps[i].marker_spearman);
    EXPECT_EQ(back[i].runs, reps[i].runs);
  }
}

TEST(Render, MixedSchemaVersionsRejected) {
  auto b = make("B", "HUMOD", 0.5, 0.6, 0.5);
  b.schema_version = 2;
  const std::vector<CorrelationReport> reps{make("A", "HUMOD", 0.1, 0.2, 0.5), b};
  EXPECT_THROW(render_report(reps, ReportFormat::markdown), std::invalid_argument);
}

TEST(Format, TwoDecimals) {
  EXPECT_EQ(format_cell(0.575), "0.57");
  EXPECT_EQ(format_cell(-0.06), "-0.06");
  EXPECT_EQ(format_cell(-0.0001), "0.00");
}
