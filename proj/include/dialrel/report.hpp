#pragma once

// Table rendering for correlation reports.
//
// markdown: metrics as rows, one S and one P column per dataset, cells
//           "<marker><mean>" for single runs and "<marker><mean> (<std>)"
//           for aggregated runs.
// csv:      one row per report with full-precision values (lossless).
// json:     array of report objects.

#include <span>
#include <string>
#include <vector>

#include "dialrel/statlab.hpp"

namespace dialrel {

enum class ReportFormat { markdown, csv, json };

ReportFormat parse_report_format(std::string_view s);

std::string render_report(std::span<const CorrelationReport> reports, ReportFormat format);

// Inverse of the csv rendering.
std::vector<CorrelationReport> parse_report_csv(const std::string& csv);

// Two decimals; negative zero prints as 0.00.
std::string format_cell(double value);

}  // namespace dialrel
