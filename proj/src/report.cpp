#include "dialrel/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "dialrel/errors.hpp"

namespace dialrel {

namespace {

constexpr const char* kCsvHeader =
    "metric,dataset,split,n,runs,spearman,spearman_std,p_spearman,marker_spearman,"
    "pearson,pearson_std,p_pearson,marker_pearson";

std::string full(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

std::string cell(double mean, double std, std::size_t runs, const std::string& marker) {
  std::string s = marker + format_cell(mean);
  if (runs > 1) s += " (" + format_cell(std) + ")";
  return s;
}

}  // namespace

ReportFormat parse_report_format(std::string_view s) {
  if (s == "markdown" || s == "md") return ReportFormat::markdown;
  if (s == "csv") return ReportFormat::csv;
  if (s == "json") return ReportFormat::json;
  throw std::invalid_argument("unknown report format: " + std::string(s));
}

std::string format_cell(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", value);
  std::string s = buf;
  if (s == "-0.00") s = "0.00";
  return s;
}

std::string render_report(std::span<const CorrelationReport> reports, ReportFormat format) {
  for (const auto& r : reports) {
    if (r.schema_version != reports.front().schema_version) {
      throw std::invalid_argument("reports mix schema versions");
    }
  }
  std::ostringstream out;
  switch (format) {
    case ReportFormat::json: {
      auto arr = nlohmann::json::array();
      for (const auto& r : reports) arr.push_back(nlohmann::json::parse(report_to_json(r)));
      out << arr.dump(2) << '\n';
      break;
    }
    case ReportFormat::csv:
      out << kCsvHeader << '\n';
      for (const auto& r : reports) {
        out << csv_field(r.metric) << ',' << csv_field(r.dataset) << ',' << csv_field(r.split) << ','
            << r.n << ',' << r.runs << ',' << full(r.spearman) << ',' << full(r.spearman_std) << ','
            << full(r.p_spearman) << ',' << csv_field(r.marker_spearman) << ',' << full(r.pearson) << ','
            << full(r.pearson_std) << ',' << full(r.p_pearson) << ',' << csv_field(r.marker_pearson) << '\n';
      }
      break;
    case ReportFormat::markdown: {
      bool one_split = std::all_of(reports.begin(), reports.end(),
                                   [&](const auto& r) { return r.split == reports.front().split; });
      auto column = [&](const CorrelationReport& r) { return one_split ? r.dataset : r.dataset + "/" + r.split; };
      std::vector<std::string> columns, rows;
      std::map<std::pair<std::string, std::string>, const CorrelationReport*> grid;
      for (const auto& r : reports) {
        const auto c = column(r);
        if (std::find(columns.begin(), columns.end(), c) == columns.end()) columns.push_back(c);
        if (std::find(rows.begin(), rows.end(), r.metric) == rows.end()) rows.push_back(r.metric);
        if (!grid.emplace(std::make_pair(r.metric, c), &r).second) {
          throw std::invalid_argument("two reports for " + r.metric + " on " + c);
        }
      }
      out << "| Metric |";
      for (const auto& c : columns) out << ' ' << c << " S | " << c << " P |";
      out << "\n|---|";
      for (std::size_t i = 0; i < columns.size(); ++i) out << "---:|---:|";
      out << '\n';
      for (const auto& m : rows) {
        out << "| " << m << " |";
        for (const auto& c : columns) {
          auto it = grid.find({m, c});
          if (it == grid.end()) {
            out << "  |  |";
            continue;
          }
          const auto& r = *it->second;
          out << ' ' << cell(r.spearman, r.spearman_std, r.runs, r.marker_spearman) << " | "
              << cell(r.pearson, r.pearson_std, r.runs, r.marker_pearson) << " |";
        }
        out << '\n';
      }
      break;
    }
  }
  return out.str();
}

std::vector<CorrelationReport> parse_report_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw DataError("not a report CSV (bad header)");
  std::vector<CorrelationReport> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = csv_split(line);
    if (f.size() != 13) throw DataError("report CSV row has " + std::to_string(f.size()) + " fields");
    CorrelationReport r;
    r.metric = f[0];
    r.dataset = f[1];
    r.split = f[2];
    r.n = std::stoul(f[3]);
    r.runs = std::stoul(f[4]);
    r.spearman = std::stod(f[5]);
    r.spearman_std = std::stod(f[6]);
    r.p_spearman = std::stod(f[7]);
    r.marker_spearman = f[8];
    r.pearson = std::stod(f[9]);
    r.pearson_std = std::stod(f[10]);
    r.p_pearson = std::stod(f[11]);
    r.marker_pearson = f[12];
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace dialrel
