#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace anmd {

// Lightweight CSV with "# key=value" comment headers; the on-disk shape of
// every metrics artifact.
struct CsvTable {
  std::vector<std::pair<std::string, std::string>> header;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::string header_value(const std::string& key, const std::string& fallback = "") const;
  int column_index(const std::string& name) const;  // -1 when absent
};

void write_csv(std::ostream& out, const CsvTable& table);
void save_csv(const std::string& path, const CsvTable& table);
CsvTable load_csv(const std::string& path);

// Formats the artifacts found in an output directory (eval CSVs, plan,
// cycle rollups) into one accuracy/overhead table plus a per-layer cycle
// table. Pure formatting: cells are echoed verbatim from the inputs.
struct ReportOutput {
  std::string text;      // human-readable rendering
  CsvTable summary;      // architecture, sigma, baseline/noisy/denoised, overhead
  CsvTable layer_cycles; // echoed per-layer cycle rollup, when present
};

ReportOutput render_report(const std::string& dir);

}  // namespace anmd
