#include "anmd/report.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "anmd/errors.hpp"

namespace anmd {

namespace fs = std::filesystem;

std::string CsvTable::header_value(const std::string& key, const std::string& fallback) const {
  for (const auto& [k, v] : header)
    if (k == key) return v;
  return fallback;
}

int CsvTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return static_cast<int>(i);
  return -1;
}

void write_csv(std::ostream& out, const CsvTable& table) {
  for (const auto& [k, v] : table.header) out << "# " << k << "=" << v << "\n";
  for (std::size_t i = 0; i < table.columns.size(); ++i)
    out << table.columns[i] << (i + 1 < table.columns.size() ? "," : "");
  out << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      out << row[i] << (i + 1 < row.size() ? "," : "");
    out << "\n";
  }
}

void save_csv(const std::string& path, const CsvTable& table) {
  std::ofstream out(path);
  if (!out) throw Error("save_csv: cannot open " + path);
  write_csv(out, table);
  if (!out) throw Error("save_csv: write failed for " + path);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  cells.push_back(cur);
  return cells;
}

}  // namespace

CsvTable load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("load_csv: cannot open " + path);
  CsvTable table;
  std::string line;
  bool saw_columns = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string body = line.substr(1);
      while (!body.empty() && body.front() == ' ') body.erase(body.begin());
      const auto eq = body.find('=');
      if (eq != std::string::npos)
        table.header.emplace_back(body.substr(0, eq), body.substr(eq + 1));
      continue;
    }
    if (!saw_columns) {
      table.columns = split_csv_line(line);
      saw_columns = true;
      continue;
    }
    table.rows.push_back(split_csv_line(line));
  }
  return table;
}

namespace {

// sigma -> accuracy string, from rows whose seed cell is "mean".
std::map<std::string, std::string> mean_rows(const CsvTable& t) {
  std::map<std::string, std::string> out;
  const int c_sigma = t.column_index("sigma_pct");
  const int c_seed = t.column_index("seed");
  const int c_acc = t.column_index("accuracy_pct");
  if (c_sigma < 0 || c_seed < 0 || c_acc < 0) return out;
  for (const auto& row : t.rows) {
    if (row.size() <= static_cast<std::size_t>(std::max({c_sigma, c_seed, c_acc}))) continue;
    if (row[static_cast<std::size_t>(c_seed)] == "mean")
      out[row[static_cast<std::size_t>(c_sigma)]] = row[static_cast<std::size_t>(c_acc)];
  }
  return out;
}

std::string plan_header_value(const std::string& path, const std::string& key) {
  std::ifstream in(path);
  if (!in) return "";
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] != '#') continue;
    std::istringstream is(line.substr(1));
    std::string tok;
    while (is >> tok) {
      const auto eq = tok.find('=');
      if (eq != std::string::npos && tok.substr(0, eq) == key) return tok.substr(eq + 1);
    }
  }
  return "";
}

void append_aligned(std::ostringstream& os, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths;
  for (const auto& row : rows) {
    if (widths.size() < row.size()) widths.resize(row.size(), 0);
    for (std::size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], row[i].size());
  }
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      os << row[i];
      if (i + 1 < row.size()) os << std::string(widths[i] - row[i].size() + 2, ' ');
    }
    os << "\n";
  }
}

}  // namespace

ReportOutput render_report(const std::string& dir) {
  const fs::path base(dir);
  const fs::path f_baseline = base / "baseline_eval.csv";
  const fs::path f_noisy = base / "noisy_eval.csv";
  const fs::path f_denoised = base / "denoised_eval.csv";
  const fs::path f_plan = base / "plan.txt";
  const fs::path f_layers = base / "cycles_by_layer.csv";
  const fs::path f_cycles_summary = base / "cycles_summary.csv";

  const bool any = fs::exists(f_baseline) || fs::exists(f_noisy) || fs::exists(f_denoised) ||
                   fs::exists(f_plan) || fs::exists(f_layers);
  if (!any)
    throw Error("report: no inputs under " + dir +
                " (expected baseline_eval.csv / noisy_eval.csv / denoised_eval.csv / plan.txt / "
                "cycles_by_layer.csv)");

  ReportOutput out;
  std::ostringstream text;

  std::string arch = "model";
  std::map<std::string, std::string> base_acc, noisy_acc, den_acc;
  if (fs::exists(f_baseline)) {
    CsvTable t = load_csv(f_baseline.string());
    arch = t.header_value("model", arch);
    base_acc = mean_rows(t);
  }
  if (fs::exists(f_noisy)) {
    CsvTable t = load_csv(f_noisy.string());
    arch = t.header_value("model", arch);
    noisy_acc = mean_rows(t);
  }
  if (fs::exists(f_denoised)) den_acc = mean_rows(load_csv(f_denoised.string()));

  const std::string overhead =
      fs::exists(f_plan) ? plan_header_value(f_plan.string(), "overhead_pct") : "";

  out.summary.columns = {"architecture", "sigma_pct",          "baseline_acc_pct",
                         "noisy_acc_pct", "denoised_acc_pct",  "param_overhead_pct"};
  // Baseline accuracy is the sigma=0 entry when present, else the only entry.
  std::string baseline_value;
  if (auto it = base_acc.find("0"); it != base_acc.end()) baseline_value = it->second;
  else if (!base_acc.empty()) baseline_value = base_acc.begin()->second;

  std::vector<std::string> sigmas;
  for (const auto& [s, v] : noisy_acc)
    if (s != "0") sigmas.push_back(s);
  std::sort(sigmas.begin(), sigmas.end(),
            [](const std::string& a, const std::string& b) { return std::stod(a) < std::stod(b); });
  if (sigmas.empty() && !noisy_acc.empty()) sigmas.push_back(noisy_acc.begin()->first);

  if (sigmas.empty() && (baseline_value.empty() == false || !overhead.empty())) {
    out.summary.rows.push_back({arch, "", baseline_value, "", "", overhead});
  }
  for (const std::string& s : sigmas) {
    const auto nz = noisy_acc.find(s);
    const auto dn = den_acc.find(s);
    out.summary.rows.push_back({arch, s, baseline_value,
                                nz != noisy_acc.end() ? nz->second : "",
                                dn != den_acc.end() ? dn->second : "", overhead});
  }

  if (!out.summary.rows.empty()) {
    text << "Accuracy and parameter overhead\n";
    std::vector<std::vector<std::string>> rows;
    rows.push_back(out.summary.columns);
    for (const auto& r : out.summary.rows) rows.push_back(r);
    append_aligned(text, rows);
    text << "\n";
  }

  if (fs::exists(f_layers)) {
    out.layer_cycles = load_csv(f_layers.string());
    text << "Per-layer cycle counts\n";
    std::vector<std::vector<std::string>> rows;
    rows.push_back(out.layer_cycles.columns);
    for (const auto& r : out.layer_cycles.rows) rows.push_back(r);
    append_aligned(text, rows);
    text << "\n";
  }

  if (fs::exists(f_cycles_summary)) {
    CsvTable t = load_csv(f_cycles_summary.string());
    text << "Cycle totals\n";
    std::vector<std::vector<std::string>> rows;
    rows.push_back(t.columns);
    for (const auto& r : t.rows) rows.push_back(r);
    append_aligned(text, rows);
  }

  out.text = text.str();
  return out;
}

}  // namespace anmd
