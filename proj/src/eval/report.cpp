#include "wafer/eval/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "wafer/errors.hpp"

namespace fs = std::filesystem;

namespace wafer::eval {

namespace {

std::string full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string metric_csv(const std::optional<double>& v) { return v ? full(*v) : "n/a"; }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += (c == '\n' || c == '\r') ? ' ' : c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  return out;
}

}  // namespace

std::string round3_half_even(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  // glibc prints the exact binary value, so ties are detected exactly
  char buf[512];
  std::snprintf(buf, sizeof buf, "%.60f", std::fabs(v));
  std::string s = buf;
  const auto dot = s.find('.');
  std::string intpart = s.substr(0, dot);
  std::string frac = s.substr(dot + 1);
  std::string keep = frac.substr(0, 3);
  const std::string rest = frac.substr(3);
  bool up = false;
  if (rest[0] > '5') {
    up = true;
  } else if (rest[0] == '5') {
    const bool tail_nonzero = rest.find_first_not_of('0', 1) != std::string::npos;
    up = tail_nonzero || ((keep.back() - '0') % 2 == 1);
  }
  std::string digits = intpart + keep;
  if (up) {
    int i = static_cast<int>(digits.size()) - 1;
    while (i >= 0 && digits[static_cast<std::size_t>(i)] == '9') digits[static_cast<std::size_t>(i--)] = '0';
    if (i < 0) {
      digits.insert(digits.begin(), '1');
    } else {
      ++digits[static_cast<std::size_t>(i)];
    }
  }
  std::string out = digits.substr(0, digits.size() - 3) + "." + digits.substr(digits.size() - 3);
  const bool zero = out.find_first_not_of("0.") == std::string::npos;
  return (v < 0 && !zero ? "-" : "") + out;
}

std::string row_label(int experiment_id, int classes) {
  const char* suffix = classes == 3 ? "a" : classes == 5 ? "b" : classes == 8 ? "c" : "";
  return std::to_string(experiment_id) + suffix;
}

std::string render_markdown(const std::vector<ResultsRow>& rows) {
  const std::vector<std::string> head{"ID",       "Arch",   "Classes", "Seed",       "Precision",    "Recall",
                                      "F1",       "Accuracy", "Params", "Size (MB)", "Latency (ms)", "Error"};
  std::vector<std::vector<std::string>> table;
  auto metric = [](const std::optional<double>& v) { return v ? round3_half_even(*v) : std::string("n/a"); };
  for (const auto& r : rows) {
    char size[32], lat[32];
    std::snprintf(size, sizeof size, "%.2f", r.size_mb);
    std::snprintf(lat, sizeof lat, "%.2f", r.latency_ms);
    std::string err = r.error;
    std::replace(err.begin(), err.end(), '|', '/');
    table.push_back({row_label(r.experiment_id, r.classes), r.arch, std::to_string(r.classes), std::to_string(r.seed),
                     metric(r.precision), metric(r.recall), metric(r.f1), metric(r.accuracy),
                     std::to_string(r.params), size, lat, err});
  }
  std::vector<std::size_t> width(head.size());
  for (std::size_t c = 0; c < head.size(); ++c) {
    width[c] = head[c].size();
    for (const auto& row : table) width[c] = std::max(width[c], row[c].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string s = "|";
    for (std::size_t c = 0; c < cells.size(); ++c) {
      s += " " + cells[c] + std::string(width[c] - cells[c].size(), ' ') + " |";
    }
    return s + "\n";
  };
  std::string out = line(head);
  std::string sep = "|";
  for (std::size_t c = 0; c < head.size(); ++c) sep += std::string(width[c] + 2, '-') + "|";
  out += sep + "\n";
  for (const auto& row : table) out += line(row);
  out += "\nMetrics are support-weighted averages over the test split, rounded half-even to 3 decimals.\n"
         "Size is the serialized weight file in MB (1 MB = 10^6 bytes). Latency is the median batch-1 forward time.\n";
  return out;
}

void emit_report(const std::vector<ResultsRow>& rows, const fs::path& out_dir) {
  if (rows.empty()) throw ConfigError("emit_report needs at least one row");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw FileError("cannot create " + out_dir.string() + ": " + ec.message());

  const fs::path csv_path = out_dir / "results.csv";
  std::ofstream csv(csv_path, std::ios::binary | std::ios::trunc);
  if (!csv) throw FileError("cannot write " + csv_path.string());
  csv << kResultsHeader << '\n';
  for (const auto& r : rows) {
    csv << r.experiment_id << ',' << csv_field(r.arch) << ',' << r.classes << ',' << r.seed << ','
        << metric_csv(r.precision) << ',' << metric_csv(r.recall) << ',' << metric_csv(r.f1) << ','
        << metric_csv(r.accuracy) << ',' << r.params << ',' << full(r.size_mb) << ',' << full(r.latency_ms) << ','
        << csv_field(r.error) << '\n';
  }
  if (!csv.flush()) throw FileError("write failed for " + csv_path.string());

  const fs::path md_path = out_dir / "results.md";
  std::ofstream md(md_path, std::ios::binary | std::ios::trunc);
  if (!md) throw FileError("cannot write " + md_path.string());
  md << render_markdown(rows);
  if (!md.flush()) throw FileError("write failed for " + md_path.string());
}

std::vector<ResultsRow> read_results_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open " + path.string());
  std::vector<ResultsRow> rows;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != kResultsHeader) fail("unexpected header");
      continue;
    }
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 12) fail("expected 12 fields, got " + std::to_string(f.size()));
    ResultsRow r;
    try {
      auto metric = [](const std::string& s) -> std::optional<double> {
        if (s == "n/a") return std::nullopt;
        return std::stod(s);
      };
      r.experiment_id = std::stoi(f[0]);
      r.arch = f[1];
      r.classes = std::stoi(f[2]);
      r.seed = std::stoull(f[3]);
      r.precision = metric(f[4]);
      r.recall = metric(f[5]);
      r.f1 = metric(f[6]);
      r.accuracy = metric(f[7]);
      r.params = std::stoull(f[8]);
      r.size_mb = std::stod(f[9]);
      r.latency_ms = std::stod(f[10]);
      r.error = f[11];
    } catch (const std::logic_error&) {
      fail("malformed numeric field");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace wafer::eval
