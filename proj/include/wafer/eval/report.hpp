#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace wafer::eval {

/// One experiment outcome. Metrics are absent for bench-only rows and failed
/// runs; `error` is non-empty for failed runs.
struct ResultsRow {
  int experiment_id = 0;
  std::string arch;
  int classes = 0;
  std::uint64_t seed = 0;
  std::optional<double> precision, recall, f1, accuracy;
  std::size_t params = 0;
  double size_mb = 0;
  double latency_ms = 0;
  std::string error;
};

inline constexpr const char* kResultsHeader =
    "experiment_id,arch,classes,seed,precision,recall,f1,accuracy,params,size_mb,latency_ms,error";

/// Rounds to 3 decimals, ties to even, on the exact binary value ("0.062" for 0.0625).
std::string round3_half_even(double v);

/// Row label in the style "0a"/"0b"/"0c" for the 3/5/8-class tasks.
std::string row_label(int experiment_id, int classes);

/// Writes results.csv (full precision, "n/a" for absent metrics) and
/// results.md (aligned table, 3-decimal metrics). Throws ConfigError for no
/// rows and FileError on IO failure.
void emit_report(const std::vector<ResultsRow>& rows, const std::filesystem::path& out_dir);

/// Parses a results.csv written by emit_report. Throws ParseError (with line) on malformed input.
std::vector<ResultsRow> read_results_csv(const std::filesystem::path& path);

/// Markdown rendering of rows, as written to results.md.
std::string render_markdown(const std::vector<ResultsRow>& rows);

}  // namespace wafer::eval
