#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace s2l::runner {

// One metric value for one (task, method, repeat) cell. `value` is empty when
// the metric is undefined (e.g. Pearson on a constant vector).
struct ScoreRow {
  std::string task_id;
  std::string method;
  std::string metric;
  std::optional<double> value;
  std::size_t n = 0;
  int repeat_index = 0;
};

struct CellSummary {
  std::string task_id;
  std::string method;
  int repeat_index = 0;
  std::size_t sample_size = 0;
  std::size_t scored = 0;
  std::size_t extraction_missed = 0;
  std::size_t errored = 0;
  std::string error;  // first error message, empty when the cell succeeded

  bool failed() const { return errored > 0 || !error.empty(); }
};

// Mean over repeats of `method` minus the zero-shot mean, same task and metric.
struct Delta {
  std::string task_id;
  std::string method;
  std::string metric;
  double value = 0.0;
};

// Everything here is a deterministic function of the run configuration.
struct RunMeta {
  std::uint64_t seed = 0;
  std::string model;
  std::string conversion_model;
  int sample_size = 0;
  int repeats = 0;
  bool resample = true;
  std::vector<std::string> tasks;
  std::vector<std::string> methods;
};

// Wall-clock and cache facts; written to a sidecar, never into report files.
struct RuntimeMeta {
  std::string started_at;
  std::string finished_at;
  std::string backend;
  std::size_t cache_hits = 0;
  std::size_t cache_misses = 0;
  std::size_t backend_calls = 0;
};

struct Report {
  std::vector<ScoreRow> rows;
  std::vector<CellSummary> cells;
  std::vector<Delta> deltas;
  RunMeta meta;
  RuntimeMeta runtime;
};

inline constexpr const char* kBaselineMethod = "zs";

// Fills report.deltas from the rows. Deltas exist only when the baseline
// method ran and its mean for that (task, metric) is defined.
void compute_deltas(Report& report);

// Mean of the defined values for (task, method, metric) over repeats; empty
// when any repeat is undefined or missing.
std::optional<double> mean_value(const Report& report, const std::string& task,
                                 const std::string& method, const std::string& metric);

enum class ReportFormat { kJson, kCsv, kMarkdown };

ReportFormat parse_report_format(const std::string& name);
const char* file_name(ReportFormat format);

std::string render_report(const Report& report, ReportFormat format);
void emit_report(const Report& report, ReportFormat format, const std::filesystem::path& path);
std::string render_runtime_meta(const Report& report);

// "81.6 (+21.9)" for percentage metrics, "0.743 (+0.019)" for Pearson.
std::string format_cell(const std::string& metric, std::optional<double> value,
                        std::optional<double> delta);

}  // namespace s2l::runner
