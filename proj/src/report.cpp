#include "s2l/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "s2l/error.hpp"

namespace s2l::runner {

using nlohmann::ordered_json;

namespace {

bool is_pearson(const std::string& metric) { return metric.rfind("pearson", 0) == 0; }

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  std::string s = buf;
  if (s == "-0.0" || s == "-0.000") s.erase(0, 1);
  return s;
}

std::string full_precision(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Order-preserving distinct values.
template <typename F>
std::vector<std::string> distinct(const Report& report, F&& key) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& row : report.rows) {
    const std::string& k = key(row);
    if (seen.insert(k).second) out.push_back(k);
  }
  return out;
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

std::string render_json(const Report& report) {
  ordered_json j;
  j["meta"] = {{"seed", report.meta.seed},
               {"model", report.meta.model},
               {"conversion_model", report.meta.conversion_model},
               {"sample_size", report.meta.sample_size},
               {"repeats", report.meta.repeats},
               {"resample", report.meta.resample},
               {"tasks", report.meta.tasks},
               {"methods", report.meta.methods}};
  j["rows"] = ordered_json::array();
  for (const auto& r : report.rows) {
    ordered_json row = {{"task", r.task_id}, {"method", r.method}, {"metric", r.metric},
                        {"repeat", r.repeat_index}, {"n", r.n}};
    row["value"] = r.value ? ordered_json(*r.value) : ordered_json(nullptr);
    j["rows"].push_back(row);
  }
  j["cells"] = ordered_json::array();
  for (const auto& c : report.cells) {
    j["cells"].push_back({{"task", c.task_id},
                          {"method", c.method},
                          {"repeat", c.repeat_index},
                          {"sample_size", c.sample_size},
                          {"scored", c.scored},
                          {"extraction_missed", c.extraction_missed},
                          {"errored", c.errored},
                          {"error", c.error}});
  }
  j["deltas"] = ordered_json::array();
  for (const auto& d : report.deltas) {
    j["deltas"].push_back(
        {{"task", d.task_id}, {"method", d.method}, {"metric", d.metric}, {"delta", d.value}});
  }
  return j.dump(2) + "\n";
}

std::string render_csv(const Report& report) {
  std::ostringstream out;
  out << "kind,task,method,metric,repeat,value,n,scored,missed,errored,error\n";
  for (const auto& r : report.rows) {
    out << "score," << csv_field(r.task_id) << ',' << csv_field(r.method) << ',' << r.metric << ','
        << r.repeat_index << ',' << (r.value ? full_precision(*r.value) : "") << ',' << r.n
        << ",,,,\n";
  }
  for (const auto& d : report.deltas) {
    out << "delta," << csv_field(d.task_id) << ',' << csv_field(d.method) << ',' << d.metric << ",,"
        << full_precision(d.value) << ",,,,,\n";
  }
  for (const auto& c : report.cells) {
    out << "cell," << csv_field(c.task_id) << ',' << csv_field(c.method) << ",," << c.repeat_index
        << ",," << c.sample_size << ',' << c.scored << ',' << c.extraction_missed << ','
        << c.errored << ',' << csv_field(c.error) << '\n';
  }
  return out.str();
}

std::string render_markdown(const Report& report) {
  std::ostringstream out;
  out << "# S2L evaluation report\n\n";
  out << "model: `" << report.meta.model << "`";
  if (!report.meta.conversion_model.empty() && report.meta.conversion_model != report.meta.model) {
    out << ", conversion model: `" << report.meta.conversion_model << "`";
  }
  out << ", seed: " << report.meta.seed << ", n: " << report.meta.sample_size
      << ", repeats: " << report.meta.repeats << "\n";

  std::vector<std::string> tasks = report.meta.tasks;
  for (const auto& task : tasks) {
    std::vector<std::string> metrics;
    std::set<std::string> seen;
    for (const auto& r : report.rows) {
      if (r.task_id == task && seen.insert(r.metric).second) metrics.push_back(r.metric);
    }
    out << "\n## " << task << "\n\n| method |";
    for (const auto& m : metrics) out << ' ' << m << " |";
    out << " n | miss | err |\n|---|";
    for (std::size_t i = 0; i < metrics.size(); ++i) out << "---|";
    out << "---|---|---|\n";
    for (const auto& method : report.meta.methods) {
      std::size_t n = 0, missed = 0, errored = 0;
      bool any_cell = false;
      bool cell_error = false;
      for (const auto& c : report.cells) {
        if (c.task_id != task || c.method != method) continue;
        any_cell = true;
        n += c.sample_size;
        missed += c.extraction_missed;
        errored += c.errored;
        cell_error = cell_error || c.failed();
      }
      if (!any_cell) continue;
      out << "| " << method << " |";
      for (const auto& metric : metrics) {
        std::optional<double> value = mean_value(report, task, method, metric);
        std::optional<double> delta;
        for (const auto& d : report.deltas) {
          if (d.task_id == task && d.method == method && d.metric == metric) delta = d.value;
        }
        out << ' ' << (errored > 0 || cell_error ? std::string("error") : format_cell(metric, value, delta))
            << " |";
      }
      out << ' ' << n << " | " << missed << " | " << errored << " |\n";
    }
  }
  bool any_error = false;
  for (const auto& c : report.cells) {
    if (c.error.empty()) continue;
    if (!any_error) out << "\n## errors\n\n";
    any_error = true;
    out << "- " << c.task_id << " / " << c.method << " / repeat " << c.repeat_index << ": "
        << c.error << "\n";
  }
  return out.str();
}

}  // namespace

std::optional<double> mean_value(const Report& report, const std::string& task,
                                 const std::string& method, const std::string& metric) {
  double sum = 0;
  std::size_t count = 0;
  for (const auto& r : report.rows) {
    if (r.task_id != task || r.method != method || r.metric != metric) continue;
    if (!r.value) return std::nullopt;
    sum += *r.value;
    ++count;
  }
  if (count == 0) return std::nullopt;
  // Repeats whose cell failed have no rows; the mean must not hide them.
  for (const auto& c : report.cells) {
    if (c.task_id == task && c.method == method && c.failed()) return std::nullopt;
  }
  return sum / static_cast<double>(count);
}

void compute_deltas(Report& report) {
  report.deltas.clear();
  auto tasks = distinct(report, [](const ScoreRow& r) -> const std::string& { return r.task_id; });
  auto methods = distinct(report, [](const ScoreRow& r) -> const std::string& { return r.method; });
  for (const auto& task : tasks) {
    std::vector<std::string> metrics;
    std::set<std::string> seen;
    for (const auto& r : report.rows) {
      if (r.task_id == task && seen.insert(r.metric).second) metrics.push_back(r.metric);
    }
    for (const auto& metric : metrics) {
      auto baseline = mean_value(report, task, kBaselineMethod, metric);
      if (!baseline) continue;
      for (const auto& method : methods) {
        if (method == kBaselineMethod) continue;
        auto value = mean_value(report, task, method, metric);
        if (!value) continue;
        report.deltas.push_back({task, method, metric, *value - *baseline});
      }
    }
  }
}

std::string format_cell(const std::string& metric, std::optional<double> value,
                        std::optional<double> delta) {
  if (!value) return "undef";
  const bool pearson = is_pearson(metric);
  const double scale = pearson ? 1.0 : 100.0;
  const int digits = pearson ? 3 : 1;
  std::string out = fixed(*value * scale, digits);
  if (delta) {
    std::string d = fixed(*delta * scale, digits);
    out += " (" + (d[0] == '-' ? d : "+" + d) + ")";
  }
  return out;
}

ReportFormat parse_report_format(const std::string& name) {
  if (name == "json") return ReportFormat::kJson;
  if (name == "csv") return ReportFormat::kCsv;
  if (name == "markdown" || name == "md") return ReportFormat::kMarkdown;
  throw Error(ErrorKind::kConfig, "unknown report format '" + name + "'");
}

const char* file_name(ReportFormat format) {
  switch (format) {
    case ReportFormat::kJson: return "report.json";
    case ReportFormat::kCsv: return "report.csv";
    case ReportFormat::kMarkdown: return "report.md";
  }
  return "report.json";
}

std::string render_report(const Report& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::kJson: return render_json(report);
    case ReportFormat::kCsv: return render_csv(report);
    case ReportFormat::kMarkdown: return render_markdown(report);
  }
  return {};
}

void emit_report(const Report& report, ReportFormat format, const std::filesystem::path& path) {
  std::string body = render_report(report, format);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write report " + path.string());
  out << body;
  if (!out) throw Error(ErrorKind::kIo, "failed writing report " + path.string());
}

std::string render_runtime_meta(const Report& report) {
  const auto& rt = report.runtime;
  ordered_json j = {{"started_at", rt.started_at},   {"finished_at", rt.finished_at},
                    {"backend", rt.backend},         {"backend_calls", rt.backend_calls},
                    {"cache_hits", rt.cache_hits},   {"cache_misses", rt.cache_misses}};
  double lookups = static_cast<double>(rt.cache_hits + rt.cache_misses);
  j["cache_hit_rate"] = lookups > 0 ? rt.cache_hits / lookups : 0.0;
  return j.dump(2) + "\n";
}

}  // namespace s2l::runner
