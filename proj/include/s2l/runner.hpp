#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "s2l/core.hpp"
#include "s2l/llm.hpp"
#include "s2l/report.hpp"
#include "s2l/tasks.hpp"

namespace s2l::runner {

struct BackendConfig {
  std::string kind = "mock";  // live | mock | replay
  std::string endpoint;
  std::string token_env = "S2L_API_KEY";
  bool replay_strict = true;
  std::string mock_mode = "echo-gold";  // echo-gold | fixtures
  std::filesystem::path mock_fixtures;  // JSON object: prompt -> reply
  int max_attempts = 3;
  int initial_backoff_ms = 1000;
};

struct RunConfig {
  std::vector<tasks::TaskId> tasks;
  // Modes (zs, zsc, s2l-sub, s2l-cat or full labels) crossed with the
  // conversion choices (model, tool) give the method list.
  std::vector<std::string> method_names = {"zs", "zsc", "s2l-sub", "s2l-cat"};
  std::vector<std::string> conversion_names = {"tool"};
  std::string cot_suffix{kDefaultCotSuffix};
  std::string model = "mock-model";
  std::string conversion_model;  // empty: same as model
  int sample_size = 10;
  int repeats = 1;
  std::uint64_t seed = 0;
  int concurrency_limit = 4;
  BackendConfig backend;
  std::optional<std::filesystem::path> cache_dir;
  std::filesystem::path out_dir = "s2l-out";
  std::vector<ReportFormat> formats = {ReportFormat::kJson, ReportFormat::kCsv,
                                       ReportFormat::kMarkdown};
  std::filesystem::path data_dir;
  std::filesystem::path fixtures_dir;
  std::map<tasks::TaskId, std::filesystem::path> datasets;  // per-task overrides
  bool resample = true;  // false: every repeat re-queries the repeat-0 sample
  tasks::PropertyDataset property_dataset = tasks::PropertyDataset::kTox21;
  std::string stance_target = "Donald Trump";
  std::optional<int> max_tokens;

  RunConfig();
  // Throws kConfig.
  void validate() const;
  std::vector<MethodConfig> methods() const;
  const std::string& effective_conversion_model() const {
    return conversion_model.empty() ? model : conversion_model;
  }
  std::filesystem::path dataset_path(tasks::TaskId task) const;
};

// Flat `key = value` text. `#` starts a comment at line start or after
// whitespace; double-quoted values are taken verbatim.
std::map<std::string, std::string> parse_config_text(const std::string& text);

// Applies recognised keys; relative paths resolve against `base_dir`.
// Throws kConfig on unknown keys or bad values.
void apply_config(RunConfig& config, const std::map<std::string, std::string>& values,
                  const std::filesystem::path& base_dir = {});

RunConfig load_config_file(const std::filesystem::path& path);

// Expands mode names (zs, zsc, s2l-sub, s2l-cat, or full labels such as
// s2l-sub-tool) against the conversion list (model, tool).
std::vector<MethodConfig> expand_methods(const std::vector<std::string>& modes,
                                         const std::vector<std::string>& conversions);

// Sorted dataset indices: seeded, without replacement, independent per repeat.
std::vector<std::size_t> sample_indices(std::size_t dataset_size, std::size_t n,
                                        std::uint64_t seed, int repeat_index);

template <typename T>
std::vector<T> sample_instances(const std::vector<T>& dataset, std::size_t n, std::uint64_t seed,
                                int repeat_index) {
  std::vector<T> out;
  for (std::size_t i : sample_indices(dataset.size(), n, seed, repeat_index)) out.push_back(dataset[i]);
  return out;
}

// Runs every (task, method, repeat) cell. Cell failures become error rows;
// only configuration problems throw. `backend` overrides config.backend.
Report run(const RunConfig& config, llm::Backend* backend = nullptr);

// Writes each configured format plus the run_meta.json sidecar into out_dir.
void write_outputs(const Report& report, const RunConfig& config);

// 0 when every cell succeeded, 2 when some cell failed.
int exit_code(const Report& report);

}  // namespace s2l::runner
