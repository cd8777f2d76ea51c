#include "s2l/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <functional>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>
#include <unordered_map>

#include <json.hpp>

#include "s2l/error.hpp"
#include "s2l/metrics.hpp"
#include "s2l/random.hpp"
#include "s2l/text.hpp"

#ifndef S2L_DEFAULT_DATA_DIR
#define S2L_DEFAULT_DATA_DIR "data"
#endif
#ifndef S2L_DEFAULT_FIXTURES_DIR
#define S2L_DEFAULT_FIXTURES_DIR "fixtures"
#endif

namespace s2l::runner {

using tasks::TaskId;

RunConfig::RunConfig()
    : tasks(tasks::all_tasks()), data_dir(S2L_DEFAULT_DATA_DIR), fixtures_dir(S2L_DEFAULT_FIXTURES_DIR) {}

std::vector<MethodConfig> RunConfig::methods() const {
  std::vector<MethodConfig> out = expand_methods(method_names, conversion_names);
  for (auto& m : out) m.cot_suffix = cot_suffix;
  return out;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::kConfig, what); };
  if (tasks.empty()) fail("at least one task is required");
  std::vector<MethodConfig> list;
  try {
    list = methods();
  } catch (const Error& e) {
    fail(e.what());
  }
  if (list.empty()) fail("at least one method is required");
  if (sample_size < 1) fail("sample size must be >= 1");
  if (repeats < 1) fail("repeats must be >= 1");
  if (concurrency_limit < 1) fail("concurrency must be >= 1");
  if (model.empty()) fail("model id is required");
  if (formats.empty()) fail("at least one report format is required");
  if (max_tokens && *max_tokens < 1) fail("max_tokens must be positive");
  const auto& b = backend;
  if (b.kind == "live") {
    if (b.endpoint.empty()) fail("live backend requires endpoint");
    if (b.token_env.empty()) fail("live backend requires token_env");
  } else if (b.kind == "replay") {
    if (!cache_dir) fail("replay backend requires cache_dir");
    if (!b.replay_strict && b.endpoint.empty()) fail("non-strict replay requires endpoint for misses");
  } else if (b.kind == "mock") {
    if (b.mock_mode != "echo-gold" && b.mock_mode != "fixtures") fail("mock must be echo-gold or fixtures");
    if (b.mock_mode == "fixtures" && b.mock_fixtures.empty()) fail("mock fixtures mode needs mock_fixtures");
  } else {
    fail("backend must be live, mock or replay");
  }
  if (b.max_attempts < 1) fail("max_attempts must be >= 1");
  if (stance_target.empty()) fail("stance_target must not be empty");
}

std::filesystem::path RunConfig::dataset_path(TaskId task) const {
  if (auto it = datasets.find(task); it != datasets.end()) return it->second;
  return fixtures_dir / tasks::fixture_file_name(task);
}

// ---------------------------------------------------------------------------
// configuration text

std::map<std::string, std::string> parse_config_text(const std::string& text_in) {
  std::map<std::string, std::string> values;
  std::istringstream in(text_in);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view trimmed = text::trim(line);
    if (trimmed.empty() || trimmed[0] == '#' || trimmed[0] == '[') continue;
    auto eq = trimmed.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::kConfig, "line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string key(text::trim(trimmed.substr(0, eq)));
    std::string_view value = text::trim(trimmed.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.rfind('"') > 0) {
      value = value.substr(1, value.rfind('"') - 1);
    } else if (auto hash = value.find(" #"); hash != std::string_view::npos) {
      value = text::trim(value.substr(0, hash));
    } else if (auto tab = value.find("\t#"); tab != std::string_view::npos) {
      value = text::trim(value.substr(0, tab));
    }
    if (key.empty()) throw Error(ErrorKind::kConfig, "line " + std::to_string(line_no) + ": empty key");
    values[key] = std::string(value);
  }
  return values;
}

namespace {

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string normalized = value;
  std::replace(normalized.begin(), normalized.end(), ',', ' ');
  for (auto token : text::split_whitespace(normalized)) out.emplace_back(token);
  return out;
}

long long parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::kConfig, key + ": '" + value + "' is not an integer");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  std::string v = text::to_lower(value);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(ErrorKind::kConfig, key + ": '" + value + "' is not a boolean");
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  std::filesystem::path p(value);
  if (p.is_relative() && !base.empty()) return base / p;
  return p;
}

}  // namespace

void apply_config(RunConfig& config, const std::map<std::string, std::string>& values,
                  const std::filesystem::path& base_dir) {
  for (const auto& [key, value] : values) {
    try {
      if (key == "tasks" || key == "task") {
        config.tasks.clear();
        for (const auto& t : split_list(value)) {
          if (t == "all") {
            config.tasks = tasks::all_tasks();
            break;
          }
          config.tasks.push_back(tasks::parse_task_id(t));
        }
      } else if (key == "methods" || key == "method") {
        config.method_names = split_list(value);
      } else if (key == "conversions" || key == "conversion") {
        config.conversion_names = split_list(value);
      } else if (key == "cot_suffix") {
        config.cot_suffix = value;
      } else if (key == "model") {
        config.model = value;
      } else if (key == "conversion_model") {
        config.conversion_model = value;
      } else if (key == "n" || key == "sample_size") {
        config.sample_size = static_cast<int>(parse_int(key, value));
      } else if (key == "repeats") {
        config.repeats = static_cast<int>(parse_int(key, value));
      } else if (key == "seed") {
        config.seed = static_cast<std::uint64_t>(parse_int(key, value));
      } else if (key == "concurrency") {
        config.concurrency_limit = static_cast<int>(parse_int(key, value));
      } else if (key == "backend") {
        config.backend.kind = value;
      } else if (key == "endpoint") {
        config.backend.endpoint = value;
      } else if (key == "token_env") {
        config.backend.token_env = value;
      } else if (key == "replay_strict") {
        config.backend.replay_strict = parse_bool(key, value);
      } else if (key == "mock") {
        config.backend.mock_mode = value;
      } else if (key == "mock_fixtures") {
        config.backend.mock_fixtures = resolve(base_dir, value);
      } else if (key == "max_attempts") {
        config.backend.max_attempts = static_cast<int>(parse_int(key, value));
      } else if (key == "backoff_ms") {
        config.backend.initial_backoff_ms = static_cast<int>(parse_int(key, value));
      } else if (key == "cache_dir") {
        if (value.empty()) {
          config.cache_dir.reset();
        } else {
          config.cache_dir = resolve(base_dir, value);
        }
      } else if (key == "out" || key == "out_dir") {
        config.out_dir = resolve(base_dir, value);
      } else if (key == "formats") {
        config.formats.clear();
        for (const auto& f : split_list(value)) config.formats.push_back(parse_report_format(f));
      } else if (key == "data_dir") {
        config.data_dir = resolve(base_dir, value);
      } else if (key == "fixtures_dir") {
        config.fixtures_dir = resolve(base_dir, value);
      } else if (key.rfind("dataset.", 0) == 0) {
        config.datasets[tasks::parse_task_id(key.substr(8))] = resolve(base_dir, value);
      } else if (key == "resample") {
        config.resample = parse_bool(key, value);
      } else if (key == "property_dataset") {
        config.property_dataset = tasks::parse_property_dataset(value);
      } else if (key == "stance_target") {
        config.stance_target = value;
      } else if (key == "max_tokens") {
        if (value.empty()) {
          config.max_tokens.reset();
        } else {
          config.max_tokens = static_cast<int>(parse_int(key, value));
        }
      } else {
        throw Error(ErrorKind::kConfig, "unknown key '" + key + "'");
      }
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kConfig) throw;
      throw Error(ErrorKind::kConfig, key + ": " + e.what());
    }
  }
}

RunConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kConfig, "cannot read config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  RunConfig config;
  apply_config(config, parse_config_text(buf.str()), path.parent_path());
  return config;
}

std::vector<MethodConfig> expand_methods(const std::vector<std::string>& modes,
                                         const std::vector<std::string>& conversions) {
  std::vector<MethodConfig> out;
  std::set<std::string> seen;
  auto add = [&](MethodConfig m) {
    m.validate();
    if (seen.insert(m.label()).second) out.push_back(std::move(m));
  };
  for (const auto& mode : modes) {
    MethodConfig base = parse_method_label(mode);
    if (!base.is_s2l() || base.conversion) {
      add(base);
      continue;
    }
    if (conversions.empty()) {
      throw Error(ErrorKind::kConfig, "method " + mode + " needs a conversion (model or tool)");
    }
    for (const auto& c : conversions) {
      MethodConfig m = base;
      if (c == "model") {
        m.conversion = Conversion::kWithModel;
      } else if (c == "tool") {
        m.conversion = Conversion::kWithTool;
      } else {
        throw Error(ErrorKind::kConfig, "unknown conversion '" + c + "'");
      }
      add(m);
    }
  }
  return out;
}

std::vector<std::size_t> sample_indices(std::size_t dataset_size, std::size_t n, std::uint64_t seed,
                                        int repeat_index) {
  if (n == 0) throw Error(ErrorKind::kArgument, "sample size must be >= 1");
  if (n > dataset_size) {
    throw Error(ErrorKind::kArgument, "sample size " + std::to_string(n) + " exceeds dataset size " +
                                          std::to_string(dataset_size));
  }
  std::vector<std::size_t> idx(dataset_size);
  for (std::size_t i = 0; i < dataset_size; ++i) idx[i] = i;
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(repeat_index)));
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i + static_cast<std::size_t>(uniform_below(rng, dataset_size - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// ---------------------------------------------------------------------------
// execution

namespace {

void parallel_for(std::size_t count, int limit, const std::function<void(std::size_t)>& fn) {
  std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(limit), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  }
}

std::string now_iso() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Replies with the gold answer registered for a prompt.
class EchoOracle {
 public:
  void add(const std::string& prompt, const std::string& reply) {
    std::lock_guard lock(mutex_);
    replies_.emplace(prompt, reply);
  }
  std::optional<std::string> find(const std::string& prompt) const {
    std::lock_guard lock(mutex_);
    auto it = replies_.find(prompt);
    if (it == replies_.end()) return std::nullopt;
    return it->second;
  }

 private:
  mutable std::mutex mutex_;
  std::unordered_map<std::string, std::string> replies_;
};

struct TaskData {
  TaskId id{};
  std::vector<tasks::Instance> instances;
  std::string load_error;
  std::vector<std::vector<std::size_t>> samples;  // per repeat
  std::vector<std::string> sample_errors;
};

struct Cell {
  std::size_t task = 0;
  std::size_t method = 0;
  int repeat = 0;
  std::string error;
  std::vector<std::size_t> items;
};

struct Item {
  const tasks::Instance* instance = nullptr;
  std::optional<llm::CompletionRequest> request;
  std::string response;
  std::string error;
};

using ConversionKey = std::tuple<TaskId, Conversion, std::string>;

struct ConversionSlot {
  SpanKind kind = SpanKind::kGeneric;
  std::optional<Rendering> rendering;
  bool needs_model = false;
  std::string error;
};

std::string cell_message(const Error& e) { return e.what(); }

void score_cell(const Cell& cell, const std::vector<Item>& items, const TaskData& data,
                const MethodConfig& method, Report& report) {
  CellSummary summary;
  summary.task_id = tasks::to_string(data.id);
  summary.method = method.label();
  summary.repeat_index = cell.repeat;
  summary.sample_size = cell.items.size();
  if (!cell.error.empty()) {
    summary.errored = cell.items.empty() ? 0 : cell.items.size();
    summary.error = cell.error;
    report.cells.push_back(summary);
    return;
  }
  for (std::size_t id : cell.items) {
    if (!items[id].error.empty()) {
      ++summary.errored;
      if (summary.error.empty()) summary.error = items[id].error;
    }
  }
  if (summary.errored > 0) {
    report.cells.push_back(summary);
    return;
  }

  std::vector<std::optional<tasks::Answer>> preds;
  std::vector<std::optional<tasks::Answer>> golds;
  for (std::size_t id : cell.items) {
    const Item& item = items[id];
    golds.emplace_back(tasks::gold_answer(*item.instance));
    try {
      preds.emplace_back(tasks::extract_answer(data.id, item.response));
      ++summary.scored;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kExtractionMiss) throw;
      preds.emplace_back(std::nullopt);
      ++summary.extraction_missed;
    }
  }
  auto row = [&](std::string metric, std::optional<double> value) {
    report.rows.push_back({summary.task_id, summary.method, std::move(metric), value,
                           cell.items.size(), cell.repeat});
  };

  switch (data.id) {
    case TaskId::kTableQa: {
      double em = 0, f1 = 0;
      for (std::size_t i = 0; i < preds.size(); ++i) {
        if (!preds[i]) continue;
        const auto& answers = std::get<tasks::TableInstance>(*items[cell.items[i]].instance).answers;
        const auto& text = std::get<std::string>(*preds[i]);
        em += metrics::exact_match(text, answers);
        f1 += metrics::max_token_f1(text, answers);
      }
      const auto n = static_cast<double>(preds.size());
      row("em", em / n);
      row("f1", f1 / n);
      break;
    }
    case TaskId::kEmoji: {
      std::vector<std::optional<double>> per_emotion;
      for (std::size_t e = 0; e < tasks::kEmotions.size(); ++e) {
        std::vector<double> xs, ys;
        for (std::size_t i = 0; i < preds.size(); ++i) {
          if (!preds[i]) continue;
          const auto& scores = std::get<tasks::EmotionScores>(*preds[i]);
          if (!scores[e]) continue;
          xs.push_back(*scores[e]);
          ys.push_back(std::get<tasks::EmojiInstance>(*items[cell.items[i]].instance).human_ratings[e]);
        }
        std::optional<double> r;
        if (xs.size() >= 2) {
          try {
            r = metrics::pearson(xs, ys);
          } catch (const Error& err) {
            if (err.kind() != ErrorKind::kDegenerateInput) throw;
          }
        }
        per_emotion.push_back(r);
        row("pearson_" + std::string(tasks::kEmotions[e]), r);
      }
      std::optional<double> avg;
      if (std::all_of(per_emotion.begin(), per_emotion.end(), [](const auto& v) { return v.has_value(); })) {
        double sum = 0;
        for (const auto& v : per_emotion) sum += *v;
        avg = sum / static_cast<double>(per_emotion.size());
      }
      row("pearson_avg", avg);
      break;
    }
    default:
      row("acc", metrics::accuracy(preds, golds));
      break;
  }
  report.cells.push_back(summary);
}

}  // namespace

Report run(const RunConfig& config, llm::Backend* backend_override) {
  config.validate();
  const std::vector<MethodConfig> methods = config.methods();
  Report report;
  report.runtime.started_at = now_iso();
  report.meta.seed = config.seed;
  report.meta.model = config.model;
  report.meta.conversion_model = config.effective_conversion_model();
  report.meta.sample_size = config.sample_size;
  report.meta.repeats = config.repeats;
  report.meta.resample = config.resample;
  for (TaskId t : config.tasks) report.meta.tasks.emplace_back(tasks::to_string(t));
  for (const auto& m : methods) report.meta.methods.push_back(m.label());

  const bool any_s2l = std::any_of(methods.begin(), methods.end(), [](const auto& m) { return m.is_s2l(); });

  tasks::ToolTables tables;
  std::map<TaskId, llm::ConversionPrompt> prompts;
  try {
    tables.emoji = converters::NameTable::load(config.data_dir / "tables" / "emoji_names.tsv");
    tables.smiles = converters::NameTable::load(config.data_dir / "tables" / "smiles_iupac.tsv");
    if (any_s2l) {
      for (TaskId t : config.tasks) {
        prompts.emplace(t, llm::ConversionPrompt::load(
                               tasks::to_string(t),
                               config.data_dir / "prompts" / (std::string(tasks::to_string(t)) + ".txt")));
      }
    }
  } catch (const Error& e) {
    throw Error(ErrorKind::kConfig, e.what());
  }

  EchoOracle oracle;
  const bool echo = !backend_override && config.backend.kind == "mock" &&
                    config.backend.mock_mode == "echo-gold";
  std::unique_ptr<llm::Backend> owned;
  llm::Backend* backend = backend_override;
  if (!backend) {
    const auto& b = config.backend;
    llm::LiveSpec live{b.endpoint, b.token_env, b.max_attempts,
                       std::chrono::milliseconds(b.initial_backoff_ms)};
    try {
      if (b.kind == "mock") {
        llm::MockSpec mock;
        if (echo) {
          mock.responder = [&oracle](const llm::CompletionRequest& r) {
            return oracle.find(r.last_user_content());
          };
        } else {
          std::ifstream in(b.mock_fixtures, std::ios::binary);
          if (!in) throw Error(ErrorKind::kConfig, "cannot read mock fixtures " + b.mock_fixtures.string());
          auto j = nlohmann::json::parse(in, nullptr, false);
          if (j.is_discarded() || !j.is_object()) {
            throw Error(ErrorKind::kConfig, "mock fixtures must be a JSON object of prompt -> reply");
          }
          for (const auto& [k, v] : j.items()) mock.fixtures[k] = v.get<std::string>();
        }
        owned = llm::make_backend(mock, config.cache_dir);
      } else if (b.kind == "live") {
        owned = llm::make_backend(live, config.cache_dir);
      } else {
        llm::ReplaySpec replay{*config.cache_dir, b.replay_strict, std::nullopt};
        if (!b.replay_strict) replay.fallback = live;
        owned = llm::make_backend(replay);
      }
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kConfig) throw;
      throw Error(ErrorKind::kConfig, e.what());
    }
    backend = owned.get();
  }
  report.runtime.backend = backend_override ? "custom" : config.backend.kind;

  tasks::LoadOptions load_options;
  load_options.property_dataset = config.property_dataset;
  tasks::TaskOptions task_options;
  task_options.stance_target = config.stance_target;

  // Datasets and per-repeat samples.
  std::vector<TaskData> data(config.tasks.size());
  for (std::size_t t = 0; t < config.tasks.size(); ++t) {
    TaskData& d = data[t];
    d.id = config.tasks[t];
    d.samples.resize(config.repeats);
    d.sample_errors.resize(config.repeats);
    try {
      d.instances = tasks::load_dataset(config.dataset_path(d.id), d.id, load_options);
    } catch (const Error& e) {
      d.load_error = cell_message(e);
      continue;
    }
    for (int r = 0; r < config.repeats; ++r) {
      try {
        d.samples[r] = sample_indices(d.instances.size(), static_cast<std::size_t>(config.sample_size),
                                      config.seed, config.resample ? r : 0);
      } catch (const Error& e) {
        d.sample_errors[r] = cell_message(e);
      }
    }
  }

  // Cells and their items, in (task, method, repeat, instance) order.
  std::vector<Cell> cells;
  std::vector<Item> items;
  for (std::size_t t = 0; t < data.size(); ++t) {
    for (std::size_t m = 0; m < methods.size(); ++m) {
      for (int r = 0; r < config.repeats; ++r) {
        Cell cell{t, m, r, {}, {}};
        const TaskData& d = data[t];
        if (!d.load_error.empty()) {
          cell.error = d.load_error;
        } else if (!d.sample_errors[r].empty()) {
          cell.error = d.sample_errors[r];
        } else {
          for (std::size_t idx : d.samples[r]) {
            cell.items.push_back(items.size());
            items.push_back(Item{&d.instances[idx], std::nullopt, {}, {}});
          }
        }
        cells.push_back(std::move(cell));
      }
    }
  }

  // Conversions: one per distinct (task, conversion, raw symbol).
  std::map<ConversionKey, ConversionSlot> conversions;
  std::vector<std::optional<Problem>> problems(items.size());
  for (const Cell& cell : cells) {
    const MethodConfig& method = methods[cell.method];
    for (std::size_t id : cell.items) {
      try {
        problems[id] = tasks::to_problem(*items[id].instance, task_options);
      } catch (const Error& e) {
        items[id].error = cell_message(e);
        continue;
      }
      if (!method.is_s2l()) continue;
      for (const auto& span : problems[id]->spans) {
        ConversionKey key{data[cell.task].id, *method.conversion, span.raw_text};
        conversions.try_emplace(key, ConversionSlot{span.kind, std::nullopt, false, {}});
      }
    }
  }
  std::vector<ConversionKey> model_jobs;
  for (auto& [key, slot] : conversions) {
    const auto& [task, conversion, raw] = key;
    SymbolSpan span{"s", raw, slot.kind, "s"};
    std::optional<Rendering> tool_view;
    if (tasks::has_tool_converter(slot.kind)) {
      try {
        tool_view = tasks::render_with_tool(span, tables);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kLookupMiss) slot.error = cell_message(e);
      }
    }
    if (!slot.error.empty()) continue;
    if (conversion == Conversion::kWithTool && tool_view) {
      slot.rendering = tool_view;
      continue;
    }
    // Model conversion, or a tool miss falling back to the model.
    slot.needs_model = true;
    model_jobs.push_back(key);
    if (echo) {
      const auto& prompt = prompts.at(task);
      oracle.add(prompt.render(raw), tool_view ? tool_view->text : raw);
    }
  }
  parallel_for(model_jobs.size(), config.concurrency_limit, [&](std::size_t i) {
    const auto& key = model_jobs[i];
    ConversionSlot& slot = conversions.at(key);
    SymbolSpan span{"s", std::get<2>(key), slot.kind, "s"};
    try {
      slot.rendering = llm::convert_with_model(span, prompts.at(std::get<0>(key)), *backend,
                                               config.effective_conversion_model());
    } catch (const Error& e) {
      slot.error = "conversion failed: " + cell_message(e);
    }
  });

  // Queries.
  for (const Cell& cell : cells) {
    const MethodConfig& method = methods[cell.method];
    for (std::size_t id : cell.items) {
      Item& item = items[id];
      if (!item.error.empty()) continue;
      const Problem& problem = *problems[id];
      std::vector<Rendering> renderings;
      if (method.is_s2l()) {
        for (const auto& span : problem.spans) {
          const ConversionSlot& slot =
              conversions.at(ConversionKey{data[cell.task].id, *method.conversion, span.raw_text});
          if (!slot.rendering) {
            item.error = slot.error;
            break;
          }
          Rendering r = *slot.rendering;
          r.span_id = span.id;
          renderings.push_back(std::move(r));
        }
        if (!item.error.empty()) continue;
      }
      try {
        Query query = build_query(problem, method, renderings);
        llm::CompletionRequest request;
        request.model = config.model;
        request.messages = query.messages;
        request.temperature = 0.0;
        request.max_tokens = config.max_tokens;
        if (echo) oracle.add(query.user_text(), tasks::gold_response(*item.instance, method.mode));
        item.request = std::move(request);
      } catch (const Error& e) {
        item.error = cell_message(e);
      }
    }
  }

  parallel_for(items.size(), config.concurrency_limit, [&](std::size_t i) {
    Item& item = items[i];
    if (!item.request) return;
    try {
      item.response = llm::complete(*item.request, *backend);
    } catch (const Error& e) {
      item.error = cell_message(e);
    }
  });

  for (const Cell& cell : cells) score_cell(cell, items, data[cell.task], methods[cell.method], report);
  compute_deltas(report);

  auto stats = backend->stats();
  report.runtime.cache_hits = stats.hits;
  report.runtime.cache_misses = stats.misses;
  report.runtime.backend_calls = stats.calls;
  report.runtime.finished_at = now_iso();
  return report;
}

void write_outputs(const Report& report, const RunConfig& config) {
  std::error_code ec;
  std::filesystem::create_directories(config.out_dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create output directory " + config.out_dir.string());
  for (ReportFormat f : config.formats) emit_report(report, f, config.out_dir / file_name(f));
  std::ofstream meta(config.out_dir / "run_meta.json", std::ios::binary | std::ios::trunc);
  if (!meta) throw Error(ErrorKind::kIo, "cannot write run_meta.json");
  meta << render_runtime_meta(report);
}

int exit_code(const Report& report) {
  for (const auto& c : report.cells) {
    if (c.failed()) return 2;
  }
  return 0;
}

}  // namespace s2l::runner
