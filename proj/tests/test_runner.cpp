#include <gtest/gtest.h>

#include <set>

#include "s2l/error.hpp"
#include "s2l/runner.hpp"
#include "support.hpp"

using namespace s2l;
using namespace s2l::runner;
using s2l::testing::read_file;
using s2l::testing::TempDir;
using s2l::testing::write_file;

namespace {

RunConfig echo_config(const std::filesystem::path& out) {
  RunConfig c;
  c.out_dir = out;
  c.concurrency_limit = 4;
  return c;
}

std::map<std::string, std::string> rendered(const Report& r) {
  return {{"json", render_report(r, ReportFormat::kJson)},
          {"csv", render_report(r, ReportFormat::kCsv)},
          {"md", render_report(r, ReportFormat::kMarkdown)}};
}

// Answers every query with a fixed reply; throws for prompts containing `poison`.
class ScriptedBackend : public llm::Backend {
 public:
  ScriptedBackend(std::string reply, std::string poison = {})
      : reply_(std::move(reply)), poison_(std::move(poison)) {}
  std::string complete(const llm::CompletionRequest& r) override {
    ++calls_;
    if (!poison_.empty() && r.last_user_content().find(poison_) != std::string::npos) {
      throw Error(ErrorKind::kBackend, "scripted failure");
    }
    return reply_;
  }

 private:
  std::string reply_, poison_;
};

Error catch_error(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "no error thrown";
  return Error(ErrorKind::kIo, "none");
}

}  // namespace

TEST(Config, ParseText) {
  auto values = parse_config_text("# comment\n\ntasks = arc, dyck\nmodel = \"gpt-x\"\n  seed=7  \n");
  EXPECT_EQ(values.at("tasks"), "arc, dyck");
  EXPECT_EQ(values.at("model"), "gpt-x");
  EXPECT_EQ(values.at("seed"), "7");
  auto inline_comments = parse_config_text("out = results   # here\ntarget = \"a # b\"  # note\ntag = x#y\n");
  EXPECT_EQ(inline_comments.at("out"), "results");
  EXPECT_EQ(inline_comments.at("target"), "a # b");
  EXPECT_EQ(inline_comments.at("tag"), "x#y");
  EXPECT_EQ(catch_error([] { parse_config_text("no equals sign"); }).kind(), ErrorKind::kConfig);
}

TEST(Config, ApplyAndResolvePaths) {
  RunConfig c;
  apply_config(c,
               {{"tasks", "arc dyck"}, {"methods", "zs,s2l-sub"}, {"conversions", "model,tool"},
                {"n", "5"}, {"repeats", "3"}, {"cache_dir", "cache"}, {"dataset.arc", "/abs/arc.jsonl"},
                {"resample", "false"}, {"property_dataset", "bbbp"}, {"max_tokens", "64"}},
               "/base");
  EXPECT_EQ(c.tasks, (std::vector<tasks::TaskId>{tasks::TaskId::kArc, tasks::TaskId::kDyck}));
  std::vector<std::string> labels;
  for (const auto& m : c.methods()) labels.push_back(m.label());
  EXPECT_EQ(labels, (std::vector<std::string>{"zs", "s2l-sub-model", "s2l-sub-tool"}));
  EXPECT_EQ(c.sample_size, 5);
  EXPECT_EQ(c.repeats, 3);
  EXPECT_EQ(c.cache_dir, std::filesystem::path("/base/cache"));
  EXPECT_EQ(c.dataset_path(tasks::TaskId::kArc), "/abs/arc.jsonl");
  EXPECT_EQ(c.dataset_path(tasks::TaskId::kDyck), c.fixtures_dir / "dyck.jsonl");
  EXPECT_FALSE(c.resample);
  EXPECT_EQ(c.property_dataset, tasks::PropertyDataset::kBbbp);
  EXPECT_EQ(c.max_tokens, 64);
}

TEST(Config, Rejections) {
  RunConfig c;
  EXPECT_EQ(catch_error([&] { apply_config(c, {{"bogus", "1"}}); }).kind(), ErrorKind::kConfig);
  EXPECT_EQ(catch_error([&] { apply_config(c, {{"n", "ten"}}); }).kind(), ErrorKind::kConfig);
  EXPECT_EQ(catch_error([&] { apply_config(c, {{"tasks", "chess"}}); }).kind(), ErrorKind::kConfig);
  auto invalid = [](auto mutate) {
    RunConfig cfg;
    mutate(cfg);
    return catch_error([&] { cfg.validate(); }).kind();
  };
  EXPECT_EQ(invalid([](RunConfig& x) { x.tasks.clear(); }), ErrorKind::kConfig);
  EXPECT_EQ(invalid([](RunConfig& x) { x.method_names.clear(); }), ErrorKind::kConfig);
  EXPECT_EQ(invalid([](RunConfig& x) { x.method_names = {"zz"}; }), ErrorKind::kConfig);
  EXPECT_EQ(invalid([](RunConfig& x) { x.conversion_names = {"magic"}; }), ErrorKind::kConfig);
  EXPECT_EQ(invalid([](RunConfig& x) { x.sample_size = 0; }), ErrorKind::kConfig);
  EXPECT_EQ(invalid([](RunConfig& x) { x.repeats = 0; }), ErrorKind::kConfig);
  EXPECT_EQ(invalid([](RunConfig& x) { x.backend.kind = "live"; }), ErrorKind::kConfig);
  EXPECT_EQ(invalid([](RunConfig& x) { x.backend.kind = "replay"; }), ErrorKind::kConfig);
  EXPECT_EQ(invalid([](RunConfig& x) { x.formats.clear(); }), ErrorKind::kConfig);
}

TEST(Config, LoadFileRelativeToItself) {
  TempDir dir;
  write_file(dir / "run.conf", "tasks = dyck\nout = results\nn = 3\n");
  RunConfig c = load_config_file(dir / "run.conf");
  EXPECT_EQ(c.out_dir, dir / "results");
  EXPECT_EQ(c.sample_size, 3);
  EXPECT_EQ(catch_error([&] { load_config_file(dir / "missing.conf"); }).kind(), ErrorKind::kConfig);
}

TEST(ExpandMethods, FullLabelsAndDedup) {
  auto m = expand_methods({"zs", "s2l-cat-model", "s2l-cat", "zs"}, {"model"});
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[1].label(), "s2l-cat-model");
  EXPECT_THROW(expand_methods({"s2l-sub"}, {}), Error);
}

TEST(Sampler, DeterministicWithoutReplacement) {
  auto a = sample_indices(20, 10, 42, 0);
  EXPECT_EQ(a, sample_indices(20, 10, 42, 0));
  EXPECT_EQ(std::set<std::size_t>(a.begin(), a.end()).size(), 10u);
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  EXPECT_NE(a, sample_indices(20, 10, 42, 1));
  EXPECT_NE(a, sample_indices(20, 10, 43, 0));
  auto full = sample_indices(20, 20, 9, 3);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(full[i], i);
  EXPECT_EQ(catch_error([] { sample_indices(5, 6, 0, 0); }).kind(), ErrorKind::kArgument);
  EXPECT_EQ(catch_error([] { sample_indices(5, 0, 0, 0); }).kind(), ErrorKind::kArgument);
}

TEST(Sampler, InstancesTemplate) {
  std::vector<std::string> data;
  for (int i = 0; i < 20; ++i) data.push_back("item" + std::to_string(i));
  auto s = sample_instances(data, 4, 1, 0);
  ASSERT_EQ(s.size(), 4u);
  for (const auto& x : s) EXPECT_NE(std::find(data.begin(), data.end(), x), data.end());
}

TEST(Run, EchoGoldScoresPerfectly) {
  TempDir dir;
  RunConfig c = echo_config(dir.path());
  c.conversion_names = {"model", "tool"};
  Report r = run(c);
  EXPECT_EQ(exit_code(r), 0);
  EXPECT_EQ(r.cells.size(), 8u * 6u);
  for (const auto& cell : r.cells) {
    EXPECT_FALSE(cell.failed()) << cell.task_id << " " << cell.method << ": " << cell.error;
    EXPECT_EQ(cell.scored, 10u);
  }
  for (const auto& row : r.rows) {
    ASSERT_TRUE(row.value.has_value()) << row.task_id << " " << row.metric;
    EXPECT_DOUBLE_EQ(*row.value, 1.0) << row.task_id << " " << row.method << " " << row.metric;
  }
  for (const auto& d : r.deltas) EXPECT_DOUBLE_EQ(d.value, 0.0);
  EXPECT_FALSE(r.deltas.empty());
}

TEST(Run, ConcurrencyDoesNotChangeReport) {
  TempDir dir;
  RunConfig c = echo_config(dir.path());
  c.repeats = 2;
  c.sample_size = 6;
  c.concurrency_limit = 1;
  auto serial = rendered(run(c));
  c.concurrency_limit = 8;
  EXPECT_EQ(serial, rendered(run(c)));
}

TEST(Run, RepeatsResampleUnlessDisabled) {
  TempDir dir;
  RunConfig c = echo_config(dir.path());
  c.tasks = {tasks::TaskId::kDyck};
  c.method_names = {"zs"};
  c.sample_size = 5;
  c.repeats = 3;
  Report r = run(c);
  EXPECT_EQ(r.rows.size(), 3u);
  std::set<int> repeats;
  for (const auto& row : r.rows) repeats.insert(row.repeat_index);
  EXPECT_EQ(repeats, (std::set<int>{0, 1, 2}));
}

TEST(Run, ConservationWithMisses) {
  TempDir dir;
  RunConfig c = echo_config(dir.path());
  ScriptedBackend backend("Unclear.");
  Report r = run(c, &backend);
  for (const auto& cell : r.cells) {
    EXPECT_EQ(cell.scored + cell.extraction_missed + cell.errored, cell.sample_size) << cell.task_id;
  }
  for (const auto& row : r.rows) {
    if (row.metric == "acc") EXPECT_DOUBLE_EQ(*row.value, 0.0);
    if (row.metric.rfind("pearson", 0) == 0) EXPECT_FALSE(row.value.has_value());
  }
}

TEST(Run, BackendFailureIsolatedToCell) {
  TempDir dir;
  RunConfig c = echo_config(dir.path());
  c.tasks = {tasks::TaskId::kSentiment, tasks::TaskId::kStance};
  c.method_names = {"zs", "zsc"};
  ScriptedBackend backend("The answer is Positive.", "Stance towards");
  Report r = run(c, &backend);
  EXPECT_EQ(exit_code(r), 2);
  for (const auto& cell : r.cells) {
    EXPECT_EQ(cell.failed(), cell.task_id == "stance") << cell.task_id;
    EXPECT_EQ(cell.scored + cell.extraction_missed + cell.errored, cell.sample_size);
  }
  std::string md = render_report(r, ReportFormat::kMarkdown);
  EXPECT_NE(md.find("error"), std::string::npos);
  for (const auto& row : r.rows) EXPECT_EQ(row.task_id, "sentiment");
}

TEST(Run, ReplayStrictColdCacheCompletesWithErrorRows) {
  TempDir dir;
  RunConfig c = echo_config(dir / "out");
  c.tasks = {tasks::TaskId::kDyck};
  c.backend.kind = "replay";
  c.cache_dir = dir / "cold-cache";
  Report r = run(c);
  EXPECT_EQ(r.cells.size(), 4u);
  for (const auto& cell : r.cells) {
    EXPECT_TRUE(cell.failed());
    EXPECT_NE(cell.error.find("cache"), std::string::npos) << cell.error;
  }
  EXPECT_EQ(exit_code(r), 2);
}

TEST(Run, MockCacheThenReplayMatches) {
  TempDir dir;
  RunConfig c = echo_config(dir / "out");
  c.tasks = {tasks::TaskId::kArc, tasks::TaskId::kProperty};
  c.conversion_names = {"model"};
  c.cache_dir = dir / "cache";
  auto first = rendered(run(c));
  c.backend.kind = "replay";
  Report replayed = run(c);
  EXPECT_EQ(exit_code(replayed), 0);
  EXPECT_EQ(first, rendered(replayed));
  EXPECT_GT(replayed.runtime.cache_hits, 0u);
}

TEST(Run, MissingDatasetFailsOnlyThatTask) {
  TempDir dir;
  RunConfig c = echo_config(dir.path());
  c.tasks = {tasks::TaskId::kArc, tasks::TaskId::kDyck};
  c.datasets[tasks::TaskId::kArc] = dir / "nope.jsonl";
  Report r = run(c);
  for (const auto& cell : r.cells) EXPECT_EQ(cell.failed(), cell.task_id == "arc");
}

TEST(Run, SampleLargerThanDatasetFailsCells) {
  TempDir dir;
  RunConfig c = echo_config(dir.path());
  c.tasks = {tasks::TaskId::kDyck};
  c.sample_size = 11;
  Report r = run(c);
  for (const auto& cell : r.cells) EXPECT_TRUE(cell.failed());
}

TEST(Run, InvalidConfigThrowsBeforeWork) {
  RunConfig c;
  c.sample_size = 0;
  ScriptedBackend backend("x");
  EXPECT_EQ(catch_error([&] { run(c, &backend); }).kind(), ErrorKind::kConfig);
  EXPECT_EQ(backend.stats().calls, 0u);
  RunConfig bad_data;
  bad_data.data_dir = "/nonexistent";
  EXPECT_EQ(catch_error([&] { run(bad_data, &backend); }).kind(), ErrorKind::kConfig);
}

TEST(Report, DeltaFormatting) {
  Report r;
  r.meta.tasks = {"arc"};
  r.meta.methods = {"zs", "s2l-sub-tool"};
  r.rows = {{"arc", "zs", "acc", 0.597, 60, 0}, {"arc", "s2l-sub-tool", "acc", 0.816, 60, 0}};
  r.cells = {{"arc", "zs", 0, 60, 60, 0, 0, {}}, {"arc", "s2l-sub-tool", 0, 60, 60, 0, 0, {}}};
  compute_deltas(r);
  ASSERT_EQ(r.deltas.size(), 1u);
  EXPECT_NEAR(r.deltas[0].value, 0.219, 1e-12);
  std::string md = render_report(r, ReportFormat::kMarkdown);
  EXPECT_NE(md.find("| s2l-sub-tool | 81.6 (+21.9) |"), std::string::npos) << md;
  EXPECT_NE(md.find("| zs | 59.7 |"), std::string::npos) << md;
}

TEST(Report, CellFormatting) {
  EXPECT_EQ(format_cell("acc", 0.816, 0.219), "81.6 (+21.9)");
  EXPECT_EQ(format_cell("em", 0.5, -0.125), "50.0 (-12.5)");
  EXPECT_EQ(format_cell("acc", 0.5, std::nullopt), "50.0");
  EXPECT_EQ(format_cell("pearson_avg", 0.743, 0.019), "0.743 (+0.019)");
  EXPECT_EQ(format_cell("pearson_joy", std::nullopt, std::nullopt), "undef");
}

TEST(Report, MeanOverRepeatsAndUndefined) {
  Report r;
  r.rows = {{"e", "zs", "m", 0.2, 5, 0}, {"e", "zs", "m", 0.4, 5, 1}, {"e", "x", "m", 0.5, 5, 0},
            {"e", "x", "m", std::nullopt, 5, 1}};
  EXPECT_NEAR(*mean_value(r, "e", "zs", "m"), 0.3, 1e-12);
  EXPECT_FALSE(mean_value(r, "e", "x", "m").has_value());
  compute_deltas(r);
  EXPECT_TRUE(r.deltas.empty());
}

TEST(Report, EmitIsByteStableAndIoErrors) {
  TempDir dir;
  RunConfig c = echo_config(dir / "a");
  c.tasks = {tasks::TaskId::kEmoji, tasks::TaskId::kTableQa};
  Report r = run(c);
  write_outputs(r, c);
  std::string first = read_file(dir / "a" / "report.json");
  write_outputs(r, c);
  EXPECT_EQ(first, read_file(dir / "a" / "report.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "a" / "report.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "a" / "report.md"));
  EXPECT_TRUE(std::filesystem::exists(dir / "a" / "run_meta.json"));
  EXPECT_EQ(first.find("started_at"), std::string::npos);
  write_file(dir / "blocker", "x");
  EXPECT_EQ(catch_error([&] { emit_report(r, ReportFormat::kCsv, dir / "blocker" / "r.csv"); }).kind(),
            ErrorKind::kIo);
}

TEST(Report, FormatNames) {
  EXPECT_EQ(parse_report_format("md"), ReportFormat::kMarkdown);
  EXPECT_EQ(parse_report_format("markdown"), ReportFormat::kMarkdown);
  EXPECT_STREQ(file_name(ReportFormat::kCsv), "report.csv");
  EXPECT_THROW(parse_report_format("xml"), Error);
}
