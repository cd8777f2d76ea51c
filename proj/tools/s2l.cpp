// s2l: run evaluations, apply converters, and query the task oracles.
#include <iostream>
#include <iterator>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "s2l/converters.hpp"
#include "s2l/error.hpp"
#include "s2l/runner.hpp"
#include "s2l/tasks.hpp"
#include "s2l/text.hpp"

namespace {

using namespace s2l;

std::string read_input(const std::string& in) {
  if (in != "-") return in;
  std::string all((std::istreambuf_iterator<char>(std::cin)), std::istreambuf_iterator<char>());
  while (!all.empty() && (all.back() == '\n' || all.back() == '\r')) all.pop_back();
  return all;
}

std::vector<int> parse_digits(const std::string& s) {
  std::vector<int> out;
  for (auto part : text::split(s, ",")) {
    std::string_view t = text::trim(part);
    if (t.size() != 1 || t[0] < '0' || t[0] > '9') {
      throw Error(ErrorKind::kParse, "expected comma-separated digits, got '" + s + "'");
    }
    out.push_back(t[0] - '0');
  }
  return out;
}

struct RunArgs {
  std::string config;
  std::vector<std::string> tasks, methods, conversions, formats;
  std::string model, conversion_model, backend, endpoint, token_env, cache_dir, out, mock, mock_fixtures;
  std::optional<std::uint64_t> seed;
  std::optional<int> n, repeats, concurrency;
  bool no_resample = false;
  bool replay_lenient = false;
};

int do_run(const RunArgs& a) {
  runner::RunConfig config;
  try {
    if (!a.config.empty()) config = runner::load_config_file(a.config);
    std::map<std::string, std::string> cli;
    auto joined = [](const std::vector<std::string>& v) { return text::join(v, ","); };
    if (!a.tasks.empty()) cli["tasks"] = joined(a.tasks);
    if (!a.methods.empty()) cli["methods"] = joined(a.methods);
    if (!a.conversions.empty()) cli["conversions"] = joined(a.conversions);
    if (!a.formats.empty()) cli["formats"] = joined(a.formats);
    if (!a.model.empty()) cli["model"] = a.model;
    if (!a.conversion_model.empty()) cli["conversion_model"] = a.conversion_model;
    if (!a.backend.empty()) cli["backend"] = a.backend;
    if (!a.endpoint.empty()) cli["endpoint"] = a.endpoint;
    if (!a.token_env.empty()) cli["token_env"] = a.token_env;
    if (!a.cache_dir.empty()) cli["cache_dir"] = a.cache_dir;
    if (!a.out.empty()) cli["out"] = a.out;
    if (!a.mock.empty()) cli["mock"] = a.mock;
    if (!a.mock_fixtures.empty()) cli["mock_fixtures"] = a.mock_fixtures;
    if (a.seed) cli["seed"] = std::to_string(*a.seed);
    if (a.n) cli["n"] = std::to_string(*a.n);
    if (a.repeats) cli["repeats"] = std::to_string(*a.repeats);
    if (a.concurrency) cli["concurrency"] = std::to_string(*a.concurrency);
    if (a.no_resample) cli["resample"] = "false";
    if (a.replay_lenient) cli["replay_strict"] = "false";
    runner::apply_config(config, cli);
    config.validate();
  } catch (const Error& e) {
    std::cerr << "s2l: " << e.what() << "\n";
    return 1;
  }
  try {
    runner::Report report = runner::run(config);
    runner::write_outputs(report, config);
    std::size_t failed = 0;
    for (const auto& c : report.cells) failed += c.failed() ? 1 : 0;
    std::cerr << "s2l: " << report.cells.size() << " cells, " << failed << " failed; reports in "
              << config.out_dir.string() << "\n";
    return runner::exit_code(report);
  } catch (const Error& e) {
    std::cerr << "s2l: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Symbol-to-language evaluation harness"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "evaluate tasks x methods and write reports");
  run->add_option("--config", run_args.config, "key = value config file")->check(CLI::ExistingFile);
  run->add_option("--task", run_args.tasks, "task id (repeatable, or 'all')");
  run->add_option("--method", run_args.methods, "zs | zsc | s2l-sub | s2l-cat (repeatable)");
  run->add_option("--conversion", run_args.conversions, "model | tool (repeatable)");
  run->add_option("--model", run_args.model, "reasoning model id");
  run->add_option("--conversion-model", run_args.conversion_model, "model id for symbol conversion");
  run->add_option("--backend", run_args.backend, "live | mock | replay");
  run->add_option("--endpoint", run_args.endpoint, "chat completions URL");
  run->add_option("--token-env", run_args.token_env, "environment variable holding the API token");
  run->add_option("--cache-dir", run_args.cache_dir, "response cache directory");
  run->add_flag("--replay-lenient", run_args.replay_lenient, "replay: fall back to the live endpoint on misses");
  run->add_option("--mock", run_args.mock, "echo-gold | fixtures");
  run->add_option("--mock-fixtures", run_args.mock_fixtures, "JSON object of prompt -> reply");
  run->add_option("--seed", run_args.seed);
  run->add_option("--n", run_args.n, "instances per cell");
  run->add_option("--repeats", run_args.repeats);
  run->add_option("--concurrency", run_args.concurrency);
  run->add_flag("--no-resample", run_args.no_resample, "reuse the first sample for every repeat");
  run->add_option("--format", run_args.formats, "json | csv | md (repeatable)");
  run->add_option("--out", run_args.out, "output directory");

  std::string kind, input, table_path, cell_delim = "|";
  bool alias = false;
  auto* convert = app.add_subcommand("convert", "apply a rule or lookup converter");
  convert->add_option("--kind", kind, "sequence | describe | brackets | names | table | emoji | lookup")
      ->required();
  convert->add_option("--in", input, "input text, or - for stdin")->required();
  convert->add_option("--table", table_path, "name table (TSV) for emoji or lookup");
  convert->add_option("--delim", cell_delim, "table cell delimiter");
  convert->add_flag("--alias", alias, "name < and > as less/greater than signs");

  std::string oracle_task, oracle_input;
  int shift = 1;
  auto* oracle = app.add_subcommand("oracle", "print the gold answer for a task input");
  oracle->add_option("--task", oracle_task, "arc | dyck")->required();
  oracle->add_option("--in", oracle_input, "sequence (1,0,0) or bracket prefix")->required();
  oracle->add_option("--k", shift, "ARC shift distance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  if (*run) return do_run(run_args);

  try {
    if (*convert) {
      std::string in = read_input(input);
      if (kind == "sequence") {
        std::cout << converters::describe_sequence(parse_digits(in)) << "\n";
      } else if (kind == "describe") {
        std::cout << tasks::format_sequence(converters::parse_sequence_description(in)) << "\n";
      } else if (kind == "brackets") {
        auto names = converters::name_brackets(
            in, alias ? converters::BracketNaming::kAlias : converters::BracketNaming::kCanonical);
        std::cout << text::join(names, ", ") << "\n";
      } else if (kind == "names") {
        std::vector<std::string> names;
        for (auto part : text::split(in, ",")) names.emplace_back(text::trim(part));
        std::cout << converters::brackets_from_names(names) << "\n";
      } else if (kind == "table") {
        std::cout << converters::linearize_table(in, cell_delim) << "\n";
      } else if (kind == "emoji" || kind == "lookup") {
        std::filesystem::path path = table_path;
        if (path.empty()) {
          runner::RunConfig defaults;
          path = defaults.data_dir / "tables" / (kind == "emoji" ? "emoji_names.tsv" : "smiles_iupac.tsv");
        }
        auto table = converters::NameTable::load(path);
        std::cout << (kind == "emoji" ? converters::emoji_name(in, table)
                                      : converters::lookup_translate(in, table))
                  << "\n";
      } else {
        std::cerr << "s2l: unknown converter kind '" << kind << "'\n";
        return 1;
      }
      return 0;
    }
    if (*oracle) {
      std::string in = read_input(oracle_input);
      if (oracle_task == "arc") {
        std::cout << tasks::format_sequence(tasks::shift_oracle(parse_digits(in), shift)) << "\n";
      } else if (oracle_task == "dyck") {
        std::cout << tasks::dyck_oracle(in) << "\n";
      } else {
        std::cerr << "s2l: oracle supports arc and dyck\n";
        return 1;
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "s2l: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
