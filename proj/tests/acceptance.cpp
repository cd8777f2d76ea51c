// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 on any FAIL.
#include <openssl/evp.h>
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <random>
#include <sstream>

#include "s2l/converters.hpp"
#include "s2l/error.hpp"
#include "s2l/metrics.hpp"
#include "s2l/report.hpp"
#include "s2l/tasks.hpp"
#include "s2l/text.hpp"
#include "support.hpp"

using namespace s2l;
using s2l::testing::read_file;
using s2l::testing::StubServer;
using s2l::testing::TempDir;

namespace {

const std::string kCli = S2L_CLI_PATH;

struct Outcome {
  bool ok = true;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const Outcome& o) {
  std::cout << (o.ok ? "PASS" : "FAIL") << "  " << name << ": " << o.detail << std::endl;
  if (!o.ok) ++failures;
}

template <typename Fn>
void criterion(const std::string& name, Fn fn) {
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  report(name, o);
}

std::string sha256(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) {
    char buf[3];
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    out << buf;
  }
  return out.str();
}

int run_cli(const std::string& args) {
  std::string cmd = "'" + kCli + "' " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string report_digest(const std::filesystem::path& dir) {
  return sha256(read_file(dir / "report.json") + read_file(dir / "report.csv") + read_file(dir / "report.md"));
}

bool balanced(const std::string& s) {
  std::string stack;
  for (char c : s) {
    if (c == '(') stack += ')';
    else if (c == '[') stack += ']';
    else if (c == '{') stack += '}';
    else if (c == '<') stack += '>';
    else if (stack.empty() || stack.back() != c) return false;
    else stack.pop_back();
  }
  return stack.empty();
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

}  // namespace

int main() {
  criterion("converter round trip", [] {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> len(1, 64), digit(0, 9);
    std::bernoulli_distribution repeat(0.6);
    int bad = 0;
    auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < 1000; ++i) {
      std::vector<int> s(len(rng));
      for (std::size_t k = 0; k < s.size(); ++k) s[k] = (k && repeat(rng)) ? s[k - 1] : digit(rng);
      if (converters::parse_sequence_description(converters::describe_sequence(s)) != s) ++bad;
    }
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return Outcome{bad == 0 && ms < 1000.0,
                   "1000 sequences, " + std::to_string(bad) + " failures, " + std::to_string(ms) + " ms"};
  });

  criterion("bracket bijection", [] {
    std::mt19937_64 rng(2);
    const std::string alphabet = "()[]{}<>";
    std::uniform_int_distribution<int> len(0, 32), pick(0, 7);
    int bad = 0;
    for (int i = 0; i < 1000; ++i) {
      std::string b;
      for (int n = len(rng); n > 0; --n) b += alphabet[pick(rng)];
      for (auto naming : {converters::BracketNaming::kCanonical, converters::BracketNaming::kAlias}) {
        if (converters::brackets_from_names(converters::name_brackets(b, naming)) != b) ++bad;
      }
    }
    return Outcome{bad == 0, "1000 strings x 2 tables, " + std::to_string(bad) + " failures"};
  });

  criterion("dyck oracle soundness", [] {
    std::mt19937_64 rng(3);
    const std::string open = "([{<", close = ")]}>";
    std::uniform_int_distribution<int> len(0, 20), pick(0, 3);
    std::bernoulli_distribution closing(0.45);
    int bad = 0;
    for (int i = 0; i < 1000; ++i) {
      std::string p, stack;
      for (int n = len(rng); n > 0; --n) {
        if (!stack.empty() && closing(rng)) {
          p += stack.back();
          stack.pop_back();
        } else {
          int k = pick(rng);
          p += open[k];
          stack += close[k];
        }
      }
      if (!balanced(p + tasks::dyck_oracle(p))) ++bad;
    }
    bool table = tasks::dyck_oracle("([]") == ")" && tasks::dyck_oracle("{(<>)") == "}";
    return Outcome{bad == 0 && table, "1000 prefixes, " + std::to_string(bad) + " unbalanced; reference cases " +
                                          (table ? "exact" : "WRONG")};
  });

  criterion("shift oracle", [] {
    bool table = tasks::shift_oracle(std::vector<int>{1, 0, 0}, 2) == tasks::Sequence{0, 0, 1};
    std::mt19937_64 rng(4);
    int bad = 0;
    for (int i = 0; i < 1000; ++i) {
      int k = 1 + static_cast<int>(rng() % 3), n = 4 + static_cast<int>(rng() % 27);
      int size = 1 + static_cast<int>(rng() % (n - k)), pos = static_cast<int>(rng() % (n - k - size + 1));
      int color = 1 + static_cast<int>(rng() % 9);
      std::vector<int> s(n, 0);
      for (int j = pos; j < pos + size; ++j) s[j] = color;
      auto out = tasks::shift_oracle(s, k);
      auto a = s, b = out;
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      bool ok = a == b;
      for (int j = 0; j < n; ++j) {
        if (s[j] && (j + k >= n || out[j + k] != s[j])) ok = false;
        if (out[j] && (j < k || s[j - k] != out[j])) ok = false;
      }
      if (!ok) ++bad;
    }
    return Outcome{table && bad == 0, std::string("1,0,0 -> 0,0,1 ") + (table ? "exact" : "WRONG") + "; 1000 shifts, " +
                                          std::to_string(bad) + " violations"};
  });

  criterion("table linearizer", [] {
    bool exact = converters::linearize_table("rank|nation\n1|SWE") == "rank: 1; nation: SWE";
    std::optional<std::size_t> row;
    try {
      converters::linearize_table("rank|nation\n1|SWE\n2\n3|FIN");
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kStructural) row = e.index;
    }
    return Outcome{exact && row == 2u, std::string("byte-exact ") + (exact ? "yes" : "no") + "; ragged row index " +
                                           (row ? std::to_string(*row) : "none") + " (expected 2)"};
  });

  criterion("metrics", [] {
    std::vector<double> x{0.3, 1.7, 2.2, 5.0, 4.1}, neg(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) neg[i] = -x[i];
    double self = metrics::pearson(x, x), anti = metrics::pearson(x, neg);
    double hand = metrics::pearson(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 4});
    double f1 = metrics::token_f1("jack smith", "jack");
    bool ok = std::abs(self - 1) <= 1e-12 && std::abs(anti + 1) <= 1e-12 && std::abs(hand - 0.98198) <= 1e-5 &&
              std::abs(f1 - 2.0 / 3.0) <= 1e-12;
    char buf[160];
    std::snprintf(buf, sizeof buf, "r(x,x)=%.15f r(x,-x)=%.15f r(hand)=%.6f f1=%.15f", self, anti, hand, f1);
    return Outcome{ok, buf};
  });

  criterion("echo-gold end-to-end", [] {
    TempDir dir;
    std::string common = " run --backend mock --mock echo-gold --seed 11 --n 10 --concurrency 4 --out ";
    auto start = std::chrono::steady_clock::now();
    int rc1 = run_cli(common + q(dir / "a"));
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    int rc2 = run_cli(common + q(dir / "b"));
    if (rc1 != 0 || rc2 != 0) return Outcome{false, "exit codes " + std::to_string(rc1) + "/" + std::to_string(rc2)};
    auto j = nlohmann::json::parse(read_file(dir / "a" / "report.json"));
    std::set<std::string> tasks_seen, methods_seen;
    int perfect = 0, imperfect = 0, failed_cells = 0;
    for (const auto& row : j["rows"]) {
      tasks_seen.insert(row["task"].get<std::string>());
      methods_seen.insert(row["method"].get<std::string>());
      std::string metric = row["metric"];
      if (metric == "acc" || metric == "em") {
        if (!row["value"].is_null() && row["value"].get<double>() == 1.0) ++perfect;
        else ++imperfect;
      }
    }
    for (const auto& cell : j["cells"]) {
      if (cell["errored"].get<int>() > 0 || cell["sample_size"].get<int>() != 10) ++failed_cells;
    }
    std::string da = report_digest(dir / "a"), db = report_digest(dir / "b");
    bool ok = tasks_seen.size() == 8 && methods_seen.size() == 4 && j["cells"].size() == 32 && imperfect == 0 &&
              failed_cells == 0 && perfect == 8 * 4 - 4 && secs < 10.0 && da == db;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%zu tasks x %zu methods, %d acc/em cells at 100%%, %d below, %.2f s, digest %s %s",
                  tasks_seen.size(), methods_seen.size(), perfect, imperfect, secs, da.substr(0, 12).c_str(),
                  da == db ? "identical" : "DIFFERENT");
    return Outcome{ok, buf};
  });

  criterion("concurrency determinism", [] {
    TempDir dir;
    std::string common = " run --backend mock --seed 5 --n 8 --repeats 2 --conversion tool --conversion model --out ";
    int a = run_cli(common + q(dir / "c1") + " --concurrency 1");
    int b = run_cli(common + q(dir / "c8") + " --concurrency 8");
    std::string d1 = report_digest(dir / "c1"), d8 = report_digest(dir / "c8");
    return Outcome{a == 0 && b == 0 && d1 == d8,
                   "concurrency 1 digest " + d1.substr(0, 12) + ", concurrency 8 digest " + d8.substr(0, 12)};
  });

  criterion("delta formatting", [] {
    runner::Report r;
    r.meta.tasks = {"arc"};
    r.meta.methods = {"zs", "s2l-sub-tool"};
    r.rows = {{"arc", "zs", "acc", 0.597, 60, 0}, {"arc", "s2l-sub-tool", "acc", 0.816, 60, 0}};
    r.cells = {{"arc", "zs", 0, 60, 60, 0, 0, {}}, {"arc", "s2l-sub-tool", 0, 60, 60, 0, 0, {}}};
    runner::compute_deltas(r);
    std::string md = runner::render_report(r, runner::ReportFormat::kMarkdown);
    bool ok = md.find("| s2l-sub-tool | 81.6 (+21.9) |") != std::string::npos;
    return Outcome{ok, ok ? "markdown cell \"81.6 (+21.9)\"" : "markdown lacks \"81.6 (+21.9)\""};
  });

  criterion("live smoke", [] {
    TempDir dir;
    std::optional<StubServer> stub;
    std::string endpoint, token_env = "S2L_ACCEPT_TOKEN", label;
    if (const char* env = std::getenv("S2L_LIVE_ENDPOINT"); env && *env) {
      endpoint = env;
      if (const char* t = std::getenv("S2L_LIVE_TOKEN_ENV"); t && *t) token_env = t;
      label = "configured endpoint";
    } else {
      stub.emplace(
          [](const std::string& user) {
            if (user.rfind("Name each bracket", 0) == 0) {
              auto pos = user.rfind(": ");
              return text::join(converters::name_brackets(user.substr(pos + 2)), ", ");
            }
            auto pos = user.rfind("Input: ");
            std::string target = user.substr(pos + 7);
            target = target.substr(0, target.find(" Output:"));
            try {
              return "The answer is " + tasks::dyck_oracle(target) + ".";
            } catch (const Error&) {
              return std::string("The answer is ).");
            }
          },
          "accept-token");
      ::setenv(token_env.c_str(), "accept-token", 1);
      endpoint = stub->endpoint();
      label = "local stub endpoint (no external endpoint configured)";
    }
    std::string model;
    if (const char* m = std::getenv("S2L_LIVE_MODEL"); m && *m) model = std::string(" --model '") + m + "'";
    std::string common = " run --task dyck --n 10 --conversion tool --conversion model --concurrency 4 --cache-dir " +
                         q(dir / "cache") + model;
    int live = run_cli(common + " --backend live --endpoint '" + endpoint + "' --token-env " + token_env +
                       " --out " + q(dir / "live"));
    std::size_t cached = 0;
    if (std::filesystem::exists(dir / "cache")) {
      for (const auto& e : std::filesystem::directory_iterator(dir / "cache")) {
        if (e.path().extension() == ".txt") ++cached;
      }
    }
    int replay = run_cli(common + " --backend replay --out " + q(dir / "replay"));
    bool same = read_file(dir / "live" / "report.json") == read_file(dir / "replay" / "report.json") &&
                read_file(dir / "live" / "report.csv") == read_file(dir / "replay" / "report.csv") &&
                read_file(dir / "live" / "report.md") == read_file(dir / "replay" / "report.md") &&
                !read_file(dir / "live" / "report.json").empty();
    bool ok = live == 0 && replay == 0 && cached > 0 && same;
    return Outcome{ok, label + "; live exit " + std::to_string(live) + ", " + std::to_string(cached) +
                           " cached responses, replay-strict exit " + std::to_string(replay) + ", reports " +
                           (same ? "byte-identical" : "DIFFER")};
  });

  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
