#include "s2l/tasks.hpp"

#include <algorithm>
#include <charconv>
#include <cctype>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "s2l/error.hpp"
#include "s2l/random.hpp"
#include "s2l/text.hpp"

namespace s2l::tasks {

using nlohmann::json;

namespace {

constexpr std::string_view kOpeners = "([{<";
constexpr std::string_view kClosers = ")]}>";

bool is_bracket(char c) {
  return kOpeners.find(c) != std::string_view::npos || kClosers.find(c) != std::string_view::npos;
}

std::string format_real(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string capitalize(std::string_view s) {
  std::string out(s);
  if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

[[noreturn]] void extraction_miss(TaskId task, std::string_view what) {
  throw Error(ErrorKind::kExtractionMiss, std::string(to_string(task)) + ": " + std::string(what));
}

}  // namespace

// ---------------------------------------------------------------------------
// identifiers

const char* to_string(TaskId task) {
  switch (task) {
    case TaskId::kArc: return "arc";
    case TaskId::kDyck: return "dyck";
    case TaskId::kProperty: return "property";
    case TaskId::kEmoji: return "emoji";
    case TaskId::kTableQa: return "table_qa";
    case TaskId::kTabFact: return "tabfact";
    case TaskId::kSentiment: return "sentiment";
    case TaskId::kStance: return "stance";
  }
  return "arc";
}

TaskId parse_task_id(std::string_view id) {
  for (TaskId task : all_tasks()) {
    if (id == to_string(task)) return task;
  }
  throw Error(ErrorKind::kArgument, "unknown task '" + std::string(id) + "'");
}

const std::vector<TaskId>& all_tasks() {
  static const std::vector<TaskId> tasks = {TaskId::kArc,     TaskId::kDyck,    TaskId::kProperty,
                                            TaskId::kEmoji,   TaskId::kTableQa, TaskId::kTabFact,
                                            TaskId::kSentiment, TaskId::kStance};
  return tasks;
}

SpanKind span_kind(TaskId task) {
  switch (task) {
    case TaskId::kArc: return SpanKind::kSequence;
    case TaskId::kDyck: return SpanKind::kBrackets;
    case TaskId::kProperty: return SpanKind::kSmiles;
    case TaskId::kEmoji: return SpanKind::kEmoji;
    case TaskId::kTableQa:
    case TaskId::kTabFact: return SpanKind::kTable;
    case TaskId::kSentiment:
    case TaskId::kStance: return SpanKind::kTweet;
  }
  return SpanKind::kGeneric;
}

const char* to_string(PropertyDataset dataset) {
  switch (dataset) {
    case PropertyDataset::kBace: return "BACE";
    case PropertyDataset::kBbbp: return "BBBP";
    case PropertyDataset::kTox21: return "Tox21";
  }
  return "Tox21";
}

PropertyDataset parse_property_dataset(std::string_view name) {
  std::string lower = text::to_lower(name);
  if (lower == "bace") return PropertyDataset::kBace;
  if (lower == "bbbp") return PropertyDataset::kBbbp;
  if (lower == "tox21") return PropertyDataset::kTox21;
  throw Error(ErrorKind::kArgument, "unknown property dataset '" + std::string(name) + "'");
}

TaskId task_of(const Instance& instance) {
  struct Visitor {
    TaskId operator()(const ArcInstance&) const { return TaskId::kArc; }
    TaskId operator()(const DyckInstance&) const { return TaskId::kDyck; }
    TaskId operator()(const PropertyInstance&) const { return TaskId::kProperty; }
    TaskId operator()(const EmojiInstance&) const { return TaskId::kEmoji; }
    TaskId operator()(const TableInstance& t) const {
      return t.subtask == TableInstance::Subtask::kQa ? TaskId::kTableQa : TaskId::kTabFact;
    }
    TaskId operator()(const TweetInstance& t) const {
      return t.subtask == TweetInstance::Subtask::kSentiment ? TaskId::kSentiment : TaskId::kStance;
    }
  };
  return std::visit(Visitor{}, instance);
}

// ---------------------------------------------------------------------------
// oracles

Sequence shift_oracle(std::span<const int> seq, int k) {
  if (k < 0) throw Error(ErrorKind::kArgument, "shift amount must be non-negative");
  const auto len = static_cast<int>(seq.size());
  if (len < k) {
    throw Error(ErrorKind::kArgument, "sequence of length " + std::to_string(len) +
                                          " is shorter than shift " + std::to_string(k));
  }
  for (int i = len - k; i < len; ++i) {
    if (seq[i] != 0) {
      Error err(ErrorKind::kArgument, "object at index " + std::to_string(i) +
                                          " would shift out of bounds by " + std::to_string(k));
      err.index = static_cast<std::size_t>(i);
      throw err;
    }
  }
  Sequence out(seq.size(), 0);
  for (int i = k; i < len; ++i) out[i] = seq[i - k];
  return out;
}

std::string dyck_oracle(std::string_view prefix) {
  std::string stack;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    char c = prefix[i];
    if (auto open = kOpeners.find(c); open != std::string_view::npos) {
      stack += kClosers[open];
      continue;
    }
    if (kClosers.find(c) == std::string_view::npos) {
      Error err(ErrorKind::kArgument, "character '" + std::string(1, c) + "' at index " +
                                          std::to_string(i) + " is not a bracket");
      err.index = i;
      throw err;
    }
    if (stack.empty() || stack.back() != c) {
      Error err(ErrorKind::kArgument, "closer '" + std::string(1, c) + "' at index " +
                                          std::to_string(i) + " has no matching opener");
      err.index = i;
      throw err;
    }
    stack.pop_back();
  }
  return {stack.rbegin(), stack.rend()};
}

// ---------------------------------------------------------------------------
// generators

ArcInstance gen_arc(std::uint64_t seed, int k, int n, int length) {
  if (k < 1 || k > 3) throw Error(ErrorKind::kArgument, "shift k must be 1, 2 or 3");
  if (n < 3 || n > 4) throw Error(ErrorKind::kArgument, "pair count n must be 3 or 4");
  if (length < k + 1) {
    throw Error(ErrorKind::kArgument, "length " + std::to_string(length) +
                                          " cannot hold an object shifted by " + std::to_string(k));
  }
  Rng rng(mix_seed(seed, 0xA5C));
  auto draw = [&] {
    int size = uniform_int(rng, 1, length - k);
    int start = uniform_int(rng, 0, length - k - size);
    int color = uniform_int(rng, 1, 9);
    Sequence seq(length, 0);
    std::fill(seq.begin() + start, seq.begin() + start + size, color);
    return seq;
  };
  std::set<Sequence> seen;
  std::vector<Sequence> inputs;
  for (int attempts = 0; static_cast<int>(inputs.size()) < n + 1; ++attempts) {
    if (attempts > 10000) {
      throw Error(ErrorKind::kArgument, "geometry too small for distinct pairs");
    }
    Sequence s = draw();
    if (seen.insert(s).second) inputs.push_back(std::move(s));
  }
  ArcInstance inst;
  inst.k = k;
  for (int i = 0; i < n; ++i) inst.pairs.emplace_back(inputs[i], shift_oracle(inputs[i], k));
  inst.target_input = inputs[n];
  inst.gold_output = shift_oracle(inst.target_input, k);
  return inst;
}

namespace {

using u128 = unsigned __int128;

// ways[p][d]: completions from position p at depth d to a prefix of exactly
// `len` characters ending at depth >= 1.
std::vector<std::vector<u128>> dyck_ways(int len) {
  std::vector<std::vector<u128>> ways(len + 1, std::vector<u128>(len + 2, 0));
  for (int d = 1; d <= len; ++d) ways[len][d] = 1;
  for (int p = len - 1; p >= 0; --p) {
    for (int d = 0; d <= p; ++d) {
      u128 w = 4 * ways[p + 1][d + 1];
      if (d > 0) w += ways[p + 1][d - 1];
      ways[p][d] = w;
    }
  }
  return ways;
}

std::string sample_dyck_prefix(Rng& rng, int max_len,
                               const std::vector<std::vector<std::vector<u128>>>& tables) {
  u128 total = 0;
  for (int len = 1; len <= max_len; ++len) total += tables[len][0][0];
  u128 r = uniform_below(rng, total);
  int len = 1;
  for (; len <= max_len; ++len) {
    if (r < tables[len][0][0]) break;
    r -= tables[len][0][0];
  }
  const auto& ways = tables[len];
  std::string prefix;
  std::string open_stack;
  int depth = 0;
  for (int p = 0; p < len; ++p) {
    u128 w = ways[p][depth];
    u128 pick = uniform_below(rng, w);
    u128 per_open = ways[p + 1][depth + 1];
    if (pick < 4 * per_open) {
      auto type = static_cast<std::size_t>(pick / per_open);
      prefix += kOpeners[type];
      open_stack += kClosers[type];
      ++depth;
    } else {
      prefix += open_stack.back();
      open_stack.pop_back();
      --depth;
    }
  }
  return prefix;
}

}  // namespace

DyckInstance gen_dyck(std::uint64_t seed, int n, int max_len) {
  if (n < 1 || n > 5) throw Error(ErrorKind::kArgument, "pair count n must be in [1, 5]");
  if (max_len < 2 || max_len > 40) throw Error(ErrorKind::kArgument, "max_len must be in [2, 40]");
  std::vector<std::vector<std::vector<u128>>> tables(max_len + 1);
  for (int len = 1; len <= max_len; ++len) tables[len] = dyck_ways(len);
  Rng rng(mix_seed(seed, 0xD1C));
  std::set<std::string> seen;
  std::vector<std::string> prefixes;
  for (int attempts = 0; static_cast<int>(prefixes.size()) < n + 1; ++attempts) {
    if (attempts > 10000) throw Error(ErrorKind::kArgument, "could not draw distinct prefixes");
    std::string p = sample_dyck_prefix(rng, max_len, tables);
    if (seen.insert(p).second) prefixes.push_back(std::move(p));
  }
  DyckInstance inst;
  for (int i = 0; i < n; ++i) inst.pairs.emplace_back(prefixes[i], dyck_oracle(prefixes[i]));
  inst.target_prefix = prefixes[n];
  inst.gold_closing = dyck_oracle(inst.target_prefix);
  return inst;
}

// ---------------------------------------------------------------------------
// validation

namespace {

void check_sequence(const Sequence& seq, const char* what) {
  if (seq.empty()) throw Error(ErrorKind::kArgument, std::string(what) + " is empty");
  for (int v : seq) {
    if (v < 0 || v > 9) throw Error(ErrorKind::kArgument, std::string(what) + " has value outside [0, 9]");
  }
}

struct Validator {
  void operator()(const ArcInstance& a) const {
    if (a.n() < 3 || a.n() > 4) throw Error(ErrorKind::kArgument, "ARC instances need 3 or 4 pairs");
    if (a.k < 1 || a.k > 3) throw Error(ErrorKind::kArgument, "ARC shift must be 1, 2 or 3");
    check_sequence(a.target_input, "target");
    check_sequence(a.gold_output, "gold");
    const std::size_t len = a.target_input.size();
    for (std::size_t i = 0; i < a.pairs.size(); ++i) {
      const auto& [in, out] = a.pairs[i];
      check_sequence(in, "pair input");
      check_sequence(out, "pair output");
      if (in.size() != len || out.size() != len) {
        throw Error(ErrorKind::kArgument, "pair " + std::to_string(i) + " length differs from target");
      }
      if (shift_oracle(in, a.k) != out) {
        throw Error(ErrorKind::kArgument, "pair " + std::to_string(i) + " is not a shift by " +
                                              std::to_string(a.k));
      }
    }
    if (a.gold_output.size() != len || shift_oracle(a.target_input, a.k) != a.gold_output) {
      throw Error(ErrorKind::kArgument, "gold is not the shifted target");
    }
  }
  void operator()(const DyckInstance& d) const {
    if (d.n() < 1 || d.n() > 5) throw Error(ErrorKind::kArgument, "Dyck instances need 1 to 5 pairs");
    for (std::size_t i = 0; i < d.pairs.size(); ++i) {
      const auto& [prefix, closing] = d.pairs[i];
      if (prefix.empty() || closing.empty() || dyck_oracle(prefix) != closing) {
        throw Error(ErrorKind::kArgument, "pair " + std::to_string(i) + " closing is wrong");
      }
    }
    if (d.target_prefix.empty() || d.gold_closing.empty() ||
        dyck_oracle(d.target_prefix) != d.gold_closing) {
      throw Error(ErrorKind::kArgument, "gold is not the closing of the target");
    }
  }
  void operator()(const PropertyInstance& p) const {
    if (p.smiles.empty()) throw Error(ErrorKind::kArgument, "empty SMILES");
  }
  void operator()(const EmojiInstance& e) const {
    if (e.emoji.empty()) throw Error(ErrorKind::kArgument, "empty emoji key");
    for (double r : e.human_ratings) {
      if (!(r >= 0.0 && r <= 1.0)) throw Error(ErrorKind::kArgument, "emoji rating outside [0, 1]");
    }
  }
  void operator()(const TableInstance& t) const {
    converters::linearize_table(t.table_raw);
    if (t.question_or_claim.empty()) throw Error(ErrorKind::kArgument, "empty question or claim");
    if (t.subtask == TableInstance::Subtask::kQa && t.answers.empty()) {
      throw Error(ErrorKind::kArgument, "table QA instance has no gold answers");
    }
  }
  void operator()(const TweetInstance& t) const {
    if (t.text.empty()) throw Error(ErrorKind::kArgument, "empty tweet");
    auto [a, b] = label_words(t.subtask == TweetInstance::Subtask::kSentiment ? TaskId::kSentiment
                                                                              : TaskId::kStance);
    if (t.label != a && t.label != b) {
      throw Error(ErrorKind::kArgument, "label '" + t.label + "' is not " + std::string(a) + "/" +
                                            std::string(b));
    }
  }
};

}  // namespace

void validate(const Instance& instance) { std::visit(Validator{}, instance); }

// ---------------------------------------------------------------------------
// answers

std::pair<std::string_view, std::string_view> label_words(TaskId task) {
  switch (task) {
    case TaskId::kProperty: return {"yes", "no"};
    case TaskId::kTabFact: return {"true", "false"};
    case TaskId::kSentiment: return {"positive", "negative"};
    case TaskId::kStance: return {"favor", "against"};
    default: break;
  }
  throw Error(ErrorKind::kArgument, std::string("task ") + to_string(task) + " is not binary");
}

std::string format_sequence(std::span<const int> seq) {
  std::string out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i > 0) out += ',';
    out += static_cast<char>('0' + seq[i]);
  }
  return out;
}

std::string describe_brackets(std::string_view brackets) {
  return text::join(converters::name_brackets(brackets), ", ");
}

Answer gold_answer(const Instance& instance) {
  struct Visitor {
    Answer operator()(const ArcInstance& a) const { return a.gold_output; }
    Answer operator()(const DyckInstance& d) const { return d.gold_closing; }
    Answer operator()(const PropertyInstance& p) const { return std::string(p.label ? "yes" : "no"); }
    Answer operator()(const EmojiInstance& e) const {
      EmotionScores scores;
      for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = e.human_ratings[i];
      return scores;
    }
    Answer operator()(const TableInstance& t) const {
      if (t.subtask == TableInstance::Subtask::kQa) return t.answers.front();
      return std::string(t.label ? "true" : "false");
    }
    Answer operator()(const TweetInstance& t) const { return t.label; }
  };
  return std::visit(Visitor{}, instance);
}

std::string gold_response(const Instance& instance, Mode mode) {
  const bool language_space = mode == Mode::kS2lSubstitute;
  struct Visitor {
    bool language_space;
    std::string operator()(const ArcInstance& a) const {
      return language_space ? converters::describe_sequence(a.gold_output)
                            : format_sequence(a.gold_output);
    }
    std::string operator()(const DyckInstance& d) const {
      return language_space ? describe_brackets(d.gold_closing) : d.gold_closing;
    }
    std::string operator()(const PropertyInstance& p) const { return p.label ? "Yes" : "No"; }
    std::string operator()(const EmojiInstance& e) const {
      std::string out;
      for (std::size_t i = 0; i < kEmotions.size(); ++i) {
        if (i > 0) out += ", ";
        out += std::string(kEmotions[i]) + ": " + format_real(e.human_ratings[i]);
      }
      return out;
    }
    std::string operator()(const TableInstance& t) const {
      if (t.subtask == TableInstance::Subtask::kQa) return t.answers.front();
      return t.label ? "True" : "False";
    }
    std::string operator()(const TweetInstance& t) const { return capitalize(t.label); }
  };
  return "The answer is " + std::visit(Visitor{language_space}, instance) + ".";
}

// ---------------------------------------------------------------------------
// extraction

namespace {

struct Candidate {
  std::size_t end = 0;
  std::size_t length = 0;
};

bool later(const Candidate& a, const Candidate& b) {
  return a.end != b.end ? a.end > b.end : a.length > b.length;
}

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// Last comma-separated run of single digits, e.g. "0,0,1".
std::optional<std::pair<Sequence, Candidate>> last_digit_list(std::string_view s) {
  auto lone_digit = [&](std::size_t i) {
    return i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])) &&
           (i == 0 || !is_alnum(s[i - 1])) && (i + 1 >= s.size() || !is_alnum(s[i + 1]));
  };
  std::optional<std::pair<Sequence, Candidate>> best;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!lone_digit(i) || (i >= 1 && (s[i - 1] == '.' || s[i - 1] == '-'))) {
      ++i;
      continue;
    }
    Sequence seq{s[i] - '0'};
    std::size_t start = i;
    std::size_t end = i + 1;
    while (true) {
      std::size_t j = end;
      while (j < s.size() && s[j] == ' ') ++j;
      if (j >= s.size() || s[j] != ',') break;
      ++j;
      while (j < s.size() && s[j] == ' ') ++j;
      if (!lone_digit(j)) break;
      seq.push_back(s[j] - '0');
      end = j + 1;
    }
    // A digit run glued to a decimal point is a real number, not a sequence.
    if (!(end < s.size() - 1 && s[end] == '.' && std::isdigit(static_cast<unsigned char>(s[end + 1])))) {
      Candidate c{end, end - start};
      if (!best || !later(best->second, c)) best = {{std::move(seq), c}};
    }
    i = end;
  }
  return best;
}

const std::regex& description_regex() {
  static const std::regex re = [] {
    std::vector<std::string> words;
    for (int i = 1; i <= 20; ++i) words.push_back(converters::count_word(i));
    std::sort(words.begin(), words.end(),
              [](const auto& a, const auto& b) { return a.size() > b.size(); });
    std::string count = "(?:" + text::join(words, "|") + "|[1-9][0-9]+)";
    std::string run = count + " [0-9]s?";
    return std::regex("\\b" + run + "(?:, followed by " + run + ")*(?![0-9A-Za-z])");
  }();
  return re;
}

std::optional<std::pair<Sequence, Candidate>> last_description(std::string_view s) {
  std::optional<std::pair<Sequence, Candidate>> best;
  std::string lower = text::to_lower(s);
  for (auto it = std::sregex_iterator(lower.begin(), lower.end(), description_regex());
       it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    try {
      Sequence seq = converters::parse_sequence_description(m.str());
      Candidate c{static_cast<std::size_t>(m.position() + m.length()),
                  static_cast<std::size_t>(m.length())};
      if (!best || !later(best->second, c)) best = {{std::move(seq), c}};
    } catch (const Error&) {
      // Non-canonical phrasing; keep looking.
    }
  }
  return best;
}

Answer extract_arc(std::string_view s) {
  auto digits = last_digit_list(s);
  auto words = last_description(s);
  if (digits && words) return later(words->second, digits->second) ? words->first : digits->first;
  if (digits) return digits->first;
  if (words) return words->first;
  extraction_miss(TaskId::kArc, "no digit sequence or sequence description found");
}

std::optional<std::pair<std::string, Candidate>> last_bracket_run(std::string_view s) {
  std::optional<std::pair<std::string, Candidate>> best;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!is_bracket(s[i])) {
      ++i;
      continue;
    }
    std::string run;
    std::size_t start = i;
    std::size_t end = i;
    std::size_t j = i;
    while (j < s.size() && (is_bracket(s[j]) || s[j] == ' ')) {
      if (is_bracket(s[j])) {
        run += s[j];
        end = j + 1;
      }
      ++j;
    }
    Candidate c{end, end - start};
    if (!best || !later(best->second, c)) best = {{run, c}};
    i = j;
  }
  return best;
}

std::optional<std::pair<std::string, Candidate>> last_name_run(std::string_view s) {
  std::string lower = text::to_lower(s);
  auto names = converters::all_bracket_names();
  std::sort(names.begin(), names.end(),
            [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
  auto match_at = [&](std::size_t i) -> const std::pair<std::string, char>* {
    if (i > 0 && is_alnum(lower[i - 1])) return nullptr;
    for (const auto& entry : names) {
      if (lower.compare(i, entry.first.size(), entry.first) == 0) {
        std::size_t after = i + entry.first.size();
        if (after < lower.size() && is_alnum(lower[after])) continue;
        return &entry;
      }
    }
    return nullptr;
  };
  auto skip_separators = [&](std::size_t j) {
    while (true) {
      while (j < lower.size() && (lower[j] == ' ' || lower[j] == ',' || lower[j] == ';' ||
                                  lower[j] == '\n' || lower[j] == '\t')) {
        ++j;
      }
      if (lower.compare(j, 4, "and ") == 0) {
        j += 4;
        continue;
      }
      if (lower.compare(j, 5, "then ") == 0) {
        j += 5;
        continue;
      }
      return j;
    }
  };
  std::optional<std::pair<std::string, Candidate>> best;
  std::size_t i = 0;
  while (i < lower.size()) {
    const auto* first = match_at(i);
    if (!first) {
      ++i;
      continue;
    }
    std::vector<std::string> run{first->first};
    std::size_t start = i;
    std::size_t end = i + first->first.size();
    while (true) {
      std::size_t j = skip_separators(end);
      const auto* next = j < lower.size() ? match_at(j) : nullptr;
      if (!next) break;
      run.push_back(next->first);
      end = j + next->first.size();
    }
    Candidate c{end, end - start};
    if (!best || !later(best->second, c)) best = {{converters::brackets_from_names(run), c}};
    i = end;
  }
  return best;
}

Answer extract_dyck(std::string_view s) {
  auto symbols = last_bracket_run(s);
  auto names = last_name_run(s);
  if (symbols && names) return later(names->second, symbols->second) ? names->first : symbols->first;
  if (symbols) return symbols->first;
  if (names) return names->first;
  extraction_miss(TaskId::kDyck, "no brackets or bracket names found");
}

Answer extract_label(TaskId task, std::string_view s) {
  auto [a, b] = label_words(task);
  std::string lower = text::to_lower(s);
  std::optional<std::size_t> best_pos;
  std::string best;
  for (std::string_view word : {a, b}) {
    std::size_t pos = lower.rfind(word);
    while (pos != std::string::npos) {
      bool left_ok = pos == 0 || !is_alnum(lower[pos - 1]);
      std::size_t after = pos + word.size();
      bool right_ok = after >= lower.size() || !is_alnum(lower[after]);
      if (left_ok && right_ok) break;
      pos = pos == 0 ? std::string::npos : lower.rfind(word, pos - 1);
    }
    if (pos == std::string::npos) continue;
    if (!best_pos || pos > *best_pos) {
      best_pos = pos;
      best = std::string(word);
    }
  }
  if (!best_pos) extraction_miss(task, "no label word found");
  return best;
}

// Real numbers in order of appearance with their offsets.
std::vector<std::pair<std::size_t, double>> scan_numbers(std::string_view s) {
  std::vector<std::pair<std::size_t, double>> out;
  std::size_t i = 0;
  while (i < s.size()) {
    bool digit_here = std::isdigit(static_cast<unsigned char>(s[i]));
    bool dot_digit = s[i] == '.' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1]));
    if (!(digit_here || dot_digit) || (i > 0 && std::isalpha(static_cast<unsigned char>(s[i - 1])))) {
      ++i;
      continue;
    }
    std::size_t start = i;
    if (start > 0 && s[start - 1] == '-') --start;
    std::size_t end = i;
    while (end < s.size() && std::isdigit(static_cast<unsigned char>(s[end]))) ++end;
    if (end < s.size() && s[end] == '.' && end + 1 < s.size() &&
        std::isdigit(static_cast<unsigned char>(s[end + 1]))) {
      ++end;
      while (end < s.size() && std::isdigit(static_cast<unsigned char>(s[end]))) ++end;
    }
    if (end < s.size() && (s[end] == 'e' || s[end] == 'E')) {
      std::size_t e = end + 1;
      if (e < s.size() && (s[e] == '-' || s[e] == '+')) ++e;
      if (e < s.size() && std::isdigit(static_cast<unsigned char>(s[e]))) {
        while (e < s.size() && std::isdigit(static_cast<unsigned char>(s[e]))) ++e;
        end = e;
      }
    }
    double value = 0;
    auto res = std::from_chars(s.data() + start, s.data() + end, value);
    if (res.ec == std::errc()) out.emplace_back(start, value);
    i = end;
  }
  return out;
}

Answer extract_emoji(std::string_view s) {
  std::string lower = text::to_lower(s);
  EmotionScores scores;
  bool labeled = false;
  auto numbers = scan_numbers(s);
  for (std::size_t e = 0; e < kEmotions.size(); ++e) {
    std::string_view name = kEmotions[e];
    std::size_t pos = lower.rfind(name);
    while (pos != std::string::npos && pos > 0 && is_alnum(lower[pos - 1])) {
      pos = lower.rfind(name, pos - 1);
    }
    if (pos == std::string::npos) continue;
    std::size_t j = pos + name.size();
    while (j < lower.size() && (lower[j] == ' ' || lower[j] == ':' || lower[j] == '=' ||
                                lower[j] == '-' || lower[j] == '*' || lower[j] == '\t')) {
      ++j;
    }
    for (const auto& [offset, value] : numbers) {
      if (offset == j || (offset + 1 == j && lower[offset] == '-')) {
        scores[e] = std::clamp(value, 0.0, 1.0);
        labeled = true;
        break;
      }
    }
  }
  if (!labeled) {
    std::size_t take = std::min<std::size_t>(numbers.size(), kEmotions.size());
    std::size_t first = numbers.size() - take;
    for (std::size_t e = 0; e < take; ++e) scores[e] = std::clamp(numbers[first + e].second, 0.0, 1.0);
  }
  if (std::none_of(scores.begin(), scores.end(), [](const auto& v) { return v.has_value(); })) {
    extraction_miss(TaskId::kEmoji, "no emotion scores found");
  }
  return scores;
}

Answer extract_table_answer(std::string_view s) {
  std::string lower = text::to_lower(s);
  std::size_t marker = lower.rfind("answer:");
  std::string_view answer;
  if (marker != std::string::npos) {
    answer = s.substr(marker + 7);
    answer = answer.substr(0, answer.find('\n'));
    answer = text::trim(answer);
  } else {
    auto lines = text::split(s, "\n");
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
      if (!text::trim(*it).empty()) {
        answer = text::trim(*it);
        break;
      }
    }
    if (text::starts_with_ci(answer, "the answer is ")) answer = text::trim(answer.substr(14));
  }
  if (!answer.empty() && answer.back() == '.') answer.remove_suffix(1);
  answer = text::trim(answer);
  if (answer.empty()) extraction_miss(TaskId::kTableQa, "empty answer");
  return std::string(answer);
}

}  // namespace

Answer extract_answer(TaskId task, std::string_view raw_response) {
  switch (task) {
    case TaskId::kArc: return extract_arc(raw_response);
    case TaskId::kDyck: return extract_dyck(raw_response);
    case TaskId::kEmoji: return extract_emoji(raw_response);
    case TaskId::kTableQa: return extract_table_answer(raw_response);
    case TaskId::kProperty:
    case TaskId::kTabFact:
    case TaskId::kSentiment:
    case TaskId::kStance: return extract_label(task, raw_response);
  }
  extraction_miss(task, "unknown task");
}

// ---------------------------------------------------------------------------
// prompts

namespace {

class ProblemBuilder {
 public:
  ProblemBuilder(TaskId task, SpanKind kind) : kind_(kind) { problem_.task_id = to_string(task); }

  // Appends a placeholder for a new span.
  ProblemBuilder& span(std::string raw) {
    std::string id = "s" + std::to_string(problem_.spans.size() + 1);
    problem_.template_text += "{" + id + "}";
    problem_.spans.push_back({id, std::move(raw), kind_, id});
    return *this;
  }
  ProblemBuilder& literal(std::string_view text) {
    problem_.template_text += escape_template(text);
    return *this;
  }
  ProblemBuilder& meta(std::string key, std::string value) {
    problem_.meta[std::move(key)] = std::move(value);
    return *this;
  }
  Problem done(std::string gold) {
    problem_.gold = std::move(gold);
    return std::move(problem_);
  }

 private:
  SpanKind kind_;
  Problem problem_;
};

const char* property_question(PropertyDataset dataset) {
  switch (dataset) {
    case PropertyDataset::kBace: return "Inhibitor of human beta-secretase 1 (BACE-1): Yes or No?";
    case PropertyDataset::kBbbp: return "Blood-brain barrier penetration: Yes or No?";
    case PropertyDataset::kTox21: return "Toxicity: Yes or No?";
  }
  return "Toxicity: Yes or No?";
}

}  // namespace

Problem to_problem(const Instance& instance, const TaskOptions& options) {
  const TaskId task = task_of(instance);
  ProblemBuilder b(task, span_kind(task));
  struct Visitor {
    ProblemBuilder& b;
    const TaskOptions& options;

    Problem operator()(const ArcInstance& a) {
      b.literal(
          "Each input sequence below is transformed into its output sequence by the same rule. "
          "Infer the rule and give the output sequence for the last input.\n\n");
      for (const auto& [in, out] : a.pairs) {
        b.literal("Input: ").span(format_sequence(in)).literal(" Output: ").span(format_sequence(out));
        b.literal("\n");
      }
      b.literal("Input: ").span(format_sequence(a.target_input)).literal(" Output:");
      b.meta("n", std::to_string(a.n())).meta("k", std::to_string(a.k));
      return b.done(format_sequence(a.gold_output));
    }
    Problem operator()(const DyckInstance& d) {
      b.literal(
          "Each input below is a sequence of brackets followed by its output. "
          "Deduce the output for the last input.\n\n");
      for (const auto& [prefix, closing] : d.pairs) {
        b.literal("Input: ").span(prefix).literal(" Output: ").span(closing).literal("\n");
      }
      b.literal("Input: ").span(d.target_prefix).literal(" Output:");
      b.meta("n", std::to_string(d.n()));
      return b.done(d.gold_closing);
    }
    Problem operator()(const PropertyInstance& p) {
      b.literal("SMILES: ").span(p.smiles).literal("\n").literal(property_question(p.dataset));
      b.meta("dataset", to_string(p.dataset));
      return b.done(p.label ? "yes" : "no");
    }
    Problem operator()(const EmojiInstance& e) {
      b.literal("Emoji: ").span(converters::emoji_from_key(e.emoji));
      b.literal(
          "\nScore this emoji from 0 to 1 for each of the eight basic emotions: anger, "
          "anticipation, disgust, fear, joy, sadness, surprise, trust. Reply with the eight "
          "scores in that order.");
      std::string gold;
      for (std::size_t i = 0; i < e.human_ratings.size(); ++i) {
        if (i > 0) gold += ',';
        gold += format_real(e.human_ratings[i]);
      }
      b.meta("codepoints", e.emoji);
      return b.done(gold);
    }
    Problem operator()(const TableInstance& t) {
      b.literal("Table:\n").span(t.table_raw).literal("\n\n");
      if (t.subtask == TableInstance::Subtask::kQa) {
        b.literal("Question: " + t.question_or_claim + "\nEnd your reply with \"Answer: <answer>\".");
        return b.done(text::join(t.answers, "|"));
      }
      b.literal("Statement: " + t.question_or_claim + "\nStatement: True or False?");
      return b.done(t.label ? "true" : "false");
    }
    Problem operator()(const TweetInstance& t) {
      b.literal("Text: ").span(t.text).literal("\n");
      if (t.subtask == TweetInstance::Subtask::kSentiment) {
        b.literal("Text: Positive or Negative?");
      } else {
        b.literal("Stance towards " + options.stance_target + ": Favor or Against?");
        b.meta("target", options.stance_target);
      }
      return b.done(t.label);
    }
  };
  return std::visit(Visitor{b, options}, instance);
}

Query build_task_prompt(const Instance& instance, const MethodConfig& method,
                        const std::vector<Rendering>& renderings, const TaskOptions& options) {
  return build_query(to_problem(instance, options), method, renderings);
}

bool has_tool_converter(SpanKind kind) {
  return kind != SpanKind::kTweet && kind != SpanKind::kGeneric;
}

namespace {

Sequence parse_sequence_text(std::string_view raw) {
  Sequence seq;
  for (std::string_view cell : text::split(raw, ",")) {
    cell = text::trim(cell);
    if (cell.size() != 1 || !std::isdigit(static_cast<unsigned char>(cell[0]))) {
      throw Error(ErrorKind::kArgument, "'" + std::string(raw) + "' is not a digit sequence");
    }
    seq.push_back(cell[0] - '0');
  }
  return seq;
}

}  // namespace

Rendering render_with_tool(const SymbolSpan& span, const ToolTables& tables) {
  Rendering r;
  r.span_id = span.id;
  switch (span.kind) {
    case SpanKind::kSequence:
      r.text = converters::describe_sequence(parse_sequence_text(span.raw_text));
      r.method = ConversionMethod::kRule;
      r.source_label = "rule:describe_sequence";
      return r;
    case SpanKind::kBrackets:
      r.text = describe_brackets(span.raw_text);
      r.method = ConversionMethod::kRule;
      r.source_label = "rule:name_brackets";
      return r;
    case SpanKind::kTable:
      r.text = converters::linearize_table(span.raw_text);
      r.method = ConversionMethod::kRule;
      r.source_label = "rule:linearize_table";
      return r;
    case SpanKind::kSmiles:
      r.text = converters::lookup_translate(span.raw_text, tables.smiles);
      r.method = ConversionMethod::kLookup;
      r.source_label = "lookup:" + tables.smiles.source_path();
      return r;
    case SpanKind::kEmoji:
      r.text = converters::emoji_name(span.raw_text, tables.emoji);
      r.method = ConversionMethod::kLookup;
      r.source_label = "lookup:" + tables.emoji.source_path();
      return r;
    case SpanKind::kTweet:
    case SpanKind::kGeneric:
      break;
  }
  throw Error(ErrorKind::kArgument, std::string("no tool converter for ") + to_string(span.kind) + " spans");
}

// ---------------------------------------------------------------------------
// datasets

std::string fixture_file_name(TaskId task) {
  switch (task) {
    case TaskId::kArc: return "arc.jsonl";
    case TaskId::kDyck: return "dyck.jsonl";
    case TaskId::kProperty: return "property.csv";
    case TaskId::kEmoji: return "emoji.tsv";
    case TaskId::kTableQa: return "table_qa.jsonl";
    case TaskId::kTabFact: return "tabfact.jsonl";
    case TaskId::kSentiment: return "sentiment.csv";
    case TaskId::kStance: return "stance.csv";
  }
  return "";
}

namespace {

[[noreturn]] void load_fail(const std::filesystem::path& path, std::size_t record, const std::string& what) {
  Error err(ErrorKind::kLoad, path.string() + ": record " + std::to_string(record) + ": " + what);
  err.index = record;
  throw err;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open dataset " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// RFC 4180 style: quoted fields may hold commas, quotes ("") and newlines.
struct CsvRecord {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

std::vector<CsvRecord> parse_csv(const std::string& content, const std::filesystem::path& path) {
  std::vector<CsvRecord> records;
  CsvRecord current;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t line = 1;
  current.line = 1;
  auto end_record = [&] {
    current.fields.push_back(std::move(field));
    field.clear();
    bool blank = current.fields.size() == 1 && current.fields[0].empty();
    if (!blank) records.push_back(std::move(current));
    current = CsvRecord{};
    current.line = line;
    field_started = false;
  };
  for (std::size_t i = 0; i < content.size(); ++i) {
    char c = content[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      current.fields.push_back(std::move(field));
      field.clear();
      field_started = false;
    } else if (c == '\n') {
      ++line;
      end_record();
    } else if (c == '\r') {
      continue;
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) load_fail(path, current.line, "unterminated quoted field");
  if (!field.empty() || !current.fields.empty()) end_record();
  return records;
}

std::map<std::string, std::size_t> csv_header(const CsvRecord& header,
                                              std::initializer_list<const char*> required,
                                              const std::filesystem::path& path) {
  std::map<std::string, std::size_t> columns;
  for (std::size_t i = 0; i < header.fields.size(); ++i) {
    columns[text::to_lower(text::trim(header.fields[i]))] = i;
  }
  for (const char* name : required) {
    if (!columns.count(name)) load_fail(path, header.line, std::string("header lacks column '") + name + "'");
  }
  return columns;
}

bool parse_bool_label(const std::string& raw, TaskId task, bool& out) {
  std::string v = text::to_lower(text::trim(raw));
  if (task == TaskId::kProperty) {
    if (v == "yes" || v == "1" || v == "true") return out = true, true;
    if (v == "no" || v == "0" || v == "false") return out = false, true;
    return false;
  }
  if (v == "true" || v == "1" || v == "entailed" || v == "yes") return out = true, true;
  if (v == "false" || v == "0" || v == "refuted" || v == "no") return out = false, true;
  return false;
}

Sequence json_sequence(const json& j) {
  if (j.is_string()) return parse_sequence_text(j.get<std::string>());
  Sequence seq;
  for (const auto& v : j) seq.push_back(v.get<int>());
  return seq;
}

template <typename Value>
std::vector<std::pair<Value, Value>> json_pairs(const json& pairs, Value (*convert)(const json&)) {
  std::vector<std::pair<Value, Value>> out;
  for (const auto& p : pairs) {
    if (p.is_object()) {
      out.emplace_back(convert(p.at("input")), convert(p.at("output")));
    } else {
      if (p.size() != 2) throw Error(ErrorKind::kArgument, "pair must have two elements");
      out.emplace_back(convert(p.at(0)), convert(p.at(1)));
    }
  }
  return out;
}

std::string json_text(const json& j) { return j.get<std::string>(); }

Instance arc_from_json(const json& j) {
  ArcInstance a;
  a.pairs = json_pairs<Sequence>(j.at("pairs"), &json_sequence);
  a.target_input = json_sequence(j.at("target"));
  a.gold_output = json_sequence(j.at("gold"));
  if (j.contains("k")) {
    a.k = j.at("k").get<int>();
  } else {
    a.k = 0;
    for (int k = 1; k <= 3 && a.k == 0; ++k) {
      bool all = !a.pairs.empty();
      for (const auto& [in, out] : a.pairs) {
        try {
          if (shift_oracle(in, k) != out) all = false;
        } catch (const Error&) {
          all = false;
        }
      }
      if (all) a.k = k;
    }
    if (a.k == 0) throw Error(ErrorKind::kArgument, "pairs match no shift in 1..3");
  }
  return a;
}

Instance dyck_from_json(const json& j) {
  DyckInstance d;
  d.pairs = json_pairs<std::string>(j.at("pairs"), &json_text);
  d.target_prefix = j.at("target").get<std::string>();
  d.gold_closing = j.at("gold").get<std::string>();
  return d;
}

Instance table_from_json(const json& j, TaskId task) {
  TableInstance t;
  t.table_raw = j.at("table").get<std::string>();
  if (task == TaskId::kTableQa) {
    t.subtask = TableInstance::Subtask::kQa;
    t.question_or_claim = j.at("question").get<std::string>();
    const json& answers = j.at("answers");
    if (answers.is_string()) {
      t.answers.push_back(answers.get<std::string>());
    } else {
      for (const auto& a : answers) t.answers.push_back(a.is_string() ? a.get<std::string>() : a.dump());
    }
  } else {
    t.subtask = TableInstance::Subtask::kFact;
    t.question_or_claim = (j.contains("claim") ? j.at("claim") : j.at("statement")).get<std::string>();
    const json& label = j.at("label");
    if (label.is_boolean()) {
      t.label = label.get<bool>();
    } else if (label.is_number_integer()) {
      int v = label.get<int>();
      if (v != 0 && v != 1) throw Error(ErrorKind::kArgument, "label must be 0 or 1");
      t.label = v == 1;
    } else if (!parse_bool_label(label.get<std::string>(), task, t.label)) {
      throw Error(ErrorKind::kArgument, "unrecognized label");
    }
  }
  return t;
}

std::vector<Instance> load_jsonl(const std::filesystem::path& path, TaskId task) {
  std::vector<Instance> out;
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) load_fail(path, line_no, "not a JSON object");
    Instance instance;
    try {
      switch (task) {
        case TaskId::kArc: instance = arc_from_json(j); break;
        case TaskId::kDyck: instance = dyck_from_json(j); break;
        default: instance = table_from_json(j, task); break;
      }
    } catch (const json::exception& e) {
      load_fail(path, line_no, std::string("malformed record: ") + e.what());
    } catch (const Error& e) {
      load_fail(path, line_no, std::string("rejected record: ") + e.what());
    }
    try {
      validate(instance);
    } catch (const Error& e) {
      load_fail(path, line_no, std::string("rejected record: ") + e.what());
    }
    out.push_back(std::move(instance));
  }
  return out;
}

std::vector<Instance> load_property(const std::filesystem::path& path, const LoadOptions& options) {
  auto records = parse_csv(read_file(path), path);
  std::vector<Instance> out;
  if (records.empty()) return out;
  auto cols = csv_header(records.front(), {"smiles", "label"}, path);
  auto dataset_col = cols.find("dataset");
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() != records.front().fields.size()) load_fail(path, rec.line, "wrong field count");
    PropertyInstance p;
    p.smiles = std::string(text::trim(rec.fields[cols["smiles"]]));
    if (!parse_bool_label(rec.fields[cols["label"]], TaskId::kProperty, p.label)) {
      load_fail(path, rec.line, "rejected record: label must be yes/no");
    }
    p.dataset = options.property_dataset;
    if (dataset_col != cols.end()) {
      try {
        p.dataset = parse_property_dataset(text::trim(rec.fields[dataset_col->second]));
      } catch (const Error& e) {
        load_fail(path, rec.line, std::string("rejected record: ") + e.what());
      }
    }
    try {
      validate(p);
    } catch (const Error& e) {
      load_fail(path, rec.line, std::string("rejected record: ") + e.what());
    }
    out.emplace_back(std::move(p));
  }
  return out;
}

std::vector<Instance> load_tweets(const std::filesystem::path& path, TaskId task) {
  auto records = parse_csv(read_file(path), path);
  std::vector<Instance> out;
  if (records.empty()) return out;
  auto cols = csv_header(records.front(), {"text", "label"}, path);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() != records.front().fields.size()) load_fail(path, rec.line, "wrong field count");
    TweetInstance t;
    t.subtask = task == TaskId::kSentiment ? TweetInstance::Subtask::kSentiment
                                           : TweetInstance::Subtask::kStance;
    t.text = rec.fields[cols["text"]];
    t.label = text::to_lower(text::trim(rec.fields[cols["label"]]));
    if (t.label == "favour") t.label = "favor";
    try {
      validate(t);
    } catch (const Error& e) {
      load_fail(path, rec.line, std::string("rejected record: ") + e.what());
    }
    out.emplace_back(std::move(t));
  }
  return out;
}

std::vector<Instance> load_emoji(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<Instance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty() || line[0] == '#') continue;
    auto fields = text::split(line, "\t");
    if (line_no == 1 && text::to_lower(text::trim(fields[0])) == "codepoints") continue;
    if (fields.size() != 9) {
      load_fail(path, line_no, "expected 9 TAB-separated fields, got " + std::to_string(fields.size()));
    }
    EmojiInstance e;
    try {
      e.emoji = converters::normalize_emoji_key(fields[0]);
    } catch (const Error& err) {
      load_fail(path, line_no, err.what());
    }
    for (std::size_t i = 0; i < 8; ++i) {
      std::string_view cell = text::trim(fields[i + 1]);
      double value = 0;
      auto res = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
        load_fail(path, line_no, "rating '" + std::string(cell) + "' is not a number");
      }
      e.human_ratings[i] = value;
    }
    try {
      validate(e);
    } catch (const Error& err) {
      load_fail(path, line_no, std::string("rejected record: ") + err.what());
    }
    out.emplace_back(std::move(e));
  }
  return out;
}

}  // namespace

std::vector<Instance> load_dataset(const std::filesystem::path& path, TaskId task,
                                   const LoadOptions& options) {
  switch (task) {
    case TaskId::kArc:
    case TaskId::kDyck:
    case TaskId::kTableQa:
    case TaskId::kTabFact: return load_jsonl(path, task);
    case TaskId::kProperty: return load_property(path, options);
    case TaskId::kEmoji: return load_emoji(path);
    case TaskId::kSentiment:
    case TaskId::kStance: return load_tweets(path, task);
  }
  return {};
}

}  // namespace s2l::tasks
