#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "s2l/converters.hpp"
#include "s2l/core.hpp"

namespace s2l::tasks {

enum class TaskId { kArc, kDyck, kProperty, kEmoji, kTableQa, kTabFact, kSentiment, kStance };

const char* to_string(TaskId task);
TaskId parse_task_id(std::string_view id);
const std::vector<TaskId>& all_tasks();
SpanKind span_kind(TaskId task);

using Sequence = std::vector<int>;

struct ArcInstance {
  std::vector<std::pair<Sequence, Sequence>> pairs;
  Sequence target_input;
  Sequence gold_output;
  int k = 1;

  std::size_t n() const { return pairs.size(); }
  friend bool operator==(const ArcInstance&, const ArcInstance&) = default;
};

struct DyckInstance {
  std::vector<std::pair<std::string, std::string>> pairs;  // (prefix, closing)
  std::string target_prefix;
  std::string gold_closing;

  std::size_t n() const { return pairs.size(); }
  friend bool operator==(const DyckInstance&, const DyckInstance&) = default;
};

enum class PropertyDataset { kBace, kBbbp, kTox21 };

const char* to_string(PropertyDataset dataset);
PropertyDataset parse_property_dataset(std::string_view name);

struct PropertyInstance {
  std::string smiles;
  bool label = false;
  PropertyDataset dataset = PropertyDataset::kTox21;
};

inline constexpr std::array<std::string_view, 8> kEmotions = {
    "anger", "anticipation", "disgust", "fear", "joy", "sadness", "surprise", "trust"};

struct EmojiInstance {
  std::string emoji;  // normalized `U+XXXX` key
  std::array<double, 8> human_ratings{};
};

struct TableInstance {
  enum class Subtask { kQa, kFact };
  std::string table_raw;
  std::string question_or_claim;
  std::vector<std::string> answers;  // QA only
  bool label = false;                // fact verification only
  Subtask subtask = Subtask::kQa;
};

struct TweetInstance {
  enum class Subtask { kSentiment, kStance };
  std::string text;
  std::string label;  // positive/negative or favor/against, lowercase
  Subtask subtask = Subtask::kSentiment;
};

using Instance = std::variant<ArcInstance, DyckInstance, PropertyInstance, EmojiInstance,
                              TableInstance, TweetInstance>;

TaskId task_of(const Instance& instance);

// Throws kArgument describing the first violated invariant.
void validate(const Instance& instance);

// ---- oracles and generators ----

Sequence shift_oracle(std::span<const int> seq, int k);
std::string dyck_oracle(std::string_view prefix);

ArcInstance gen_arc(std::uint64_t seed, int k, int n, int length);
// Prefixes are drawn uniformly from valid Dyck prefixes of length 1..max_len
// with at least one unmatched opener. max_len is capped at 40.
DyckInstance gen_dyck(std::uint64_t seed, int n, int max_len);

// ---- answers ----

using EmotionScores = std::array<std::optional<double>, 8>;
using Answer = std::variant<Sequence, std::string, EmotionScores>;

Answer gold_answer(const Instance& instance);

// Labels a binary task accepts, positive first.
std::pair<std::string_view, std::string_view> label_words(TaskId task);

// Canonical response "The answer is X." with X rendered in the answer space
// the mode asks for (language space for symbolic golds under substitution).
std::string gold_response(const Instance& instance, Mode mode);

// Throws kExtractionMiss when nothing parsable is found. Emoji answers may
// be partial: missing emotions stay empty.
Answer extract_answer(TaskId task, std::string_view raw_response);

std::string format_sequence(std::span<const int> seq);
std::string describe_brackets(std::string_view brackets);

// ---- prompts ----

struct TaskOptions {
  std::string stance_target = "Donald Trump";
};

Problem to_problem(const Instance& instance, const TaskOptions& options = {});

Query build_task_prompt(const Instance& instance, const MethodConfig& method,
                        const std::vector<Rendering>& renderings, const TaskOptions& options = {});

struct ToolTables {
  converters::NameTable emoji;
  converters::NameTable smiles;
};

// Deterministic rule/lookup conversion of one span. Throws kLookupMiss on a
// table miss and kArgument when the span kind has no tool converter.
Rendering render_with_tool(const SymbolSpan& span, const ToolTables& tables);
bool has_tool_converter(SpanKind kind);

// ---- datasets ----

struct LoadOptions {
  PropertyDataset property_dataset = PropertyDataset::kTox21;
};

std::vector<Instance> load_dataset(const std::filesystem::path& path, TaskId task,
                                   const LoadOptions& options = {});

// Default file name of the bundled fixture for a task, e.g. "arc.jsonl".
std::string fixture_file_name(TaskId task);

}  // namespace s2l::tasks
