#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace s2l {

enum class SpanKind { kSequence, kBrackets, kSmiles, kEmoji, kTable, kTweet, kGeneric };

const char* to_string(SpanKind kind);

// One symbol occurrence inside a problem. `location` is the placeholder key
// (without braces) it fills in the problem template.
struct SymbolSpan {
  std::string id;
  std::string raw_text;
  SpanKind kind = SpanKind::kGeneric;
  std::string location;
};

enum class ConversionMethod { kLlm, kRule, kLookup };

const char* to_string(ConversionMethod method);

struct Rendering {
  std::string span_id;
  std::string text;
  ConversionMethod method = ConversionMethod::kRule;
  std::string source_label;
};

struct Problem {
  std::string task_id;
  std::string template_text;
  std::vector<SymbolSpan> spans;
  std::string gold;
  std::map<std::string, std::string> meta;
};

enum class Mode { kZeroShot, kZeroShotCot, kS2lSubstitute, kS2lConcatenate };
enum class Conversion { kWithModel, kWithTool };

const char* to_string(Mode mode);
const char* to_string(Conversion conversion);

inline constexpr std::string_view kDefaultCotSuffix = "Let's think step by step.";

struct MethodConfig {
  Mode mode = Mode::kZeroShot;
  // Only meaningful for the two s2l modes, where it is required.
  std::optional<Conversion> conversion;
  std::string cot_suffix{kDefaultCotSuffix};

  bool is_s2l() const { return mode == Mode::kS2lSubstitute || mode == Mode::kS2lConcatenate; }
  // Stable short id: zs, zsc, s2l-sub-model, s2l-cat-tool, ...
  std::string label() const;
  void validate() const;

  friend bool operator==(const MethodConfig&, const MethodConfig&) = default;
};

// Parses a label produced by MethodConfig::label().
MethodConfig parse_method_label(std::string_view label);

enum class Role { kSystem, kUser, kAssistant };

const char* to_string(Role role);

struct ChatMessage {
  Role role = Role::kUser;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct Query {
  std::vector<ChatMessage> messages;
  MethodConfig config;
  std::vector<std::string> rendering_ids;

  // Content of the last user message.
  const std::string& user_text() const;
};

// Template handling. Placeholders are `{name}` with name matching
// [A-Za-z_][A-Za-z0-9_]*; `{{` and `}}` are literal braces; any other brace
// is literal as well.
struct TemplatePiece {
  bool is_placeholder = false;
  std::string text;  // literal text, or placeholder key
};

std::vector<TemplatePiece> parse_template(std::string_view text);

// Escapes literal text so it can be embedded in a template verbatim.
std::string escape_template(std::string_view text);

// Checks the placeholder/span bijection and span invariants.
void validate_problem(const Problem& problem);

Query build_zero_shot(const Problem& problem, const MethodConfig& config);
Query integrate_substitute(const Problem& problem, const std::vector<Rendering>& renderings);
Query integrate_concatenate(const Problem& problem, const std::vector<Rendering>& renderings);

// The byte-exact concatenation surface: `raw (that is, rendering)`.
std::string concatenate_surface(std::string_view raw, std::string_view rendering);

// Dispatches on config.mode. Renderings are ignored for non-s2l modes.
Query build_query(const Problem& problem, const MethodConfig& config,
                  const std::vector<Rendering>& renderings);

}  // namespace s2l
