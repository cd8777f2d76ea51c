#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace s2l::converters {

// Symbol key -> language text, loaded from a two-column UTF-8 TSV
// (`key<TAB>value`, `#` comment lines, no header). Immutable after load.
class NameTable {
 public:
  NameTable() = default;

  static NameTable load(const std::filesystem::path& path, bool case_sensitive = true);
  static NameTable from_entries(const std::vector<std::pair<std::string, std::string>>& entries,
                                bool case_sensitive = true, std::string source_path = {});

  std::optional<std::string> find(std::string_view key) const;
  std::size_t size() const { return entries_.size(); }
  bool case_sensitive() const { return case_sensitive_; }
  const std::string& source_path() const { return source_path_; }
  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
  std::string source_path_;
  bool case_sensitive_ = true;
};

struct Run {
  int value = 0;
  int count = 1;

  friend bool operator==(const Run&, const Run&) = default;
};

std::vector<Run> runs_of(std::span<const int> seq);

// "three 1s, followed by two 0s"
std::string describe_sequence(std::span<const int> seq);
std::vector<int> parse_sequence_description(std::string_view text);

// Count words used by the sequence grammar: "one".."twenty", digits above.
std::string count_word(int count);

enum class BracketNaming { kCanonical, kAlias };

std::vector<std::string> name_brackets(std::string_view s,
                                       BracketNaming naming = BracketNaming::kCanonical);
std::string brackets_from_names(const std::vector<std::string>& names);
// Canonical name for one bracket character, or nullopt.
std::optional<std::string_view> bracket_name(char c, BracketNaming naming = BracketNaming::kCanonical);
// Every accepted name (canonical and alias), lowercase.
const std::vector<std::pair<std::string, char>>& all_bracket_names();

std::string linearize_table(std::string_view raw, std::string_view cell_delim = "|",
                            std::string_view row_delim = "\n");

// Normalizes a grapheme or `U+XXXX[ U+YYYY...]` literal to the table key form:
// uppercase `U+` codepoints joined by single spaces.
std::string normalize_emoji_key(std::string_view grapheme_or_codepoint);
std::string emoji_name(std::string_view grapheme_or_codepoint, const NameTable& table);
// Encodes a normalized key back to UTF-8 text.
std::string emoji_from_key(std::string_view key);

std::string lookup_translate(std::string_view symbol, const NameTable& table);

}  // namespace s2l::converters
