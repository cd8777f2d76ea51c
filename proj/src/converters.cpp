#include "s2l/converters.hpp"

#include <array>
#include <cctype>
#include <cstdio>
#include <fstream>

#include "s2l/error.hpp"
#include "s2l/text.hpp"

namespace s2l::converters {

namespace {

constexpr std::array<std::string_view, 21> kCountWords = {
    "",        "one",     "two",       "three",    "four",     "five",    "six",
    "seven",   "eight",   "nine",      "ten",      "eleven",   "twelve",  "thirteen",
    "fourteen", "fifteen", "sixteen",  "seventeen", "eighteen", "nineteen", "twenty"};

constexpr std::string_view kRunSeparator = ", followed by ";

struct BracketEntry {
  char symbol;
  std::string_view canonical;
  std::string_view alias;
};

constexpr std::array<BracketEntry, 8> kBrackets = {{
    {'(', "open parenthesis", "open parenthesis"},
    {')', "close parenthesis", "close parenthesis"},
    {'[', "open square bracket", "open square bracket"},
    {']', "close square bracket", "close square bracket"},
    {'{', "open curly brace", "open curly brace"},
    {'}', "close curly brace", "close curly brace"},
    {'<', "open angle bracket", "less than sign"},
    {'>', "close angle bracket", "greater than sign"},
}};

[[noreturn]] void parse_fail(std::string_view text, std::size_t pos, const std::string& what) {
  Error err(ErrorKind::kParse, what + " at offset " + std::to_string(pos) + " in '" +
                                   std::string(text) + "'");
  err.position = pos;
  throw err;
}

std::vector<char32_t> decode_utf8(std::string_view s) {
  std::vector<char32_t> out;
  std::size_t i = 0;
  while (i < s.size()) {
    auto b0 = static_cast<unsigned char>(s[i]);
    int len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    } else {
      throw Error(ErrorKind::kArgument, "invalid UTF-8 lead byte at offset " + std::to_string(i));
    }
    if (i + len > s.size()) {
      throw Error(ErrorKind::kArgument, "truncated UTF-8 sequence at offset " + std::to_string(i));
    }
    for (int k = 1; k < len; ++k) {
      auto b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80) {
        throw Error(ErrorKind::kArgument,
                    "invalid UTF-8 continuation at offset " + std::to_string(i + k));
      }
      cp = (cp << 6) | (b & 0x3F);
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

void encode_utf8(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

std::string format_codepoint(char32_t cp) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "U+%04X", static_cast<unsigned>(cp));
  return buf;
}

std::string fold_key(std::string_view key, bool case_sensitive) {
  return case_sensitive ? std::string(key) : text::to_lower(key);
}

}  // namespace

NameTable NameTable::load(const std::filesystem::path& path, bool case_sensitive) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open name table " + path.string());
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      Error err(ErrorKind::kLoad, path.string() + ":" + std::to_string(line_no) + ": missing TAB");
      err.index = line_no;
      throw err;
    }
    entries.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  try {
    return from_entries(entries, case_sensitive, path.string());
  } catch (Error& e) {
    throw Error(ErrorKind::kLoad, path.string() + ": " + e.what());
  }
}

NameTable NameTable::from_entries(const std::vector<std::pair<std::string, std::string>>& entries,
                                  bool case_sensitive, std::string source_path) {
  NameTable table;
  table.case_sensitive_ = case_sensitive;
  table.source_path_ = std::move(source_path);
  for (const auto& [key, value] : entries) {
    if (key.empty()) throw Error(ErrorKind::kLoad, "empty key");
    if (value.empty()) throw Error(ErrorKind::kLoad, "empty value for key '" + key + "'");
    if (!table.entries_.emplace(fold_key(key, case_sensitive), value).second) {
      throw Error(ErrorKind::kLoad, "duplicate key '" + key + "'");
    }
  }
  return table;
}

std::optional<std::string> NameTable::find(std::string_view key) const {
  auto it = entries_.find(fold_key(key, case_sensitive_));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::vector<Run> runs_of(std::span<const int> seq) {
  std::vector<Run> runs;
  for (int v : seq) {
    if (!runs.empty() && runs.back().value == v) {
      ++runs.back().count;
    } else {
      runs.push_back({v, 1});
    }
  }
  return runs;
}

std::string count_word(int count) {
  if (count < 1) throw Error(ErrorKind::kArgument, "count must be positive");
  if (count < static_cast<int>(kCountWords.size())) return std::string(kCountWords[count]);
  return std::to_string(count);
}

std::string describe_sequence(std::span<const int> seq) {
  if (seq.empty()) throw Error(ErrorKind::kArgument, "cannot describe an empty sequence");
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (seq[i] < 0 || seq[i] > 9) {
      Error err(ErrorKind::kArgument, "value " + std::to_string(seq[i]) + " at index " +
                                          std::to_string(i) + " is outside [0, 9]");
      err.index = i;
      throw err;
    }
  }
  std::string out;
  bool first = true;
  for (const Run& run : runs_of(seq)) {
    if (!first) out += kRunSeparator;
    first = false;
    out += count_word(run.count);
    out += ' ';
    out += static_cast<char>('0' + run.value);
    if (run.count > 1) out += 's';
  }
  return out;
}

std::vector<int> parse_sequence_description(std::string_view text) {
  std::vector<int> seq;
  std::size_t pos = 0;
  int previous = -1;
  if (text.empty()) parse_fail(text, 0, "empty description");
  while (true) {
    // count
    std::size_t start = pos;
    int count = 0;
    if (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
      if (text[pos] == '0') parse_fail(text, pos, "count with leading zero");
      while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
        if (pos - start >= 6) parse_fail(text, start, "count too large");
        count = count * 10 + (text[pos] - '0');
        ++pos;
      }
      if (count <= 20) parse_fail(text, start, "counts up to twenty must be spelled out");
    } else {
      while (pos < text.size() && text[pos] >= 'a' && text[pos] <= 'z') ++pos;
      std::string_view word = text.substr(start, pos - start);
      for (std::size_t i = 1; i < kCountWords.size(); ++i) {
        if (word == kCountWords[i]) count = static_cast<int>(i);
      }
      if (count == 0) parse_fail(text, start, "expected a count word");
    }
    if (pos >= text.size() || text[pos] != ' ') parse_fail(text, pos, "expected a space");
    ++pos;
    if (pos >= text.size() || !std::isdigit(static_cast<unsigned char>(text[pos]))) {
      parse_fail(text, pos, "expected a digit value");
    }
    int value = text[pos] - '0';
    ++pos;
    if (count > 1) {
      if (pos >= text.size() || text[pos] != 's') parse_fail(text, pos, "expected plural 's'");
      ++pos;
    } else if (pos < text.size() && text[pos] == 's') {
      parse_fail(text, pos, "singular run must not take 's'");
    }
    if (value == previous) parse_fail(text, start, "adjacent runs share a value");
    previous = value;
    seq.insert(seq.end(), count, value);
    if (pos == text.size()) break;
    if (text.substr(pos, kRunSeparator.size()) != kRunSeparator) {
      parse_fail(text, pos, "expected ', followed by '");
    }
    pos += kRunSeparator.size();
    if (pos == text.size()) parse_fail(text, pos, "dangling separator");
  }
  return seq;
}

std::optional<std::string_view> bracket_name(char c, BracketNaming naming) {
  for (const auto& entry : kBrackets) {
    if (entry.symbol == c) return naming == BracketNaming::kCanonical ? entry.canonical : entry.alias;
  }
  return std::nullopt;
}

const std::vector<std::pair<std::string, char>>& all_bracket_names() {
  static const std::vector<std::pair<std::string, char>> names = [] {
    std::vector<std::pair<std::string, char>> out;
    for (const auto& entry : kBrackets) {
      out.emplace_back(std::string(entry.canonical), entry.symbol);
      if (entry.alias != entry.canonical) out.emplace_back(std::string(entry.alias), entry.symbol);
    }
    return out;
  }();
  return names;
}

std::vector<std::string> name_brackets(std::string_view s, BracketNaming naming) {
  std::vector<std::string> names;
  names.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto name = bracket_name(s[i], naming);
    if (!name) {
      Error err(ErrorKind::kArgument, "character '" + std::string(1, s[i]) + "' at index " +
                                          std::to_string(i) + " is not a bracket");
      err.index = i;
      throw err;
    }
    names.emplace_back(*name);
  }
  return names;
}

std::string brackets_from_names(const std::vector<std::string>& names) {
  std::string out;
  std::vector<std::string> unknown;
  for (const auto& raw : names) {
    std::string normalized = text::to_lower(text::collapse_whitespace(raw));
    bool found = false;
    for (const auto& [name, symbol] : all_bracket_names()) {
      if (name == normalized) {
        out += symbol;
        found = true;
        break;
      }
    }
    if (!found) unknown.push_back(raw);
  }
  if (!unknown.empty()) {
    std::string message = "unknown bracket name(s):";
    for (const auto& u : unknown) message += " '" + u + "'";
    Error err(ErrorKind::kMapping, message);
    err.offenders = unknown;
    throw err;
  }
  return out;
}

std::string linearize_table(std::string_view raw, std::string_view cell_delim,
                            std::string_view row_delim) {
  if (raw.empty()) throw Error(ErrorKind::kArgument, "empty table");
  if (cell_delim.empty() || row_delim.empty()) {
    throw Error(ErrorKind::kArgument, "table delimiters must be non-empty");
  }
  std::vector<std::string_view> rows = text::split(raw, row_delim);
  if (rows.size() > 1 && rows.back().empty()) rows.pop_back();
  std::vector<std::string> header;
  std::string out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::string_view row = rows[r];
    if (row_delim == "\n" && !row.empty() && row.back() == '\r') row.remove_suffix(1);
    std::vector<std::string_view> cells = text::split(row, cell_delim);
    if (r == 0) {
      for (auto cell : cells) header.emplace_back(text::trim(cell));
      continue;
    }
    if (cells.size() != header.size()) {
      Error err(ErrorKind::kStructural, "ragged table: row " + std::to_string(r) + " has " +
                                            std::to_string(cells.size()) + " cells, expected " +
                                            std::to_string(header.size()));
      err.index = r;
      throw err;
    }
    if (!out.empty()) out += '\n';
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c > 0) out += "; ";
      out += header[c];
      out += ": ";
      out += text::trim(cells[c]);
    }
  }
  return out;
}

std::string normalize_emoji_key(std::string_view input) {
  std::string_view trimmed = text::trim(input);
  if (trimmed.empty()) throw Error(ErrorKind::kArgument, "empty emoji input");
  std::vector<char32_t> codepoints;
  if (trimmed.size() >= 2 && (trimmed[0] == 'U' || trimmed[0] == 'u') && trimmed[1] == '+') {
    for (std::string_view token : text::split_whitespace(trimmed)) {
      bool ok = token.size() >= 6 && token.size() <= 8 && (token[0] == 'U' || token[0] == 'u') &&
                token[1] == '+';
      char32_t cp = 0;
      for (std::size_t i = 2; ok && i < token.size(); ++i) {
        int digit = text::hex_value(token[i]);
        if (digit < 0) ok = false;
        cp = cp * 16 + static_cast<char32_t>(digit);
      }
      if (!ok || cp > 0x10FFFF) {
        throw Error(ErrorKind::kArgument, "malformed codepoint literal '" + std::string(token) + "'");
      }
      codepoints.push_back(cp);
    }
  } else {
    codepoints = decode_utf8(trimmed);
  }
  std::string key;
  for (char32_t cp : codepoints) {
    if (!key.empty()) key += ' ';
    key += format_codepoint(cp);
  }
  return key;
}

std::string emoji_from_key(std::string_view key) {
  std::string normalized = normalize_emoji_key(key);
  std::string out;
  for (std::string_view token : text::split_whitespace(normalized)) {
    char32_t cp = 0;
    for (std::size_t i = 2; i < token.size(); ++i) cp = cp * 16 + text::hex_value(token[i]);
    encode_utf8(cp, out);
  }
  return out;
}

std::string emoji_name(std::string_view grapheme_or_codepoint, const NameTable& table) {
  std::string key = normalize_emoji_key(grapheme_or_codepoint);
  if (auto hit = table.find(key)) return *hit;
  // Emoji presentation selectors are frequently absent from name tables.
  std::string stripped;
  for (std::string_view token : text::split_whitespace(key)) {
    if (token == "U+FE0F") continue;
    if (!stripped.empty()) stripped += ' ';
    stripped += token;
  }
  if (!stripped.empty() && stripped != key) {
    if (auto hit = table.find(stripped)) return *hit;
  }
  Error err(ErrorKind::kLookupMiss, "no emoji name for " + key);
  err.key = key;
  throw err;
}

std::string lookup_translate(std::string_view symbol, const NameTable& table) {
  if (auto hit = table.find(symbol)) return *hit;
  Error err(ErrorKind::kLookupMiss, "no table entry for '" + std::string(symbol) + "'");
  err.key = std::string(symbol);
  throw err;
}

}  // namespace s2l::converters
