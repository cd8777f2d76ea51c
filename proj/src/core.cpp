#include "s2l/core.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>

#include "s2l/error.hpp"

namespace s2l {

const char* to_string(SpanKind kind) {
  switch (kind) {
    case SpanKind::kSequence: return "sequence";
    case SpanKind::kBrackets: return "brackets";
    case SpanKind::kSmiles: return "smiles";
    case SpanKind::kEmoji: return "emoji";
    case SpanKind::kTable: return "table";
    case SpanKind::kTweet: return "tweet";
    case SpanKind::kGeneric: return "generic";
  }
  return "generic";
}

const char* to_string(ConversionMethod method) {
  switch (method) {
    case ConversionMethod::kLlm: return "llm";
    case ConversionMethod::kRule: return "rule";
    case ConversionMethod::kLookup: return "lookup";
  }
  return "rule";
}

const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::kZeroShot: return "zero_shot";
    case Mode::kZeroShotCot: return "zero_shot_cot";
    case Mode::kS2lSubstitute: return "s2l_substitute";
    case Mode::kS2lConcatenate: return "s2l_concatenate";
  }
  return "zero_shot";
}

const char* to_string(Conversion conversion) {
  return conversion == Conversion::kWithModel ? "with_model" : "with_tool";
}

const char* to_string(Role role) {
  switch (role) {
    case Role::kSystem: return "system";
    case Role::kUser: return "user";
    case Role::kAssistant: return "assistant";
  }
  return "user";
}

std::string MethodConfig::label() const {
  switch (mode) {
    case Mode::kZeroShot: return "zs";
    case Mode::kZeroShotCot: return "zsc";
    case Mode::kS2lSubstitute:
    case Mode::kS2lConcatenate: {
      std::string out = mode == Mode::kS2lSubstitute ? "s2l-sub" : "s2l-cat";
      if (conversion) out += *conversion == Conversion::kWithModel ? "-model" : "-tool";
      return out;
    }
  }
  return "zs";
}

void MethodConfig::validate() const {
  if (is_s2l() && !conversion) {
    throw Error(ErrorKind::kArgument, std::string("mode ") + to_string(mode) +
                                          " requires a conversion choice (model or tool)");
  }
  if (mode == Mode::kZeroShotCot && cot_suffix.empty()) {
    throw Error(ErrorKind::kArgument, "zero_shot_cot requires a non-empty cot_suffix");
  }
}

MethodConfig parse_method_label(std::string_view label) {
  MethodConfig config;
  if (label == "zs") return config;
  if (label == "zsc") {
    config.mode = Mode::kZeroShotCot;
    return config;
  }
  static const std::pair<std::string_view, Mode> kPrefixes[] = {
      {"s2l-sub", Mode::kS2lSubstitute}, {"s2l-cat", Mode::kS2lConcatenate}};
  for (const auto& [prefix, mode] : kPrefixes) {
    if (label.substr(0, prefix.size()) != prefix) continue;
    std::string_view rest = label.substr(prefix.size());
    config.mode = mode;
    if (rest == "-model") {
      config.conversion = Conversion::kWithModel;
    } else if (rest == "-tool") {
      config.conversion = Conversion::kWithTool;
    } else if (!rest.empty()) {
      break;
    }
    return config;
  }
  throw Error(ErrorKind::kArgument, "unknown method label '" + std::string(label) + "'");
}

const std::string& Query::user_text() const {
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->role == Role::kUser) return it->content;
  }
  throw Error(ErrorKind::kStructural, "query has no user message");
}

namespace {

bool is_ident_start(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_';
}

bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }

void append_literal(std::vector<TemplatePiece>& pieces, std::string_view text) {
  if (text.empty()) return;
  if (!pieces.empty() && !pieces.back().is_placeholder) {
    pieces.back().text.append(text);
  } else {
    pieces.push_back({false, std::string(text)});
  }
}

struct SpanIndex {
  std::unordered_map<std::string, const SymbolSpan*> by_location;
};

SpanIndex index_spans(const Problem& problem) {
  validate_problem(problem);
  SpanIndex index;
  for (const auto& span : problem.spans) index.by_location[span.location] = &span;
  return index;
}

// Maps span id -> rendering, enforcing exactly one rendering per span.
std::unordered_map<std::string, const Rendering*> match_renderings(
    const Problem& problem, const std::vector<Rendering>& renderings) {
  std::unordered_map<std::string, const Rendering*> by_span;
  std::set<std::string> known;
  for (const auto& span : problem.spans) known.insert(span.id);

  std::vector<std::string> duplicate;
  std::vector<std::string> unknown;
  for (const auto& r : renderings) {
    if (!known.count(r.span_id)) {
      unknown.push_back(r.span_id);
      continue;
    }
    if (!by_span.emplace(r.span_id, &r).second) duplicate.push_back(r.span_id);
    if (r.text.empty()) {
      Error err(ErrorKind::kStructural, "rendering for span '" + r.span_id + "' has empty text");
      err.offenders = {r.span_id};
      throw err;
    }
  }
  std::vector<std::string> missing;
  for (const auto& span : problem.spans) {
    if (!by_span.count(span.id)) missing.push_back(span.id);
  }
  if (!missing.empty() || !duplicate.empty() || !unknown.empty()) {
    std::string message = "renderings do not match spans one-to-one;";
    auto list = [&](const char* what, const std::vector<std::string>& ids) {
      if (ids.empty()) return;
      message += std::string(" ") + what + ":";
      for (const auto& id : ids) message += " " + id;
      message += ";";
    };
    list("missing", missing);
    list("duplicate", duplicate);
    list("unknown", unknown);
    Error err(ErrorKind::kStructural, message);
    err.offenders = missing;
    err.offenders.insert(err.offenders.end(), duplicate.begin(), duplicate.end());
    err.offenders.insert(err.offenders.end(), unknown.begin(), unknown.end());
    throw err;
  }
  return by_span;
}

template <typename Fill>
std::string fill_template(const Problem& problem, Fill&& fill) {
  SpanIndex index = index_spans(problem);
  std::string out;
  for (const auto& piece : parse_template(problem.template_text)) {
    if (!piece.is_placeholder) {
      out += piece.text;
      continue;
    }
    out += fill(*index.by_location.at(piece.text));
  }
  return out;
}

Query make_query(std::string text, MethodConfig config, std::vector<std::string> rendering_ids) {
  if (text.empty()) throw Error(ErrorKind::kStructural, "query text is empty");
  Query q;
  q.messages.push_back({Role::kUser, std::move(text)});
  q.config = std::move(config);
  q.rendering_ids = std::move(rendering_ids);
  return q;
}

std::optional<Conversion> conversion_of(const std::vector<Rendering>& renderings) {
  if (renderings.empty()) return std::nullopt;
  return renderings.front().method == ConversionMethod::kLlm ? Conversion::kWithModel
                                                             : Conversion::kWithTool;
}

Query integrate(const Problem& problem, const std::vector<Rendering>& renderings, Mode mode) {
  auto by_span = match_renderings(problem, renderings);
  std::string text = fill_template(problem, [&](const SymbolSpan& span) {
    const Rendering& r = *by_span.at(span.id);
    return mode == Mode::kS2lSubstitute ? r.text : concatenate_surface(span.raw_text, r.text);
  });
  MethodConfig config;
  config.mode = mode;
  config.conversion = conversion_of(renderings);
  std::vector<std::string> ids;
  for (const auto& span : problem.spans) ids.push_back(span.id);
  return make_query(std::move(text), std::move(config), std::move(ids));
}

}  // namespace

std::vector<TemplatePiece> parse_template(std::string_view text) {
  std::vector<TemplatePiece> pieces;
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if ((c == '{' || c == '}') && i + 1 < text.size() && text[i + 1] == c) {
      append_literal(pieces, text.substr(i, 1));
      i += 2;
      continue;
    }
    if (c == '{' && i + 1 < text.size() && is_ident_start(text[i + 1])) {
      std::size_t j = i + 1;
      while (j < text.size() && is_ident_char(text[j])) ++j;
      if (j < text.size() && text[j] == '}') {
        pieces.push_back({true, std::string(text.substr(i + 1, j - i - 1))});
        i = j + 1;
        continue;
      }
    }
    append_literal(pieces, text.substr(i, 1));
    ++i;
  }
  return pieces;
}

std::string escape_template(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    out += c;
    if (c == '{' || c == '}') out += c;
  }
  return out;
}

void validate_problem(const Problem& problem) {
  std::set<std::string> ids;
  std::map<std::string, std::string> span_at;  // location -> span id
  for (const auto& span : problem.spans) {
    if (span.raw_text.empty()) {
      Error err(ErrorKind::kStructural, "span '" + span.id + "' has empty raw text");
      err.offenders = {span.id};
      throw err;
    }
    if (!ids.insert(span.id).second) {
      Error err(ErrorKind::kStructural, "duplicate span id '" + span.id + "'");
      err.offenders = {span.id};
      throw err;
    }
    if (!span_at.emplace(span.location, span.id).second) {
      Error err(ErrorKind::kStructural, "two spans share placeholder '{" + span.location + "}'");
      err.offenders = {span.location};
      throw err;
    }
  }
  std::set<std::string> seen;
  for (const auto& piece : parse_template(problem.template_text)) {
    if (!piece.is_placeholder) continue;
    if (!span_at.count(piece.text)) {
      Error err(ErrorKind::kStructural, "unmatched placeholder '{" + piece.text + "}'");
      err.offenders = {piece.text};
      throw err;
    }
    if (!seen.insert(piece.text).second) {
      Error err(ErrorKind::kStructural, "placeholder '{" + piece.text + "}' appears more than once");
      err.offenders = {piece.text};
      throw err;
    }
  }
  for (const auto& [location, id] : span_at) {
    if (!seen.count(location)) {
      Error err(ErrorKind::kStructural,
                "span '" + id + "' has no placeholder '{" + location + "}' in the template");
      err.offenders = {id};
      throw err;
    }
  }
}

std::string concatenate_surface(std::string_view raw, std::string_view rendering) {
  std::string out;
  out.reserve(raw.size() + rendering.size() + 12);
  out.append(raw);
  out.append(" (that is, ");
  out.append(rendering);
  out.append(")");
  return out;
}

Query build_zero_shot(const Problem& problem, const MethodConfig& config) {
  if (config.mode != Mode::kZeroShot && config.mode != Mode::kZeroShotCot) {
    throw Error(ErrorKind::kArgument,
                std::string("build_zero_shot called with mode ") + to_string(config.mode));
  }
  config.validate();
  std::string text = fill_template(problem, [](const SymbolSpan& span) { return span.raw_text; });
  if (config.mode == Mode::kZeroShotCot) {
    text += "\n\n";
    text += config.cot_suffix;
  }
  MethodConfig provenance = config;
  provenance.conversion.reset();
  return make_query(std::move(text), std::move(provenance), {});
}

Query integrate_substitute(const Problem& problem, const std::vector<Rendering>& renderings) {
  return integrate(problem, renderings, Mode::kS2lSubstitute);
}

Query integrate_concatenate(const Problem& problem, const std::vector<Rendering>& renderings) {
  return integrate(problem, renderings, Mode::kS2lConcatenate);
}

Query build_query(const Problem& problem, const MethodConfig& config,
                  const std::vector<Rendering>& renderings) {
  config.validate();
  switch (config.mode) {
    case Mode::kZeroShot:
    case Mode::kZeroShotCot:
      return build_zero_shot(problem, config);
    case Mode::kS2lSubstitute:
    case Mode::kS2lConcatenate: {
      Query q = integrate(problem, renderings, config.mode);
      q.config = config;
      return q;
    }
  }
  throw Error(ErrorKind::kArgument, "unknown mode");
}

}  // namespace s2l
