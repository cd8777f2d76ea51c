#include <gtest/gtest.h>

#include "s2l/core.hpp"
#include "s2l/error.hpp"

using namespace s2l;

namespace {

Problem one_span(const std::string& tmpl, const std::string& raw, SpanKind kind = SpanKind::kBrackets) {
  Problem p;
  p.task_id = "t";
  p.template_text = tmpl;
  p.spans.push_back({"s1", raw, kind, "s1"});
  return p;
}

Rendering rendering(const std::string& id, const std::string& text,
                    ConversionMethod method = ConversionMethod::kRule) {
  return {id, text, method, "test"};
}

MethodConfig mode(Mode m, std::optional<Conversion> c = std::nullopt) {
  MethodConfig cfg;
  cfg.mode = m;
  cfg.conversion = c;
  return cfg;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::kIo;
}

}  // namespace

TEST(ZeroShot, SubstitutesRawText) {
  Query q = build_zero_shot(one_span("Complete: {s1}", "{}["), mode(Mode::kZeroShot));
  ASSERT_EQ(q.messages.size(), 1u);
  EXPECT_EQ(q.messages[0].role, Role::kUser);
  EXPECT_EQ(q.user_text(), "Complete: {}[");
}

TEST(ZeroShot, CotAppendsSuffix) {
  Query q = build_zero_shot(one_span("Complete: {s1}", "{}["), mode(Mode::kZeroShotCot));
  EXPECT_EQ(q.user_text(), "Complete: {}[\n\nLet's think step by step.");
}

TEST(ZeroShot, CustomCotSuffix) {
  MethodConfig cfg = mode(Mode::kZeroShotCot);
  cfg.cot_suffix = "Reason first.";
  EXPECT_EQ(build_zero_shot(one_span("Q {s1}", "x"), cfg).user_text(), "Q x\n\nReason first.");
}

TEST(ZeroShot, NoPlaceholdersLeavesTemplate) {
  Problem p;
  p.task_id = "t";
  p.template_text = "Just a question?";
  EXPECT_EQ(build_zero_shot(p, mode(Mode::kZeroShot)).user_text(), "Just a question?");
}

TEST(ZeroShot, EscapedBracesAreLiteral) {
  EXPECT_EQ(build_zero_shot(one_span("{{x}} {s1} }}", "a"), mode(Mode::kZeroShot)).user_text(), "{x} a }");
}

TEST(ZeroShot, UnmatchedPlaceholderIsStructural) {
  Problem p = one_span("{s1} and {s2}", "a");
  try {
    build_zero_shot(p, mode(Mode::kZeroShot));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kStructural);
    EXPECT_NE(std::string(e.what()).find("s2"), std::string::npos);
  }
}

TEST(ZeroShot, SpanWithoutPlaceholderIsStructural) {
  Problem p = one_span("nothing", "a");
  EXPECT_EQ(kind_of([&] { build_zero_shot(p, mode(Mode::kZeroShot)); }), ErrorKind::kStructural);
}

TEST(Template, ParsePieces) {
  auto pieces = parse_template("a {x} {{b}} {1bad}");
  ASSERT_EQ(pieces.size(), 3u);
  EXPECT_EQ(pieces[0].text, "a ");
  EXPECT_TRUE(pieces[1].is_placeholder);
  EXPECT_EQ(pieces[1].text, "x");
  EXPECT_EQ(pieces[2].text, " {b} {1bad}");
}

TEST(Template, EscapeRoundTrip) {
  for (std::string raw : {"", "plain", "{s1}", "}{", "{{}}", "a{b}c"}) {
    auto pieces = parse_template(escape_template(raw));
    std::string joined;
    for (const auto& p : pieces) {
      EXPECT_FALSE(p.is_placeholder);
      joined += p.text;
    }
    EXPECT_EQ(joined, raw);
  }
}

TEST(Substitute, ReplacesWithRendering) {
  Problem p = one_span("Complete: {s1}", "([]");
  std::string names = "open parenthesis open square bracket close square bracket";
  Query q = integrate_substitute(p, {rendering("s1", names)});
  EXPECT_NE(q.user_text().find(names), std::string::npos);
  EXPECT_EQ(q.user_text().find("([]"), std::string::npos);
  EXPECT_EQ(q.config.mode, Mode::kS2lSubstitute);
  EXPECT_EQ(q.config.conversion, Conversion::kWithTool);
}

TEST(Substitute, IdentityRenderingMatchesZeroShot) {
  Problem p = one_span("Q: {s1}?", "abc");
  EXPECT_EQ(integrate_substitute(p, {rendering("s1", "abc")}).user_text(),
            build_zero_shot(p, mode(Mode::kZeroShot)).user_text());
}

TEST(Substitute, TwoSpansInTemplateOrder) {
  Problem p;
  p.task_id = "t";
  p.template_text = "{b} then {a}";
  p.spans = {{"s1", "X", SpanKind::kGeneric, "a"}, {"s2", "Y", SpanKind::kGeneric, "b"}};
  Query q = integrate_substitute(p, {rendering("s2", "why"), rendering("s1", "ex")});
  EXPECT_EQ(q.user_text(), "why then ex");
}

TEST(Substitute, RenderingProvenanceSetsConversion) {
  Problem p = one_span("{s1}", "x");
  EXPECT_EQ(integrate_substitute(p, {rendering("s1", "y", ConversionMethod::kLlm)}).config.conversion,
            Conversion::kWithModel);
  EXPECT_EQ(integrate_substitute(p, {rendering("s1", "y", ConversionMethod::kLookup)}).config.conversion,
            Conversion::kWithTool);
}

TEST(Substitute, MissingRenderingListsSpan) {
  Problem p = one_span("{s1}", "x");
  try {
    integrate_substitute(p, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kStructural);
    EXPECT_EQ(e.offenders, std::vector<std::string>{"s1"});
  }
}

TEST(Substitute, DuplicateRenderingListsSpan) {
  Problem p = one_span("{s1}", "x");
  try {
    integrate_substitute(p, {rendering("s1", "a"), rendering("s1", "b")});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kStructural);
    EXPECT_EQ(e.offenders, std::vector<std::string>{"s1"});
  }
}

TEST(Substitute, UnknownRenderingRejected) {
  Problem p = one_span("{s1}", "x");
  EXPECT_EQ(kind_of([&] { integrate_substitute(p, {rendering("s1", "a"), rendering("zz", "b")}); }),
            ErrorKind::kStructural);
}

TEST(Substitute, RenderingBracesStayLiteral) {
  Problem p = one_span("{s1}", "x");
  EXPECT_EQ(integrate_substitute(p, {rendering("s1", "{s1} }{")}).user_text(), "{s1} }{");
}

TEST(Concatenate, SequenceSurface) {
  Problem p = one_span("{s1}", "0,5,5,0", SpanKind::kSequence);
  Query q = integrate_concatenate(p, {rendering("s1", "one 0, followed by two 5s, followed by one 0")});
  EXPECT_EQ(q.user_text(), "0,5,5,0 (that is, one 0, followed by two 5s, followed by one 0)");
  EXPECT_EQ(q.config.mode, Mode::kS2lConcatenate);
}

TEST(Concatenate, SmilesSurface) {
  Problem p = one_span("SMILES: {s1}\nToxicity: Yes or No?", "CCCO", SpanKind::kSmiles);
  Query q = integrate_concatenate(p, {rendering("s1", "Propionylo", ConversionMethod::kLookup)});
  EXPECT_EQ(q.user_text(), "SMILES: CCCO (that is, Propionylo)\nToxicity: Yes or No?");
}

TEST(Concatenate, NoSpansLeavesTemplate) {
  Problem p;
  p.task_id = "t";
  p.template_text = "Q?";
  EXPECT_EQ(integrate_concatenate(p, {}).user_text(), "Q?");
}

TEST(Concatenate, SurfaceHelper) { EXPECT_EQ(concatenate_surface("a", "b"), "a (that is, b)"); }

TEST(BuildQuery, DispatchesAndIgnoresRenderingsForBaselines) {
  Problem p = one_span("{s1}", "x");
  std::vector<Rendering> r = {rendering("s1", "ex")};
  EXPECT_EQ(build_query(p, mode(Mode::kZeroShot), r).user_text(), "x");
  EXPECT_EQ(build_query(p, mode(Mode::kS2lSubstitute, Conversion::kWithTool), r).user_text(), "ex");
  EXPECT_EQ(build_query(p, mode(Mode::kS2lConcatenate, Conversion::kWithModel), r).user_text(),
            "x (that is, ex)");
  Query q = build_query(p, mode(Mode::kS2lSubstitute, Conversion::kWithModel), r);
  EXPECT_EQ(q.config.conversion, Conversion::kWithModel);
  EXPECT_EQ(q.rendering_ids, std::vector<std::string>{"s1"});
}

TEST(MethodConfig, LabelsRoundTrip) {
  for (std::string label : {"zs", "zsc", "s2l-sub-model", "s2l-sub-tool", "s2l-cat-model", "s2l-cat-tool"}) {
    EXPECT_EQ(parse_method_label(label).label(), label);
  }
  EXPECT_EQ(kind_of([] { parse_method_label("nope"); }), ErrorKind::kArgument);
}

TEST(MethodConfig, S2lNeedsConversion) {
  EXPECT_ANY_THROW(mode(Mode::kS2lSubstitute).validate());
  EXPECT_NO_THROW(mode(Mode::kZeroShot).validate());
}

TEST(ValidateProblem, DuplicateSpanIds) {
  Problem p;
  p.task_id = "t";
  p.template_text = "{a}{b}";
  p.spans = {{"s1", "x", SpanKind::kGeneric, "a"}, {"s1", "y", SpanKind::kGeneric, "b"}};
  EXPECT_EQ(kind_of([&] { validate_problem(p); }), ErrorKind::kStructural);
}

TEST(ValidateProblem, EmptyRawText) {
  EXPECT_EQ(kind_of([] { validate_problem(one_span("{s1}", "")); }), ErrorKind::kStructural);
}
