#include <gtest/gtest.h>

#include <fstream>
#include <regex>
#include <sstream>

#include "fpgcn/mir.hpp"
#include "oracles.hpp"

using namespace fpgcn;

namespace {

std::string sample_text() {
  std::ifstream is(std::string(FPGCN_TEST_DATA) + "/sample.mir");
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<StatementKind> kinds(const Method &m) {
  std::vector<StatementKind> out;
  for (const auto &s : m.statements)
    out.push_back(s.kind);
  return out;
}

} // namespace

TEST(Parse, InlineMethod) {
  const Program p = parse_program("method m() { x = const 1; return x; }");
  ASSERT_EQ(p.methods.size(), 1u);
  const Method &m = p.methods[0];
  ASSERT_EQ(m.statements.size(), 2u);
  EXPECT_EQ(m.statements[0].defs, std::set<std::string>{"x"});
  EXPECT_TRUE(m.statements[0].uses.empty());
  EXPECT_EQ(m.statements[1].kind, StatementKind::Return);
  EXPECT_EQ(m.statements[1].uses, std::set<std::string>{"x"});
}

TEST(Parse, UnresolvedLabel) {
  try {
    parse_program("method m() { goto L; }");
    FAIL() << "expected a parse error";
  } catch (const ParseError &e) {
    EXPECT_NE(std::string(e.what()).find("unresolved label"), std::string::npos);
  }
}

TEST(Parse, SampleKindsAndLines) {
  const Program p = parse_program(sample_text(), "sample.mir");
  const Method &m = p.methods.at(0);
  EXPECT_EQ(m.name, "m");
  EXPECT_EQ(m.params, std::vector<std::string>{"c"});
  EXPECT_EQ(kinds(m), (std::vector<StatementKind>{StatementKind::Assign, StatementKind::Assign,
                                                  StatementKind::If, StatementKind::Assign,
                                                  StatementKind::Nop, StatementKind::Return}));
  for (std::size_t i = 0; i < m.statements.size(); ++i) {
    EXPECT_EQ(m.statements[i].index, i);
    EXPECT_EQ(m.statements[i].line, i + 2);
  }
  EXPECT_EQ(m.statements[2].target, "L");
  EXPECT_EQ(m.statements[2].target_index, 4u);
  EXPECT_EQ(m.statements[4].label, "L");
  EXPECT_EQ(m.statements[4].raw_text, "nop");
}

TEST(Parse, OneLinerEqualsMultiLine) {
  const Program a = parse_program(
      "method m(c) { x = const \"AES\"; k = const 42; if c goto L; x = const \"RSA\"; L: nop; "
      "return x; }");
  const Program b = parse_program(sample_text());
  EXPECT_TRUE(structurally_equal(a, b));
}

TEST(Parse, DefsAndUses) {
  const Program p = parse_program(R"(method m(a, b) {
  y = a + b
  call lib.f(y, a) -> z
  call lib.g(z)
  w = call lib.h(y)
  v = w
  if v goto L
  L: return v
})");
  const auto &s = p.methods[0].statements;
  EXPECT_EQ(s[0].defs, std::set<std::string>{"y"});
  EXPECT_EQ(s[0].uses, (std::set<std::string>{"a", "b"}));
  EXPECT_EQ(s[1].kind, StatementKind::Invoke);
  EXPECT_EQ(s[1].defs, std::set<std::string>{"z"});
  EXPECT_EQ(s[1].uses, (std::set<std::string>{"a", "y"}));
  EXPECT_TRUE(s[2].defs.empty());
  EXPECT_EQ(s[3].kind, StatementKind::Assign);
  EXPECT_EQ(s[3].defs, std::set<std::string>{"w"});
  EXPECT_EQ(s[4].uses, std::set<std::string>{"w"});
  EXPECT_EQ(s[5].uses, std::set<std::string>{"v"});
  EXPECT_TRUE(s[5].defs.empty());
}

TEST(Parse, AstTerms) {
  const Program p = parse_program("method m(a, b) {\n x = const 1\n y = a + b\n return y\n}");
  const auto &s = p.methods[0].statements;
  EXPECT_EQ(s[0].terms, (std::vector<Term>{{TermKind::Operand, "x"}, {TermKind::Literal, "1"}}));
  EXPECT_EQ(s[1].terms, (std::vector<Term>{{TermKind::Operand, "y"},
                                          {TermKind::Operator, "+"},
                                          {TermKind::Operand, "a"},
                                          {TermKind::Operand, "b"}}));
  EXPECT_EQ(s[2].terms, (std::vector<Term>{{TermKind::Operand, "y"}}));
}

TEST(Parse, SyntaxErrorCarriesLocation) {
  try {
    parse_program("method m() {\n  x = = 1\n  return\n}");
    FAIL() << "expected a parse error";
  } catch (const ParseError &e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_GT(e.column(), 0u);
  }
}

TEST(Parse, DuplicateMethodIsAnError) {
  EXPECT_THROW(parse_program("method m() { return }\nmethod m() { return }"), ParseError);
}

TEST(Parse, UnterminatedString) {
  EXPECT_THROW(parse_program("method m() {\n x = const \"AES\n return\n}"), ParseError);
}

TEST(Validate, SampleIsClean) {
  EXPECT_TRUE(validate_program(parse_program(sample_text())).empty());
}

TEST(Validate, MissingReturn) {
  const auto d = validate_program(parse_program("method m() { x = const 1 }"));
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].rule, Rule::MissingReturn);
  EXPECT_EQ(d[0].method, "m");
  EXPECT_EQ(d[0].statement, 0u);
}

TEST(Validate, DuplicateMethodName) {
  Program p = parse_program("method m() { return }");
  p.methods.push_back(parse_program("method m() { nop; return }").methods[0]);
  const auto d = validate_program(p);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].rule, Rule::DuplicateMethod);
  EXPECT_NE(format_diagnostic(d[0]).find("duplicate-method"), std::string::npos);
}

TEST(Validate, UnreachableAndLoopWithoutExit) {
  const auto d = validate_program(parse_program("method m() {\n return\n nop\n}"));
  bool unreachable = false;
  for (const auto &x : d)
    unreachable = unreachable || x.rule == Rule::Unreachable;
  EXPECT_TRUE(unreachable);

  const auto loop = validate_program(parse_program("method m() {\n L: nop\n goto L\n}"));
  bool stuck = false;
  for (const auto &x : loop)
    stuck = stuck || x.rule == Rule::NoPathToReturn;
  EXPECT_TRUE(stuck);
}

TEST(Validate, HandBuiltArityViolation) {
  Program p = parse_program("method m() { return }");
  p.methods[0].statements[0].defs = {"x"};
  const auto d = validate_program(p);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].rule, Rule::DefArity);
}

TEST(Properties, RoundTripOnRandomMethods) {
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    const Program p = parse_program(oracle::random_method_source(rng, 12));
    const Program q = parse_program(print_program(p));
    EXPECT_TRUE(structurally_equal(p, q)) << print_program(p);
    EXPECT_EQ(print_program(q), print_program(p));
  }
}

TEST(Properties, DefsAndUsesAppearInRawText) {
  Rng rng(12);
  const std::regex ident(R"([A-Za-z_][A-Za-z0-9_.]*)");
  for (int i = 0; i < 100; ++i) {
    const Program p = parse_program(oracle::random_method_source(rng, 12));
    for (const Statement &s : p.methods[0].statements) {
      std::set<std::string> words;
      for (auto it = std::sregex_iterator(s.raw_text.begin(), s.raw_text.end(), ident);
           it != std::sregex_iterator(); ++it)
        words.insert(it->str());
      for (const auto &v : s.defs)
        EXPECT_TRUE(words.count(v)) << s.raw_text;
      for (const auto &v : s.uses)
        EXPECT_TRUE(words.count(v)) << s.raw_text;
    }
  }
}

TEST(Properties, ParseIsDeterministic) {
  const std::string text = sample_text();
  const Program a = parse_program(text), b = parse_program(text);
  EXPECT_TRUE(structurally_equal(a, b));
  EXPECT_EQ(print_program(a), print_program(b));
}
