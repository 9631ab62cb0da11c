#pragma once

// MIR: a small three-address intermediate representation. One statement per
// physical line (a ';' may also separate statements), six statement kinds,
// opaque dotted call targets.
//
//   method m(c) {
//     x = const "AES"
//     if c goto L
//     x = call crypto.Random.next(x, 4)
//     L: call log.info(x) -> y
//     return x
//   }

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "fpgcn/common.hpp"

namespace fpgcn {

enum class StatementKind { Assign, Invoke, If, Goto, Return, Nop };

inline constexpr std::size_t kStatementKindCount = 6;

inline std::string_view to_string(StatementKind kind) {
  constexpr std::array<std::string_view, kStatementKindCount> names = {
      "ASSIGN", "INVOKE", "IF", "GOTO", "RETURN", "NOP"};
  return names[static_cast<std::size_t>(kind)];
}

// A leaf of a statement's syntax tree.
enum class TermKind { Operand, Operator, Literal };

struct Term {
  TermKind kind;
  std::string text;

  bool operator==(const Term &) const = default;
};

struct Statement {
  std::size_t index = 0;
  std::size_t line = 1;
  std::optional<std::string> label;
  StatementKind kind = StatementKind::Nop;
  std::set<std::string> defs;
  std::set<std::string> uses;
  // Statement body as written, without the label prefix or terminator.
  std::string raw_text;
  // Operands, operators and literals in source order (the AST children).
  std::vector<Term> terms;
  // Branch target of IF/GOTO, by name and resolved position.
  std::optional<std::string> target;
  std::optional<std::size_t> target_index;
};

struct Method {
  std::string name;
  std::vector<std::string> params;
  std::vector<Statement> statements;

  // First statement on `line`, if any.
  const Statement *statement_at_line(std::size_t line) const {
    for (const auto &s : statements)
      if (s.line == line)
        return &s;
    return nullptr;
  }
};

struct Program {
  std::string source_name;
  std::vector<Method> methods;

  const Method *find_method(std::string_view name) const {
    for (const auto &m : methods)
      if (m.name == name)
        return &m;
    return nullptr;
  }
};

namespace detail {

inline bool is_keyword(std::string_view word) {
  static const std::set<std::string_view> keywords = {"method", "const", "call", "if",
                                                      "goto",   "return", "nop"};
  return keywords.count(word) != 0;
}

inline bool is_operator_symbol(std::string_view p) {
  static const std::set<std::string_view> ops = {"+",  "-",  "*",  "/",  "%",  "&",  "|",
                                                 "^",  "<",  ">",  "==", "!=", "<=", ">=",
                                                 "&&", "||", "<<", ">>"};
  return ops.count(p) != 0;
}

struct Token {
  enum class Type { Ident, Int, String, Punct, End } type;
  std::string text;
  std::size_t line;
  std::size_t column;
  std::size_t begin; // byte offsets into the source
  std::size_t end;
};

inline std::vector<Token> lex_mir(std::string_view src) {
  std::vector<Token> out;
  std::size_t line = 1, line_start = 0, i = 0;
  auto column = [&](std::size_t pos) { return pos - line_start + 1; };
  auto ident_start = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; };
  auto ident_char = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
  };

  while (i < src.size()) {
    const char c = src[i];
    if (c == '\n') {
      ++line;
      line_start = ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
      while (i < src.size() && src[i] != '\n')
        ++i;
      continue;
    }
    const std::size_t start = i;
    if (ident_start(c)) {
      while (i < src.size() && ident_char(src[i]))
        ++i;
      out.push_back({Token::Type::Ident, std::string(src.substr(start, i - start)), line,
                     column(start), start, i});
      continue;
    }
    const bool negative_literal =
        c == '-' && i + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[i + 1])) &&
        !out.empty() && (out.back().text == "const" || out.back().text == "(" || out.back().text == ",");
    if (std::isdigit(static_cast<unsigned char>(c)) || negative_literal) {
      ++i;
      while (i < src.size() && std::isdigit(static_cast<unsigned char>(src[i])))
        ++i;
      if (i < src.size() && ident_char(src[i]))
        throw ParseError("malformed integer literal", line, column(start));
      out.push_back({Token::Type::Int, std::string(src.substr(start, i - start)), line,
                     column(start), start, i});
      continue;
    }
    if (c == '"') {
      ++i;
      while (i < src.size() && src[i] != '"' && src[i] != '\n') {
        if (src[i] == '\\' && i + 1 < src.size() && src[i + 1] != '\n')
          ++i;
        ++i;
      }
      if (i >= src.size() || src[i] != '"')
        throw ParseError("unterminated string literal", line, column(start));
      ++i;
      out.push_back({Token::Type::String, std::string(src.substr(start, i - start)), line,
                     column(start), start, i});
      continue;
    }
    static constexpr std::array<std::string_view, 9> two_char = {"->", "==", "!=", "<=", ">=",
                                                                 "&&", "||", "<<", ">>"};
    const std::string_view rest = src.substr(i);
    const auto two = std::find_if(two_char.begin(), two_char.end(),
                                  [&](std::string_view p) { return rest.substr(0, 2) == p; });
    if (two != two_char.end()) {
      i += 2;
    } else if (std::string_view("(){},=;:<>+-*/%&|^").find(c) != std::string_view::npos) {
      ++i;
    } else {
      throw ParseError(std::string("unexpected character '") + c + "'", line, column(start));
    }
    out.push_back({Token::Type::Punct, std::string(src.substr(start, i - start)), line,
                   column(start), start, i});
  }
  out.push_back({Token::Type::End, "", line, column(i), i, i});
  return out;
}

class MirParser {
public:
  explicit MirParser(std::string_view src) : src_(src), toks_(lex_mir(src)) {}

  Program parse(std::string source_name) {
    Program p;
    p.source_name = std::move(source_name);
    std::map<std::string, std::size_t> method_lines;
    while (peek().type != Token::Type::End) {
      const std::size_t line = peek().line;
      Method m = parse_method();
      if (!method_lines.emplace(m.name, line).second)
        throw ParseError("duplicate method name '" + m.name + "'", line);
      p.methods.push_back(std::move(m));
    }
    if (p.methods.empty())
      throw ParseError("expected 'method'", peek().line, peek().column);
    return p;
  }

private:
  const Token &peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }

  const Token &advance() {
    const Token &t = toks_[pos_];
    if (pos_ + 1 < toks_.size())
      ++pos_;
    return t;
  }

  [[noreturn]] void fail(const std::string &message, const Token &at) const {
    const std::string found = at.type == Token::Type::End ? "end of input" : "'" + at.text + "'";
    throw ParseError(message + ", found " + found, at.line, at.column);
  }

  const Token &expect_punct(std::string_view p) {
    if (peek().type != Token::Type::Punct || peek().text != p)
      fail("expected '" + std::string(p) + "'", peek());
    return advance();
  }

  const Token &expect_keyword(std::string_view k) {
    if (peek().type != Token::Type::Ident || peek().text != k)
      fail("expected '" + std::string(k) + "'", peek());
    return advance();
  }

  bool at_punct(std::string_view p) const {
    return peek().type == Token::Type::Punct && peek().text == p;
  }

  bool at_name() const {
    return peek().type == Token::Type::Ident && !is_keyword(peek().text) &&
           peek().text.find('.') == std::string::npos;
  }

  const Token &expect_name(std::string_view what) {
    if (!at_name())
      fail("expected " + std::string(what), peek());
    return advance();
  }

  const Token &expect_dotted() {
    if (peek().type != Token::Type::Ident || is_keyword(peek().text) || peek().text.back() == '.' ||
        peek().text.find("..") != std::string::npos)
      fail("expected call target", peek());
    return advance();
  }

  Method parse_method() {
    Method m;
    expect_keyword("method");
    m.name = expect_name("method name").text;
    expect_punct("(");
    if (!at_punct(")")) {
      m.params.push_back(expect_name("parameter name").text);
      while (at_punct(",")) {
        advance();
        m.params.push_back(expect_name("parameter name").text);
      }
    }
    expect_punct(")");
    expect_punct("{");
    while (!at_punct("}")) {
      if (peek().type == Token::Type::End)
        fail("expected '}'", peek());
      Statement s = parse_statement();
      s.index = m.statements.size();
      m.statements.push_back(std::move(s));
    }
    if (m.statements.empty())
      fail("expected at least one statement", peek());
    expect_punct("}");
    resolve_labels(m);
    return m;
  }

  void parse_call(Statement &s) {
    s.terms.push_back({TermKind::Operator, expect_dotted().text});
    expect_punct("(");
    auto parse_arg = [&] {
      const Token &t = peek();
      if (t.type == Token::Type::Int || t.type == Token::Type::String) {
        s.terms.push_back({TermKind::Literal, advance().text});
      } else {
        const std::string &name = expect_name("argument").text;
        s.uses.insert(name);
        s.terms.push_back({TermKind::Operand, name});
      }
    };
    if (!at_punct(")")) {
      parse_arg();
      while (at_punct(",")) {
        advance();
        parse_arg();
      }
    }
    expect_punct(")");
  }

  Statement parse_statement() {
    Statement s;
    if (at_name() && peek(1).type == Token::Type::Punct && peek(1).text == ":") {
      s.label = advance().text;
      advance();
    }
    const Token &first = peek();
    s.line = first.line;
    std::size_t last_end = first.end;

    if (first.type != Token::Type::Ident)
      fail("expected statement", first);

    if (first.text == "call") {
      advance();
      s.kind = StatementKind::Invoke;
      parse_call(s);
      if (at_punct("->") && peek().line == s.line) {
        advance();
        const std::string &name = expect_name("result variable").text;
        s.defs.insert(name);
        s.terms.push_back({TermKind::Operand, name});
      }
    } else if (first.text == "if") {
      advance();
      s.kind = StatementKind::If;
      const std::string &cond = expect_name("condition variable").text;
      s.uses.insert(cond);
      s.terms.push_back({TermKind::Operand, cond});
      expect_keyword("goto");
      s.target = expect_name("label").text;
    } else if (first.text == "goto") {
      advance();
      s.kind = StatementKind::Goto;
      s.target = expect_name("label").text;
    } else if (first.text == "return") {
      advance();
      s.kind = StatementKind::Return;
      if (at_name() && peek().line == s.line) {
        const std::string &name = advance().text;
        s.uses.insert(name);
        s.terms.push_back({TermKind::Operand, name});
      }
    } else if (first.text == "nop") {
      advance();
      s.kind = StatementKind::Nop;
    } else if (at_name()) {
      s.kind = StatementKind::Assign;
      const std::string &lhs = advance().text;
      s.defs.insert(lhs);
      s.terms.push_back({TermKind::Operand, lhs});
      expect_punct("=");
      if (peek().type == Token::Type::Ident && peek().text == "const") {
        advance();
        const Token &lit = peek();
        if (lit.type != Token::Type::Int && lit.type != Token::Type::String)
          fail("expected literal", lit);
        s.terms.push_back({TermKind::Literal, advance().text});
      } else if (peek().type == Token::Type::Ident && peek().text == "call") {
        advance();
        parse_call(s);
      } else {
        const std::string &a = expect_name("operand").text;
        if (peek().type == Token::Type::Punct && is_operator_symbol(peek().text) &&
            peek().line == s.line) {
          const std::string &op = advance().text;
          const std::string &b = expect_name("operand").text;
          s.terms.push_back({TermKind::Operator, op});
          s.terms.push_back({TermKind::Operand, a});
          s.terms.push_back({TermKind::Operand, b});
          s.uses.insert(a);
          s.uses.insert(b);
        } else {
          s.terms.push_back({TermKind::Operand, a});
          s.uses.insert(a);
        }
      }
    } else {
      fail("expected statement", first);
    }

    last_end = toks_[pos_ - 1].end;
    s.raw_text = std::string(src_.substr(first.begin, last_end - first.begin));

    if (at_punct(";")) {
      advance();
    } else if (!at_punct("}") && peek().line == toks_[pos_ - 1].line) {
      fail("expected end of statement", peek());
    }
    return s;
  }

  static void resolve_labels(Method &m) {
    std::map<std::string, std::size_t> labels;
    for (const auto &s : m.statements)
      if (s.label && !labels.emplace(*s.label, s.index).second)
        throw ParseError("duplicate label '" + *s.label + "' in method '" + m.name + "'", s.line);
    for (auto &s : m.statements) {
      if (!s.target)
        continue;
      auto it = labels.find(*s.target);
      if (it == labels.end())
        throw ParseError("unresolved label '" + *s.target + "' in method '" + m.name + "'",
                         s.line);
      s.target_index = it->second;
    }
  }

  std::string_view src_;
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

// Successor positions of each statement; the value statements.size() stands
// for falling off the end (or returning) to the method exit. Branch targets
// are resolved by label name so hand-built methods are handled too;
// unresolved targets contribute no edge.
inline std::vector<std::vector<std::size_t>> statement_successors(const Method &m) {
  const std::size_t n = m.statements.size();
  std::map<std::string, std::size_t> labels;
  for (const auto &s : m.statements)
    if (s.label)
      labels.emplace(*s.label, s.index);

  std::vector<std::vector<std::size_t>> succ(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Statement &s = m.statements[i];
    auto add = [&](std::size_t t) {
      if (std::find(succ[i].begin(), succ[i].end(), t) == succ[i].end())
        succ[i].push_back(t);
    };
    auto target = [&]() -> std::optional<std::size_t> {
      if (!s.target)
        return std::nullopt;
      auto it = labels.find(*s.target);
      if (it == labels.end())
        return std::nullopt;
      return it->second;
    };
    switch (s.kind) {
    case StatementKind::Return: add(n); break;
    case StatementKind::Goto:
      if (auto t = target())
        add(*t);
      break;
    case StatementKind::If:
      add(i + 1);
      if (auto t = target())
        add(*t);
      break;
    default: add(i + 1);
    }
  }
  return succ;
}

} // namespace detail

inline Program parse_program(std::string_view text, std::string source_name = "<input>") {
  return detail::MirParser(text).parse(std::move(source_name));
}

enum class Rule {
  EmptyProgram,
  DuplicateMethod,
  EmptyMethod,
  DuplicateLabel,
  UnresolvedLabel,
  DefArity,
  StatementOrder,
  MissingReturn,
  NoPathToReturn,
  Unreachable,
};

inline std::string_view to_string(Rule rule) {
  switch (rule) {
  case Rule::EmptyProgram: return "empty-program";
  case Rule::DuplicateMethod: return "duplicate-method";
  case Rule::EmptyMethod: return "empty-method";
  case Rule::DuplicateLabel: return "duplicate-label";
  case Rule::UnresolvedLabel: return "unresolved-label";
  case Rule::DefArity: return "def-arity";
  case Rule::StatementOrder: return "statement-order";
  case Rule::MissingReturn: return "missing-return";
  case Rule::NoPathToReturn: return "no-path-to-return";
  case Rule::Unreachable: return "unreachable";
  }
  return "?";
}

struct Diagnostic {
  std::string method;
  std::optional<std::size_t> statement;
  Rule rule;
  std::string message;
};

// Checks every Program/Method/Statement invariant. An empty result means the
// program is ready for graph construction.
inline std::vector<Diagnostic> validate_program(const Program &p) {
  std::vector<Diagnostic> out;
  if (p.methods.empty())
    out.push_back({"", std::nullopt, Rule::EmptyProgram, "program has no methods"});

  std::set<std::string> seen_methods;
  for (const Method &m : p.methods) {
    if (!seen_methods.insert(m.name).second)
      out.push_back({m.name, std::nullopt, Rule::DuplicateMethod,
                     "method name '" + m.name + "' is not unique"});
    if (m.statements.empty()) {
      out.push_back({m.name, std::nullopt, Rule::EmptyMethod, "method has no statements"});
      continue;
    }

    std::set<std::string> labels;
    for (const Statement &s : m.statements)
      if (s.label && !labels.insert(*s.label).second)
        out.push_back({m.name, s.index, Rule::DuplicateLabel, "label '" + *s.label + "' repeated"});

    std::size_t prev_line = 0;
    for (std::size_t i = 0; i < m.statements.size(); ++i) {
      const Statement &s = m.statements[i];
      if (s.index != i || s.line < 1 || s.line < prev_line)
        out.push_back({m.name, i, Rule::StatementOrder, "statement index or line out of order"});
      prev_line = s.line;

      if ((s.kind == StatementKind::If || s.kind == StatementKind::Goto) &&
          (!s.target || !labels.count(*s.target)))
        out.push_back({m.name, i, Rule::UnresolvedLabel,
                       "branch target '" + s.target.value_or("") + "' does not resolve"});

      const std::size_t defs = s.defs.size();
      const bool arity_ok = s.kind == StatementKind::Assign   ? defs == 1
                            : s.kind == StatementKind::Invoke ? defs <= 1
                                                              : defs == 0;
      if (!arity_ok)
        out.push_back({m.name, i, Rule::DefArity,
                       std::string(to_string(s.kind)) + " defines " + std::to_string(defs) +
                           " variables"});
    }

    const std::size_t n = m.statements.size();
    const auto succ = detail::statement_successors(m);
    for (std::size_t i = 0; i < n; ++i) {
      const auto kind = m.statements[i].kind;
      if (kind != StatementKind::Return && std::count(succ[i].begin(), succ[i].end(), n))
        out.push_back({m.name, i, Rule::MissingReturn, "control falls off the end of the method"});
    }

    std::vector<char> reachable(n, 0);
    std::vector<std::size_t> stack = {0};
    reachable[0] = 1;
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      for (std::size_t w : succ[v])
        if (w < n && !reachable[w]) {
          reachable[w] = 1;
          stack.push_back(w);
        }
    }

    // Backward search from every exiting statement.
    std::vector<std::vector<std::size_t>> pred(n);
    std::vector<char> exits(n, 0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t w : succ[i]) {
        if (w < n)
          pred[w].push_back(i);
        else
          exits[i] = 1;
      }
    for (std::size_t i = 0; i < n; ++i)
      if (exits[i])
        stack.push_back(i);
    std::vector<char> to_exit = exits;
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      for (std::size_t u : pred[v])
        if (!to_exit[u]) {
          to_exit[u] = 1;
          stack.push_back(u);
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
      if (!reachable[i])
        out.push_back({m.name, i, Rule::Unreachable, "statement is unreachable from entry"});
      if (!to_exit[i])
        out.push_back({m.name, i, Rule::NoPathToReturn, "no path from statement to a return"});
    }
  }
  return out;
}

inline std::string format_diagnostic(const Diagnostic &d) {
  std::string out = "[" + std::string(to_string(d.rule)) + "] method '" + d.method + "'";
  if (d.statement)
    out += " statement " + std::to_string(*d.statement);
  return out + ": " + d.message;
}

// Canonical text: one statement per line, two-space indent.
inline std::string print_program(const Program &p) {
  std::string out;
  for (const Method &m : p.methods) {
    out += "method " + m.name + "(";
    for (std::size_t i = 0; i < m.params.size(); ++i)
      out += (i ? ", " : "") + m.params[i];
    out += ") {\n";
    for (const Statement &s : m.statements) {
      out += "  ";
      if (s.label)
        out += *s.label + ": ";
      out += s.raw_text + "\n";
    }
    out += "}\n";
  }
  return out;
}

// Equality of everything except line numbers and the source label.
inline bool structurally_equal(const Program &a, const Program &b) {
  if (a.methods.size() != b.methods.size())
    return false;
  for (std::size_t i = 0; i < a.methods.size(); ++i) {
    const Method &ma = a.methods[i], &mb = b.methods[i];
    if (ma.name != mb.name || ma.params != mb.params ||
        ma.statements.size() != mb.statements.size())
      return false;
    for (std::size_t j = 0; j < ma.statements.size(); ++j) {
      const Statement &x = ma.statements[j], &y = mb.statements[j];
      if (x.index != y.index || x.label != y.label || x.kind != y.kind || x.defs != y.defs ||
          x.uses != y.uses || x.raw_text != y.raw_text || x.terms != y.terms ||
          x.target != y.target || x.target_index != y.target_index)
        return false;
    }
  }
  return true;
}

} // namespace fpgcn
