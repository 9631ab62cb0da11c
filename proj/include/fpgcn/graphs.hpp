#pragma once

// Code property graph construction: AST, CFG and PDG (data + control
// dependence) views of one method, merged into a single typed graph.
//
// Node ids are fixed by position so every view agrees on them:
//   0            METHOD_ENTRY
//   1 .. n       statement i has id i + 1
//   n + 1        METHOD_EXIT
//   n + 2 ..     AST leaves, in statement order then term order

#include <algorithm>
#include <array>
#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fpgcn/common.hpp"
#include "fpgcn/mir.hpp"

namespace fpgcn {

// Declaration order is the one-hot ordinal used by the featurizer.
enum class NodeKind {
  StmtAssign,
  StmtInvoke,
  StmtIf,
  StmtGoto,
  StmtReturn,
  StmtNop,
  AstOperand,
  AstOperator,
  AstLiteral,
  MethodEntry,
  MethodExit,
};

inline constexpr std::size_t kNodeKindCount = 11;

inline std::string_view to_string(NodeKind kind) {
  constexpr std::array<std::string_view, kNodeKindCount> names = {
      "STMT_ASSIGN", "STMT_INVOKE", "STMT_IF",     "STMT_GOTO",    "STMT_RETURN", "STMT_NOP",
      "AST_OPERAND", "AST_OPERATOR", "AST_LITERAL", "METHOD_ENTRY", "METHOD_EXIT"};
  return names[static_cast<std::size_t>(kind)];
}

inline bool is_statement(NodeKind kind) {
  return static_cast<std::size_t>(kind) < kStatementKindCount;
}

inline NodeKind statement_node_kind(StatementKind kind) {
  return static_cast<NodeKind>(static_cast<std::size_t>(kind));
}

enum class EdgeKind { Ast, Cfg, Data, Control };

inline std::string_view to_string(EdgeKind kind) {
  constexpr std::array<std::string_view, 4> names = {"AST", "CFG", "DATA", "CONTROL"};
  return names[static_cast<std::size_t>(kind)];
}

struct CpgNode {
  std::size_t id = 0;
  NodeKind kind = NodeKind::StmtNop;
  std::optional<std::size_t> stmt_index;
  std::optional<std::size_t> line;
  std::string text;
  bool is_violation = false;

  bool operator==(const CpgNode &) const = default;
};

struct CpgEdge {
  std::size_t src = 0;
  std::size_t dst = 0;
  EdgeKind kind = EdgeKind::Cfg;

  auto operator<=>(const CpgEdge &) const = default;
};

struct Cpg {
  std::string method_name;
  std::vector<CpgNode> nodes; // sorted by id, ids dense from 0
  std::vector<CpgEdge> edges; // sorted, no duplicates

  bool operator==(const Cpg &) const = default;
};

inline constexpr std::size_t entry_node_id() { return 0; }
inline constexpr std::size_t statement_node_id(std::size_t index) { return index + 1; }
inline constexpr std::size_t exit_node_id(std::size_t statement_count) {
  return statement_count + 1;
}

// Statement nodes plus their AST leaves.
struct AstView {
  std::vector<CpgNode> nodes;
  std::vector<CpgEdge> edges;
};

inline AstView build_ast(const Method &m) {
  AstView view;
  const std::size_t n = m.statements.size();
  for (const Statement &s : m.statements)
    view.nodes.push_back({statement_node_id(s.index), statement_node_kind(s.kind), s.index, s.line,
                          s.raw_text, false});
  std::size_t next_id = exit_node_id(n) + 1;
  for (const Statement &s : m.statements) {
    for (const Term &t : s.terms) {
      const NodeKind kind = t.kind == TermKind::Operand    ? NodeKind::AstOperand
                            : t.kind == TermKind::Operator ? NodeKind::AstOperator
                                                           : NodeKind::AstLiteral;
      view.nodes.push_back({next_id, kind, std::nullopt, std::nullopt, t.text, false});
      view.edges.push_back({statement_node_id(s.index), next_id, EdgeKind::Ast});
      ++next_id;
    }
  }
  return view;
}

// Statement-level control flow graph. Vertices 0..n-1 are statements,
// entry() == n and exit() == n + 1.
class ControlFlowGraph {
public:
  explicit ControlFlowGraph(const Method &m)
      : n_(m.statements.size()), succ_(n_ + 2), pred_(n_ + 2) {
    const auto stmt_succ = detail::statement_successors(m);
    if (n_ > 0)
      link(entry(), 0);
    else
      link(entry(), exit());
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t t : stmt_succ[i])
        link(i, t >= n_ ? exit() : t);
    for (auto &s : succ_)
      std::sort(s.begin(), s.end());
    for (auto &p : pred_)
      std::sort(p.begin(), p.end());
  }

  std::size_t statement_count() const noexcept { return n_; }
  std::size_t vertex_count() const noexcept { return n_ + 2; }
  std::size_t entry() const noexcept { return n_; }
  std::size_t exit() const noexcept { return n_ + 1; }

  const std::vector<std::size_t> &successors(std::size_t v) const { return succ_.at(v); }
  const std::vector<std::size_t> &predecessors(std::size_t v) const { return pred_.at(v); }

  std::size_t node_id(std::size_t v) const {
    return v == entry() ? entry_node_id() : v == exit() ? exit_node_id(n_) : statement_node_id(v);
  }

  std::vector<CpgEdge> edges() const {
    std::vector<CpgEdge> out;
    for (std::size_t v = 0; v < vertex_count(); ++v)
      for (std::size_t w : succ_[v])
        out.push_back({node_id(v), node_id(w), EdgeKind::Cfg});
    std::sort(out.begin(), out.end());
    return out;
  }

private:
  void link(std::size_t from, std::size_t to) {
    if (std::find(succ_[from].begin(), succ_[from].end(), to) != succ_[from].end())
      return;
    succ_[from].push_back(to);
    pred_[to].push_back(from);
  }

  std::size_t n_;
  std::vector<std::vector<std::size_t>> succ_;
  std::vector<std::vector<std::size_t>> pred_;
};

inline ControlFlowGraph build_cfg(const Method &m) { return ControlFlowGraph(m); }

// (variable, defining statement index)
using Definition = std::pair<std::string, std::size_t>;

struct ReachingDefs {
  std::vector<std::set<Definition>> in;
  std::vector<std::set<Definition>> out;
};

// Forward may-analysis, iterated in statement order until nothing changes.
inline ReachingDefs compute_reaching_definitions(const Method &m, const ControlFlowGraph &cfg) {
  const std::size_t n = m.statements.size();
  ReachingDefs rd{std::vector<std::set<Definition>>(n), std::vector<std::set<Definition>>(n)};
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t s = 0; s < n; ++s) {
      std::set<Definition> in;
      for (std::size_t p : cfg.predecessors(s))
        if (p < n)
          in.insert(rd.out[p].begin(), rd.out[p].end());
      const Statement &stmt = m.statements[s];
      std::set<Definition> out;
      for (const Definition &d : in)
        if (!stmt.defs.count(d.first))
          out.insert(d);
      for (const std::string &v : stmt.defs)
        out.emplace(v, s);
      if (in != rd.in[s] || out != rd.out[s]) {
        rd.in[s] = std::move(in);
        rd.out[s] = std::move(out);
        changed = true;
      }
    }
  }
  return rd;
}

inline std::vector<CpgEdge> build_data_dependence(const Method &m, const ReachingDefs &rd) {
  std::set<CpgEdge> edges;
  for (const Statement &s : m.statements)
    for (const Definition &d : rd.in[s.index])
      if (s.uses.count(d.first))
        edges.insert({statement_node_id(d.second), statement_node_id(s.index), EdgeKind::Data});
  return {edges.begin(), edges.end()};
}

// Immediate post-dominators over CFG vertices (statements, entry, exit).
struct PostDominators {
  std::size_t exit = 0;
  std::vector<std::size_t> ipdom; // ipdom[exit] == exit

  std::size_t immediate(std::size_t v) const { return ipdom.at(v); }

  // Reflexive: every vertex post-dominates itself.
  bool post_dominates(std::size_t p, std::size_t v) const {
    while (true) {
      if (v == p)
        return true;
      if (v == exit)
        return false;
      v = ipdom[v];
    }
  }
};

inline PostDominators compute_postdominators(const Method &m, const ControlFlowGraph &cfg) {
  (void)m;
  const std::size_t nv = cfg.vertex_count();
  const std::size_t exit = cfg.exit();

  std::vector<char> reaches(nv, 0);
  std::vector<std::size_t> stack = {exit};
  reaches[exit] = 1;
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    for (std::size_t u : cfg.predecessors(v))
      if (!reaches[u]) {
        reaches[u] = 1;
        stack.push_back(u);
      }
  }
  for (std::size_t v = 0; v < nv; ++v)
    if (!reaches[v])
      throw ValidationError(v == cfg.entry() ? "method exit unreachable from entry"
                                             : "method exit unreachable from statement " +
                                                   std::to_string(v));

  // pdom[v][p] != 0 iff p post-dominates v.
  std::vector<std::vector<char>> pdom(nv, std::vector<char>(nv, 1));
  pdom[exit].assign(nv, 0);
  pdom[exit][exit] = 1;
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t v = 0; v < nv; ++v) {
      if (v == exit)
        continue;
      std::vector<char> next(nv, 1);
      for (std::size_t s : cfg.successors(v))
        for (std::size_t p = 0; p < nv; ++p)
          next[p] = next[p] && pdom[s][p];
      next[v] = 1;
      if (next != pdom[v]) {
        pdom[v] = std::move(next);
        changed = true;
      }
    }
  }

  // The strict post-dominators of v form a chain; the immediate one is the
  // member with the most post-dominators of its own.
  std::vector<std::size_t> size(nv, 0);
  for (std::size_t v = 0; v < nv; ++v)
    size[v] = static_cast<std::size_t>(std::count(pdom[v].begin(), pdom[v].end(), 1));

  PostDominators pd{exit, std::vector<std::size_t>(nv, exit)};
  for (std::size_t v = 0; v < nv; ++v) {
    if (v == exit)
      continue;
    std::size_t best = exit;
    for (std::size_t p = 0; p < nv; ++p)
      if (p != v && pdom[v][p] && size[p] > size[best])
        best = p;
    pd.ipdom[v] = best;
  }
  return pd;
}

// For each CFG edge a->b where b does not post-dominate a, every vertex on
// the post-dominator tree path from b up to (excluding) ipdom(a) is control
// dependent on a.
inline std::vector<CpgEdge> build_control_dependence(const Method &m, const ControlFlowGraph &cfg,
                                                     const PostDominators &pd) {
  const std::size_t n = m.statements.size();
  std::set<CpgEdge> edges;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b : cfg.successors(a)) {
      if (b != a && pd.post_dominates(b, a))
        continue;
      for (std::size_t runner = b; runner != pd.immediate(a) && runner < n;
           runner = pd.immediate(runner))
        edges.insert({statement_node_id(a), statement_node_id(runner), EdgeKind::Control});
    }
  }
  return {edges.begin(), edges.end()};
}

// Union of all views; nodes deduplicated by id (adds ENTRY/EXIT), edges
// deduplicated and sorted.
inline Cpg merge_cpg(const Method &m, const AstView &ast, const std::vector<CpgEdge> &cfg,
                     const std::vector<CpgEdge> &data, const std::vector<CpgEdge> &control) {
  const std::size_t n = m.statements.size();
  std::map<std::size_t, CpgNode> nodes;
  nodes.emplace(entry_node_id(),
                CpgNode{entry_node_id(), NodeKind::MethodEntry, std::nullopt, std::nullopt, "", false});
  nodes.emplace(exit_node_id(n),
                CpgNode{exit_node_id(n), NodeKind::MethodExit, std::nullopt, std::nullopt, "", false});
  for (const CpgNode &node : ast.nodes)
    nodes.emplace(node.id, node);

  std::set<CpgEdge> edges(ast.edges.begin(), ast.edges.end());
  edges.insert(cfg.begin(), cfg.end());
  edges.insert(data.begin(), data.end());
  edges.insert(control.begin(), control.end());

  Cpg g;
  g.method_name = m.name;
  for (auto &[id, node] : nodes)
    g.nodes.push_back(node);
  g.edges.assign(edges.begin(), edges.end());
  return g;
}

inline Cpg build_cpg(const Method &m) {
  const ControlFlowGraph cfg = build_cfg(m);
  const ReachingDefs rd = compute_reaching_definitions(m, cfg);
  const PostDominators pd = compute_postdominators(m, cfg);
  return merge_cpg(m, build_ast(m), cfg.edges(), build_data_dependence(m, rd),
                   build_control_dependence(m, cfg, pd));
}

// Returns a copy in which exactly the statement node on `line` is flagged.
inline Cpg mark_violation(const Cpg &g, std::size_t line) {
  Cpg out = g;
  bool found = false;
  for (CpgNode &node : out.nodes) {
    const bool hit = !found && is_statement(node.kind) && node.line == line;
    node.is_violation = hit;
    found = found || hit;
  }
  if (!found)
    throw ValidationError("no statement at line " + std::to_string(line) + " in method '" +
                          g.method_name + "'");
  return out;
}

inline std::string dump_cpg(const Cpg &g) {
  std::string out;
  for (const CpgNode &node : g.nodes) {
    out += "NODE " + std::to_string(node.id) + " " + std::string(to_string(node.kind)) +
           " line=" + (node.line ? std::to_string(*node.line) : "-") +
           " viol=" + (node.is_violation ? "1" : "0") + " text=" + escape_text(node.text, false) +
           "\n";
  }
  std::vector<CpgEdge> edges = g.edges;
  std::sort(edges.begin(), edges.end());
  for (const CpgEdge &e : edges)
    out += "EDGE " + std::to_string(e.src) + " " + std::to_string(e.dst) + " " +
           std::string(to_string(e.kind)) + "\n";
  return out;
}

} // namespace fpgcn
