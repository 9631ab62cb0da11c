#pragma once

// End-to-end helpers shared by the CLI and the acceptance suite.

#include <map>
#include <string>
#include <vector>

#include "fpgcn/datasets.hpp"
#include "fpgcn/embed.hpp"
#include "fpgcn/evaluation.hpp"
#include "fpgcn/featurize.hpp"
#include "fpgcn/gcn.hpp"
#include "fpgcn/graphs.hpp"
#include "fpgcn/reports.hpp"

namespace fpgcn {

// Tokenized statement text of every method in every case.
inline std::vector<TokenList> statement_corpus(const std::vector<Case> &cases) {
  std::vector<TokenList> corpus;
  for (const Case &c : cases)
    for (const Method &m : parse_program(c.mir_source, c.source).methods)
      for (const Statement &s : m.statements)
        corpus.push_back(tokenize(s.raw_text));
  return corpus;
}

inline ViolationReport case_report(const Case &c) {
  return {c.case_id, c.source, c.method_name, c.violation_line, c.family};
}

inline GraphExample case_example(const Case &c, const EmbeddingTable &table) {
  const Program program = check_case(c);
  return to_example(report_graph(case_report(c), program), table, c.label, c.case_id);
}

inline std::vector<GraphExample> case_examples(const std::vector<Case> &cases,
                                               const EmbeddingTable &table) {
  std::vector<GraphExample> out;
  out.reserve(cases.size());
  for (const Case &c : cases)
    out.push_back(case_example(c, table));
  return out;
}

inline std::vector<Verdict> score_cases(const std::vector<Case> &cases, const EmbeddingTable &table,
                                        const GcnModel &model, double threshold = kDefaultThreshold) {
  std::vector<Verdict> out;
  for (const Case &c : cases)
    out.push_back(score_report(case_report(c), check_case(c), table, model, threshold));
  return out;
}

inline std::map<std::string, bool> ground_truth(const std::vector<Case> &cases) {
  std::map<std::string, bool> out;
  for (const Case &c : cases)
    out[c.case_id] = c.label;
  return out;
}

inline std::map<std::string, std::string> families(const std::vector<Case> &cases) {
  std::map<std::string, std::string> out;
  for (const Case &c : cases)
    out[c.case_id] = c.family;
  return out;
}

} // namespace fpgcn
