#pragma once

// Ground-truth comparison of verdicts.
//
//   accuracy = (TP_correct + FP_correct) /
//              (TP_correct + FP_correct + TP_incorrect + FP_incorrect)
//
// where TP/FP name the ground-truth class of a report and correct/incorrect
// whether the model's prediction agrees with it.

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fpgcn/common.hpp"
#include "fpgcn/reports.hpp"

namespace fpgcn {

struct EvaluationCounts {
  std::size_t tp_correct = 0;
  std::size_t fp_correct = 0;
  std::size_t tp_incorrect = 0;
  std::size_t fp_incorrect = 0;

  std::size_t total() const noexcept { return tp_correct + fp_correct + tp_incorrect + fp_incorrect; }

  bool operator==(const EvaluationCounts &) const = default;
};

// ground_truth: case_id -> true when the report is a false positive.
inline EvaluationCounts tally(const std::vector<Verdict> &verdicts,
                              const std::map<std::string, bool> &ground_truth) {
  EvaluationCounts c;
  for (const Verdict &v : verdicts) {
    auto it = ground_truth.find(v.case_id);
    if (it == ground_truth.end())
      throw ValidationError("no ground truth for case '" + v.case_id + "'");
    const bool predicted_fp = v.predicted == Prediction::FalsePositive;
    if (it->second)
      ++(predicted_fp ? c.fp_correct : c.fp_incorrect);
    else
      ++(predicted_fp ? c.tp_incorrect : c.tp_correct);
  }
  return c;
}

inline double accuracy(const EvaluationCounts &c) {
  if (c.total() == 0)
    throw ValidationError("accuracy of an empty evaluation is undefined");
  return static_cast<double>(c.tp_correct + c.fp_correct) / static_cast<double>(c.total());
}

struct Metrics {
  double accuracy = 0.0;
  std::optional<double> tp_rate; // share of ground-truth TP reports kept as TP
  std::optional<double> fp_rate; // share of ground-truth FP reports predicted FP
  EvaluationCounts counts;
};

inline Metrics compute_metrics(const EvaluationCounts &c) {
  Metrics m;
  m.counts = c;
  m.accuracy = accuracy(c);
  if (const auto tp = c.tp_correct + c.tp_incorrect)
    m.tp_rate = static_cast<double>(c.tp_correct) / static_cast<double>(tp);
  if (const auto fp = c.fp_correct + c.fp_incorrect)
    m.fp_rate = static_cast<double>(c.fp_correct) / static_cast<double>(fp);
  return m;
}

inline std::string format_metrics(const Metrics &m) {
  auto rate = [](const std::optional<double> &r) { return r ? format_fixed6(*r) : std::string("nan"); };
  const auto &c = m.counts;
  return "accuracy=" + format_fixed6(m.accuracy) + " tp_rate=" + rate(m.tp_rate) +
         " fp_rate=" + rate(m.fp_rate) + " counts=" + std::to_string(c.tp_correct) + "," +
         std::to_string(c.fp_correct) + "," + std::to_string(c.tp_incorrect) + "," +
         std::to_string(c.fp_incorrect);
}

// Counts per family tag; cases with no family are grouped under "".
inline std::map<std::string, EvaluationCounts>
tally_by_family(const std::vector<Verdict> &verdicts, const std::map<std::string, bool> &ground_truth,
                const std::map<std::string, std::string> &family_of) {
  std::map<std::string, EvaluationCounts> out;
  for (const Verdict &v : verdicts) {
    auto it = family_of.find(v.case_id);
    const std::string family = it == family_of.end() ? "" : it->second;
    const EvaluationCounts one = tally({v}, ground_truth);
    EvaluationCounts &acc = out[family];
    acc.tp_correct += one.tp_correct;
    acc.fp_correct += one.fp_correct;
    acc.tp_incorrect += one.tp_incorrect;
    acc.fp_incorrect += one.fp_incorrect;
  }
  return out;
}

inline std::string format_family_line(const std::string &family, const EvaluationCounts &c) {
  return "family=" + (family.empty() ? std::string("-") : family) +
         " accuracy=" + format_fixed6(accuracy(c)) + " n=" + std::to_string(c.total());
}

} // namespace fpgcn
