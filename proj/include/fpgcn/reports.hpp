#pragma once

// Analysis reports in, verdicts out: each reported line is mapped to its
// statement node, the method's graph is scored, and the score is thresholded.

#include <cstddef>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fpgcn/common.hpp"
#include "fpgcn/embed.hpp"
#include "fpgcn/featurize.hpp"
#include "fpgcn/gcn.hpp"
#include "fpgcn/graphs.hpp"
#include "fpgcn/mir.hpp"

namespace fpgcn {

inline constexpr double kDefaultThreshold = 0.8;

struct ViolationReport {
  std::string case_id;
  std::string source;
  std::string method_name;
  std::size_t reported_line = 1;
  std::string rule_id;

  bool operator==(const ViolationReport &) const = default;
};

enum class Prediction { FalsePositive, TruePositive };

inline std::string_view to_string(Prediction p) {
  return p == Prediction::FalsePositive ? "FP" : "TP";
}

struct Verdict {
  std::string case_id;
  double score = 0.0;
  Prediction predicted = Prediction::TruePositive;
  double threshold = kDefaultThreshold;
};

// Strictly above the threshold is a false positive.
inline Prediction classify(double score, double threshold = kDefaultThreshold) {
  return score > threshold ? Prediction::FalsePositive : Prediction::TruePositive;
}

inline std::vector<ViolationReport> parse_reports(std::istream &is) {
  std::vector<ViolationReport> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ViolationReport r;
      r.case_id = j.at("case_id").get<std::string>();
      r.source = j.at("source").get<std::string>();
      r.method_name = j.at("method").get<std::string>();
      const auto reported = j.at("reported_line").get<long long>();
      if (reported < 1)
        throw ParseError("reported_line must be positive", lineno);
      r.reported_line = static_cast<std::size_t>(reported);
      r.rule_id = j.at("rule_id").get<std::string>();
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception &e) {
      throw ParseError(std::string("malformed report record: ") + e.what(), lineno);
    }
  }
  return out;
}

inline std::vector<ViolationReport> ingest_reports(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw Error("cannot read " + path);
  return parse_reports(is);
}

inline void write_reports(std::ostream &os, const std::vector<ViolationReport> &reports) {
  for (const ViolationReport &r : reports) {
    nlohmann::ordered_json j;
    j["case_id"] = r.case_id;
    j["source"] = r.source;
    j["method"] = r.method_name;
    j["reported_line"] = r.reported_line;
    j["rule_id"] = r.rule_id;
    os << j.dump() << "\n";
  }
}

// Graph of the reported method with the reported statement flagged.
inline Cpg report_graph(const ViolationReport &r, const Program &program) {
  const Method *m = program.find_method(r.method_name);
  if (!m)
    throw ValidationError("case '" + r.case_id + "': unknown method '" + r.method_name + "'");
  if (!m->statement_at_line(r.reported_line))
    throw ValidationError("case '" + r.case_id + "': no statement at line " +
                          std::to_string(r.reported_line));
  return mark_violation(build_cpg(*m), r.reported_line);
}

inline Verdict score_report(const ViolationReport &r, const Program &program,
                            const EmbeddingTable &table, const GcnModel &model,
                            double threshold = kDefaultThreshold) {
  const GraphExample ex = to_example(report_graph(r, program), table, std::nullopt, r.case_id);
  const double score = predict_score(model, ex);
  return {r.case_id, score, classify(score, threshold), threshold};
}

inline void write_verdicts(std::ostream &os, const std::vector<Verdict> &verdicts) {
  for (const Verdict &v : verdicts)
    os << "{\"case_id\":" << nlohmann::json(v.case_id).dump()
       << ",\"score\":" << format_g9(v.score) << ",\"predicted\":\"" << to_string(v.predicted)
       << "\",\"threshold\":" << format_g9(v.threshold) << "}\n";
}

inline std::vector<Verdict> parse_verdicts(std::istream &is) {
  std::vector<Verdict> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Verdict v;
      v.case_id = j.at("case_id").get<std::string>();
      v.score = j.at("score").get<double>();
      v.threshold = j.at("threshold").get<double>();
      const auto predicted = j.at("predicted").get<std::string>();
      if (predicted != "FP" && predicted != "TP")
        throw ParseError("predicted must be \"FP\" or \"TP\"", lineno);
      v.predicted = predicted == "FP" ? Prediction::FalsePositive : Prediction::TruePositive;
      out.push_back(std::move(v));
    } catch (const nlohmann::json::exception &e) {
      throw ParseError(std::string("malformed verdict record: ") + e.what(), lineno);
    }
  }
  return out;
}

inline std::vector<Verdict> read_verdicts(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw Error("cannot read " + path);
  return parse_verdicts(is);
}

} // namespace fpgcn
