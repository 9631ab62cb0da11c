// fpgcn: command-line driver for the report triage pipeline.
//
//   generate -> train-embeddings -> train -> predict -> evaluate
//
// plus `graph` for dumping the code property graph of one method.
//
// Exit codes: 0 success, 1 usage error, 2 data or validation error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fpgcn/fpgcn.hpp"

namespace fs = std::filesystem;
using namespace fpgcn;

namespace {

std::ofstream open_output(const std::string &path) {
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw Error("cannot write " + path);
  return os;
}

void print_evaluation(const std::vector<Verdict> &verdicts, const std::vector<Case> &truth_cases) {
  const auto truth = ground_truth(truth_cases);
  std::cout << format_metrics(compute_metrics(tally(verdicts, truth))) << "\n";
  for (const auto &[family, counts] : tally_by_family(verdicts, truth, families(truth_cases)))
    std::cout << format_family_line(family, counts) << "\n";
}

struct GenerateOptions {
  std::string out;
  std::size_t n = 431;
  double fp_fraction = 0.25;
  std::uint64_t seed = 1;
};

void run_generate(const GenerateOptions &o) {
  GenConfig cfg;
  cfg.n_cases = o.n;
  cfg.fp_fraction = o.fp_fraction;
  cfg.seed = o.seed;
  const auto cases = generate_synthetic_corpus(cfg);
  write_corpus(o.out, cases);
  std::vector<ViolationReport> reports;
  for (const Case &c : cases)
    reports.push_back(case_report(c));
  auto os = open_output((fs::path(o.out) / "reports.jsonl").string());
  write_reports(os, reports);
  std::size_t fp = 0;
  for (const Case &c : cases)
    fp += c.label;
  std::cout << "generated " << cases.size() << " cases (" << fp << " FP) in " << o.out << "\n";
}

struct EmbeddingOptions {
  std::string corpus;
  std::string out;
  W2vConfig cfg;
};

void run_train_embeddings(const EmbeddingOptions &o) {
  const auto cases = load_corpus(fs::path(o.corpus) / kManifestName);
  std::vector<double> loss;
  const EmbeddingTable table = train_word2vec(statement_corpus(cases), o.cfg, &loss);
  save_embeddings(o.out, table);
  std::cout << "vocabulary " << table.vocab.size() << " dim " << table.dim << " loss "
            << format_fixed6(loss.front()) << " -> " << format_fixed6(loss.back()) << "\n";
}

struct TrainOptions {
  std::string corpus;
  std::string embeddings;
  double split = 0.2;
  std::string out;
  std::string history;
  std::string test_reports;
  double threshold = kDefaultThreshold;
  TrainConfig cfg;
};

void run_train(const TrainOptions &o) {
  const auto cases = load_corpus(fs::path(o.corpus) / kManifestName);
  const EmbeddingTable table = load_embeddings(o.embeddings);
  const SplitResult split = split_dataset(cases, o.split, o.cfg.seed);
  for (const auto &w : split.warnings)
    std::cerr << "warning: " << w << "\n";

  const TrainResult result = train(case_examples(split.train, table), o.cfg);
  save_model(o.out, result.model);
  if (!o.history.empty()) {
    auto os = open_output(o.history);
    for (std::size_t e = 0; e < result.loss_history.size(); ++e)
      os << e + 1 << " " << format_g9(result.loss_history[e]) << "\n";
  }
  if (!o.test_reports.empty()) {
    std::vector<ViolationReport> reports;
    for (const Case &c : split.test)
      reports.push_back(case_report(c));
    auto os = open_output(o.test_reports);
    write_reports(os, reports);
  }
  std::cout << "train " << split.train.size() << " test " << split.test.size() << " final loss "
            << format_fixed6(result.loss_history.back()) << "\n";
  if (!split.test.empty())
    print_evaluation(score_cases(split.test, table, result.model, o.threshold), split.test);
}

struct PredictOptions {
  std::string model;
  std::string embeddings;
  std::string reports;
  std::string sources;
  std::string out;
  double threshold = kDefaultThreshold;
};

void run_predict(const PredictOptions &o) {
  if (!(o.threshold >= 0 && o.threshold <= 1))
    throw ValidationError("threshold must lie in [0, 1]");
  const GcnModel model = load_model(o.model);
  const EmbeddingTable table = load_embeddings(o.embeddings);
  std::map<std::string, Program> programs;
  std::vector<Verdict> verdicts;
  for (const ViolationReport &r : ingest_reports(o.reports)) {
    auto it = programs.find(r.source);
    if (it == programs.end()) {
      const auto path = fs::path(o.sources) / r.source;
      if (!fs::is_regular_file(path))
        throw ValidationError("case '" + r.case_id + "': missing source " + path.string());
      it = programs.emplace(r.source, parse_program(read_text_file(path), r.source)).first;
    }
    verdicts.push_back(score_report(r, it->second, table, model, o.threshold));
  }
  auto os = open_output(o.out);
  write_verdicts(os, verdicts);
  std::size_t fp = 0;
  for (const Verdict &v : verdicts)
    fp += v.predicted == Prediction::FalsePositive;
  std::cout << "scored " << verdicts.size() << " reports, " << fp << " predicted FP\n";
}

void run_evaluate(const std::string &verdicts, const std::string &truth) {
  print_evaluation(read_verdicts(verdicts), read_manifest(truth));
}

void run_graph(const std::string &source, const std::string &method, std::size_t line) {
  const Program program = parse_program(read_text_file(source), source);
  const auto diagnostics = validate_program(program);
  if (!diagnostics.empty())
    throw ValidationError(format_diagnostic(diagnostics.front()));
  const Method *m = program.find_method(method);
  if (!m)
    throw ValidationError("no method '" + method + "' in " + source);
  Cpg g = build_cpg(*m);
  if (line > 0)
    g = mark_violation(g, line);
  std::cout << dump_cpg(g);
}

std::vector<std::size_t> parse_widths(const std::string &text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    out.push_back(std::stoul(item));
  return out;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"False-positive triage of static analysis reports with graph convolutional networks"};
  app.require_subcommand(1);

  GenerateOptions gen;
  auto *generate = app.add_subcommand("generate", "Write a synthetic labeled corpus");
  generate->add_option("--out", gen.out, "Output directory")->required();
  generate->add_option("--n", gen.n, "Number of cases")->capture_default_str();
  generate->add_option("--fp-fraction", gen.fp_fraction, "Share of FP-labeled cases")
      ->capture_default_str();
  generate->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();

  EmbeddingOptions emb;
  auto *train_emb = app.add_subcommand("train-embeddings", "Train statement token embeddings");
  train_emb->add_option("--corpus", emb.corpus, "Corpus directory")->required();
  train_emb->add_option("--out", emb.out, "Embedding table file")->required();
  train_emb->add_option("--dim", emb.cfg.dim)->capture_default_str();
  train_emb->add_option("--window", emb.cfg.window)->capture_default_str();
  train_emb->add_option("--negatives", emb.cfg.negatives)->capture_default_str();
  train_emb->add_option("--epochs", emb.cfg.epochs)->capture_default_str();
  train_emb->add_option("--rate", emb.cfg.rate)->capture_default_str();
  train_emb->add_option("--min-count", emb.cfg.min_count)->capture_default_str();
  train_emb->add_option("--seed,--w2v-seed", emb.cfg.seed)->capture_default_str();

  TrainOptions tr;
  std::string hidden = "64,64";
  auto *train_cmd = app.add_subcommand("train", "Train the GCN on a corpus split");
  train_cmd->add_option("--corpus", tr.corpus, "Corpus directory")->required();
  train_cmd->add_option("--embeddings", tr.embeddings, "Embedding table file")->required();
  train_cmd->add_option("--out", tr.out, "Model file")->required();
  train_cmd->add_option("--split", tr.split, "Test share")->capture_default_str();
  train_cmd->add_option("--epochs", tr.cfg.epochs)->capture_default_str();
  train_cmd->add_option("--rate", tr.cfg.rate)->capture_default_str();
  train_cmd->add_option("--clip", tr.cfg.clip)->capture_default_str();
  train_cmd->add_option("--hidden", hidden, "Comma-separated layer widths")->capture_default_str();
  train_cmd->add_option("--seed,--train-seed", tr.cfg.seed)->capture_default_str();
  train_cmd->add_option("--history", tr.history, "Per-epoch loss output");
  train_cmd->add_option("--test-reports", tr.test_reports, "Write held-out cases as reports");
  train_cmd->add_option("--threshold", tr.threshold)->capture_default_str();

  PredictOptions pr;
  auto *predict = app.add_subcommand("predict", "Score reports with a trained model");
  predict->add_option("--model", pr.model)->required();
  predict->add_option("--embeddings", pr.embeddings)->required();
  predict->add_option("--reports", pr.reports)->required();
  predict->add_option("--sources", pr.sources, "Directory the report sources are relative to")
      ->required();
  predict->add_option("--out", pr.out)->required();
  predict->add_option("--threshold", pr.threshold)->capture_default_str();

  std::string verdicts_path, truth_path;
  auto *evaluate = app.add_subcommand("evaluate", "Compare verdicts with ground truth");
  evaluate->add_option("--verdicts", verdicts_path)->required();
  evaluate->add_option("--truth", truth_path, "Corpus manifest")->required();

  std::string source, method;
  std::size_t violation_line = 0;
  auto *graph = app.add_subcommand("graph", "Dump the code property graph of a method");
  graph->add_option("--source", source)->required();
  graph->add_option("--method", method)->required();
  graph->add_option("--violation-line", violation_line);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*generate)
      run_generate(gen);
    else if (*train_emb)
      run_train_embeddings(emb);
    else if (*train_cmd) {
      try {
        tr.cfg.hidden = parse_widths(hidden);
      } catch (const std::exception &) {
        std::cerr << "error: --hidden expects comma-separated positive integers\n";
        return 1;
      }
      run_train(tr);
    } else if (*predict)
      run_predict(pr);
    else if (*evaluate)
      run_evaluate(verdicts_path, truth_path);
    else if (*graph)
      run_graph(source, method, violation_line);
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
