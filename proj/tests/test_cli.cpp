#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "fpgcn/fpgcn.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "fpgcn_cli_test";

std::string slurp(const fs::path &path) {
  std::ifstream is(path, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

struct CliRun {
  int status;
  std::string out;
  std::string err;
};

CliRun cli(const std::string &args) {
  fs::create_directories(kWork);
  const fs::path out = kWork / "stdout.txt", err = kWork / "stderr.txt";
  const std::string cmd = std::string(FPGCN_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int raw = std::system(cmd.c_str());
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(out), slurp(err)};
}

std::string sample() { return std::string(FPGCN_TEST_DATA) + "/sample.mir"; }

} // namespace

TEST(Cli, GraphMatchesGolden) {
  const CliRun r = cli("graph --source " + sample() + " --method m --violation-line 2");
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(r.out, slurp(std::string(FPGCN_TEST_DATA) + "/sample.cpg"));
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(cli("").status, 1);
  EXPECT_EQ(cli("frobnicate").status, 1);
  EXPECT_EQ(cli("graph --method m").status, 1);
  EXPECT_EQ(cli("train --corpus x --embeddings y --out z --hidden 64,x").status, 1);
  EXPECT_EQ(cli("--help").status, 0);
}

TEST(Cli, DataErrors) {
  const CliRun missing = cli("graph --source /nonexistent.mir --method m");
  EXPECT_EQ(missing.status, 2);
  EXPECT_NE(missing.err.find("error:"), std::string::npos);
  EXPECT_EQ(cli("graph --source " + sample() + " --method nope").status, 2);
  EXPECT_EQ(cli("graph --source " + sample() + " --method m --violation-line 1").status, 2);
}

TEST(Cli, EvaluateReferenceVerdicts) {
  fs::create_directories(kWork);
  std::vector<fpgcn::Case> truth;
  std::vector<fpgcn::Verdict> verdicts;
  for (int i = 0; i < 118; ++i) {
    fpgcn::Case c;
    c.case_id = "r" + std::to_string(i);
    c.label = i >= 91;
    c.family = c.label ? "guarded" : "weak-hash";
    truth.push_back(c);
    const bool predicted_fp = (i < 2) || i == 91;
    verdicts.push_back({c.case_id, predicted_fp ? 0.95 : 0.1,
                        predicted_fp ? fpgcn::Prediction::FalsePositive : fpgcn::Prediction::TruePositive,
                        0.8});
  }
  {
    std::ofstream manifest(kWork / "truth.jsonl");
    for (const auto &c : truth)
      manifest << fpgcn::case_to_json(c).dump() << "\n";
    std::ofstream vs(kWork / "verdicts.jsonl");
    fpgcn::write_verdicts(vs, verdicts);
  }
  const CliRun r = cli("evaluate --verdicts " + (kWork / "verdicts.jsonl").string() + " --truth " +
                    (kWork / "truth.jsonl").string());
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.out.find("accuracy=0.762712 tp_rate=0.978022 fp_rate=0.037037 counts=89,1,2,26"),
            std::string::npos)
      << r.out;
  EXPECT_NE(r.out.find("family=guarded accuracy=0.037037 n=27"), std::string::npos) << r.out;
}

TEST(Cli, SmallPipelineIsReproducible) {
  const fs::path dir = kWork / "pipeline";
  fs::remove_all(dir);
  const std::string corpus = (dir / "corpus").string();
  ASSERT_EQ(cli("generate --out " + corpus + " --n 40 --seed 3").status, 0);
  const std::string emb = (dir / "emb.w2v").string();
  ASSERT_EQ(cli("train-embeddings --corpus " + corpus + " --epochs 2 --seed 3 --out " + emb).status, 0);
  std::string models[2], verdicts[2];
  for (int k = 0; k < 2; ++k) {
    const std::string model = (dir / ("model" + std::to_string(k) + ".gcn")).string();
    const std::string reports = (dir / ("test" + std::to_string(k) + ".jsonl")).string();
    const std::string out = (dir / ("verdicts" + std::to_string(k) + ".jsonl")).string();
    const CliRun t = cli("train --corpus " + corpus + " --embeddings " + emb + " --epochs 3 --seed 3 --out " +
                      model + " --history " + (dir / "history.txt").string() + " --test-reports " + reports);
    ASSERT_EQ(t.status, 0) << t.err;
    EXPECT_NE(t.out.find("accuracy="), std::string::npos);
    const CliRun p = cli("predict --model " + model + " --embeddings " + emb + " --reports " + reports +
                      " --sources " + corpus + " --out " + out);
    ASSERT_EQ(p.status, 0) << p.err;
    models[k] = slurp(model);
    verdicts[k] = slurp(out);
  }
  EXPECT_FALSE(models[0].empty());
  EXPECT_EQ(models[0], models[1]);
  EXPECT_EQ(verdicts[0], verdicts[1]);
  EXPECT_EQ(fpgcn::read_verdicts((dir / "verdicts0.jsonl").string()).size(), 8u);

  const CliRun e = cli("evaluate --verdicts " + (dir / "verdicts0.jsonl").string() + " --truth " + corpus +
                    "/manifest.jsonl");
  ASSERT_EQ(e.status, 0) << e.err;
  EXPECT_EQ(e.out.rfind("accuracy=", 0), 0u);

  std::istringstream history(slurp(dir / "history.txt"));
  std::string line;
  int lines = 0;
  while (std::getline(history, line))
    ++lines;
  EXPECT_EQ(lines, 3);
}
