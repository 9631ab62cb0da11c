#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "fpgcn/fpgcn.hpp"
#include "oracles.hpp"

using namespace fpgcn;

namespace {

GraphExample random_example(Rng &rng, std::size_t n, std::size_t f, std::size_t extra_edges) {
  GraphExample ex;
  ex.features = Matrix(n, f);
  for (double &x : ex.features.data())
    x = rng.uniform(-1.0, 1.0);
  std::set<UndirectedEdge> edges;
  for (std::size_t v = 1; v < n; ++v)
    edges.emplace(rng.below(v), v);
  for (std::size_t k = 0; k < extra_edges; ++k) {
    const std::size_t a = rng.below(n), b = rng.below(n);
    if (a != b)
      edges.emplace(std::min(a, b), std::max(a, b));
  }
  ex.adjacency.assign(edges.begin(), edges.end());
  ex.case_id = "random";
  return ex;
}

GraphExample permuted(const GraphExample &ex, const std::vector<std::size_t> &perm) {
  GraphExample out = ex;
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t c = 0; c < ex.features.cols(); ++c)
      out.features(perm[i], c) = ex.features(i, c);
  out.adjacency.clear();
  for (const auto &[u, v] : ex.adjacency)
    out.adjacency.emplace_back(std::min(perm[u], perm[v]), std::max(perm[u], perm[v]));
  return out;
}

const std::vector<Case> &corpus() {
  static const std::vector<Case> cases = generate_synthetic_corpus(GenConfig{});
  return cases;
}

const EmbeddingTable &corpus_table() {
  static const EmbeddingTable table = train_word2vec(statement_corpus(corpus()), W2vConfig{});
  return table;
}

} // namespace

TEST(Normalize, SingleNode) {
  GraphExample ex;
  ex.features = Matrix(1, 3);
  EXPECT_EQ(normalize_adjacency(ex), Matrix(1, 1, 1.0));
}

TEST(Normalize, TwoNodes) {
  GraphExample ex;
  ex.features = Matrix(2, 3);
  ex.adjacency = {{0, 1}};
  const Matrix a = normalize_adjacency(ex);
  for (double x : a.data())
    EXPECT_NEAR(x, 0.5, 1e-15);
}

TEST(Normalize, PathGraph) {
  GraphExample ex;
  ex.features = Matrix(3, 3);
  ex.adjacency = {{0, 1}, {1, 2}};
  const Matrix a = normalize_adjacency(ex);
  EXPECT_NEAR(a(0, 1), 0.40825, 1e-5);
  EXPECT_NEAR(a(0, 1), 1.0 / std::sqrt(6.0), 1e-15);
  EXPECT_EQ(a(0, 2), 0.0);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      EXPECT_EQ(a(i, j), a(j, i));
}

TEST(Normalize, EquivariantUnderRelabeling) {
  Rng rng(5);
  const GraphExample ex = random_example(rng, 9, 4, 6);
  std::vector<std::size_t> perm(9);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  const Matrix a = normalize_adjacency(ex), b = normalize_adjacency(permuted(ex, perm));
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t j = 0; j < 9; ++j)
      EXPECT_EQ(b(perm[i], perm[j]), a(i, j));
}

TEST(Forward, ZeroModelGivesHalf) {
  Rng rng(1);
  const GcnModel zero = GcnModel::zeros({44, 64, 64});
  for (int i = 0; i < 5; ++i)
    EXPECT_EQ(predict_score(zero, random_example(rng, 3 + i, 44, 2)), 0.5);
}

TEST(Forward, IdentityLayerReadsTheFlag) {
  const std::size_t f = feature_width(32);
  GcnModel model = GcnModel::zeros({f, f});
  for (std::size_t i = 0; i < f; ++i)
    model.layers[0].weight(i, i) = 1.0;
  model.head_weight[f - 1] = 1.0;
  GraphExample ex;
  ex.features = Matrix(1, f);
  ex.features(0, 32 + static_cast<std::size_t>(NodeKind::StmtInvoke)) = 1.0;
  ex.features(0, f - 1) = 1.0;
  EXPECT_NEAR(predict_score(model, ex), 0.7311, 1e-4);
  EXPECT_DOUBLE_EQ(predict_score(model, ex), 1.0 / (1.0 + std::exp(-1.0)));
}

TEST(Forward, DimensionMismatch) {
  Rng rng(2);
  const GcnModel model = GcnModel::random({10, 4}, rng);
  EXPECT_THROW(forward(model, random_example(rng, 3, 11, 0)), ValidationError);
}

TEST(Loss, Examples) {
  EXPECT_NEAR(bce_loss(0.5, true), std::log(2.0), 1e-12);
  EXPECT_NEAR(bce_loss(0.5, true), 0.693147, 1e-6);
  EXPECT_NEAR(bce_loss(1.0, true), 1e-7, 1e-9);
  EXPECT_NEAR(bce_loss(0.8, false), 1.609438, 1e-6);
  EXPECT_TRUE(std::isfinite(bce_loss(0.0, true)));
  EXPECT_TRUE(std::isfinite(bce_loss(1.0, false)));
}

TEST(Backward, HeadBiasAtHalf) {
  Rng rng(3);
  const GcnModel zero = GcnModel::zeros({6, 5, 4});
  const GraphExample ex = random_example(rng, 6, 6, 3);
  const GcnGradients g = backward(zero, ex, true, forward(zero, ex));
  EXPECT_DOUBLE_EQ(g.head_bias, -0.5);
  const GcnGradients g0 = backward(zero, ex, false, forward(zero, ex));
  EXPECT_DOUBLE_EQ(g0.head_bias, 0.5);
}

TEST(Backward, MatchesFiniteDifferences) {
  Rng rng(4);
  for (int trial = 0; trial < 5;) {
    const GcnModel model = GcnModel::random({8, 6, 5}, rng);
    const GraphExample ex = random_example(rng, 6, 8, 3);
    if (!oracle::away_from_kinks(model, ex, 1e-3))
      continue;
    EXPECT_LE(gradient_check(model, ex, trial % 2 == 0), 1e-4);
    ++trial;
  }
}

TEST(Backward, ZeroModelHeadBiasMatchesNumeric) {
  Rng rng(6);
  const GcnModel zero = GcnModel::zeros({6, 5, 4});
  const GraphExample ex = random_example(rng, 6, 6, 2);
  const double h = 1e-4;
  GcnModel up = zero, down = zero;
  up.head_bias += h;
  down.head_bias -= h;
  const double numeric =
      (bce_loss(predict_score(up, ex), true) - bce_loss(predict_score(down, ex), true)) / (2 * h);
  EXPECT_NEAR(backward(zero, ex, true, forward(zero, ex)).head_bias, numeric, 1e-6);
}

TEST(Backward, StillExactAfterTraining) {
  Rng rng(7);
  GraphExample ex = random_example(rng, 6, 8, 3);
  ex.label = true;
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.hidden = {6, 5};
  const GcnModel model = train({ex}, cfg).model;
  EXPECT_LE(gradient_check(model, ex, true), 1e-4);
}

TEST(Sgd, Examples) {
  Rng rng(8);
  const GcnModel model = GcnModel::random({4, 3}, rng);
  EXPECT_EQ(sgd_step(model, GcnModel::zeros({4, 3}), 0.5, 5.0), model);

  GcnGradients g = GcnModel::zeros({4, 3});
  g.head_bias = 2.0;
  g.head_weight = {-7.0, 0.25, 5.0};
  const GcnModel stepped = sgd_step(model, g, 1.0, 5.0);
  EXPECT_DOUBLE_EQ(stepped.head_bias, model.head_bias - 2.0);
  EXPECT_DOUBLE_EQ(stepped.head_weight[0], model.head_weight[0] + 5.0);
  EXPECT_DOUBLE_EQ(stepped.head_weight[1], model.head_weight[1] - 0.25);
  EXPECT_DOUBLE_EQ(stepped.head_weight[2], model.head_weight[2] - 5.0);
  EXPECT_EQ(stepped.layers, model.layers);

  EXPECT_EQ(sgd_step(model, g, 0.1, 5.0), sgd_step(model, g, 0.1, 5.0));
  EXPECT_THROW(sgd_step(model, GcnModel::zeros({4, 2}), 0.1, 5.0), ValidationError);
}

TEST(Train, Deterministic) {
  Rng rng(9);
  std::vector<GraphExample> data;
  for (int i = 0; i < 8; ++i) {
    data.push_back(random_example(rng, 5, 6, 2));
    data.back().label = i % 3 == 0;
  }
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.hidden = {8, 8};
  const TrainResult a = train(data, cfg), b = train(data, cfg);
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.loss_history, b.loss_history);
  EXPECT_EQ(a.loss_history.size(), 5u);
}

TEST(Train, RejectsBadInput) {
  EXPECT_THROW(train({}, TrainConfig{}), ValidationError);
  Rng rng(10);
  GraphExample ex = random_example(rng, 3, 4, 0);
  EXPECT_THROW(train({ex}, TrainConfig{}), ValidationError);
  ex.label = false;
  TrainConfig cfg;
  cfg.epochs = 0;
  EXPECT_THROW(train({ex}, cfg), ValidationError);
}

TEST(Train, OverfitsASingleGraph) {
  const Case &c = corpus().front();
  TrainConfig cfg;
  cfg.epochs = 200;
  const TrainResult r = train({case_example(c, corpus_table())}, cfg);
  EXPECT_LT(r.loss_history.back(), 0.05);
}

TEST(Train, MoreEpochsLowerLoss) {
  const auto split = split_dataset(corpus(), 0.2, 1);
  const auto data = case_examples(split.train, corpus_table());
  TrainConfig one;
  one.epochs = 1;
  TrainConfig fifty;
  fifty.epochs = 50;
  EXPECT_LT(train(data, fifty).loss_history.back(), train(data, one).loss_history.back());
}

TEST(Properties, PermutationInvariantScore) {
  Rng rng(11);
  for (int i = 0; i < 5; ++i) {
    const GcnModel model = GcnModel::random({6, 8, 8}, rng);
    const GraphExample ex = random_example(rng, 10, 6, 5);
    std::vector<std::size_t> perm(10);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    EXPECT_NEAR(predict_score(model, permuted(ex, perm)), predict_score(model, ex), 1e-9);
  }
}

TEST(ModelFile, RoundTripIsBitExact) {
  Rng rng(12);
  GcnModel model = GcnModel::random({6, 5, 4}, rng);
  quantize_to_float(model);
  std::stringstream ss;
  write_model(ss, model);
  const GcnModel back = read_model(ss);
  EXPECT_EQ(back, model);
  const GraphExample ex = random_example(rng, 7, 6, 3);
  EXPECT_EQ(predict_score(back, ex), predict_score(model, ex));
  std::stringstream again;
  write_model(again, back);
  EXPECT_EQ(again.str(), ss.str());
}

TEST(ModelFile, TrainedModelReloadsExactly) {
  Rng rng(13);
  GraphExample ex = random_example(rng, 5, 6, 2);
  ex.label = true;
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.hidden = {4};
  const GcnModel model = train({ex}, cfg).model;
  std::stringstream ss;
  write_model(ss, model);
  EXPECT_EQ(read_model(ss), model);
}

TEST(ModelFile, MalformedInput) {
  std::stringstream bad("GCN 1 2\n");
  EXPECT_THROW(read_model(bad), ParseError);
  std::stringstream truncated("GCN 1 2 1\n0.5\n");
  EXPECT_THROW(read_model(truncated), ParseError);
  std::stringstream junk("GCN 1 1 1\n0.5\nabc\n0\n0\n");
  EXPECT_THROW(read_model(junk), ParseError);
}
