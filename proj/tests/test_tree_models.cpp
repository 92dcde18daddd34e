#include <algorithm>
#include <cmath>
#include <cstdlib>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "support.hpp"
#include "xids/error.hpp"
#include "xids/model.hpp"
#include "xids/preprocess.hpp"
#include "xids/synth.hpp"
#include "xids/train.hpp"

namespace xids {
namespace {

using testing::make_dataset;

double accuracy(const AnyModel& m, const Dataset& d) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < d.n_rows(); ++i) {
    ok += code_of(argmax_category(predict_margin(m, d.x.row(i)))) == d.y[i];
  }
  return static_cast<double>(ok) / static_cast<double>(d.n_rows());
}

/// Preprocessed synthetic training/test data.
std::pair<Dataset, Dataset> synthetic(std::size_t n, std::uint64_t seed = 42) {
  GenConfig cfg = GenConfig::defaults();
  cfg.n_samples = n;
  cfg.seed = seed;
  const auto parts = split(clean(generate(cfg)), 0.8, seed);
  const auto state = fit_preprocess(parts.train);
  return {to_dataset(apply_preprocess(parts.train, state)),
          to_dataset(apply_preprocess(parts.test, state))};
}

void check_covers(const TreeModel& t, double root_cover) {
  EXPECT_NEAR(t.root().cover, root_cover, 1e-9 * root_cover);
  for (const auto& n : t.nodes()) {
    if (n.is_leaf()) continue;
    EXPECT_NEAR(n.cover, t.node(n.left).cover + t.node(n.right).cover, 1e-9 * n.cover);
  }
}

Dataset xor_data() {
  return make_dataset({{0, 0}, {0, 1}, {1, 0}, {1, 1}}, {0, 2, 2, 0});
}

// ---- decision tree ----

TEST(DecisionTree, SingleClassIsOneLeaf) {
  const auto d = make_dataset({{1, 2}, {3, 4}, {5, 6}}, {2, 2, 2});
  const auto t = train_decision_tree(d, TrainParams::defaults_for(ModelKind::kDecisionTree));
  ASSERT_EQ(t.nodes().size(), 1u);
  EXPECT_EQ(t.root().scores, (std::vector<double>{0.0, 0.0, 1.0}));
  EXPECT_EQ(t.root().cover, 3.0);
}

TEST(DecisionTree, ConstantFeaturesGiveOneLeaf) {
  const auto d = make_dataset({{1, 1}, {1, 1}, {1, 1}, {1, 1}}, {0, 1, 0, 2});
  const auto t = train_decision_tree(d, TrainParams::defaults_for(ModelKind::kDecisionTree));
  ASSERT_EQ(t.nodes().size(), 1u);
  EXPECT_EQ(t.root().scores, (std::vector<double>{0.5, 0.25, 0.25}));
}

// Exhaustive search over every depth-2 tree whose thresholds are
// midpoints of the training values: is 100% training accuracy attainable?
bool depth2_perfect_exists(const Dataset& d) {
  std::vector<std::pair<std::size_t, double>> splits;
  for (std::size_t f = 0; f < d.n_features(); ++f) {
    std::vector<double> v;
    for (std::size_t i = 0; i < d.n_rows(); ++i) v.push_back(d.x(i, f));
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    for (std::size_t i = 1; i < v.size(); ++i) splits.push_back({f, (v[i - 1] + v[i]) / 2});
  }
  auto pure = [&](auto&& keep) {
    int label = -1;
    for (std::size_t i = 0; i < d.n_rows(); ++i) {
      if (!keep(i)) continue;
      if (label >= 0 && d.y[i] != label) return false;
      label = d.y[i];
    }
    return true;
  };
  for (auto [f, t] : splits) {
    for (auto [fl, tl] : splits) {
      for (auto [fr, tr] : splits) {
        const bool ok =
            pure([&](std::size_t i) { return d.x(i, f) < t && d.x(i, fl) < tl; }) &&
            pure([&](std::size_t i) { return d.x(i, f) < t && !(d.x(i, fl) < tl); }) &&
            pure([&](std::size_t i) { return !(d.x(i, f) < t) && d.x(i, fr) < tr; }) &&
            pure([&](std::size_t i) { return !(d.x(i, f) < t) && !(d.x(i, fr) < tr); });
        if (ok) return true;
      }
    }
  }
  return false;
}

TEST(DecisionTree, XorAtDepthTwo) {
  const auto d = xor_data();
  ASSERT_TRUE(depth2_perfect_exists(d));
  auto params = TrainParams::defaults_for(ModelKind::kDecisionTree);
  params.max_depth = 2;
  const auto t = train_decision_tree(d, params);
  EXPECT_EQ(accuracy(t, d), 1.0);
  EXPECT_LE(t.depth(), 2u);
  check_covers(t, 4.0);
}

TEST(DecisionTree, MidpointThresholds) {
  const auto d = make_dataset({{1}, {2}, {3}, {4}}, {0, 0, 1, 1});
  const auto t = train_decision_tree(d, TrainParams::defaults_for(ModelKind::kDecisionTree));
  ASSERT_FALSE(t.root().is_leaf());
  EXPECT_EQ(t.root().threshold, 2.5);
}

TEST(DecisionTree, AdjacentDoublesStillSeparate) {
  const double a = 1.0, b = std::nextafter(1.0, 2.0);
  const auto d = make_dataset({{a}, {b}}, {0, 1});
  const auto t = train_decision_tree(d, TrainParams::defaults_for(ModelKind::kDecisionTree));
  EXPECT_EQ(accuracy(t, d), 1.0);
}

TEST(DecisionTree, DepthAndLeafSizeLimits) {
  const auto [train, test] = synthetic(3000);
  auto params = TrainParams::defaults_for(ModelKind::kDecisionTree);
  params.max_depth = 3;
  EXPECT_LE(train_decision_tree(train, params).depth(), 3u);
  params.max_depth = 0;
  params.min_samples_leaf = 25;
  const auto t = train_decision_tree(train, params);
  for (const auto& n : t.nodes()) {
    if (n.is_leaf()) EXPECT_GE(n.cover, 25.0);
  }
  check_covers(t, static_cast<double>(train.n_rows()));
}

TEST(DecisionTree, UnlimitedDepthFitsDistinctRows) {
  const auto [train, test] = synthetic(1500);
  const auto t = train_decision_tree(train, TrainParams::defaults_for(ModelKind::kDecisionTree));
  EXPECT_EQ(accuracy(t, train), 1.0);
}

// ---- random forest ----

TEST(RandomForest, ReducesToDecisionTree) {
  const auto [train, test] = synthetic(2000);
  auto params = TrainParams::defaults_for(ModelKind::kRandomForest);
  params.n_trees = 1;
  params.bootstrap = false;
  params.feature_subsample_fraction = 1.0;
  const auto rf = train_random_forest(train, params);
  const auto dt = train_decision_tree(train, TrainParams::defaults_for(ModelKind::kDecisionTree));
  ASSERT_EQ(rf.trees().size(), 1u);
  EXPECT_EQ(rf.trees()[0], dt);
  for (std::size_t i = 0; i < test.n_rows(); ++i) {
    EXPECT_EQ(predict_margin(rf, test.x.row(i)), predict_margin(dt, test.x.row(i)));
  }
}

TEST(RandomForest, CoversProbabilitiesAndDeterminism) {
  const auto [train, test] = synthetic(2000);
  auto params = TrainParams::defaults_for(ModelKind::kRandomForest);
  params.n_trees = 12;
  params.seed = 5;
  const auto rf = train_random_forest(train, params);
  EXPECT_EQ(rf.kind(), EnsembleKind::kRandomForest);
  for (const auto& t : rf.trees()) {
    // bootstrap multiplicities sum to the row count
    check_covers(t, static_cast<double>(train.n_rows()));
    for (const auto& n : t.nodes()) {
      if (!n.is_leaf()) continue;
      double s = 0;
      for (double p : n.scores) s += p;
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
  EXPECT_EQ(train_random_forest(train, params), rf);
  params.seed = 6;
  EXPECT_NE(train_random_forest(train, params), rf);
  for (std::size_t i = 0; i < 50; ++i) {
    const auto m = predict_margin(rf, test.x.row(i));
    EXPECT_NEAR(m[0] + m[1] + m[2], 1.0, 1e-9);
  }
}

TEST(RandomForest, IndependentOfWorkerCount) {
  const auto [train, test] = synthetic(1500);
  auto params = TrainParams::defaults_for(ModelKind::kRandomForest);
  params.n_trees = 8;
  ::setenv("XIDS_THREADS", "1", 1);
  const auto one = train_random_forest(train, params);
  ::setenv("XIDS_THREADS", "4", 1);
  const auto four = train_random_forest(train, params);
  ::unsetenv("XIDS_THREADS");
  EXPECT_EQ(one, four);
}

// ---- gradient boosting ----

TEST(Gbt, ZeroRoundsGivesLogPriors) {
  const auto d = make_dataset({{0}, {1}, {2}, {3}}, {0, 0, 0, 1});
  auto params = TrainParams::defaults_for(ModelKind::kGradientBoosted);
  params.n_boost_rounds = 0;
  const auto m = train_gbt(d, params);
  EXPECT_TRUE(m.trees().empty());
  EXPECT_DOUBLE_EQ(m.base_scores()[0], std::log(0.75));
  EXPECT_DOUBLE_EQ(m.base_scores()[1], std::log(0.25));
  EXPECT_DOUBLE_EQ(m.base_scores()[2], std::log(1e-12));  // absent class floor
  for (double x : {-5.0, 0.5, 9.0}) {
    const std::vector<double> in{x};
    EXPECT_EQ(predict_margin(m, in), m.base_scores());
  }
}

// True when a single axis-aligned threshold separates the two labels.
bool stump_separable(const Dataset& d) {
  for (std::size_t f = 0; f < d.n_features(); ++f) {
    for (std::size_t i = 0; i < d.n_rows(); ++i) {
      const double t = d.x(i, f);
      for (int low : {0, 1}) {
        bool ok = true;
        for (std::size_t j = 0; j < d.n_rows() && ok; ++j) {
          const int side = d.x(j, f) <= t ? low : 1 - low;
          ok = (side == 0) == (d.y[j] == d.y[0]);
        }
        if (ok) return true;
      }
    }
  }
  return false;
}

TEST(Gbt, SeparableToyReachesFullAccuracy) {
  Rng rng(17);
  std::vector<std::vector<double>> rows;
  std::vector<int> y;
  for (int i = 0; i < 60; ++i) {
    const double a = rng.uniform() * 4 - 2;
    rows.push_back({a, rng.normal()});
    y.push_back(a > 0.3 ? 2 : 0);
  }
  const auto d = make_dataset(rows, y);
  ASSERT_TRUE(stump_separable(d));
  auto params = TrainParams::defaults_for(ModelKind::kGradientBoosted);
  params.n_boost_rounds = 10;
  const auto m = train_gbt(d, params);
  EXPECT_EQ(m.trees().size(), 30u);
  EXPECT_EQ(accuracy(m, d), 1.0);
}

TEST(Gbt, TrainingLossNeverIncreases) {
  const auto [train, test] = synthetic(3000);
  for (double lr : {0.05, 0.3}) {
    auto params = TrainParams::defaults_for(ModelKind::kGradientBoosted);
    params.n_boost_rounds = 30;
    params.learning_rate = lr;
    BoostTrace trace;
    const auto m = train_gbt(train, params, &trace);
    ASSERT_EQ(trace.train_loss.size(), 30u);
    for (std::size_t r = 1; r < trace.train_loss.size(); ++r) {
      EXPECT_LE(trace.train_loss[r], trace.train_loss[r - 1] + 1e-12) << "round " << r;
    }
    EXPECT_NEAR(trace.train_loss.back(), cross_entropy(m, train), 1e-9);
    for (const auto& t : m.trees()) check_covers(t, static_cast<double>(train.n_rows()));
  }
}

TEST(Gbt, DeterministicAndNeedsTwoClasses) {
  const auto [train, test] = synthetic(1500);
  auto params = TrainParams::defaults_for(ModelKind::kGradientBoosted);
  params.n_boost_rounds = 5;
  EXPECT_EQ(train_gbt(train, params), train_gbt(train, params));
  const auto one = make_dataset({{0}, {1}}, {1, 1});
  EXPECT_THROW(train_gbt(one, params), Error);
}

// ---- linear SVC ----

TEST(LinearSvc, SeparableToy) {
  Rng rng(23);
  std::vector<std::vector<double>> rows;
  std::vector<int> y;
  for (int i = 0; i < 80; ++i) {
    double a = rng.uniform() * 2 - 1;
    if (std::abs(a) < 0.1) a = a < 0 ? -0.1 : 0.1;
    rows.push_back({a, rng.normal(), rng.normal()});
    y.push_back(a > 0 ? 1 : 0);
  }
  const auto d = make_dataset(rows, y);
  // perceptron oracle: converges only on linearly separable data
  std::vector<double> w(4, 0.0);
  bool converged = false;
  for (int epoch = 0; epoch < 1000 && !converged; ++epoch) {
    converged = true;
    for (std::size_t i = 0; i < d.n_rows(); ++i) {
      const double s = d.y[i] == 1 ? 1.0 : -1.0;
      double m = w[3];
      for (int f = 0; f < 3; ++f) m += w[f] * d.x(i, f);
      if (s * m <= 0) {
        for (int f = 0; f < 3; ++f) w[f] += s * d.x(i, f);
        w[3] += s;
        converged = false;
      }
    }
  }
  ASSERT_TRUE(converged);

  auto params = TrainParams::defaults_for(ModelKind::kLinearSvc);
  const auto m = train_linear_svc(d, params);
  EXPECT_EQ(m.weights.size(), 3u);
  EXPECT_EQ(m.feature_count(), 3u);
  for (std::size_t i = 0; i < d.n_rows(); ++i) {
    const auto s = predict_margin(m, d.x.row(i));
    EXPECT_EQ(s[1] > s[0], d.y[i] == 1) << i;
  }
  EXPECT_EQ(train_linear_svc(d, params), m);
}

// ---- shared ----

TEST(Trainers, EmptyTrainingSet) {
  const auto empty = make_dataset({}, {});
  for (auto kind : {ModelKind::kDecisionTree, ModelKind::kRandomForest,
                    ModelKind::kGradientBoosted, ModelKind::kLinearSvc}) {
    EXPECT_THROW(train_model(kind, empty, TrainParams::defaults_for(kind)), Error);
  }
}

TEST(Trainers, DeterministicForAllKinds) {
  const auto [train, test] = synthetic(1200);
  for (auto kind : {ModelKind::kDecisionTree, ModelKind::kRandomForest,
                    ModelKind::kGradientBoosted, ModelKind::kLinearSvc}) {
    auto params = TrainParams::defaults_for(kind);
    params.n_trees = 5;
    params.n_boost_rounds = 5;
    params.seed = 77;
    EXPECT_EQ(train_model(kind, train, params), train_model(kind, train, params))
        << to_string(kind);
  }
}

TEST(TrainParams, ValidationAndJson) {
  TrainParams p;
  EXPECT_NO_THROW(p.validate());
  p.feature_subsample_fraction = 0.0;
  EXPECT_THROW(p.validate(), Error);
  p.feature_subsample_fraction = 1.5;
  EXPECT_THROW(p.validate(), Error);
  p = TrainParams{};
  p.learning_rate = 0.0;
  EXPECT_THROW(p.validate(), Error);
  p = TrainParams{};
  p.min_samples_leaf = 0;
  EXPECT_THROW(p.validate(), Error);

  for (auto kind : {ModelKind::kDecisionTree, ModelKind::kRandomForest,
                    ModelKind::kGradientBoosted, ModelKind::kLinearSvc}) {
    const auto d = TrainParams::defaults_for(kind);
    EXPECT_EQ(nlohmann::json::parse(nlohmann::json(d).dump()).get<TrainParams>(), d);
    EXPECT_EQ(parse_model_kind(to_string(kind)), kind);
  }
  const auto g = TrainParams::defaults_for(ModelKind::kGradientBoosted);
  EXPECT_EQ(g.n_boost_rounds, 100u);
  EXPECT_EQ(g.max_depth, 6u);
  EXPECT_EQ(g.learning_rate, 0.3);
  EXPECT_EQ(g.l2_leaf_regularization, 1.0);
  EXPECT_EQ(TrainParams::defaults_for(ModelKind::kRandomForest).n_trees, 100u);
  EXPECT_THROW(parse_model_kind("xgb"), Error);
}

// ---- prediction ----

TEST(Predict, SingleLeafAndRouting) {
  const auto leaf = TreeModel::single_leaf({0.2, 0.3, 0.5}, 10, 4);
  EXPECT_EQ(predict_margin(leaf, std::vector<double>{1, 2, 3, 4}),
            (std::vector<double>{0.2, 0.3, 0.5}));

  const std::size_t temp = 0;
  std::vector<TreeNode> nodes(3);
  nodes[0] = {static_cast<std::int32_t>(temp), 37.0, 1, 2, 10.0, {}};
  nodes[1] = {TreeNode::kLeaf, 0, -1, -1, 4.0, {1, 0, 0}};
  nodes[2] = {TreeNode::kLeaf, 0, -1, -1, 6.0, {0, 0, 1}};
  const TreeModel t(nodes, 1, 3);
  EXPECT_EQ(predict_margin(t, std::vector<double>{38.0}), (std::vector<double>{0, 0, 1}));
  EXPECT_EQ(predict_margin(t, std::vector<double>{37.0}), (std::vector<double>{0, 0, 1}));
  EXPECT_EQ(predict_margin(t, std::vector<double>{36.9}), (std::vector<double>{1, 0, 0}));
  EXPECT_THROW(predict_margin(t, std::vector<double>{NAN}), Error);
  EXPECT_THROW(predict_margin(t, std::vector<double>{1, 2}), Error);
}

TEST(Predict, ArgmaxAndTies) {
  EXPECT_EQ(argmax_category(std::vector<double>{0.1, 0.9, 0.0}), AttackCategory::kDataAlteration);
  EXPECT_EQ(argmax_category(std::vector<double>{0.4, 0.4, 0.4}), AttackCategory::kBenign);
  EXPECT_EQ(argmax_category(std::vector<double>{0.5, 0.2, 0.3}), AttackCategory::kBenign);
  EXPECT_EQ(argmax_category(std::vector<double>{0.0, 0.7, 0.7}), AttackCategory::kDataAlteration);
}

TEST(Predict, ArgmaxShiftInvariance) {
  Rng rng(8);
  for (int i = 0; i < 2000; ++i) {
    std::vector<double> m{rng.normal(), rng.normal(), rng.normal()};
    if (i % 10 == 0) m[2] = m[0];  // exercise ties too
    const double k = std::ldexp(static_cast<double>(rng.below(64)) - 32.0, -2);  // exact shift
    std::vector<double> shifted = m;
    for (auto& v : shifted) v += k;
    EXPECT_EQ(argmax_category(m), argmax_category(shifted));
  }
}

TEST(TreeModelValidation, RejectsBrokenTrees) {
  auto make = [](double left_cover) {
    std::vector<TreeNode> n(3);
    n[0] = {0, 0.5, 1, 2, 10.0, {}};
    n[1] = {TreeNode::kLeaf, 0, -1, -1, left_cover, {1, 0, 0}};
    n[2] = {TreeNode::kLeaf, 0, -1, -1, 6.0, {0, 0, 1}};
    return n;
  };
  EXPECT_NO_THROW(TreeModel(make(4.0), 1, 3));
  EXPECT_THROW(TreeModel(make(5.0), 1, 3), Error);  // cover sum
  auto n = make(4.0);
  n[0].threshold = INFINITY;
  EXPECT_THROW(TreeModel(n, 1, 3), Error);
  n = make(4.0);
  n[0].feature = 3;
  EXPECT_THROW(TreeModel(n, 1, 3), Error);
  n = make(4.0);
  n[1].scores = {1, 0};
  EXPECT_THROW(TreeModel(n, 1, 3), Error);
  n = make(4.0);
  n[0].left = 0;
  EXPECT_THROW(TreeModel(n, 1, 3), Error);
}

}  // namespace
}  // namespace xids
