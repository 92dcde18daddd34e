#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "support.hpp"
#include "xids/error.hpp"
#include "xids/preprocess.hpp"
#include "xids/shapley.hpp"
#include "xids/synth.hpp"
#include "xids/train.hpp"

namespace xids {
namespace {

using testing::random_input;
using testing::random_tree;

// ---- independent oracle ----
// Coalition value written from the definition, and Shapley values as the
// average marginal contribution over every ordering of the used features.

std::vector<double> oracle_value(const TreeModel& t, std::size_t node,
                                 std::span<const double> x, const std::vector<bool>& in) {
  const auto& n = t.node(node);
  if (n.is_leaf()) return n.scores;
  if (in[n.feature]) return oracle_value(t, x[n.feature] < n.threshold ? n.left : n.right, x, in);
  const auto l = oracle_value(t, n.left, x, in);
  const auto r = oracle_value(t, n.right, x, in);
  const double wl = t.node(n.left).cover / n.cover, wr = t.node(n.right).cover / n.cover;
  std::vector<double> out(l.size());
  for (std::size_t c = 0; c < l.size(); ++c) out[c] = wl * l[c] + wr * r[c];
  return out;
}

Matrix permutation_shapley(const TreeModel& t, std::span<const double> x) {
  const auto used_flags = t.used_features();
  std::vector<std::size_t> used;
  for (std::size_t f = 0; f < used_flags.size(); ++f) {
    if (used_flags[f]) used.push_back(f);
  }
  Matrix phi(t.feature_count(), t.class_count());
  std::size_t orderings = 0;
  do {
    ++orderings;
    std::vector<bool> in(t.feature_count(), false);
    auto prev = oracle_value(t, 0, x, in);
    for (std::size_t f : used) {
      in[f] = true;
      const auto next = oracle_value(t, 0, x, in);
      for (std::size_t c = 0; c < t.class_count(); ++c) phi(f, c) += next[c] - prev[c];
      prev = next;
    }
  } while (std::next_permutation(used.begin(), used.end()));
  for (std::size_t f = 0; f < t.feature_count(); ++f) {
    for (std::size_t c = 0; c < t.class_count(); ++c) phi(f, c) /= static_cast<double>(orderings);
  }
  return phi;
}

void expect_matrix_near(const Matrix& a, const Matrix& b, double tol) {
  ASSERT_EQ(a.rows(), b.rows());
  ASSERT_EQ(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) EXPECT_NEAR(a(i, j), b(i, j), tol) << i << "," << j;
  }
}

TreeModel depth_one(double cl, double cr, std::vector<double> a, std::vector<double> b,
                    std::size_t features = 3) {
  std::vector<TreeNode> n(3);
  n[0] = {0, 0.0, 1, 2, cl + cr, {}};
  n[1] = {TreeNode::kLeaf, 0, -1, -1, cl, std::move(a)};
  n[2] = {TreeNode::kLeaf, 0, -1, -1, cr, std::move(b)};
  return TreeModel(n, features, 3);
}

const Dataset& gbt_data() {
  static const Dataset d = [] {
    GenConfig cfg = GenConfig::defaults();
    cfg.n_samples = 3000;
    const auto t = clean(generate(cfg));
    return to_dataset(apply_preprocess(t, fit_preprocess(t)));
  }();
  return d;
}

// ---- tree_expected_value ----

TEST(ExpectedValue, FullCoalitionIsPrediction) {
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const auto t = random_tree(rng, 4, 6, 6, 3);
    const auto x = random_input(rng, 6);
    EXPECT_EQ(tree_expected_value(t, x, std::vector<bool>(6, true)), predict_margin(t, x));
  }
}

TEST(ExpectedValue, EmptyCoalitionIsCoverWeighted) {
  const auto t = depth_one(30, 70, {1, 2, 3}, {-1, 0, 5});
  const auto v = tree_expected_value(t, std::vector<double>{9, 9, 9}, std::vector<bool>(3, false));
  EXPECT_NEAR(v[0], 0.3 * 1 + 0.7 * -1, 1e-15);
  EXPECT_NEAR(v[1], 0.3 * 2 + 0.7 * 0, 1e-15);
  EXPECT_NEAR(v[2], 0.3 * 3 + 0.7 * 5, 1e-15);
}

TEST(ExpectedValue, SingleLeaf) {
  const auto t = TreeModel::single_leaf({0.1, 0.2, 0.7}, 9, 4);
  EXPECT_EQ(tree_expected_value(t, std::vector<double>(4, 1.0), {true, false, true, false}),
            (std::vector<double>{0.1, 0.2, 0.7}));
}

TEST(ExpectedValue, ZeroCoverInternalNodeRejected) {
  std::vector<TreeNode> n(3);
  n[0] = {0, 0.0, 1, 2, 0.0, {}};
  n[1] = {TreeNode::kLeaf, 0, -1, -1, 0.0, {1, 0, 0}};
  n[2] = {TreeNode::kLeaf, 0, -1, -1, 0.0, {0, 1, 0}};
  const TreeModel t(n, 1, 3);
  EXPECT_THROW(tree_expected_value(t, std::vector<double>{1}, {false}), Error);
  try {
    tree_shap_sample(t, std::vector<double>{1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidModel);
  }
}

// ---- brute force ----

TEST(BruteForce, AgreesWithPermutationOracle) {
  Rng rng(11);
  for (int i = 0; i < 40; ++i) {
    const auto t = random_tree(rng, 4, 7, 5, 3);
    const auto x = random_input(rng, 7);
    expect_matrix_near(brute_force_shap(t, x), permutation_shapley(t, x), 1e-12);
  }
}

TEST(BruteForce, SingleLeafIsZero) {
  const auto t = TreeModel::single_leaf({1, 2, 3}, 5, 4);
  const auto phi = brute_force_shap(t, std::vector<double>{1, 2, 3, 4});
  for (double v : phi.values()) EXPECT_EQ(v, 0.0);
}

TEST(BruteForce, SinglePlayerGame) {
  const auto t = depth_one(25, 75, {1, 0, 0}, {0, 0, 4});
  const std::vector<double> x{0.5, -3, 7};  // routed right
  const auto phi = brute_force_shap(t, x);
  const auto m = predict_margin(t, x);
  const auto v0 = tree_expected_value(t, x, std::vector<bool>(3, false));
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_NEAR(phi(0, c), m[c] - v0[c], 1e-15);
    EXPECT_EQ(phi(1, c), 0.0);
    EXPECT_EQ(phi(2, c), 0.0);
  }
}

TEST(BruteForce, EfficiencyOnRandomDepthFourTrees) {
  Rng rng(12);
  const auto t = random_tree(rng, 4, 6, 6, 3);
  for (int i = 0; i < 50; ++i) {
    const auto x = random_input(rng, 6);
    const auto phi = brute_force_shap(t, x);
    const auto m = predict_margin(t, x);
    const auto base = tree_expected_value(t, x, std::vector<bool>(6, false));
    for (std::size_t c = 0; c < 3; ++c) {
      double s = base[c];
      for (std::size_t f = 0; f < 6; ++f) s += phi(f, c);
      EXPECT_NEAR(s, m[c], 1e-12);
    }
  }
}

TEST(BruteForce, RefusesTooManyFeatures) {
  // a comb of 21 splits, each on its own feature: split k sits at 2k with
  // its left leaf at 2k+1 and the next split (or the last leaf) at 2k+2
  const std::size_t depth = kMaxBruteForceFeatures + 1;
  std::vector<TreeNode> nodes;
  for (std::size_t k = 0; k < depth; ++k) {
    const auto i = static_cast<std::int32_t>(nodes.size());
    nodes.push_back({static_cast<std::int32_t>(k), 0.0, i + 1, i + 2,
                     static_cast<double>(depth + 1 - k), {}});
    nodes.push_back({TreeNode::kLeaf, 0, -1, -1, 1.0, {1, 0, 0}});
  }
  nodes.push_back({TreeNode::kLeaf, 0, -1, -1, 1.0, {0, 0, 1}});
  const TreeModel t(nodes, depth, 3);
  try {
    brute_force_shap(t, std::vector<double>(depth, 1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTooLarge);
  }
  // the fast path has no such limit and still adds up
  const std::vector<double> x(depth, 1.0);
  const auto phi = tree_shap_sample(t, x);
  const auto base = tree_expected_value(t, x, std::vector<bool>(depth, false));
  double s = base[2];
  for (std::size_t f = 0; f < depth; ++f) s += phi(f, 2);
  EXPECT_NEAR(s, predict_margin(t, x)[2], 1e-12);
}

// ---- tree_shap ----

TEST(TreeShap, MatchesBruteForceOnTrees) {
  Rng rng(21);
  for (int i = 0; i < 60; ++i) {
    const auto t = random_tree(rng, 1 + rng.below(5), 14, 1 + rng.below(12), 3);
    for (int k = 0; k < 20; ++k) {
      const auto x = random_input(rng, 14);
      expect_matrix_near(tree_shap_sample(t, x), brute_force_shap(t, x), 1e-9);
    }
  }
}

TEST(TreeShap, MatchesBruteForceOnEnsembles) {
  Rng rng(22);
  for (int i = 0; i < 20; ++i) {
    std::vector<TreeModel> trees;
    const std::size_t used = 1 + rng.below(12);
    for (std::size_t k = 0; k < 1 + rng.below(6); ++k) trees.push_back(random_tree(rng, 4, 12, used, 3));
    const EnsembleModel m(EnsembleKind::kGradientBoosted, trees, {0.1, -0.2, 0.3}, 0.3, 12);
    for (int k = 0; k < 10; ++k) {
      const auto x = random_input(rng, 12);
      expect_matrix_near(tree_shap_sample(m, x), brute_force_shap(m, x), 1e-9);
    }
  }
}

TEST(TreeShap, ZeroRoundGbt) {
  auto params = TrainParams::defaults_for(ModelKind::kGradientBoosted);
  params.n_boost_rounds = 0;
  const auto m = train_gbt(gbt_data(), params);
  Matrix x(5, gbt_data().n_features());
  for (std::size_t i = 0; i < 5; ++i) {
    std::copy(gbt_data().x.row(i).begin(), gbt_data().x.row(i).end(), x.row(i).begin());
  }
  const auto e = tree_shap(m, x, gbt_data().feature_names);
  for (double v : e.attributions) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(e.base_values, m.base_scores());
}

TEST(TreeShap, DummyFeaturesGetExactZero) {
  Rng rng(31);
  for (int i = 0; i < 30; ++i) {
    const auto t = random_tree(rng, 4, 10, 4, 3);  // features 4..9 never split on
    const auto x = random_input(rng, 10);
    const auto fast = tree_shap_sample(t, x);
    const auto brute = brute_force_shap(t, x);
    const auto used = t.used_features();
    for (std::size_t f = 0; f < 10; ++f) {
      if (used[f]) continue;
      for (std::size_t c = 0; c < 3; ++c) {
        EXPECT_EQ(fast(f, c), 0.0);
        EXPECT_EQ(brute(f, c), 0.0);
      }
    }
  }
}

TEST(TreeShap, Symmetry) {
  // f0 at the root, f1 below on both sides. Leaves are symmetric under
  // swapping f0 and f1, and the covers factor as 0.4/0.6 on each feature,
  // which is what makes the path-dependent game symmetric too.
  std::vector<TreeNode> n(7);
  n[0] = {0, 0.0, 1, 2, 100, {}};
  n[1] = {1, 0.0, 3, 4, 40, {}};
  n[2] = {1, 0.0, 5, 6, 60, {}};
  n[3] = {TreeNode::kLeaf, 0, -1, -1, 16, {0.5, -1.0, 2.0}};   // (lo, lo)
  n[4] = {TreeNode::kLeaf, 0, -1, -1, 24, {1.5, 0.25, -0.5}};  // (lo, hi)
  n[5] = {TreeNode::kLeaf, 0, -1, -1, 24, {1.5, 0.25, -0.5}};  // (hi, lo)
  n[6] = {TreeNode::kLeaf, 0, -1, -1, 36, {-2.0, 3.0, 0.125}}; // (hi, hi)
  const TreeModel t(n, 3, 3);
  for (double v : {-0.7, 0.0, 0.4}) {
    const std::vector<double> x{v, v, 5.0};
    const auto fast = tree_shap_sample(t, x);
    const auto brute = brute_force_shap(t, x);
    for (std::size_t c = 0; c < 3; ++c) {
      EXPECT_NEAR(fast(0, c), fast(1, c), 1e-12);
      EXPECT_NEAR(brute(0, c), brute(1, c), 1e-12);
    }
  }
}

TEST(TreeShap, AdditiveOverTrees) {
  Rng rng(41);
  std::vector<TreeModel> trees;
  for (int k = 0; k < 5; ++k) trees.push_back(random_tree(rng, 3, 8, 8, 3));
  const EnsembleModel m(EnsembleKind::kGradientBoosted, trees, {0, 0, 0}, 0.3, 8);
  for (int i = 0; i < 20; ++i) {
    const auto x = random_input(rng, 8);
    Matrix sum(8, 3);
    for (const auto& t : trees) {
      const auto phi = tree_shap_sample(t, x);
      for (std::size_t f = 0; f < 8; ++f) {
        for (std::size_t c = 0; c < 3; ++c) sum(f, c) += phi(f, c);
      }
    }
    expect_matrix_near(tree_shap_sample(m, x), sum, 1e-12);
  }
}

TEST(TreeShap, LocalAccuracyOnTrainedModels) {
  auto params = TrainParams::defaults_for(ModelKind::kGradientBoosted);
  params.n_boost_rounds = 20;
  const auto gbt = train_gbt(gbt_data(), params);
  auto rf_params = TrainParams::defaults_for(ModelKind::kRandomForest);
  rf_params.n_trees = 10;
  const auto rf = train_random_forest(gbt_data(), rf_params);
  Matrix x(200, gbt_data().n_features());
  for (std::size_t i = 0; i < 200; ++i) {
    std::copy(gbt_data().x.row(i).begin(), gbt_data().x.row(i).end(), x.row(i).begin());
  }
  for (const EnsembleModel* m : {&gbt, &rf}) {
    const auto e = tree_shap(*m, x, gbt_data().feature_names);
    for (std::size_t s = 0; s < e.n_samples; ++s) {
      const auto margin = predict_margin(*m, x.row(s));
      for (std::size_t c = 0; c < e.n_classes; ++c) {
        double total = e.base_values[c];
        for (std::size_t f = 0; f < e.n_features; ++f) total += e.at(s, f, c);
        EXPECT_NEAR(total, margin[c], 1e-6);
      }
    }
  }
}

TEST(TreeShap, IndependentOfWorkerCount) {
  auto params = TrainParams::defaults_for(ModelKind::kGradientBoosted);
  params.n_boost_rounds = 10;
  const auto m = train_gbt(gbt_data(), params);
  Matrix x(100, gbt_data().n_features());
  for (std::size_t i = 0; i < 100; ++i) {
    std::copy(gbt_data().x.row(i).begin(), gbt_data().x.row(i).end(), x.row(i).begin());
  }
  const auto a = tree_shap(m, x, gbt_data().feature_names, 1);
  const auto b = tree_shap(m, x, gbt_data().feature_names, 4);
  EXPECT_EQ(a.attributions, b.attributions);
  EXPECT_EQ(a.base_values, b.base_values);
}

TEST(TreeShap, DimensionChecks) {
  const auto t = TreeModel::single_leaf({1, 0, 0}, 1, 3);
  EXPECT_THROW(tree_shap(t, Matrix(2, 4), {"a", "b", "c", "d"}), Error);
  EXPECT_THROW(tree_shap(t, Matrix(2, 3), {"a", "b"}), Error);
}

// ---- summarize and exports ----

ShapExplanation hand_explanation(std::size_t samples, std::size_t features,
                                 const std::function<double(std::size_t, std::size_t, std::size_t)>& v) {
  ShapExplanation e;
  e.n_samples = samples;
  e.n_features = features;
  e.n_classes = 3;
  e.attributions.resize(samples * features * 3);
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t f = 0; f < features; ++f) {
      for (std::size_t c = 0; c < 3; ++c) e.at(s, f, c) = v(s, f, c);
    }
  }
  e.base_values = {0.5, -1, 0.25};
  for (std::size_t f = 0; f < features; ++f) e.feature_names.push_back("f" + std::to_string(f));
  e.feature_values = Matrix(samples, features, 0.5);
  for (std::size_t s = 0; s < samples; ++s) e.sample_ids.push_back(10 + s);
  return e;
}

TEST(Summarize, AllZeros) {
  const auto e = hand_explanation(4, 5, [](auto, auto, auto) { return 0.0; });
  const auto s = summarize(e, 3);
  for (double v : s.mean_abs.values()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(s.ranking, (std::vector<std::size_t>{0, 1, 2}));
  for (const auto& r : s.class_ranking) EXPECT_EQ(r, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Summarize, AbsoluteValue) {
  const auto e = hand_explanation(1, 1, [](auto, auto, auto c) { return c == 0 ? -0.5 : 0.0; });
  const auto s = summarize(e, 1);
  EXPECT_EQ(s.mean_abs(0, 0), 0.5);
  EXPECT_EQ(s.total_mean_abs(0), 0.5);
}

TEST(Summarize, RankingAndBeeswarm) {
  // feature f contributes (f % 3) * (class + 1) on average, with alternating sign
  const auto e = hand_explanation(6, 5, [](auto s, auto f, auto c) {
    const double mag = static_cast<double>((f % 3) * (c + 1));
    return s % 2 ? mag : -mag;
  });
  const auto s = summarize(e, 3);
  EXPECT_EQ(s.ranking, (std::vector<std::size_t>{2, 1, 4}));  // ties keep feature order
  EXPECT_DOUBLE_EQ(s.mean_abs(2, 2), 6.0);
  for (std::size_t c = 0; c < 3; ++c) {
    ASSERT_EQ(s.beeswarm[c].size(), 3u);
    for (std::size_t k = 0; k < 3; ++k) {
      const auto& strip = s.beeswarm[c][k];
      EXPECT_EQ(strip.feature, s.class_ranking[c][k]);
      EXPECT_EQ(strip.attributions.size(), 6u);
      EXPECT_EQ(strip.values.size(), 6u);
    }
  }
}

TEST(Summarize, ClampsTopKAndRejectsBadInput) {
  const auto e = hand_explanation(2, 3, [](auto s, auto f, auto c) { return double(s + f + c); });
  EXPECT_EQ(summarize(e, 50).ranking.size(), 3u);
  EXPECT_THROW(summarize(e, 0), Error);
  EXPECT_THROW(summarize(hand_explanation(0, 3, [](auto, auto, auto) { return 0.0; }), 2), Error);
}

TEST(Exports, CsvJsonAndSummary) {
  const auto e = hand_explanation(2, 2, [](auto s, auto f, auto c) { return s - 0.25 * f + 0.5 * c; });
  const auto csv = explanation_csv(e);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "sample,feature,class,value");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 2 * 3);
  EXPECT_NE(csv.find("11,f1,Spoofing,1.75\n"), std::string::npos);

  const auto back = explanation_from_json(nlohmann::json::parse(explanation_json(e).dump()));
  EXPECT_EQ(back.attributions, e.attributions);
  EXPECT_EQ(back.base_values, e.base_values);
  EXPECT_EQ(back.feature_names, e.feature_names);
  EXPECT_EQ(back.sample_ids, e.sample_ids);
  EXPECT_EQ(back.feature_values.values(), e.feature_values.values());

  const auto summary = summary_csv(summarize(e, 1));
  EXPECT_EQ(summary.substr(0, summary.find('\n')), "feature,Benign,DataAlteration,Spoofing,total");
  EXPECT_EQ(std::count(summary.begin(), summary.end(), '\n'), 3);  // all features listed
}

}  // namespace
}  // namespace xids
