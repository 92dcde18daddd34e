#include <cmath>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "xids/error.hpp"
#include "xids/metrics.hpp"
#include "xids/rng.hpp"

namespace xids {
namespace {

constexpr auto B = AttackCategory::kBenign;
constexpr auto D = AttackCategory::kDataAlteration;
constexpr auto S = AttackCategory::kSpoofing;

ConfusionMatrix random_matrix(Rng& rng) {
  ConfusionMatrix m;
  for (auto& row : m.counts) {
    for (auto& v : row) v = static_cast<std::int64_t>(rng.below(rng.uniform() < 0.2 ? 2 : 500));
  }
  if (m.total() == 0) m.counts[0][0] = 1;
  return m;
}

TEST(Confusion, PerfectPrediction) {
  const std::vector<AttackCategory> y{B, B, D, S, S, S};
  const auto m = confusion(y, y);
  EXPECT_EQ(m.total(), 6);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      if (i != j) EXPECT_EQ(m.counts[i][j], 0);
    }
  }
  EXPECT_EQ(m.row_sum(0), 2);
  EXPECT_EQ(m.row_sum(1), 1);
  EXPECT_EQ(m.row_sum(2), 3);
  const auto r = report(m);
  for (auto c : kAllCategories) {
    EXPECT_EQ(r.of(c).precision, 1.0);
    EXPECT_EQ(r.of(c).recall, 1.0);
    EXPECT_EQ(r.of(c).f1, 1.0);
  }
  EXPECT_EQ(r.accuracy, 1.0);
}

TEST(Confusion, HandCounted) {
  const std::vector<AttackCategory> t{B, S, D}, p{S, S, D};
  const auto m = confusion(t, p);
  EXPECT_EQ(m.at(B, S), 1);
  EXPECT_EQ(m.at(S, S), 1);
  EXPECT_EQ(m.at(D, D), 1);
  EXPECT_EQ(m.total(), 3);
  EXPECT_EQ(m.at(B, B), 0);
}

TEST(Confusion, Errors) {
  const std::vector<AttackCategory> a{B, S}, b{B};
  EXPECT_THROW(confusion(a, b), Error);
  EXPECT_THROW(confusion(std::vector<AttackCategory>{}, std::vector<AttackCategory>{}), Error);
}

TEST(Report, TableTwoF1Recomputes) {
  // (precision, recall, printed F1) for the rows whose printed values agree
  const std::vector<std::array<double, 3>> rows{
      {0.92, 0.72, 0.81},  // XGB spoofing
      {0.71, 0.67, 0.69},  // DT spoofing
      {1.00, 0.01, 0.02},  // SVC spoofing
  };
  for (const auto& [p, r, f] : rows) {
    const double oracle = 2 * p * r / (p + r);
    EXPECT_NEAR(f1_score(p, r), oracle, 1e-15);
    EXPECT_EQ(round2(f1_score(p, r)), f);
  }
  EXPECT_NEAR(f1_score(0.92, 0.72), 0.8078, 1e-4);
  EXPECT_EQ(f1_score(0.0, 0.0), 0.0);
}

TEST(Report, RoundingHalfUp) {
  EXPECT_EQ(round2(0.805), 0.81);
  EXPECT_EQ(round2(0.125), 0.13);
  EXPECT_EQ(round2(0.8049), 0.8);
  EXPECT_EQ(round2(1.0), 1.0);
  EXPECT_EQ(round2(0.0), 0.0);
}

TEST(Report, EmptyPredictedColumn) {
  const std::vector<AttackCategory> t{B, B, S, S}, p{B, B, B, D};
  const auto r = report(confusion(t, p));
  EXPECT_EQ(r.of(S).precision, 0.0);
  EXPECT_TRUE(r.of(S).precision_undefined);
  EXPECT_EQ(r.of(S).recall, 0.0);
  EXPECT_FALSE(r.of(S).recall_undefined);
  EXPECT_EQ(r.of(S).f1, 0.0);
  EXPECT_TRUE(r.of(D).recall_undefined);
  EXPECT_EQ(r.of(D).support, 0);
}

TEST(Report, RecallSupportIdentity) {
  Rng rng(2024);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto m = random_matrix(rng);
    const auto r = report(m);
    double sum = 0.0;
    for (auto c : kAllCategories) {
      sum += r.of(c).recall * static_cast<double>(r.of(c).support);
    }
    double diag = 0;
    for (std::size_t c = 0; c < 3; ++c) diag += static_cast<double>(m.counts[c][c]);
    EXPECT_NEAR(sum / static_cast<double>(m.total()), r.accuracy, 1e-12);
    EXPECT_NEAR(r.accuracy, diag / static_cast<double>(m.total()), 1e-15);
    for (auto c : kAllCategories) {
      const auto& k = r.of(c);
      for (double v : {k.precision, k.recall, k.f1}) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
      if (k.precision + k.recall > 0) {
        EXPECT_NEAR(k.f1, 2 * k.precision * k.recall / (k.precision + k.recall), 1e-15);
      }
    }
  }
}

TEST(Report, ClassPermutationIsConsistent) {
  Rng rng(7);
  const std::array<std::array<std::size_t, 3>, 5> perms{
      {{1, 0, 2}, {2, 1, 0}, {0, 2, 1}, {1, 2, 0}, {2, 0, 1}}};
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = random_matrix(rng);
    const auto r = report(m);
    for (const auto& p : perms) {
      ConfusionMatrix pm;
      for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) pm.counts[p[i]][p[j]] = m.counts[i][j];
      }
      const auto pr = report(pm);
      for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(pr.per_class[p[c]], r.per_class[c]);
      EXPECT_EQ(pr.accuracy, r.accuracy);
    }
  }
}

TEST(Report, PureFunction) {
  Rng rng(1);
  const auto m = random_matrix(rng);
  const auto a = report(m), b = report(m);
  EXPECT_EQ(a.per_class, b.per_class);
  EXPECT_EQ(render_text(a), render_text(b));
}

TEST(Report, Renderings) {
  const std::vector<AttackCategory> t{B, B, B, D, S, S}, p{B, B, S, D, S, B};
  const auto r = report(confusion(t, p));
  const auto text = render_text(r);
  EXPECT_NE(text.find("Spoofing"), std::string::npos);
  EXPECT_NE(text.find("0.50"), std::string::npos);  // spoofing precision 1/2
  EXPECT_NE(text.find("0.67"), std::string::npos);  // benign recall 2/3
  EXPECT_EQ(confusion_csv(r.matrix),
            "true\\pred,Benign,DataAlteration,Spoofing\n"
            "Benign,2,0,1\n"
            "DataAlteration,0,1,0\n"
            "Spoofing,1,0,1\n");
  const nlohmann::json j = r;
  EXPECT_EQ(j.at("total"), 6);
  EXPECT_DOUBLE_EQ(j.at("accuracy").get<double>(), 4.0 / 6.0);
  EXPECT_DOUBLE_EQ(j.at("classes").at("Benign").at("recall").get<double>(), 2.0 / 3.0);
  EXPECT_EQ(j.at("confusion").at(2).at(0), 1);
}

}  // namespace
}  // namespace xids
