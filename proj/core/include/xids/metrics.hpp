#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "xids/category.hpp"

namespace xids {

/// Rows are true classes, columns predicted classes, both in code order
/// (Benign, DataAlteration, Spoofing).
struct ConfusionMatrix {
  std::array<std::array<std::int64_t, kNumClasses>, kNumClasses> counts{};

  std::int64_t at(AttackCategory truth, AttackCategory pred) const {
    return counts[code_of(truth)][code_of(pred)];
  }
  std::int64_t total() const;
  std::int64_t row_sum(std::size_t c) const;
  std::int64_t column_sum(std::size_t c) const;

  bool operator==(const ConfusionMatrix&) const = default;
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t support = 0;
  bool precision_undefined = false;  // no predictions for the class
  bool recall_undefined = false;     // class absent from the truth

  bool operator==(const ClassMetrics&) const = default;
};

struct MetricsReport {
  std::array<ClassMetrics, kNumClasses> per_class{};
  ConfusionMatrix matrix;
  double accuracy = 0.0;

  const ClassMetrics& of(AttackCategory c) const { return per_class[code_of(c)]; }
};

ConfusionMatrix confusion(std::span<const AttackCategory> y_true,
                          std::span<const AttackCategory> y_pred);

MetricsReport report(const ConfusionMatrix& matrix);

/// 2PR / (P + R), or 0 when P + R == 0.
double f1_score(double precision, double recall);

/// Half-up rounding to two decimals, as printed in the text table.
double round2(double value);

std::string render_text(const MetricsReport& report);
std::string confusion_csv(const ConfusionMatrix& matrix);

void to_json(nlohmann::json& j, const MetricsReport& report);

}  // namespace xids
