#include "xids/metrics.hpp"

#include <cmath>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "xids/error.hpp"

namespace xids {

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (const auto& row : counts) {
    for (auto v : row) t += v;
  }
  return t;
}

std::int64_t ConfusionMatrix::row_sum(std::size_t c) const {
  std::int64_t t = 0;
  for (auto v : counts[c]) t += v;
  return t;
}

std::int64_t ConfusionMatrix::column_sum(std::size_t c) const {
  std::int64_t t = 0;
  for (const auto& row : counts) t += row[c];
  return t;
}

ConfusionMatrix confusion(std::span<const AttackCategory> y_true,
                          std::span<const AttackCategory> y_pred) {
  if (y_true.size() != y_pred.size()) {
    throw Error(ErrorCode::kDimension,
                fmt::format("label length mismatch: {} vs {}", y_true.size(), y_pred.size()));
  }
  if (y_true.empty()) throw Error(ErrorCode::kInvalidArgument, "no labels to evaluate");
  ConfusionMatrix m;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    ++m.counts[code_of(y_true[i])][code_of(y_pred[i])];
  }
  return m;
}

double f1_score(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

MetricsReport report(const ConfusionMatrix& matrix) {
  const auto total = matrix.total();
  if (total < 1) throw Error(ErrorCode::kInvalidArgument, "confusion matrix is empty");
  MetricsReport r;
  r.matrix = matrix;
  std::int64_t correct = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    auto& m = r.per_class[c];
    const auto diag = matrix.counts[c][c];
    const auto predicted = matrix.column_sum(c);
    const auto actual = matrix.row_sum(c);
    correct += diag;
    m.support = actual;
    m.precision_undefined = predicted == 0;
    m.recall_undefined = actual == 0;
    m.precision = predicted > 0 ? static_cast<double>(diag) / static_cast<double>(predicted) : 0.0;
    m.recall = actual > 0 ? static_cast<double>(diag) / static_cast<double>(actual) : 0.0;
    m.f1 = f1_score(m.precision, m.recall);
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(total);
  return r;
}

double round2(double value) { return std::floor(value * 100.0 + 0.5 + 1e-9) / 100.0; }

std::string render_text(const MetricsReport& report) {
  std::string out = fmt::format("{:<16}{:>10}{:>10}{:>10}{:>10}\n", "class", "precision",
                                "recall", "f1", "support");
  for (auto c : kAllCategories) {
    const auto& m = report.of(c);
    out += fmt::format("{:<16}{:>10.2f}{:>10.2f}{:>10.2f}{:>10}\n", to_string(c),
                       round2(m.precision), round2(m.recall), round2(m.f1), m.support);
  }
  out += fmt::format("{:<16}{:>30.2f}{:>10}\n", "accuracy", round2(report.accuracy),
                     report.matrix.total());
  return out;
}

std::string confusion_csv(const ConfusionMatrix& matrix) {
  std::string out = "true\\pred";
  for (auto c : kAllCategories) out += fmt::format(",{}", to_string(c));
  out += '\n';
  for (auto t : kAllCategories) {
    out += to_string(t);
    for (auto p : kAllCategories) out += fmt::format(",{}", matrix.at(t, p));
    out += '\n';
  }
  return out;
}

void to_json(nlohmann::json& j, const MetricsReport& report) {
  nlohmann::json classes = nlohmann::json::object();
  for (auto c : kAllCategories) {
    const auto& m = report.of(c);
    classes[std::string(to_string(c))] = {{"code", code_of(c)},
                                          {"precision", m.precision},
                                          {"recall", m.recall},
                                          {"f1", m.f1},
                                          {"support", m.support},
                                          {"precision_undefined", m.precision_undefined},
                                          {"recall_undefined", m.recall_undefined}};
  }
  nlohmann::json matrix = nlohmann::json::array();
  for (const auto& row : report.matrix.counts) matrix.push_back(row);
  j = {{"classes", classes},
       {"accuracy", report.accuracy},
       {"total", report.matrix.total()},
       {"confusion", matrix}};
}

}  // namespace xids
