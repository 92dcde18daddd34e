#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "xids/category.hpp"
#include "xids/model.hpp"
#include "xids/table.hpp"

namespace xids {

/// Path-dependent coalition value of a single tree: descend along x for
/// features in the coalition; for any other split feature, average both
/// children weighted by training cover.
std::vector<double> tree_expected_value(const TreeModel& tree, std::span<const double> x,
                                        const std::vector<bool>& coalition);

/// base_scores + scale * sum of per-tree coalition values.
std::vector<double> tree_expected_value(const EnsembleModel& model,
                                        std::span<const double> x,
                                        const std::vector<bool>& coalition);

inline constexpr std::size_t kMaxBruteForceFeatures = 20;

/// Exact Shapley values by enumerating every coalition of the features the
/// model actually splits on. Returns a feature_count x class_count matrix.
/// Throws Error(kTooLarge) when more than kMaxBruteForceFeatures features
/// are used.
Matrix brute_force_shap(const TreeModel& tree, std::span<const double> x);
Matrix brute_force_shap(const EnsembleModel& model, std::span<const double> x);

/// Polynomial-time path-dependent tree attribution for one sample.
/// Adds into `phi` (feature_count x class_count) scaled by `scale`.
void tree_shap_accumulate(const TreeModel& tree, std::span<const double> x, double scale,
                          Matrix& phi);

Matrix tree_shap_sample(const TreeModel& tree, std::span<const double> x);
Matrix tree_shap_sample(const EnsembleModel& model, std::span<const double> x);

/// Per-sample x per-feature x per-class attribution tensor.
struct ShapExplanation {
  std::size_t n_samples = 0;
  std::size_t n_features = 0;
  std::size_t n_classes = 0;
  std::vector<double> attributions;  // [sample][feature][class]
  std::vector<double> base_values;   // per class
  std::vector<std::string> feature_names;
  Matrix feature_values;             // the explained (standardized) inputs
  std::vector<std::size_t> sample_ids;

  double& at(std::size_t s, std::size_t f, std::size_t c) {
    return attributions[(s * n_features + f) * n_classes + c];
  }
  double at(std::size_t s, std::size_t f, std::size_t c) const {
    return attributions[(s * n_features + f) * n_classes + c];
  }
};

/// Explains every row of `x`. Samples are split across `threads` workers
/// (0: XIDS_THREADS or hardware concurrency); each sample is summed in a
/// fixed tree order, so results do not depend on the worker count.
ShapExplanation tree_shap(const TreeModel& tree, const Matrix& x,
                          std::vector<std::string> feature_names, std::size_t threads = 0);
ShapExplanation tree_shap(const EnsembleModel& model, const Matrix& x,
                          std::vector<std::string> feature_names, std::size_t threads = 0);

struct BeeswarmStrip {
  std::size_t feature = 0;
  std::string name;
  std::vector<double> attributions;  // one per sample
  std::vector<double> values;        // standardized feature value, same order
};

struct SummaryStats {
  std::vector<std::string> feature_names;
  Matrix mean_abs;                    // feature x class
  std::vector<std::size_t> ranking;   // top_k features by sum over classes
  std::array<std::vector<std::size_t>, kNumClasses> class_ranking;  // top_k per class
  std::array<std::vector<BeeswarmStrip>, kNumClasses> beeswarm;     // follows class_ranking
  std::size_t top_k = 0;

  double total_mean_abs(std::size_t feature) const;
};

/// Mean |attribution| per (feature, class) and stable rankings (ties keep
/// feature order). top_k larger than the feature count is clamped.
SummaryStats summarize(const ShapExplanation& expl, std::size_t top_k);

/// Long format: sample,feature,class,value.
std::string explanation_csv(const ShapExplanation& expl);
nlohmann::json explanation_json(const ShapExplanation& expl);
ShapExplanation explanation_from_json(const nlohmann::json& doc);

/// feature,Benign,DataAlteration,Spoofing,total (all features, ranked).
std::string summary_csv(const SummaryStats& summary);

}  // namespace xids
