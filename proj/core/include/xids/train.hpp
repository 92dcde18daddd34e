#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "xids/model.hpp"
#include "xids/table.hpp"

namespace xids {

enum class ModelKind { kDecisionTree, kRandomForest, kGradientBoosted, kLinearSvc };

std::string_view to_string(ModelKind kind);  // "dt", "rf", "gbt", "svc"
ModelKind parse_model_kind(std::string_view text);

struct TrainParams {
  std::size_t max_depth = 0;  // 0: grow until pure or min_samples_leaf
  std::size_t min_samples_leaf = 1;
  std::size_t n_trees = 100;
  double learning_rate = 0.3;
  double l2_leaf_regularization = 1.0;
  // Fraction of features offered at each random-forest split. Unset means
  // sqrt(d) / d.
  std::optional<double> feature_subsample_fraction;
  std::size_t n_boost_rounds = 100;
  bool bootstrap = true;
  bool class_weighting = false;  // inverse-frequency sample weights
  double svc_lambda = 1e-4;
  std::size_t svc_epochs = 20;
  std::uint64_t seed = 0;

  /// Throws Error(kInvalidArgument) when a field is out of range.
  void validate() const;

  static TrainParams defaults_for(ModelKind kind);

  bool operator==(const TrainParams&) const = default;
};

void to_json(nlohmann::json& j, const TrainParams& p);
void from_json(const nlohmann::json& j, TrainParams& p);

/// CART with Gini impurity, candidate thresholds at midpoints between
/// consecutive distinct values, leaf scores = class frequencies.
TreeModel train_decision_tree(const Dataset& train, const TrainParams& params);

/// Bagged CART trees with per-split feature subsampling. Trees are grown
/// independently from seeds derived from params.seed, so the forest does
/// not depend on the worker count.
EnsembleModel train_random_forest(const Dataset& train, const TrainParams& params);

/// Per-round diagnostics of a boosting run.
struct BoostTrace {
  std::vector<double> train_loss;  // mean cross-entropy after each round
};

/// Softmax gradient boosting: each round fits one regression tree per
/// class on the gradient/hessian of the cross-entropy, leaf value
/// -G / (H + lambda) * learning_rate, base scores = log class priors.
EnsembleModel train_gbt(const Dataset& train, const TrainParams& params,
                        BoostTrace* trace = nullptr);

/// One-vs-rest linear hinge-loss classifier trained with seeded
/// stochastic subgradient descent (Pegasos step schedule).
LinearModel train_linear_svc(const Dataset& train, const TrainParams& params);

AnyModel train_model(ModelKind kind, const Dataset& train, const TrainParams& params);

/// Mean softmax cross-entropy of an ensemble's margins on a dataset.
double cross_entropy(const EnsembleModel& model, const Dataset& data);

}  // namespace xids
