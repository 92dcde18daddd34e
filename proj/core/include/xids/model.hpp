#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "xids/category.hpp"

namespace xids {

/// A node of an axis-aligned binary tree stored in a flat array. Internal
/// nodes route x[feature] < threshold to `left`, everything else to `right`.
/// Leaves carry one score per class. `cover` is the training weight that
/// reached the node.
struct TreeNode {
  static constexpr std::int32_t kLeaf = -1;

  std::int32_t feature = kLeaf;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double cover = 0.0;
  std::vector<double> scores;  // leaves only

  bool is_leaf() const { return feature == kLeaf; }
  bool operator==(const TreeNode&) const = default;
};

class TreeModel {
 public:
  TreeModel() = default;
  /// Validates topology, covers, leaf score lengths and thresholds.
  TreeModel(std::vector<TreeNode> nodes, std::size_t feature_count,
            std::size_t class_count);

  static TreeModel single_leaf(std::vector<double> scores, double cover,
                               std::size_t feature_count);

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& node(std::size_t i) const { return nodes_[i]; }
  const TreeNode& root() const { return nodes_.front(); }
  std::size_t feature_count() const { return feature_count_; }
  std::size_t class_count() const { return class_count_; }

  std::size_t leaf_index(std::span<const double> x) const;
  std::span<const double> leaf_scores(std::span<const double> x) const {
    return nodes_[leaf_index(x)].scores;
  }
  std::size_t depth() const;
  std::size_t leaf_count() const;

  /// Per-feature flag: does any internal node split on it?
  std::vector<bool> used_features() const;

  bool operator==(const TreeModel&) const = default;

 private:
  std::vector<TreeNode> nodes_;
  std::size_t feature_count_ = 0;
  std::size_t class_count_ = 0;
};

enum class EnsembleKind { kRandomForest, kGradientBoosted };

/// margin(x) = base_scores + scale * sum_t leaf_scores_t(x).
/// Random forests use scale 1/n_trees and zero base scores so the margin is
/// the mean leaf probability vector; boosted ensembles use scale 1 and
/// log-prior base scores.
class EnsembleModel {
 public:
  EnsembleModel() = default;
  EnsembleModel(EnsembleKind kind, std::vector<TreeModel> trees,
                std::vector<double> base_scores, double learning_rate,
                std::size_t feature_count);

  EnsembleKind kind() const { return kind_; }
  const std::vector<TreeModel>& trees() const { return trees_; }
  const std::vector<double>& base_scores() const { return base_scores_; }
  double learning_rate() const { return learning_rate_; }
  std::size_t feature_count() const { return feature_count_; }
  std::size_t class_count() const { return base_scores_.size(); }

  /// Weight applied to each tree's leaf scores when summing.
  double tree_scale() const;

  bool operator==(const EnsembleModel&) const = default;

 private:
  EnsembleKind kind_ = EnsembleKind::kGradientBoosted;
  std::vector<TreeModel> trees_;
  std::vector<double> base_scores_;
  double learning_rate_ = 0.0;
  std::size_t feature_count_ = 0;
};

/// One-vs-rest affine scorer: score_c = weights[c] . x + bias[c].
struct LinearModel {
  std::vector<std::vector<double>> weights;
  std::vector<double> bias;

  std::size_t feature_count() const { return weights.empty() ? 0 : weights[0].size(); }
  std::size_t class_count() const { return bias.size(); }

  bool operator==(const LinearModel&) const = default;
};

using AnyModel = std::variant<TreeModel, EnsembleModel, LinearModel>;

/// Raw per-class scores (no softmax). Throws on wrong length or non-finite x.
std::vector<double> predict_margin(const TreeModel& model, std::span<const double> x);
std::vector<double> predict_margin(const EnsembleModel& model, std::span<const double> x);
std::vector<double> predict_margin(const LinearModel& model, std::span<const double> x);
std::vector<double> predict_margin(const AnyModel& model, std::span<const double> x);

/// Argmax with ties resolved toward the lowest class code.
AttackCategory argmax_category(std::span<const double> margins);

template <typename Model>
AttackCategory predict_class(const Model& model, std::span<const double> x) {
  return argmax_category(predict_margin(model, x));
}

std::size_t feature_count(const AnyModel& model);

}  // namespace xids
