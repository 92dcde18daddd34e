#include "xids/model.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "xids/error.hpp"

namespace xids {

TreeModel::TreeModel(std::vector<TreeNode> nodes, std::size_t feature_count,
                     std::size_t class_count)
    : nodes_(std::move(nodes)), feature_count_(feature_count), class_count_(class_count) {
  if (nodes_.empty()) throw Error(ErrorCode::kInvalidModel, "tree has no nodes");
  std::vector<int> parents(nodes_.size(), 0);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    if (!(n.cover >= 0.0) || !std::isfinite(n.cover)) {
      throw Error(ErrorCode::kInvalidModel, fmt::format("node {} has invalid cover", i));
    }
    if (n.is_leaf()) {
      if (n.scores.size() != class_count_) {
        throw Error(ErrorCode::kInvalidModel,
                    fmt::format("leaf {} has {} scores, expected {}", i, n.scores.size(),
                                class_count_));
      }
      for (double s : n.scores) {
        if (!std::isfinite(s)) {
          throw Error(ErrorCode::kInvalidModel, fmt::format("leaf {} score not finite", i));
        }
      }
      continue;
    }
    if (n.feature < 0 || static_cast<std::size_t>(n.feature) >= feature_count_) {
      throw Error(ErrorCode::kInvalidModel, fmt::format("node {} feature out of range", i));
    }
    if (!std::isfinite(n.threshold)) {
      throw Error(ErrorCode::kInvalidModel, fmt::format("node {} threshold not finite", i));
    }
    for (auto child : {n.left, n.right}) {
      if (child <= static_cast<std::int32_t>(i) ||
          static_cast<std::size_t>(child) >= nodes_.size()) {
        throw Error(ErrorCode::kInvalidModel, fmt::format("node {} has a bad child index", i));
      }
      ++parents[child];
    }
    const double sum = nodes_[n.left].cover + nodes_[n.right].cover;
    if (std::abs(sum - n.cover) > 1e-9 * std::max(1.0, n.cover)) {
      throw Error(ErrorCode::kInvalidModel,
                  fmt::format("node {} cover {} != children {}", i, n.cover, sum));
    }
  }
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    if (parents[i] != 1) {
      throw Error(ErrorCode::kInvalidModel, fmt::format("node {} is not a tree node", i));
    }
  }
}

TreeModel TreeModel::single_leaf(std::vector<double> scores, double cover,
                                 std::size_t feature_count) {
  const std::size_t classes = scores.size();
  TreeNode leaf;
  leaf.cover = cover;
  leaf.scores = std::move(scores);
  return TreeModel({std::move(leaf)}, feature_count, classes);
}

std::size_t TreeModel::leaf_index(std::span<const double> x) const {
  std::size_t i = 0;
  while (!nodes_[i].is_leaf()) {
    const auto& n = nodes_[i];
    i = static_cast<std::size_t>(x[n.feature] < n.threshold ? n.left : n.right);
  }
  return i;
}

std::size_t TreeModel::depth() const {
  std::vector<std::size_t> d(nodes_.size(), 0);
  std::size_t best = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    best = std::max(best, d[i]);
    if (!nodes_[i].is_leaf()) {
      d[nodes_[i].left] = d[i] + 1;
      d[nodes_[i].right] = d[i] + 1;
    }
  }
  return best;
}

std::size_t TreeModel::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const auto& n) { return n.is_leaf(); }));
}

std::vector<bool> TreeModel::used_features() const {
  std::vector<bool> used(feature_count_, false);
  for (const auto& n : nodes_) {
    if (!n.is_leaf()) used[n.feature] = true;
  }
  return used;
}

EnsembleModel::EnsembleModel(EnsembleKind kind, std::vector<TreeModel> trees,
                             std::vector<double> base_scores, double learning_rate,
                             std::size_t feature_count)
    : kind_(kind),
      trees_(std::move(trees)),
      base_scores_(std::move(base_scores)),
      learning_rate_(learning_rate),
      feature_count_(feature_count) {
  if (base_scores_.empty()) throw Error(ErrorCode::kInvalidModel, "ensemble has no classes");
  for (double b : base_scores_) {
    if (!std::isfinite(b)) throw Error(ErrorCode::kInvalidModel, "base score not finite");
  }
  for (const auto& t : trees_) {
    if (t.class_count() != class_count() || t.feature_count() != feature_count_) {
      throw Error(ErrorCode::kInvalidModel, "ensemble member has mismatched dimensions");
    }
    if (kind_ != EnsembleKind::kRandomForest) continue;
    for (const auto& n : t.nodes()) {
      if (!n.is_leaf()) continue;
      double sum = 0.0;
      for (double s : n.scores) sum += s;
      if (std::abs(sum - 1.0) > 1e-9) {
        throw Error(ErrorCode::kInvalidModel, "random forest leaf is not a probability vector");
      }
    }
  }
}

double EnsembleModel::tree_scale() const {
  if (kind_ == EnsembleKind::kRandomForest && !trees_.empty()) {
    return 1.0 / static_cast<double>(trees_.size());
  }
  return 1.0;
}

namespace {

void check_input(std::span<const double> x, std::size_t expected) {
  if (x.size() != expected) {
    throw Error(ErrorCode::kDimension,
                fmt::format("input has {} features, model expects {}", x.size(), expected));
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "input is not finite");
  }
}

}  // namespace

std::vector<double> predict_margin(const TreeModel& model, std::span<const double> x) {
  check_input(x, model.feature_count());
  auto s = model.leaf_scores(x);
  return {s.begin(), s.end()};
}

std::vector<double> predict_margin(const EnsembleModel& model, std::span<const double> x) {
  check_input(x, model.feature_count());
  std::vector<double> sum(model.class_count(), 0.0);
  for (const auto& t : model.trees()) {
    auto s = t.leaf_scores(x);
    for (std::size_t c = 0; c < sum.size(); ++c) sum[c] += s[c];
  }
  const double scale = model.tree_scale();
  std::vector<double> out = model.base_scores();
  for (std::size_t c = 0; c < out.size(); ++c) out[c] += scale * sum[c];
  return out;
}

std::vector<double> predict_margin(const LinearModel& model, std::span<const double> x) {
  check_input(x, model.feature_count());
  std::vector<double> out(model.class_count());
  for (std::size_t c = 0; c < out.size(); ++c) {
    double s = model.bias[c];
    for (std::size_t f = 0; f < x.size(); ++f) s += model.weights[c][f] * x[f];
    out[c] = s;
  }
  return out;
}

std::vector<double> predict_margin(const AnyModel& model, std::span<const double> x) {
  return std::visit([&](const auto& m) { return predict_margin(m, x); }, model);
}

AttackCategory argmax_category(std::span<const double> margins) {
  if (margins.size() != kNumClasses) {
    throw Error(ErrorCode::kDimension, "expected one margin per attack category");
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < margins.size(); ++c) {
    if (margins[c] > margins[best]) best = c;
  }
  return category_from_code(static_cast<int>(best));
}

std::size_t feature_count(const AnyModel& model) {
  return std::visit([](const auto& m) { return m.feature_count(); }, model);
}

}  // namespace xids
