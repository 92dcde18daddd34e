#include "xids/shapley.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "xids/error.hpp"
#include "xids/parallel.hpp"

namespace xids {

namespace {

void check_coalition(std::size_t features, const std::vector<bool>& coalition,
                     std::span<const double> x) {
  if (coalition.size() != features || x.size() != features) {
    throw Error(ErrorCode::kDimension, "coalition or input length does not match the model");
  }
}

void expected_value_into(const TreeModel& tree, std::size_t id, std::span<const double> x,
                         const std::vector<bool>& coalition, double weight,
                         std::vector<double>& out) {
  const auto& node = tree.node(id);
  if (node.is_leaf()) {
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += weight * node.scores[c];
    return;
  }
  if (coalition[node.feature]) {
    const auto next = x[node.feature] < node.threshold ? node.left : node.right;
    expected_value_into(tree, next, x, coalition, weight, out);
    return;
  }
  if (!(node.cover > 0.0)) {
    throw Error(ErrorCode::kInvalidModel, fmt::format("internal node {} has zero cover", id));
  }
  const double wl = tree.node(node.left).cover / node.cover;
  const double wr = tree.node(node.right).cover / node.cover;
  expected_value_into(tree, node.left, x, coalition, weight * wl, out);
  expected_value_into(tree, node.right, x, coalition, weight * wr, out);
}

}  // namespace

std::vector<double> tree_expected_value(const TreeModel& tree, std::span<const double> x,
                                        const std::vector<bool>& coalition) {
  check_coalition(tree.feature_count(), coalition, x);
  std::vector<double> out(tree.class_count(), 0.0);
  expected_value_into(tree, 0, x, coalition, 1.0, out);
  return out;
}

std::vector<double> tree_expected_value(const EnsembleModel& model, std::span<const double> x,
                                        const std::vector<bool>& coalition) {
  check_coalition(model.feature_count(), coalition, x);
  std::vector<double> sum(model.class_count(), 0.0);
  for (const auto& t : model.trees()) expected_value_into(t, 0, x, coalition, 1.0, sum);
  std::vector<double> out = model.base_scores();
  const double scale = model.tree_scale();
  for (std::size_t c = 0; c < out.size(); ++c) out[c] += scale * sum[c];
  return out;
}

namespace {

// Shapley values of the game v over the players `used`, written into the
// rows of a features x classes matrix.
template <typename ValueFn>
Matrix enumerate_coalitions(std::size_t features, std::size_t classes,
                            const std::vector<std::size_t>& used, ValueFn&& value) {
  const std::size_t m = used.size();
  if (m > kMaxBruteForceFeatures) {
    throw Error(ErrorCode::kTooLarge,
                fmt::format("model uses {} features; exact enumeration is limited to {}", m,
                            kMaxBruteForceFeatures));
  }
  Matrix phi(features, classes);
  if (m == 0) return phi;

  const std::size_t subsets = std::size_t{1} << m;
  std::vector<double> values(subsets * classes);
  std::vector<bool> coalition(features, false);
  for (std::size_t mask = 0; mask < subsets; ++mask) {
    for (std::size_t i = 0; i < m; ++i) coalition[used[i]] = ((mask >> i) & 1U) != 0;
    const auto v = value(coalition);
    std::copy(v.begin(), v.end(), values.begin() + static_cast<std::ptrdiff_t>(mask * classes));
  }

  // |S|! (m - |S| - 1)! / m! == 1 / (m * C(m - 1, |S|))
  std::vector<double> weight(m);
  for (std::size_t s = 0; s < m; ++s) {
    double binom = 1.0;
    for (std::size_t k = 1; k <= s; ++k) {
      binom = binom * static_cast<double>(m - 1 - s + k) / static_cast<double>(k);
    }
    weight[s] = 1.0 / (static_cast<double>(m) * binom);
  }

  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    auto row = phi.row(used[i]);
    for (std::size_t mask = 0; mask < subsets; ++mask) {
      if (mask & bit) continue;
      const double w = weight[static_cast<std::size_t>(__builtin_popcountll(mask))];
      const double* with = &values[(mask | bit) * classes];
      const double* without = &values[mask * classes];
      for (std::size_t c = 0; c < classes; ++c) row[c] += w * (with[c] - without[c]);
    }
  }
  return phi;
}

std::vector<std::size_t> used_list(const std::vector<bool>& used) {
  std::vector<std::size_t> out;
  for (std::size_t f = 0; f < used.size(); ++f) {
    if (used[f]) out.push_back(f);
  }
  return out;
}

}  // namespace

Matrix brute_force_shap(const TreeModel& tree, std::span<const double> x) {
  if (x.size() != tree.feature_count()) {
    throw Error(ErrorCode::kDimension, "input length does not match the model");
  }
  return enumerate_coalitions(
      tree.feature_count(), tree.class_count(), used_list(tree.used_features()),
      [&](const std::vector<bool>& s) { return tree_expected_value(tree, x, s); });
}

Matrix brute_force_shap(const EnsembleModel& model, std::span<const double> x) {
  if (x.size() != model.feature_count()) {
    throw Error(ErrorCode::kDimension, "input length does not match the model");
  }
  std::vector<bool> used(model.feature_count(), false);
  for (const auto& t : model.trees()) {
    const auto u = t.used_features();
    for (std::size_t f = 0; f < u.size(); ++f) used[f] = used[f] || u[f];
  }
  return enumerate_coalitions(
      model.feature_count(), model.class_count(), used_list(used),
      [&](const std::vector<bool>& s) { return tree_expected_value(model, x, s); });
}

namespace {

// One element of the unique-feature path: the fraction of training cover
// that flows down this path when the feature is absent (zero) or present
// (one), and the permutation weight of paths of each length.
struct PathElement {
  std::int32_t feature;
  double zero_fraction;
  double one_fraction;
  double weight;
};

void extend_path(PathElement* path, std::size_t depth, double zero, double one,
                 std::int32_t feature) {
  path[depth] = {feature, zero, one, depth == 0 ? 1.0 : 0.0};
  const double denom = static_cast<double>(depth + 1);
  for (std::size_t i = depth; i-- > 0;) {
    path[i + 1].weight += one * path[i].weight * static_cast<double>(i + 1) / denom;
    path[i].weight = zero * path[i].weight * static_cast<double>(depth - i) / denom;
  }
}

void unwind_path(PathElement* path, std::size_t depth, std::size_t index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  const double denom = static_cast<double>(depth + 1);
  double next_one = path[depth].weight;
  for (std::size_t i = depth; i-- > 0;) {
    if (one != 0.0) {
      const double tmp = path[i].weight;
      path[i].weight = next_one * denom / (static_cast<double>(i + 1) * one);
      next_one = tmp - path[i].weight * zero * static_cast<double>(depth - i) / denom;
    } else {
      path[i].weight = path[i].weight * denom / (zero * static_cast<double>(depth - i));
    }
  }
  for (std::size_t i = index; i < depth; ++i) {
    path[i].feature = path[i + 1].feature;
    path[i].zero_fraction = path[i + 1].zero_fraction;
    path[i].one_fraction = path[i + 1].one_fraction;
  }
}

// Total permutation weight of the path with element `index` removed.
double unwound_sum(const PathElement* path, std::size_t depth, std::size_t index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  const double denom = static_cast<double>(depth + 1);
  double next_one = path[depth].weight;
  double total = 0.0;
  for (std::size_t i = depth; i-- > 0;) {
    if (one != 0.0) {
      const double tmp = next_one * denom / (static_cast<double>(i + 1) * one);
      total += tmp;
      next_one = path[i].weight - tmp * zero * static_cast<double>(depth - i) / denom;
    } else {
      total += path[i].weight / (zero * static_cast<double>(depth - i) / denom);
    }
  }
  return total;
}

struct ShapWalker {
  const TreeModel& tree;
  std::span<const double> x;
  double scale;
  Matrix& phi;

  void recurse(std::size_t id, PathElement* parent_path, std::size_t depth, double zero,
               double one, std::int32_t feature) {
    PathElement* path = parent_path + depth;
    if (depth > 0) std::copy(parent_path, parent_path + depth, path);
    extend_path(path, depth, zero, one, feature);

    const auto& node = tree.node(id);
    if (node.is_leaf()) {
      for (std::size_t i = 1; i <= depth; ++i) {
        const double w = unwound_sum(path, depth, i);
        const auto& el = path[i];
        const double contrib = w * (el.one_fraction - el.zero_fraction) * scale;
        auto row = phi.row(static_cast<std::size_t>(el.feature));
        for (std::size_t c = 0; c < row.size(); ++c) row[c] += contrib * node.scores[c];
      }
      return;
    }

    const bool go_left = x[node.feature] < node.threshold;
    const auto hot = static_cast<std::size_t>(go_left ? node.left : node.right);
    const auto cold = static_cast<std::size_t>(go_left ? node.right : node.left);
    const double hot_zero = tree.node(hot).cover / node.cover;
    const double cold_zero = tree.node(cold).cover / node.cover;

    double incoming_zero = 1.0;
    double incoming_one = 1.0;
    std::size_t next_depth = depth + 1;
    for (std::size_t i = 1; i <= depth; ++i) {
      if (path[i].feature == node.feature) {
        incoming_zero = path[i].zero_fraction;
        incoming_one = path[i].one_fraction;
        unwind_path(path, depth, i);
        --next_depth;
        break;
      }
    }
    recurse(hot, path, next_depth, hot_zero * incoming_zero, incoming_one, node.feature);
    recurse(cold, path, next_depth, cold_zero * incoming_zero, 0.0, node.feature);
  }
};

void check_covers(const TreeModel& tree) {
  for (std::size_t i = 0; i < tree.nodes().size(); ++i) {
    if (!(tree.node(i).cover > 0.0)) {
      throw Error(ErrorCode::kInvalidModel,
                  fmt::format("node {} has non-positive cover; cannot attribute", i));
    }
  }
}

}  // namespace

void tree_shap_accumulate(const TreeModel& tree, std::span<const double> x, double scale,
                          Matrix& phi) {
  if (x.size() != tree.feature_count() || phi.rows() != tree.feature_count() ||
      phi.cols() != tree.class_count()) {
    throw Error(ErrorCode::kDimension, "attribution buffer does not match the model");
  }
  const std::size_t max_depth = tree.depth() + 2;
  std::vector<PathElement> buffer((max_depth * (max_depth + 1)) / 2);
  ShapWalker walker{tree, x, scale, phi};
  walker.recurse(0, buffer.data(), 0, 1.0, 1.0, -1);
}

Matrix tree_shap_sample(const TreeModel& tree, std::span<const double> x) {
  check_covers(tree);
  Matrix phi(tree.feature_count(), tree.class_count());
  tree_shap_accumulate(tree, x, 1.0, phi);
  return phi;
}

Matrix tree_shap_sample(const EnsembleModel& model, std::span<const double> x) {
  for (const auto& t : model.trees()) check_covers(t);
  Matrix phi(model.feature_count(), model.class_count());
  const double scale = model.tree_scale();
  for (const auto& t : model.trees()) tree_shap_accumulate(t, x, scale, phi);
  return phi;
}

namespace {

template <typename Model>
ShapExplanation explain_all(const Model& model, const Matrix& x,
                            std::vector<std::string> feature_names, std::size_t threads) {
  if (x.cols() != model.feature_count()) {
    throw Error(ErrorCode::kDimension, "explained rows do not match the model's feature count");
  }
  if (feature_names.size() != x.cols()) {
    throw Error(ErrorCode::kDimension, "feature name count does not match the inputs");
  }
  ShapExplanation e;
  e.n_samples = x.rows();
  e.n_features = x.cols();
  e.n_classes = model.class_count();
  e.feature_names = std::move(feature_names);
  e.feature_values = x;
  e.sample_ids.resize(x.rows());
  for (std::size_t s = 0; s < x.rows(); ++s) e.sample_ids[s] = s;
  e.attributions.assign(e.n_samples * e.n_features * e.n_classes, 0.0);
  // with an empty coalition the input is never read
  const std::vector<double> zeros(x.cols(), 0.0);
  e.base_values = tree_expected_value(model, zeros, std::vector<bool>(x.cols(), false));

  parallel_for(e.n_samples, threads, [&](std::size_t s) {
    const Matrix phi = tree_shap_sample(model, x.row(s));
    std::copy(phi.values().begin(), phi.values().end(),
              e.attributions.begin() +
                  static_cast<std::ptrdiff_t>(s * e.n_features * e.n_classes));
  });
  return e;
}

}  // namespace

ShapExplanation tree_shap(const TreeModel& tree, const Matrix& x,
                          std::vector<std::string> feature_names, std::size_t threads) {
  check_covers(tree);
  return explain_all(tree, x, std::move(feature_names), threads);
}

ShapExplanation tree_shap(const EnsembleModel& model, const Matrix& x,
                          std::vector<std::string> feature_names, std::size_t threads) {
  for (const auto& t : model.trees()) check_covers(t);
  return explain_all(model, x, std::move(feature_names), threads);
}

double SummaryStats::total_mean_abs(std::size_t feature) const {
  double t = 0.0;
  for (double v : mean_abs.row(feature)) t += v;
  return t;
}

namespace {

std::vector<std::size_t> rank_by(std::size_t n, const std::function<double(std::size_t)>& key) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return key(a) > key(b); });
  return order;
}

}  // namespace

SummaryStats summarize(const ShapExplanation& expl, std::size_t top_k) {
  if (top_k < 1) throw Error(ErrorCode::kInvalidArgument, "top_k must be >= 1");
  if (expl.n_samples == 0 || expl.n_features == 0) {
    throw Error(ErrorCode::kInvalidArgument, "cannot summarize an empty explanation");
  }
  if (top_k > expl.n_features) {
    spdlog::warn("top_k {} exceeds the {} features; clamping", top_k, expl.n_features);
    top_k = expl.n_features;
  }
  SummaryStats s;
  s.feature_names = expl.feature_names;
  s.top_k = top_k;
  s.mean_abs = Matrix(expl.n_features, expl.n_classes);
  for (std::size_t i = 0; i < expl.n_samples; ++i) {
    for (std::size_t f = 0; f < expl.n_features; ++f) {
      for (std::size_t c = 0; c < expl.n_classes; ++c) {
        s.mean_abs(f, c) += std::abs(expl.at(i, f, c));
      }
    }
  }
  const double n = static_cast<double>(expl.n_samples);
  for (std::size_t f = 0; f < expl.n_features; ++f) {
    for (std::size_t c = 0; c < expl.n_classes; ++c) s.mean_abs(f, c) /= n;
  }

  s.ranking = rank_by(expl.n_features, [&](std::size_t f) { return s.total_mean_abs(f); });
  s.ranking.resize(top_k);
  for (std::size_t c = 0; c < std::min(expl.n_classes, kNumClasses); ++c) {
    auto order = rank_by(expl.n_features, [&](std::size_t f) { return s.mean_abs(f, c); });
    order.resize(top_k);
    s.class_ranking[c] = order;
    for (std::size_t f : order) {
      BeeswarmStrip strip;
      strip.feature = f;
      strip.name = expl.feature_names[f];
      strip.attributions.reserve(expl.n_samples);
      strip.values.reserve(expl.n_samples);
      for (std::size_t i = 0; i < expl.n_samples; ++i) {
        strip.attributions.push_back(expl.at(i, f, c));
        strip.values.push_back(expl.feature_values(i, f));
      }
      s.beeswarm[c].push_back(std::move(strip));
    }
  }
  return s;
}

std::string explanation_csv(const ShapExplanation& expl) {
  std::string out = "sample,feature,class,value\n";
  for (std::size_t s = 0; s < expl.n_samples; ++s) {
    for (std::size_t f = 0; f < expl.n_features; ++f) {
      for (std::size_t c = 0; c < expl.n_classes; ++c) {
        fmt::format_to(std::back_inserter(out), "{},{},{},{}\n", expl.sample_ids[s],
                       expl.feature_names[f], to_string(category_from_code(static_cast<int>(c))),
                       expl.at(s, f, c));
      }
    }
  }
  return out;
}

nlohmann::json explanation_json(const ShapExplanation& expl) {
  std::vector<std::string> classes;
  for (std::size_t c = 0; c < expl.n_classes; ++c) {
    classes.emplace_back(to_string(category_from_code(static_cast<int>(c))));
  }
  return {{"n_samples", expl.n_samples},
          {"n_features", expl.n_features},
          {"n_classes", expl.n_classes},
          {"feature_names", expl.feature_names},
          {"classes", classes},
          {"base_values", expl.base_values},
          {"sample_ids", expl.sample_ids},
          {"attributions", expl.attributions},
          {"feature_values", expl.feature_values.values()}};
}

ShapExplanation explanation_from_json(const nlohmann::json& doc) {
  try {
    ShapExplanation e;
    e.n_samples = doc.at("n_samples").get<std::size_t>();
    e.n_features = doc.at("n_features").get<std::size_t>();
    e.n_classes = doc.at("n_classes").get<std::size_t>();
    e.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    e.base_values = doc.at("base_values").get<std::vector<double>>();
    e.sample_ids = doc.at("sample_ids").get<std::vector<std::size_t>>();
    e.attributions = doc.at("attributions").get<std::vector<double>>();
    e.feature_values =
        Matrix(e.n_samples, e.n_features, doc.at("feature_values").get<std::vector<double>>());
    if (e.attributions.size() != e.n_samples * e.n_features * e.n_classes ||
        e.feature_names.size() != e.n_features || e.sample_ids.size() != e.n_samples ||
        e.base_values.size() != e.n_classes) {
      throw Error(ErrorCode::kParse, "explanation document has inconsistent sizes");
    }
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kParse, std::string("malformed explanation: ") + ex.what());
  }
}

std::string summary_csv(const SummaryStats& summary) {
  std::string out = "feature";
  for (std::size_t c = 0; c < summary.mean_abs.cols(); ++c) {
    out += ',';
    out += to_string(category_from_code(static_cast<int>(c)));
  }
  out += ",total\n";
  const auto order = rank_by(summary.mean_abs.rows(),
                             [&](std::size_t f) { return summary.total_mean_abs(f); });
  for (std::size_t f : order) {
    out += summary.feature_names[f];
    for (double v : summary.mean_abs.row(f)) fmt::format_to(std::back_inserter(out), ",{}", v);
    fmt::format_to(std::back_inserter(out), ",{}\n", summary.total_mean_abs(f));
  }
  return out;
}

}  // namespace xids
