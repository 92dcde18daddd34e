#include "xids/train.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "xids/error.hpp"
#include "xids/parallel.hpp"
#include "xids/rng.hpp"

namespace xids {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kDecisionTree:
      return "dt";
    case ModelKind::kRandomForest:
      return "rf";
    case ModelKind::kGradientBoosted:
      return "gbt";
    case ModelKind::kLinearSvc:
      return "svc";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "dt") return ModelKind::kDecisionTree;
  if (text == "rf") return ModelKind::kRandomForest;
  if (text == "gbt") return ModelKind::kGradientBoosted;
  if (text == "svc") return ModelKind::kLinearSvc;
  throw Error(ErrorCode::kInvalidArgument,
              fmt::format("unknown model kind '{}' (expected dt|rf|gbt|svc)", text));
}

void TrainParams::validate() const {
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kInvalidArgument, "invalid training parameter: " + what);
  };
  if (min_samples_leaf < 1) fail("min_samples_leaf must be >= 1");
  if (n_trees < 1) fail("n_trees must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be > 0");
  if (!(l2_leaf_regularization >= 0.0)) fail("l2_leaf_regularization must be >= 0");
  if (feature_subsample_fraction &&
      !(*feature_subsample_fraction > 0.0 && *feature_subsample_fraction <= 1.0)) {
    fail("feature_subsample_fraction must be in (0, 1]");
  }
  if (!(svc_lambda > 0.0)) fail("svc_lambda must be > 0");
  if (svc_epochs < 1) fail("svc_epochs must be >= 1");
}

TrainParams TrainParams::defaults_for(ModelKind kind) {
  TrainParams p;
  switch (kind) {
    case ModelKind::kDecisionTree:
      p.n_trees = 1;
      p.bootstrap = false;
      p.feature_subsample_fraction = 1.0;
      break;
    case ModelKind::kRandomForest:
      break;
    case ModelKind::kGradientBoosted:
      p.max_depth = 6;
      break;
    case ModelKind::kLinearSvc:
      break;
  }
  return p;
}

void to_json(nlohmann::json& j, const TrainParams& p) {
  j = {{"max_depth", p.max_depth},
       {"min_samples_leaf", p.min_samples_leaf},
       {"n_trees", p.n_trees},
       {"learning_rate", p.learning_rate},
       {"l2_leaf_regularization", p.l2_leaf_regularization},
       {"feature_subsample_fraction", nullptr},
       {"n_boost_rounds", p.n_boost_rounds},
       {"bootstrap", p.bootstrap},
       {"class_weighting", p.class_weighting},
       {"svc_lambda", p.svc_lambda},
       {"svc_epochs", p.svc_epochs},
       {"seed", p.seed}};
  if (p.feature_subsample_fraction) j["feature_subsample_fraction"] = *p.feature_subsample_fraction;
}

void from_json(const nlohmann::json& j, TrainParams& p) {
  TrainParams d;
  p.max_depth = j.value("max_depth", d.max_depth);
  p.min_samples_leaf = j.value("min_samples_leaf", d.min_samples_leaf);
  p.n_trees = j.value("n_trees", d.n_trees);
  p.learning_rate = j.value("learning_rate", d.learning_rate);
  p.l2_leaf_regularization = j.value("l2_leaf_regularization", d.l2_leaf_regularization);
  p.feature_subsample_fraction.reset();
  if (auto it = j.find("feature_subsample_fraction"); it != j.end() && !it->is_null()) {
    p.feature_subsample_fraction = it->get<double>();
  }
  p.n_boost_rounds = j.value("n_boost_rounds", d.n_boost_rounds);
  p.bootstrap = j.value("bootstrap", d.bootstrap);
  p.class_weighting = j.value("class_weighting", d.class_weighting);
  p.svc_lambda = j.value("svc_lambda", d.svc_lambda);
  p.svc_epochs = j.value("svc_epochs", d.svc_epochs);
  p.seed = j.value("seed", d.seed);
}

namespace {

using RowIndex = std::uint32_t;
using SortedColumns = std::vector<std::vector<RowIndex>>;

void check_training_set(const Dataset& data) {
  if (data.n_rows() == 0) throw Error(ErrorCode::kInvalidArgument, "empty training set");
  if (data.n_rows() > std::numeric_limits<RowIndex>::max()) {
    throw Error(ErrorCode::kInvalidArgument, "training set too large");
  }
  for (int y : data.y) {
    if (y < 0 || y >= static_cast<int>(kNumClasses)) {
      throw Error(ErrorCode::kInvalidArgument, "label out of range");
    }
  }
  for (double v : data.x.values()) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "non-finite feature value");
  }
}

SortedColumns presort(const Matrix& x) {
  SortedColumns sorted(x.cols());
  for (std::size_t f = 0; f < x.cols(); ++f) {
    auto& idx = sorted[f];
    idx.resize(x.rows());
    std::iota(idx.begin(), idx.end(), RowIndex{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](RowIndex a, RowIndex b) { return x(a, f) < x(b, f); });
  }
  return sorted;
}

std::array<double, kNumClasses> class_weights(const Dataset& data, bool enabled) {
  std::array<double, kNumClasses> w{1.0, 1.0, 1.0};
  if (!enabled) return w;
  std::array<double, kNumClasses> counts{};
  for (int y : data.y) counts[y] += 1.0;
  std::size_t present = 0;
  for (double c : counts) present += c > 0 ? 1 : 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    w[c] = counts[c] > 0 ? static_cast<double>(data.n_rows()) /
                               (static_cast<double>(present) * counts[c])
                         : 0.0;
  }
  return w;
}

// Gini split criterion over (possibly weighted, possibly repeated) rows.
struct GiniCriterion {
  struct Stats {
    std::array<double, kNumClasses> w{};
    double count = 0.0;
  };

  const std::vector<int>& y;
  const std::vector<double>& multiplicity;
  std::array<double, kNumClasses> class_weight;

  void add(Stats& s, RowIndex i) const {
    s.w[y[i]] += multiplicity[i] * class_weight[y[i]];
    s.count += multiplicity[i];
  }
  static Stats diff(const Stats& a, const Stats& b) {
    Stats s;
    for (std::size_t c = 0; c < kNumClasses; ++c) s.w[c] = a.w[c] - b.w[c];
    s.count = a.count - b.count;
    return s;
  }
  // Sum of w_c^2 / W: the parent-independent part of the weighted Gini decrease.
  static double score(const Stats& s) {
    double total = 0.0, sq = 0.0;
    for (double v : s.w) {
      total += v;
      sq += v * v;
    }
    return total > 0.0 ? sq / total : 0.0;
  }
  static bool splittable(const Stats& s) {
    int present = 0;
    for (double v : s.w) present += v > 0.0 ? 1 : 0;
    return present > 1;
  }
  // Zero-gain splits are taken on impure nodes (as in CART), which lets a
  // depth-2 tree solve XOR.
  static constexpr double kMinGain = -1e-12;
  std::vector<double> leaf(const Stats& s) const {
    double total = 0.0;
    for (double v : s.w) total += v;
    std::vector<double> p(kNumClasses, 0.0);
    for (std::size_t c = 0; c < kNumClasses; ++c) p[c] = s.w[c] / total;
    return p;
  }
};

// Second-order regression criterion for one class of a softmax booster.
struct NewtonCriterion {
  struct Stats {
    double g = 0.0;
    double h = 0.0;
    double count = 0.0;
  };

  const std::vector<double>& grad;
  const std::vector<double>& hess;
  double lambda;
  double learning_rate;
  std::size_t target_class;

  void add(Stats& s, RowIndex i) const {
    s.g += grad[i];
    s.h += hess[i];
    s.count += 1.0;
  }
  static Stats diff(const Stats& a, const Stats& b) {
    return {a.g - b.g, a.h - b.h, a.count - b.count};
  }
  double score(const Stats& s) const {
    const double denom = s.h + lambda;
    return denom > 0.0 ? s.g * s.g / denom : 0.0;
  }
  static bool splittable(const Stats&) { return true; }
  static constexpr double kMinGain = 1e-12;
  std::vector<double> leaf(const Stats& s) const {
    std::vector<double> v(kNumClasses, 0.0);
    const double denom = s.h + lambda;
    v[target_class] = denom > 0.0 ? -s.g / denom * learning_rate : 0.0;
    return v;
  }
};

struct GrowOptions {
  std::size_t max_depth = 0;
  std::size_t min_samples_leaf = 1;
  std::size_t features_per_split = 0;  // 0 or >= d: all features
  std::uint64_t seed = 0;
};

// Level-wise exact greedy growth. `sorted` holds, per feature, the rows that
// take part in this tree ordered by feature value; it is consumed.
template <typename Criterion>
TreeModel grow_tree(const Matrix& x, SortedColumns sorted, const Criterion& crit,
                    const GrowOptions& opt) {
  using Stats = typename Criterion::Stats;
  const std::size_t d = x.cols();
  const std::size_t n = x.rows();
  const double min_leaf = static_cast<double>(opt.min_samples_leaf);
  const bool subsample = opt.features_per_split > 0 && opt.features_per_split < d;
  Rng rng(opt.seed);

  std::vector<TreeNode> nodes(1);
  std::vector<Stats> stats(1);
  std::vector<std::int32_t> row_node(n, -1);
  for (RowIndex i : sorted.empty() ? std::vector<RowIndex>{} : sorted[0]) {
    row_node[i] = 0;
    crit.add(stats[0], i);
  }
  nodes[0].cover = stats[0].count;

  auto can_split = [&](const Stats& s) {
    return s.count >= 2 * min_leaf && Criterion::splittable(s);
  };
  auto make_leaf = [&](std::size_t id) {
    nodes[id].feature = TreeNode::kLeaf;
    nodes[id].scores = crit.leaf(stats[id]);
  };

  std::vector<std::size_t> frontier;
  if (d > 0 && can_split(stats[0])) {
    frontier.push_back(0);
  } else {
    make_leaf(0);
  }

  struct Best {
    double gain = -std::numeric_limits<double>::infinity();
    std::int32_t feature = -1;
    double threshold = 0.0;
    Stats left;
  };

  std::vector<std::int32_t> slot_of;  // node id -> frontier slot
  std::vector<std::size_t> feature_pool(d);
  std::size_t depth = 0;
  while (!frontier.empty()) {
    if (opt.max_depth != 0 && depth >= opt.max_depth) {
      for (std::size_t id : frontier) make_leaf(id);
      break;
    }
    const std::size_t k = frontier.size();
    slot_of.assign(nodes.size(), -1);
    for (std::size_t s = 0; s < k; ++s) slot_of[frontier[s]] = static_cast<std::int32_t>(s);

    std::vector<char> allowed(k * d, 1);
    if (subsample) {
      std::fill(allowed.begin(), allowed.end(), 0);
      for (std::size_t s = 0; s < k; ++s) {
        std::iota(feature_pool.begin(), feature_pool.end(), std::size_t{0});
        for (std::size_t j = 0; j < opt.features_per_split; ++j) {
          std::swap(feature_pool[j], feature_pool[j + rng.below(d - j)]);
          allowed[s * d + feature_pool[j]] = 1;
        }
      }
    }

    std::vector<Best> best(k);
    std::vector<Stats> left(k);
    std::vector<double> last(k);
    std::vector<char> seen(k);
    for (std::size_t f = 0; f < d; ++f) {
      std::fill(left.begin(), left.end(), Stats{});
      std::fill(seen.begin(), seen.end(), 0);
      for (RowIndex i : sorted[f]) {
        const auto s = static_cast<std::size_t>(slot_of[row_node[i]]);
        if (!allowed[s * d + f]) continue;
        const double v = x(i, f);
        if (seen[s] && v > last[s]) {
          const Stats& total = stats[frontier[s]];
          const Stats& l = left[s];
          if (l.count >= min_leaf && total.count - l.count >= min_leaf) {
            const Stats r = Criterion::diff(total, l);
            const double gain = crit.score(l) + crit.score(r) - crit.score(total);
            if (gain > best[s].gain) {
              double mid = 0.5 * (last[s] + v);
              if (!(mid > last[s])) mid = v;
              best[s] = {gain, static_cast<std::int32_t>(f), mid, l};
            }
          }
        }
        crit.add(left[s], i);
        last[s] = v;
        seen[s] = 1;
      }
    }

    std::vector<std::size_t> next;
    for (std::size_t s = 0; s < k; ++s) {
      const std::size_t id = frontier[s];
      if (best[s].feature < 0 || !(best[s].gain > Criterion::kMinGain)) {
        make_leaf(id);
        continue;
      }
      const auto l = static_cast<std::int32_t>(nodes.size());
      nodes[id].feature = best[s].feature;
      nodes[id].threshold = best[s].threshold;
      nodes[id].left = l;
      nodes[id].right = l + 1;
      const Stats lstats = best[s].left;
      const Stats rstats = Criterion::diff(stats[id], lstats);
      nodes.emplace_back();
      nodes.emplace_back();
      nodes[l].cover = lstats.count;
      nodes[l + 1].cover = rstats.count;
      stats.push_back(lstats);
      stats.push_back(rstats);
      for (std::int32_t child : {l, l + 1}) {
        if (can_split(stats[child])) {
          next.push_back(static_cast<std::size_t>(child));
        } else {
          make_leaf(static_cast<std::size_t>(child));
        }
      }
    }

    std::vector<char> open(nodes.size(), 0);
    for (std::size_t id : next) open[id] = 1;
    for (RowIndex i : sorted[0]) {
      const auto& node = nodes[row_node[i]];
      std::int32_t dest = row_node[i];
      if (!node.is_leaf()) dest = x(i, node.feature) < node.threshold ? node.left : node.right;
      row_node[i] = open[dest] ? dest : -1;
    }
    // rows resting in a finished leaf drop out of every later scan
    for (auto& col : sorted) {
      std::erase_if(col, [&](RowIndex i) { return row_node[i] < 0; });
    }
    frontier = std::move(next);
    ++depth;
  }
  return TreeModel(std::move(nodes), d, kNumClasses);
}

SortedColumns rows_with_weight(const SortedColumns& all, const std::vector<double>& mult) {
  SortedColumns out(all.size());
  for (std::size_t f = 0; f < all.size(); ++f) {
    out[f].reserve(all[f].size());
    for (RowIndex i : all[f]) {
      if (mult[i] > 0.0) out[f].push_back(i);
    }
  }
  return out;
}

std::size_t features_per_split(const TrainParams& p, std::size_t d) {
  if (d == 0) return 0;
  if (!p.feature_subsample_fraction) {
    std::size_t m = 1;
    while (m * m < d) ++m;
    return m;
  }
  const double q = *p.feature_subsample_fraction * static_cast<double>(d);
  auto m = static_cast<std::size_t>(std::ceil(q - 1e-9));
  return std::clamp<std::size_t>(m, 1, d);
}

TreeModel grow_cart(const Dataset& data, const SortedColumns& sorted,
                    const std::vector<double>& mult, const TrainParams& params,
                    std::size_t per_split, std::uint64_t seed) {
  GiniCriterion crit{data.y, mult, class_weights(data, params.class_weighting)};
  GrowOptions opt{params.max_depth, params.min_samples_leaf, per_split, seed};
  return grow_tree(data.x, rows_with_weight(sorted, mult), crit, opt);
}

}  // namespace

TreeModel train_decision_tree(const Dataset& train, const TrainParams& params) {
  params.validate();
  check_training_set(train);
  const std::vector<double> mult(train.n_rows(), 1.0);
  return grow_cart(train, presort(train.x), mult, params, 0, params.seed);
}

EnsembleModel train_random_forest(const Dataset& train, const TrainParams& params) {
  params.validate();
  check_training_set(train);
  const auto sorted = presort(train.x);
  const std::size_t n = train.n_rows();
  const std::size_t per_split = features_per_split(params, train.n_features());

  std::vector<TreeModel> trees(params.n_trees);
  parallel_for(params.n_trees, 0, [&](std::size_t t) {
    const std::uint64_t tree_seed = derive_seed(params.seed, t);
    std::vector<double> mult(n, 1.0);
    if (params.bootstrap) {
      std::fill(mult.begin(), mult.end(), 0.0);
      Rng rng(derive_seed(tree_seed, 0xb007));
      for (std::size_t k = 0; k < n; ++k) mult[rng.below(n)] += 1.0;
    }
    trees[t] = grow_cart(train, sorted, mult, params, per_split, tree_seed);
  });
  return EnsembleModel(EnsembleKind::kRandomForest, std::move(trees),
                       std::vector<double>(kNumClasses, 0.0), 0.0, train.n_features());
}

namespace {

void softmax_inplace(std::span<double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double& e : v) {
    e = std::exp(e - m);
    sum += e;
  }
  for (double& e : v) e /= sum;
}

double mean_cross_entropy(const Matrix& margins, const std::vector<int>& y) {
  double total = 0.0;
  std::array<double, kNumClasses> p{};
  for (std::size_t i = 0; i < margins.rows(); ++i) {
    auto row = margins.row(i);
    std::copy(row.begin(), row.end(), p.begin());
    const double m = *std::max_element(p.begin(), p.end());
    double sum = 0.0;
    for (double v : p) sum += std::exp(v - m);
    total += std::log(sum) + m - p[y[i]];
  }
  return total / static_cast<double>(margins.rows());
}

}  // namespace

EnsembleModel train_gbt(const Dataset& train, const TrainParams& params, BoostTrace* trace) {
  params.validate();
  check_training_set(train);
  const std::size_t n = train.n_rows();

  std::array<double, kNumClasses> counts{};
  for (int y : train.y) counts[y] += 1.0;
  if (std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0; }) < 2) {
    throw Error(ErrorCode::kInvalidArgument, "boosting needs at least two classes present");
  }
  // absent classes get a finite floor so margins stay finite
  std::vector<double> base(kNumClasses);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    base[c] = std::log(std::max(counts[c] / static_cast<double>(n), 1e-12));
  }

  const auto weights = class_weights(train, params.class_weighting);
  const auto sorted = presort(train.x);
  Matrix margins(n, kNumClasses);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(base.begin(), base.end(), margins.row(i).begin());
  }
  if (trace) trace->train_loss.clear();

  std::vector<TreeModel> trees;
  trees.reserve(params.n_boost_rounds * kNumClasses);
  Matrix prob(n, kNumClasses);
  std::array<std::vector<double>, kNumClasses> grad, hess;
  for (auto& g : grad) g.resize(n);
  for (auto& h : hess) h.resize(n);

  for (std::size_t round = 0; round < params.n_boost_rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      auto p = prob.row(i);
      auto m = margins.row(i);
      std::copy(m.begin(), m.end(), p.begin());
      softmax_inplace(p);
      const double w = weights[train.y[i]];
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        const double target = static_cast<int>(c) == train.y[i] ? 1.0 : 0.0;
        grad[c][i] = w * (p[c] - target);
        hess[c][i] = w * p[c] * (1.0 - p[c]);
      }
    }
    std::array<TreeModel, kNumClasses> round_trees;
    parallel_for(kNumClasses, 0, [&](std::size_t c) {
      NewtonCriterion crit{grad[c], hess[c], params.l2_leaf_regularization,
                           params.learning_rate, c};
      GrowOptions opt{params.max_depth, params.min_samples_leaf, 0, 0};
      round_trees[c] = grow_tree(train.x, sorted, crit, opt);
    });
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      for (std::size_t i = 0; i < n; ++i) {
        margins(i, c) += round_trees[c].leaf_scores(train.x.row(i))[c];
      }
      trees.push_back(std::move(round_trees[c]));
    }
    if (trace) trace->train_loss.push_back(mean_cross_entropy(margins, train.y));
  }
  return EnsembleModel(EnsembleKind::kGradientBoosted, std::move(trees), std::move(base),
                       params.learning_rate, train.n_features());
}

LinearModel train_linear_svc(const Dataset& train, const TrainParams& params) {
  params.validate();
  check_training_set(train);
  const std::size_t n = train.n_rows();
  const std::size_t d = train.n_features();
  const double lambda = params.svc_lambda;
  const auto weights = class_weights(train, params.class_weighting);

  LinearModel model;
  model.weights.assign(kNumClasses, std::vector<double>(d, 0.0));
  model.bias.assign(kNumClasses, 0.0);
  std::vector<std::size_t> order(n);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    // the bias is the weight of a constant-1 input, regularized with the rest
    std::vector<double> w(d + 1, 0.0);
    double scale = 1.0;  // w_true = scale * w, keeps the shrink step O(1)
    Rng rng(derive_seed(params.seed, c));
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t t = 0;
    for (std::size_t epoch = 0; epoch < params.svc_epochs; ++epoch) {
      rng.shuffle(std::span<std::size_t>(order));
      for (std::size_t i : order) {
        ++t;
        const double eta = 1.0 / (lambda * static_cast<double>(t));
        const auto xi = train.x.row(i);
        const double yi = train.y[i] == static_cast<int>(c) ? 1.0 : -1.0;
        double dot = w[d];
        for (std::size_t f = 0; f < d; ++f) dot += w[f] * xi[f];
        const double margin = yi * scale * dot;
        const double shrink = 1.0 - eta * lambda;
        if (shrink <= 0.0) {
          std::fill(w.begin(), w.end(), 0.0);
          scale = 1.0;
        } else {
          scale *= shrink;
        }
        if (margin < 1.0) {
          const double step = eta * yi * weights[train.y[i]] / scale;
          for (std::size_t f = 0; f < d; ++f) w[f] += step * xi[f];
          w[d] += step;
        }
        if (scale < 1e-9) {
          for (double& v : w) v *= scale;
          scale = 1.0;
        }
      }
    }
    for (std::size_t f = 0; f < d; ++f) model.weights[c][f] = scale * w[f];
    model.bias[c] = scale * w[d];
  }
  return model;
}

AnyModel train_model(ModelKind kind, const Dataset& train, const TrainParams& params) {
  switch (kind) {
    case ModelKind::kDecisionTree:
      return train_decision_tree(train, params);
    case ModelKind::kRandomForest:
      return train_random_forest(train, params);
    case ModelKind::kGradientBoosted:
      return train_gbt(train, params);
    case ModelKind::kLinearSvc:
      return train_linear_svc(train, params);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown model kind");
}

double cross_entropy(const EnsembleModel& model, const Dataset& data) {
  Matrix margins(data.n_rows(), model.class_count());
  for (std::size_t i = 0; i < data.n_rows(); ++i) {
    auto m = predict_margin(model, data.x.row(i));
    std::copy(m.begin(), m.end(), margins.row(i).begin());
  }
  return mean_cross_entropy(margins, data.y);
}

}  // namespace xids
