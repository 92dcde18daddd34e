#include <cmath>

#include <benchmark/benchmark.h>

#include "xids/rng.hpp"
#include "xids/shapley.hpp"

namespace {

using namespace xids;

// Complete tree of the given depth splitting on features round-robin.
TreeModel full_tree(std::size_t depth, std::size_t features, Rng& rng) {
  std::vector<TreeNode> nodes(1);
  nodes[0].cover = std::ldexp(1.0, static_cast<int>(depth)) * 10.0;
  std::vector<std::pair<std::size_t, std::size_t>> frontier{{0, 0}};
  for (std::size_t i = 0; i < frontier.size(); ++i) {
    const auto [node, d] = frontier[i];
    if (d == depth) {
      nodes[node].scores = {rng.uniform(), rng.uniform(), rng.uniform()};
      continue;
    }
    nodes[node].feature = static_cast<std::int32_t>((node + d) % features);
    nodes[node].threshold = rng.uniform() - 0.5;
    const double half = nodes[node].cover / 2.0;
    nodes[node].left = static_cast<std::int32_t>(nodes.size());
    nodes.push_back({TreeNode::kLeaf, 0, -1, -1, half, {}});
    nodes[node].right = static_cast<std::int32_t>(nodes.size());
    nodes.push_back({TreeNode::kLeaf, 0, -1, -1, half, {}});
    frontier.push_back({static_cast<std::size_t>(nodes[node].left), d + 1});
    frontier.push_back({static_cast<std::size_t>(nodes[node].right), d + 1});
  }
  return TreeModel(std::move(nodes), features, 3);
}

std::vector<double> input(std::size_t features, Rng& rng) {
  std::vector<double> x(features);
  for (auto& v : x) v = rng.uniform() - 0.5;
  return x;
}

void BM_TreeShap(benchmark::State& state) {
  Rng rng(1);
  const auto used = static_cast<std::size_t>(state.range(0));
  const auto tree = full_tree(6, used, rng);
  const auto x = input(used, rng);
  for (auto _ : state) benchmark::DoNotOptimize(tree_shap_sample(tree, x));
}
BENCHMARK(BM_TreeShap)->Arg(4)->Arg(8)->Arg(12);

void BM_BruteForce(benchmark::State& state) {
  Rng rng(1);
  const auto used = static_cast<std::size_t>(state.range(0));
  const auto tree = full_tree(6, used, rng);
  const auto x = input(used, rng);
  for (auto _ : state) benchmark::DoNotOptimize(brute_force_shap(tree, x));
}
BENCHMARK(BM_BruteForce)->Arg(4)->Arg(8)->Arg(12);

}  // namespace
