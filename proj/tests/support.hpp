#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "xids/model.hpp"
#include "xids/rng.hpp"
#include "xids/table.hpp"

namespace xids::testing {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("xids-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

/// Random tree over `features` (only the first `used` are split on), depth
/// at most `max_depth`, random positive integer covers and random scores.
/// Children are appended after their parent, as the model requires.
inline TreeModel random_tree(Rng& rng, std::size_t max_depth, std::size_t features,
                             std::size_t used, std::size_t classes) {
  std::vector<TreeNode> nodes;
  struct Pending {
    std::size_t index;
    std::size_t depth;
  };
  auto leaf_scores = [&] {
    std::vector<double> s(classes);
    for (auto& v : s) v = rng.uniform() * 4.0 - 2.0;
    return s;
  };
  // covers are split top-down so parent == left + right exactly
  nodes.push_back({});
  nodes[0].cover = static_cast<double>(40 + rng.below(200));
  std::vector<Pending> stack{{0, 0}};
  while (!stack.empty()) {
    const auto [i, depth] = stack.back();
    stack.pop_back();
    const double cover = nodes[i].cover;
    const bool split = depth < max_depth && cover >= 2 && (depth == 0 || rng.uniform() < 0.8);
    if (!split) {
      nodes[i].scores = leaf_scores();
      continue;
    }
    nodes[i].feature = static_cast<std::int32_t>(rng.below(used));
    nodes[i].threshold = std::round((rng.uniform() * 2.0 - 1.0) * 8.0) / 8.0;
    const double left_cover = 1.0 + static_cast<double>(rng.below(static_cast<std::uint64_t>(cover) - 1));
    TreeNode l, r;
    l.cover = left_cover;
    r.cover = cover - left_cover;
    nodes[i].left = static_cast<std::int32_t>(nodes.size());
    nodes.push_back(l);
    nodes[i].right = static_cast<std::int32_t>(nodes.size());
    nodes.push_back(r);
    stack.push_back({static_cast<std::size_t>(nodes[i].right), depth + 1});
    stack.push_back({static_cast<std::size_t>(nodes[i].left), depth + 1});
  }
  return TreeModel(std::move(nodes), features, classes);
}

/// Input vector whose coordinates land on both sides of the thresholds
/// random_tree draws, including exact ties.
inline std::vector<double> random_input(Rng& rng, std::size_t features) {
  std::vector<double> x(features);
  for (auto& v : x) {
    v = rng.uniform() < 0.1 ? std::round((rng.uniform() * 2.0 - 1.0) * 8.0) / 8.0
                            : rng.uniform() * 2.4 - 1.2;
  }
  return x;
}

inline Dataset make_dataset(std::vector<std::vector<double>> rows, std::vector<int> y) {
  Dataset d;
  const std::size_t cols = rows.empty() ? 0 : rows[0].size();
  d.x = Matrix(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) d.x(r, c) = rows[r][c];
  }
  for (std::size_t c = 0; c < cols; ++c) d.feature_names.push_back("f" + std::to_string(c));
  d.y = std::move(y);
  return d;
}

}  // namespace xids::testing
