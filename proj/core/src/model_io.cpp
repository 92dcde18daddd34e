#include "xids/model_io.hpp"

#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "xids/error.hpp"

namespace xids {

using nlohmann::json;

namespace {

json nodes_to_json(const TreeModel& tree) {
  json nodes = json::array();
  for (const auto& n : tree.nodes()) {
    if (n.is_leaf()) {
      nodes.push_back({{"cover", n.cover}, {"scores", n.scores}});
    } else {
      nodes.push_back({{"feature", n.feature},
                       {"threshold", n.threshold},
                       {"left", n.left},
                       {"right", n.right},
                       {"cover", n.cover}});
    }
  }
  return nodes;
}

TreeModel tree_from_json(const json& nodes, std::size_t features, std::size_t classes) {
  std::vector<TreeNode> out;
  out.reserve(nodes.size());
  for (const auto& item : nodes) {
    TreeNode n;
    n.cover = item.at("cover").get<double>();
    if (item.contains("scores")) {
      n.scores = item.at("scores").get<std::vector<double>>();
    } else {
      n.feature = item.at("feature").get<std::int32_t>();
      n.threshold = item.at("threshold").get<double>();
      n.left = item.at("left").get<std::int32_t>();
      n.right = item.at("right").get<std::int32_t>();
    }
    out.push_back(std::move(n));
  }
  return TreeModel(std::move(out), features, classes);
}

std::string_view kind_name(EnsembleKind k) {
  return k == EnsembleKind::kRandomForest ? "random_forest" : "gradient_boosted";
}

}  // namespace

json model_to_json(const AnyModel& model) {
  json doc = {{"format", "xids-model"}, {"version", kModelFormatVersion}};
  if (const auto* tree = std::get_if<TreeModel>(&model)) {
    doc["type"] = "tree";
    doc["feature_count"] = tree->feature_count();
    doc["class_count"] = tree->class_count();
    doc["nodes"] = nodes_to_json(*tree);
  } else if (const auto* ens = std::get_if<EnsembleModel>(&model)) {
    doc["type"] = "ensemble";
    doc["kind"] = std::string(kind_name(ens->kind()));
    doc["feature_count"] = ens->feature_count();
    doc["class_count"] = ens->class_count();
    doc["base_scores"] = ens->base_scores();
    doc["learning_rate"] = ens->learning_rate();
    json trees = json::array();
    for (const auto& t : ens->trees()) trees.push_back({{"nodes", nodes_to_json(t)}});
    doc["trees"] = std::move(trees);
  } else {
    const auto& lin = std::get<LinearModel>(model);
    doc["type"] = "linear";
    doc["feature_count"] = lin.feature_count();
    doc["class_count"] = lin.class_count();
    doc["weights"] = lin.weights;
    doc["bias"] = lin.bias;
  }
  return doc;
}

AnyModel model_from_json(const json& doc) {
  try {
    if (doc.value("format", "") != "xids-model") {
      throw Error(ErrorCode::kParse, "not an xids model document");
    }
    const int version = doc.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw Error(ErrorCode::kVersion,
                  fmt::format("model format version {} is not supported (expected {})", version,
                              kModelFormatVersion));
    }
    const auto type = doc.at("type").get<std::string>();
    const auto features = doc.at("feature_count").get<std::size_t>();
    const auto classes = doc.at("class_count").get<std::size_t>();
    if (type == "tree") return tree_from_json(doc.at("nodes"), features, classes);
    if (type == "ensemble") {
      const auto kind_text = doc.at("kind").get<std::string>();
      EnsembleKind kind;
      if (kind_text == "random_forest") {
        kind = EnsembleKind::kRandomForest;
      } else if (kind_text == "gradient_boosted") {
        kind = EnsembleKind::kGradientBoosted;
      } else {
        throw Error(ErrorCode::kParse, "unknown ensemble kind: " + kind_text);
      }
      std::vector<TreeModel> trees;
      for (const auto& t : doc.at("trees")) {
        trees.push_back(tree_from_json(t.at("nodes"), features, classes));
      }
      auto base = doc.at("base_scores").get<std::vector<double>>();
      if (base.size() != classes) throw Error(ErrorCode::kInvalidModel, "base score count");
      return EnsembleModel(kind, std::move(trees), std::move(base),
                           doc.at("learning_rate").get<double>(), features);
    }
    if (type == "linear") {
      LinearModel lin;
      lin.weights = doc.at("weights").get<std::vector<std::vector<double>>>();
      lin.bias = doc.at("bias").get<std::vector<double>>();
      if (lin.weights.size() != classes || lin.bias.size() != classes) {
        throw Error(ErrorCode::kInvalidModel, "linear model class count mismatch");
      }
      for (const auto& w : lin.weights) {
        if (w.size() != features) throw Error(ErrorCode::kInvalidModel, "weight length");
      }
      return lin;
    }
    throw Error(ErrorCode::kParse, "unknown model type: " + type);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed model document: ") + e.what());
  }
}

void save_model(const AnyModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write model file: " + path);
  out << model_to_json(model).dump() << '\n';
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path);
}

AnyModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open model file: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, "cannot parse model file " + path + ": " + e.what());
  }
  return model_from_json(doc);
}

}  // namespace xids
