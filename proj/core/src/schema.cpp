#include "xids/schema.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "xids/error.hpp"

namespace xids {

FeatureSchema::FeatureSchema(std::vector<FeatureSpec> features, std::string label_column)
    : features_(std::move(features)), label_column_(std::move(label_column)) {
  std::set<std::string> seen;
  for (const auto& f : features_) {
    if (f.name.empty()) throw Error(ErrorCode::kSchema, "empty feature name");
    if (!seen.insert(f.name).second) {
      throw Error(ErrorCode::kSchema, "duplicate feature name: " + f.name);
    }
  }
  if (label_column_.empty()) throw Error(ErrorCode::kSchema, "empty label column name");
  if (seen.count(label_column_) != 0) {
    throw Error(ErrorCode::kSchema, "label column is also a feature: " + label_column_);
  }
}

std::optional<std::size_t> FeatureSchema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].name == name) return i;
  }
  return std::nullopt;
}

std::vector<std::string> FeatureSchema::names() const {
  std::vector<std::string> out;
  out.reserve(features_.size());
  for (const auto& f : features_) out.push_back(f.name);
  return out;
}

FeatureSchema FeatureSchema::without(const std::vector<std::string>& names) const {
  std::vector<FeatureSpec> kept;
  for (const auto& f : features_) {
    if (std::find(names.begin(), names.end(), f.name) == names.end()) kept.push_back(f);
  }
  return FeatureSchema(std::move(kept), label_column_);
}

FeatureSchema FeatureSchema::as_numeric() const {
  auto copy = features_;
  for (auto& f : copy) f.dtype = Dtype::kNumeric;
  return FeatureSchema(std::move(copy), label_column_);
}

const FeatureSchema& ehms_schema() {
  static const FeatureSchema schema = [] {
    using K = FeatureKind;
    using D = Dtype;
    std::vector<FeatureSpec> f;
    auto net = [&f](const char* name, D dtype = D::kNumeric) {
      f.push_back({name, K::kNetwork, dtype});
    };
    auto bio = [&f](const char* name) { f.push_back({name, K::kBiomedical, D::kNumeric}); };

    net("Dir", D::kCategorical);
    net("Flgs", D::kCategorical);
    net("SrcAddr", D::kCategorical);
    net("DstAddr", D::kCategorical);
    net("Sport");
    net("Dport");
    for (const char* name :
         {"SrcBytes", "DstBytes", "SrcLoad", "DstLoad", "SrcGap", "DstGap", "SIntPkt",
          "DIntPkt", "SIntPktAct", "DIntPktAct", "SrcJitter", "DstJitter", "sMaxPktSz",
          "dMaxPktSz", "sMinPktSz", "dMinPktSz", "Dur", "Trans", "TotPkts", "TotBytes",
          "Load", "Loss", "pLoss", "pSrcLoss", "pDstLoss", "Rate"}) {
      net(name);
    }
    net("SrcMac", D::kCategorical);
    net("DstMac", D::kCategorical);
    net("Packet_num");
    for (const char* name :
         {"Temp", "SpO2", "Pulse_Rate", "SYS", "DIA", "Heart_rate", "Resp_Rate", "ST"}) {
      bio(name);
    }
    net("Label");
    return FeatureSchema(std::move(f), "Attack Category");
  }();
  return schema;
}

const std::vector<std::string>& ehms_dropped_columns() {
  static const std::vector<std::string> cols = {"SrcMac", "Label", "Dir", "Flgs"};
  return cols;
}

std::string_view to_string(FeatureKind kind) {
  return kind == FeatureKind::kNetwork ? "network" : "biomedical";
}

std::string_view to_string(Dtype dtype) {
  return dtype == Dtype::kNumeric ? "numeric" : "categorical";
}

void to_json(nlohmann::json& j, const FeatureSchema& schema) {
  auto features = nlohmann::json::array();
  for (const auto& f : schema.features()) {
    features.push_back({{"name", f.name},
                        {"kind", std::string(to_string(f.kind))},
                        {"dtype", std::string(to_string(f.dtype))}});
  }
  j = {{"features", features}, {"label_column", schema.label_column()}};
}

void from_json(const nlohmann::json& j, FeatureSchema& schema) {
  std::vector<FeatureSpec> features;
  for (const auto& item : j.at("features")) {
    FeatureSpec spec;
    spec.name = item.at("name").get<std::string>();
    const auto kind = item.at("kind").get<std::string>();
    const auto dtype = item.at("dtype").get<std::string>();
    if (kind == "network") {
      spec.kind = FeatureKind::kNetwork;
    } else if (kind == "biomedical") {
      spec.kind = FeatureKind::kBiomedical;
    } else {
      throw Error(ErrorCode::kSchema, "unknown feature kind: " + kind);
    }
    if (dtype == "numeric") {
      spec.dtype = Dtype::kNumeric;
    } else if (dtype == "categorical") {
      spec.dtype = Dtype::kCategorical;
    } else {
      throw Error(ErrorCode::kSchema, "unknown dtype: " + dtype);
    }
    features.push_back(std::move(spec));
  }
  schema = FeatureSchema(std::move(features), j.at("label_column").get<std::string>());
}

FeatureSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open schema file: " + path);
  try {
    return nlohmann::json::parse(in).get<FeatureSchema>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, "malformed schema file " + path + ": " + e.what());
  }
}

void save_schema(const FeatureSchema& schema, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write schema file: " + path);
  out << nlohmann::json(schema).dump(2) << '\n';
}

}  // namespace xids
